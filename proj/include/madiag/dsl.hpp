#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "madiag/diagram.hpp"
#include "madiag/rational.hpp"

namespace madiag {

struct ParseError : std::runtime_error {
  ParseError(const std::string& m, std::size_t position)
      : std::runtime_error(m + " (at position " + std::to_string(position) + ")"),
        pos(position) {}
  std::size_t pos;
};

namespace detail {

class DslParser {
 public:
  explicit DslParser(const std::string& text) : s_(text) {}

  DiagramSum parse() {
    DiagramSum out;
    std::optional<std::string> first_labels;
    skip_ws();
    bool neg = false;
    if (peek() == '-') {
      neg = true;
      ++i_;
    } else if (peek() == '+') {
      ++i_;
    }
    while (true) {
      auto [diag, coeff, lab] = parse_term();
      if (neg) coeff = -coeff;
      if (!first_labels) {
        first_labels = lab;
      } else if (lab != *first_labels) {
        throw ParseError("terms use different free-index sets ('" + lab + "' vs '" +
                             *first_labels + "')",
                         i_);
      }
      out.add(diag, coeff);
      skip_ws();
      if (i_ >= s_.size()) break;
      if (peek() == '+') {
        neg = false;
        ++i_;
      } else if (peek() == '-') {
        neg = true;
        ++i_;
      } else {
        throw ParseError("expected '+' or '-' between terms", i_);
      }
    }
    return out;
  }

 private:
  std::tuple<BasicDiagram, Rational, std::string> parse_term() {
    skip_ws();
    Rational coeff(1);
    std::size_t mark = i_;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      Rational r = parse_rational();
      skip_ws();
      if (peek() == '*') {
        ++i_;
        coeff = r;
      } else {
        throw ParseError("expected '*' after coefficient", i_);
      }
      (void)mark;
    }
    BasicDiagram d;
    // letter -> list of (vertex, slot occurrences); slots only counted
    std::map<char, std::vector<int>> occurrences;  // letter -> vertices touched
    bool first = true;
    while (true) {
      skip_ws();
      VertexKind kind = parse_kind(first);
      first = false;
      d.verts.push_back(kind);
      const int v = static_cast<int>(d.verts.size()) - 1;
      skip_ws();
      expect('(');
      while (true) {
        skip_ws();
        char c = peek();
        if (!std::isalpha(static_cast<unsigned char>(c)))
          throw ParseError("expected an index letter", i_);
        ++i_;
        occurrences[c].push_back(v);
        if (occurrences[c].size() > 2)
          throw ParseError(std::string("index '") + c + "' appears more than twice in a term",
                           i_);
        skip_ws();
        if (peek() == ',') {
          ++i_;
          continue;
        }
        expect(')');
        break;
      }
      skip_ws();
      if (peek() == '*') {
        ++i_;
        continue;
      }
      break;
    }
    std::string leg_labels;
    for (const auto& [letter, vs] : occurrences) {
      if (vs.size() == 2) {
        d.add_edge(vs[0], vs[1]);  // same vertex twice -> loop
      } else {
        d.legs.push_back({vs[0], letter});
        leg_labels.push_back(letter);
      }
    }
    return {d, coeff, leg_labels};
  }

  VertexKind parse_kind(bool first_factor) {
    if (s_.compare(i_, 3, "Phi") == 0) {
      i_ += 3;
      return VertexKind::Phi;
    }
    if (peek() == 'V') {
      ++i_;
      return VertexKind::V;
    }
    if (peek() == 'W') {
      ++i_;
      return VertexKind::W;
    }
    throw ParseError(first_factor ? "expected a factor 'Phi', 'V' or 'W'"
                                  : "expected 'Phi', 'V' or 'W' after '*'",
                     i_);
  }

  Rational parse_rational() {
    BigInt num = parse_integer();
    skip_ws();
    if (peek() == '/') {
      ++i_;
      skip_ws();
      BigInt den = parse_integer();
      if (den <= 0) throw ParseError("denominator must be positive", i_);
      return Rational(num, den);
    }
    return Rational(num, 1);
  }

  BigInt parse_integer() {
    std::size_t start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (start == i_) throw ParseError("expected an integer", i_);
    return BigInt(s_.substr(start, i_ - start));
  }

  void expect(char c) {
    if (peek() != c) throw ParseError(std::string("expected '") + c + "'", i_);
    ++i_;
  }

  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  const std::string& s_;
  std::size_t i_ = 0;
};

}  // namespace detail

/// Parse the textual index DSL into a DiagramSum. Repeated index letters
/// within a term become internal edges, singletons become labeled legs.
inline DiagramSum parse_diagrams(const std::string& text) {
  return detail::DslParser(text).parse();
}

namespace detail {

/// Assign display letters: legs keep their labels (or get i,j,k,... in
/// canonical order when unlabeled), internal edges get letters from a,b,c,...
/// skipping anything already taken.
inline std::string render_term(const BasicDiagram& d) {
  std::string taken;
  for (const auto& l : d.legs)
    if (l.label != '\0') taken.push_back(l.label);
  const std::string leg_pool = "ijklmnopqrstuvwxyz";
  const std::string edge_pool = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";

  std::vector<char> leg_letter(d.legs.size());
  std::size_t lp = 0;
  for (std::size_t i = 0; i < d.legs.size(); ++i) {
    if (d.legs[i].label != '\0') {
      leg_letter[i] = d.legs[i].label;
      continue;
    }
    while (lp < leg_pool.size() && taken.find(leg_pool[lp]) != std::string::npos) ++lp;
    if (lp >= leg_pool.size()) throw RewriteError("render: too many legs");
    leg_letter[i] = leg_pool[lp];
    taken.push_back(leg_pool[lp]);
  }
  std::vector<char> edge_letter(d.edges.size());
  std::size_t ep = 0;
  for (std::size_t i = 0; i < d.edges.size(); ++i) {
    while (ep < edge_pool.size() && taken.find(edge_pool[ep]) != std::string::npos) ++ep;
    if (ep >= edge_pool.size()) throw RewriteError("render: too many edges");
    edge_letter[i] = edge_pool[ep];
    taken.push_back(edge_pool[ep]);
  }

  std::ostringstream os;
  for (int v = 0; v < static_cast<int>(d.verts.size()); ++v) {
    if (v > 0) os << '*';
    switch (d.verts[static_cast<std::size_t>(v)]) {
      case VertexKind::Phi: os << "Phi"; break;
      case VertexKind::V: os << 'V'; break;
      case VertexKind::W: os << 'W'; break;
    }
    os << '(';
    bool firstslot = true;
    for (std::size_t e = 0; e < d.edges.size(); ++e) {
      int mult = (d.edges[e].first == v ? 1 : 0) + (d.edges[e].second == v ? 1 : 0);
      for (int m = 0; m < mult; ++m) {
        if (!firstslot) os << ',';
        os << edge_letter[e];
        firstslot = false;
      }
    }
    for (std::size_t l = 0; l < d.legs.size(); ++l) {
      if (d.legs[l].v != v) continue;
      if (!firstslot) os << ',';
      os << leg_letter[l];
      firstslot = false;
    }
    os << ')';
  }
  return os.str();
}

}  // namespace detail

/// Render a DiagramSum in the DSL. Diagrams carrying dimension-scalar factors
/// are printed with an "n^k*" prefix, which is display-only (the grammar has
/// no symbol for n). An empty sum renders as "0".
inline std::string render_diagrams(const DiagramSum& s) {
  if (s.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [key, term] : s.terms()) {
    (void)key;
    const Rational& c = term.coeff;
    const bool neg = c < Rational(0);
    Rational mag = neg ? -c : c;
    if (first) {
      if (neg) os << "-";
      first = false;
    } else {
      os << (neg ? " - " : " + ");
    }
    std::string body;
    if (term.diagram.n_power > 0) {
      body += "n";
      if (term.diagram.n_power > 1) body += "^" + std::to_string(term.diagram.n_power);
      if (!term.diagram.verts.empty()) body += "*";
    }
    if (!term.diagram.verts.empty()) body += detail::render_term(term.diagram);
    if (body.empty()) body = "1";  // pure rational scalar (no vertices, no n)
    if (mag == Rational(1) && !term.diagram.verts.empty()) {
      os << body;
    } else if (term.diagram.verts.empty() && term.diagram.n_power == 0) {
      os << mag.str();
    } else {
      os << mag.str() << "*" << body;
    }
  }
  return os.str();
}

/// Graphviz DOT rendering of every diagram in the sum (one subgraph each,
/// coefficient in the cluster label; legs drawn as plaintext leaf nodes).
inline std::string render_dot(const DiagramSum& s, const std::string& name = "diagrams") {
  std::ostringstream os;
  os << "graph " << name << " {\n  node [shape=circle];\n";
  int di = 0;
  for (const auto& [key, term] : s.terms()) {
    (void)key;
    const std::string p = "d" + std::to_string(di);
    os << "  subgraph cluster_" << di << " {\n";
    os << "    label=\"" << term.coeff.str();
    if (term.diagram.n_power > 0) os << " * n^" << term.diagram.n_power;
    os << "\";\n";
    for (int v = 0; v < static_cast<int>(term.diagram.verts.size()); ++v) {
      const char* lbl = term.diagram.verts[static_cast<std::size_t>(v)] == VertexKind::Phi
                            ? "&Phi;"
                            : (term.diagram.verts[static_cast<std::size_t>(v)] == VertexKind::V
                                   ? "V"
                                   : "W");
      os << "    " << p << "v" << v << " [label=\"" << lbl << "\"];\n";
    }
    for (const auto& e : term.diagram.edges)
      os << "    " << p << "v" << e.first << " -- " << p << "v" << e.second << ";\n";
    int li = 0;
    for (const auto& l : term.diagram.legs) {
      os << "    " << p << "l" << li << " [shape=plaintext,label=\""
         << (l.label == '\0' ? '.' : l.label) << "\"];\n";
      os << "    " << p << "v" << l.v << " -- " << p << "l" << li << ";\n";
      ++li;
    }
    os << "  }\n";
    ++di;
  }
  os << "}\n";
  return os.str();
}

}  // namespace madiag
