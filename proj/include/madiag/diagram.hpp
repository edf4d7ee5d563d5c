#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "madiag/rational.hpp"

namespace madiag {

enum class VertexKind : std::uint8_t { Phi = 0, V = 1, W = 2 };

inline char vertex_kind_char(VertexKind k) {
  switch (k) {
    case VertexKind::Phi: return 'P';
    case VertexKind::V: return 'V';
    case VertexKind::W: return 'W';
  }
  return '?';
}

struct RewriteError : std::runtime_error {
  explicit RewriteError(const std::string& m) : std::runtime_error(m) {}
};

/// A labeled multigraph standing for one contracted product of derivative
/// arrays of Phi, V, W. Internal edges contract through the inverse Hessian;
/// external legs are free indices. Loops are edges (v, v). A leg label of
/// '\0' means an unlabeled leg (symmetric mode); otherwise the leg carries a
/// free index letter. `n_power` counts factors of the ambient dimension n
/// picked up by contracting an isolated Phi vertex whose only incidence is a
/// loop.
struct BasicDiagram {
  struct Leg {
    int v = 0;
    char label = '\0';
  };

  std::vector<VertexKind> verts;
  std::vector<std::pair<int, int>> edges;  // unordered; (v, v) is a loop
  std::vector<Leg> legs;
  int n_power = 0;

  int degree(int v) const {
    int d = 0;
    for (const auto& e : edges) {
      if (e.first == v) ++d;
      if (e.second == v) ++d;
    }
    for (const auto& l : legs)
      if (l.v == v) ++d;
    return d;
  }

  int loop_count(int v) const {
    int c = 0;
    for (const auto& e : edges)
      if (e.first == v && e.second == v) ++c;
    return c;
  }

  int leg_count(int v) const {
    int c = 0;
    for (const auto& l : legs)
      if (l.v == v) ++c;
    return c;
  }

  bool fully_unlabeled() const {
    for (const auto& l : legs)
      if (l.label != '\0') return false;
    return true;
  }
  bool fully_labeled() const {
    for (const auto& l : legs)
      if (l.label == '\0') return false;
    return true;
  }

  void add_edge(int a, int b) { edges.emplace_back(std::min(a, b), std::max(a, b)); }

  void remove_vertex(int v) {  // v must already be isolated
    verts.erase(verts.begin() + v);
    for (auto& e : edges) {
      if (e.first > v) --e.first;
      if (e.second > v) --e.second;
    }
    for (auto& l : legs)
      if (l.v > v) --l.v;
  }
};

/// Path-normalization per the two-sided conventions for degree-2 Phi
/// vertices: a degree-2 Phi vertex sitting on a path is contracted away, a
/// Phi vertex whose only incidence is one loop evaluates to the dimension n
/// and is recorded in n_power, a Phi vertex carrying two external legs is the
/// metric tensor and stays. V/W vertices are never contracted.
inline void path_normalize(BasicDiagram& d) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = 0; v < static_cast<int>(d.verts.size()); ++v) {
      if (d.verts[static_cast<std::size_t>(v)] != VertexKind::Phi) continue;
      const int deg = d.degree(v);
      if (deg != 2) continue;
      const int loops = d.loop_count(v);
      if (loops == 1 && d.leg_count(v) == 0) {
        // isolated loop: trace of the metric against its inverse -> n
        for (std::size_t i = 0; i < d.edges.size(); ++i) {
          if (d.edges[i].first == v && d.edges[i].second == v) {
            d.edges.erase(d.edges.begin() + static_cast<std::ptrdiff_t>(i));
            break;
          }
        }
        d.remove_vertex(v);
        ++d.n_power;
        changed = true;
        break;
      }
      // collect the two incidences
      std::vector<std::size_t> inc_edges;
      std::vector<std::size_t> inc_legs;
      for (std::size_t i = 0; i < d.edges.size(); ++i)
        if (d.edges[i].first == v || d.edges[i].second == v) inc_edges.push_back(i);
      for (std::size_t i = 0; i < d.legs.size(); ++i)
        if (d.legs[i].v == v) inc_legs.push_back(i);

      if (inc_edges.size() == 2) {
        int u1 = d.edges[inc_edges[0]].first == v ? d.edges[inc_edges[0]].second
                                                  : d.edges[inc_edges[0]].first;
        int u2 = d.edges[inc_edges[1]].first == v ? d.edges[inc_edges[1]].second
                                                  : d.edges[inc_edges[1]].first;
        d.edges.erase(d.edges.begin() + static_cast<std::ptrdiff_t>(inc_edges[1]));
        d.edges.erase(d.edges.begin() + static_cast<std::ptrdiff_t>(inc_edges[0]));
        d.add_edge(u1, u2);  // u1 == u2 turns into a loop, as it should
        d.remove_vertex(v);
        changed = true;
        break;
      }
      if (inc_edges.size() == 1 && inc_legs.size() == 1) {
        // the metric cancels the inverse metric: leg slides to the neighbour
        int u = d.edges[inc_edges[0]].first == v ? d.edges[inc_edges[0]].second
                                                 : d.edges[inc_edges[0]].first;
        d.legs[inc_legs[0]].v = u;
        d.edges.erase(d.edges.begin() + static_cast<std::ptrdiff_t>(inc_edges[0]));
        d.remove_vertex(v);
        changed = true;
        break;
      }
      // two legs: the metric diagram, keep
    }
  }
}

namespace detail {

// Per-vertex isomorphism invariant.
inline std::string vertex_invariant(const BasicDiagram& d, int v) {
  std::string labels;
  for (const auto& l : d.legs)
    if (l.v == v) labels.push_back(l.label == '\0' ? '_' : l.label);
  std::sort(labels.begin(), labels.end());
  std::string s;
  s.push_back(vertex_kind_char(d.verts[static_cast<std::size_t>(v)]));
  s += std::to_string(d.degree(v)) + "." + std::to_string(d.loop_count(v)) + "." +
       std::to_string(d.leg_count(v)) + "." + labels;
  return s;
}

inline std::vector<std::int64_t> encode_under(const BasicDiagram& d,
                                              const std::vector<int>& pos) {
  std::vector<std::int64_t> enc;
  enc.reserve(d.edges.size() * 2 + d.legs.size() * 2 + 2);
  std::vector<std::pair<int, int>> es;
  es.reserve(d.edges.size());
  for (const auto& e : d.edges) {
    int a = pos[static_cast<std::size_t>(e.first)];
    int b = pos[static_cast<std::size_t>(e.second)];
    es.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(es.begin(), es.end());
  for (const auto& e : es) {
    enc.push_back(e.first);
    enc.push_back(e.second);
  }
  enc.push_back(-1);
  std::vector<std::pair<int, char>> ls;
  ls.reserve(d.legs.size());
  for (const auto& l : d.legs) ls.emplace_back(pos[static_cast<std::size_t>(l.v)], l.label);
  std::sort(ls.begin(), ls.end());
  for (const auto& l : ls) {
    enc.push_back(l.first);
    enc.push_back(static_cast<std::int64_t>(l.second));
  }
  return enc;
}

}  // namespace detail

/// Canonical form of a diagram: path-normalized, vertices renumbered by the
/// minimizing permutation over all isomorphism candidates. Brute-force within
/// invariant classes; diagrams in this calculus are small.
inline BasicDiagram canonical_form(BasicDiagram d) {
  path_normalize(d);
  const int n = static_cast<int>(d.verts.size());
  if (n == 0) {
    d.edges.clear();
    d.legs.clear();
    return d;
  }

  // group vertices by invariant, classes ordered by invariant string
  std::map<std::string, std::vector<int>> classes;
  for (int v = 0; v < n; ++v) classes[detail::vertex_invariant(d, v)].push_back(v);

  std::vector<std::vector<int>> groups;
  double combos = 1.0;
  for (auto& [key, vs] : classes) {
    (void)key;
    double f = 1.0;
    for (std::size_t i = 2; i <= vs.size(); ++i) f *= static_cast<double>(i);
    combos *= f;
    groups.push_back(vs);
  }
  if (combos > 2e7) throw RewriteError("canonical_form: diagram too symmetric/large");

  std::vector<int> base(groups.size(), 0);
  for (std::size_t g = 1; g < groups.size(); ++g)
    base[g] = base[g - 1] + static_cast<int>(groups[g - 1].size());

  std::vector<int> pos(static_cast<std::size_t>(n), 0);
  std::vector<int> best_pos;
  std::optional<std::vector<std::int64_t>> best;

  // odometer over per-group permutations
  std::vector<std::vector<int>> perm = groups;
  auto apply = [&]() {
    for (std::size_t g = 0; g < perm.size(); ++g)
      for (std::size_t i = 0; i < perm[g].size(); ++i)
        pos[static_cast<std::size_t>(perm[g][i])] = base[g] + static_cast<int>(i);
    auto enc = detail::encode_under(d, pos);
    if (!best || enc < *best) {
      best = std::move(enc);
      best_pos = pos;
    }
  };

  std::size_t g_active = 0;
  // iterate full product of next_permutation cycles
  for (auto& p : perm) std::sort(p.begin(), p.end());
  while (true) {
    apply();
    std::size_t g = 0;
    for (; g < perm.size(); ++g) {
      if (std::next_permutation(perm[g].begin(), perm[g].end())) break;
      // wrapped: reset (already sorted by wrap) and carry on
    }
    if (g == perm.size()) break;
    (void)g_active;
  }

  // rebuild the diagram under best_pos
  BasicDiagram out;
  out.n_power = d.n_power;
  out.verts.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v)
    out.verts[static_cast<std::size_t>(best_pos[static_cast<std::size_t>(v)])] =
        d.verts[static_cast<std::size_t>(v)];
  for (const auto& e : d.edges) {
    int a = best_pos[static_cast<std::size_t>(e.first)];
    int b = best_pos[static_cast<std::size_t>(e.second)];
    out.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(out.edges.begin(), out.edges.end());
  for (const auto& l : d.legs)
    out.legs.push_back({best_pos[static_cast<std::size_t>(l.v)], l.label});
  std::sort(out.legs.begin(), out.legs.end(), [](const BasicDiagram::Leg& a, const BasicDiagram::Leg& b) {
    return std::tie(a.v, a.label) < std::tie(b.v, b.label);
  });
  return out;
}

/// Canonical key: textual encoding of the canonical form. Equal keys iff
/// isomorphic diagrams (with identical leg labels where present).
inline std::string canonical_key(const BasicDiagram& d) {
  BasicDiagram c = canonical_form(d);
  std::ostringstream os;
  for (VertexKind k : c.verts) os << vertex_kind_char(k);
  os << '|';
  for (const auto& e : c.edges) os << e.first << '-' << e.second << ',';
  os << '|';
  for (const auto& l : c.legs) os << l.v << ':' << (l.label == '\0' ? '_' : l.label) << ',';
  if (c.n_power != 0) os << "|n^" << c.n_power;
  return os.str();
}

/// Leg signature: leg count plus the sorted label multiset ('_' marks an
/// unlabeled leg). All terms of a DiagramSum must share it.
inline std::string leg_signature(const BasicDiagram& d) {
  std::string s;
  for (const auto& l : d.legs) s.push_back(l.label == '\0' ? '_' : l.label);
  std::sort(s.begin(), s.end());
  return std::to_string(d.legs.size()) + ":" + s;
}

/// Formal linear combination of canonical basic diagrams with exact rational
/// coefficients. Zero coefficients are never stored.
class DiagramSum {
 public:
  struct Term {
    BasicDiagram diagram;  // canonical representative
    Rational coeff;
  };

  DiagramSum() = default;

  static DiagramSum of(const BasicDiagram& d, Rational c = Rational(1)) {
    DiagramSum s;
    s.add(d, std::move(c));
    return s;
  }

  void add(const BasicDiagram& d, Rational c) {
    if (c.is_zero()) return;
    BasicDiagram canon = canonical_form(d);
    const std::string sig = leg_signature(canon);
    if (terms_.empty() && !signature_) {
      signature_ = sig;
    } else if (sig != *signature_) {
      throw RewriteError("DiagramSum: mixed external-leg signatures (" + sig + " vs " +
                         *signature_ + ")");
    }
    std::string key = key_of(canon);
    auto it = terms_.find(key);
    if (it == terms_.end()) {
      terms_.emplace(std::move(key), Term{std::move(canon), std::move(c)});
    } else {
      it->second.coeff += c;
      if (it->second.coeff.is_zero()) terms_.erase(it);
    }
    if (terms_.empty()) signature_.reset();
  }

  void add(const DiagramSum& o, const Rational& scale = Rational(1)) {
    for (const auto& [k, t] : o.terms_) {
      (void)k;
      add(t.diagram, t.coeff * scale);
    }
  }

  DiagramSum& operator+=(const DiagramSum& o) {
    add(o);
    return *this;
  }
  DiagramSum& operator-=(const DiagramSum& o) {
    add(o, Rational(-1));
    return *this;
  }
  friend DiagramSum operator+(DiagramSum a, const DiagramSum& b) { return a += b; }
  friend DiagramSum operator-(DiagramSum a, const DiagramSum& b) { return a -= b; }
  friend DiagramSum operator*(const Rational& c, DiagramSum s) {
    DiagramSum out;
    for (const auto& [k, t] : s.terms_) {
      (void)k;
      out.add(t.diagram, t.coeff * c);
    }
    return out;
  }

  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  const std::map<std::string, Term>& terms() const { return terms_; }

  std::optional<std::string> signature() const { return signature_; }
  int leg_count() const {
    if (terms_.empty()) return 0;
    return static_cast<int>(terms_.begin()->second.diagram.legs.size());
  }

  bool all_unlabeled() const {
    for (const auto& [k, t] : terms_) {
      (void)k;
      if (!t.diagram.fully_unlabeled()) return false;
    }
    return true;
  }
  bool all_labeled() const {
    for (const auto& [k, t] : terms_) {
      (void)k;
      if (!t.diagram.fully_labeled()) return false;
    }
    return true;
  }

  /// Sorted distinct leg labels of the (shared) signature, '\0' excluded.
  std::vector<char> labels() const {
    std::vector<char> out;
    if (terms_.empty()) return out;
    for (const auto& l : terms_.begin()->second.diagram.legs)
      if (l.label != '\0') out.push_back(l.label);
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const DiagramSum& a, const DiagramSum& b) {
    if (a.terms_.size() != b.terms_.size()) return false;
    auto ia = a.terms_.begin();
    auto ib = b.terms_.begin();
    for (; ia != a.terms_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.coeff != ib->second.coeff) return false;
    }
    return true;
  }
  friend bool operator!=(const DiagramSum& a, const DiagramSum& b) { return !(a == b); }

 private:
  static std::string key_of(const BasicDiagram& canon) {
    std::ostringstream os;
    for (VertexKind k : canon.verts) os << vertex_kind_char(k);
    os << '|';
    for (const auto& e : canon.edges) os << e.first << '-' << e.second << ',';
    os << '|';
    for (const auto& l : canon.legs) os << l.v << ':' << (l.label == '\0' ? '_' : l.label) << ',';
    if (canon.n_power != 0) os << "|n^" << canon.n_power;
    return os.str();
  }

  std::map<std::string, Term> terms_;
  std::optional<std::string> signature_;
};

/// Drop all leg labels: maps each labeled/mixed diagram to its symmetric-mode
/// class. The value of the result is the symmetrization of the input tensor.
inline DiagramSum symmetrize(const DiagramSum& s) {
  DiagramSum out;
  for (const auto& [k, t] : s.terms()) {
    (void)k;
    BasicDiagram d = t.diagram;
    for (auto& l : d.legs) l.label = '\0';
    out.add(d, t.coeff);
  }
  return out;
}

/// Disjoint union of two diagrams (tensor-product juxtaposition).
inline BasicDiagram disjoint_union(const BasicDiagram& a, const BasicDiagram& b) {
  BasicDiagram d = a;
  const int off = static_cast<int>(a.verts.size());
  d.verts.insert(d.verts.end(), b.verts.begin(), b.verts.end());
  for (const auto& e : b.edges) d.edges.emplace_back(e.first + off, e.second + off);
  for (const auto& l : b.legs) d.legs.push_back({l.v + off, l.label});
  d.n_power += b.n_power;
  return d;
}

inline DiagramSum disjoint_union(const DiagramSum& a, const DiagramSum& b) {
  DiagramSum out;
  for (const auto& [ka, ta] : a.terms()) {
    (void)ka;
    for (const auto& [kb, tb] : b.terms()) {
      (void)kb;
      out.add(disjoint_union(ta.diagram, tb.diagram), ta.coeff * tb.coeff);
    }
  }
  return out;
}

// -- small builders -----------------------------------------------------

/// Single vertex of the given kind carrying `nlegs` unlabeled legs.
inline BasicDiagram star(VertexKind kind, int nlegs) {
  BasicDiagram d;
  d.verts.push_back(kind);
  for (int i = 0; i < nlegs; ++i) d.legs.push_back({0, '\0'});
  return d;
}

/// Single vertex with the given leg labels.
inline BasicDiagram star(VertexKind kind, const std::string& labels) {
  BasicDiagram d;
  d.verts.push_back(kind);
  for (char c : labels) d.legs.push_back({0, c});
  return d;
}

/// Phi vertex with one loop and `nlegs` unlabeled legs.
inline BasicDiagram phi_loop(int nlegs) {
  BasicDiagram d = star(VertexKind::Phi, nlegs);
  d.add_edge(0, 0);
  return d;
}

}  // namespace madiag
