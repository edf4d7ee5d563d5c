#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "madiag/diagram.hpp"
#include "madiag/rational.hpp"

namespace madiag {

/// One multiplicative factor of an index expression: a derivative array of
/// Phi, V or W with named slots. A raised slot pairs through the inverse
/// metric at evaluation time (W arrays are natural-upper; their lowered slots
/// carry one metric factor, per the lowered reporting convention).
struct IndexFactor {
  VertexKind kind;
  struct Slot {
    std::string name;
    bool upper = false;
  };
  std::vector<Slot> slots;
};

struct IndexTerm {
  Rational coeff;
  std::vector<IndexFactor> factors;
};

/// Sum of index terms; `symmetrized` marks that free indices were expanded
/// over all leg permutations with the 1/L! prefactor already folded into the
/// coefficients.
struct IndexExpression {
  std::vector<IndexTerm> terms;
  std::vector<std::string> free_indices;
  bool symmetrized = false;
};

enum class IndexMode { Labeled, Symmetric };

namespace detail {

inline std::string factor_str(const IndexFactor& f) {
  std::string s = f.kind == VertexKind::Phi ? "Phi" : std::string(1, vertex_kind_char(f.kind));
  s += '(';
  for (std::size_t i = 0; i < f.slots.size(); ++i) {
    if (i) s += ',';
    if (f.slots[i].upper) s += '^';
    s += f.slots[i].name;
  }
  s += ')';
  return s;
}

// Canonical string of a term under dummy renaming: factors sorted with slot
// lists sorted inside each factor, contraction letters renamed in order of
// first occurrence, minimized over the global orientation flip (raising and
// lowering swap consistently, so a flipped term denotes the same tensor).
// Used to merge identical permutation images.
inline std::string term_canonical(const IndexTerm& t,
                                  const std::vector<std::string>& frees) {
  auto encode = [&frees](IndexTerm c) {
    for (auto& f : c.factors)
      std::sort(f.slots.begin(), f.slots.end(), [](const auto& a, const auto& b) {
        return std::tie(a.name, a.upper) < std::tie(b.name, b.upper);
      });
    std::sort(c.factors.begin(), c.factors.end(), [](const IndexFactor& a, const IndexFactor& b) {
      return factor_str(a) < factor_str(b);
    });
    std::map<std::string, std::string> ren;
    int next = 0;
    std::string out;
    for (const auto& f : c.factors) {
      out += vertex_kind_char(f.kind);
      out += '(';
      for (const auto& sl : f.slots) {
        const bool is_free = std::find(frees.begin(), frees.end(), sl.name) != frees.end();
        std::string nm = sl.name;
        if (!is_free) {
          auto it = ren.find(nm);
          if (it == ren.end()) {
            nm = "d" + std::to_string(next++);
            ren[sl.name] = nm;
          } else {
            nm = it->second;
          }
        }
        out += (sl.upper ? "^" : "_") + nm + ",";
      }
      out += ')';
    }
    return out;
  };
  IndexTerm flipped = t;
  for (auto& f : flipped.factors)
    for (auto& sl : f.slots)
      if (std::find(frees.begin(), frees.end(), sl.name) == frees.end()) sl.upper = !sl.upper;
  return std::min(encode(t), encode(flipped));
}

}  // namespace detail

/// Translates a diagram sum into explicit index notation following the
/// standard construction: internal edges oriented first-to-second vertex in
/// canonical order, arriving indices raised, legs lowered. In symmetric mode
/// the (1/L!) sum over leg permutations is expanded and syntactically equal
/// images are merged; orientation per term is chosen to make merging
/// effective.
inline IndexExpression to_index_expression(const DiagramSum& s, IndexMode mode) {
  if (mode == IndexMode::Labeled && !s.all_labeled())
    throw RewriteError("to_index_expression: labeled mode needs fully labeled diagrams");
  if (mode == IndexMode::Symmetric && !s.all_unlabeled())
    throw RewriteError("to_index_expression: symmetric mode needs unlabeled diagrams");

  IndexExpression out;
  out.symmetrized = (mode == IndexMode::Symmetric);

  const int nlegs = s.leg_count();
  std::vector<std::string> frees;
  if (mode == IndexMode::Symmetric) {
    for (int i = 0; i < nlegs; ++i) frees.push_back("i" + std::to_string(i + 1));
  } else {
    for (char c : s.labels()) frees.push_back(std::string(1, c));
  }
  out.free_indices = frees;

  // merged terms: canonical string -> (term, coeff)
  std::map<std::string, IndexTerm> merged;
  std::vector<std::string> order;

  for (const auto& [key, t] : s.terms()) {
    (void)key;
    const BasicDiagram& d = t.diagram;
    std::vector<int> perm(static_cast<std::size_t>(nlegs));
    std::iota(perm.begin(), perm.end(), 0);
    const bool expand = (mode == IndexMode::Symmetric) && nlegs > 1;
    long long nperm = 1;
    if (expand)
      for (int i = 2; i <= nlegs; ++i) nperm *= i;

    do {
      IndexTerm term;
      term.coeff = t.coeff / Rational(nperm);
      std::vector<IndexFactor> factors(d.verts.size());
      for (std::size_t v = 0; v < d.verts.size(); ++v)
        factors[v].kind = d.verts[v];
      for (std::size_t e = 0; e < d.edges.size(); ++e) {
        const std::string nm = "e" + std::to_string(e + 1);
        // oriented first -> second: arriving (second) index raised
        factors[static_cast<std::size_t>(d.edges[e].first)].slots.push_back({nm, false});
        factors[static_cast<std::size_t>(d.edges[e].second)].slots.push_back({nm, true});
      }
      for (std::size_t l = 0; l < d.legs.size(); ++l) {
        std::string nm;
        if (mode == IndexMode::Labeled) {
          nm = std::string(1, d.legs[l].label);
        } else {
          nm = frees[static_cast<std::size_t>(perm[l])];
        }
        factors[static_cast<std::size_t>(d.legs[l].v)].slots.push_back({nm, false});
      }
      term.factors = std::move(factors);
      if (d.n_power > 0) {
        // record the dimension factor as an explicit trace-free marker factor
        IndexFactor nf;
        nf.kind = VertexKind::Phi;
        for (int q = 0; q < d.n_power; ++q) {
          nf.slots.push_back({"t" + std::to_string(q), false});
          nf.slots.push_back({"t" + std::to_string(q), true});
        }
        term.factors.push_back(nf);
      }

      const std::string canon = detail::term_canonical(term, frees);
      auto it = merged.find(canon);
      if (it == merged.end()) {
        merged.emplace(canon, term);
        order.push_back(canon);
      } else {
        it->second.coeff += term.coeff;
      }
    } while (expand && std::next_permutation(perm.begin(), perm.end()));
  }

  for (const auto& k : order) {
    if (!merged[k].coeff.is_zero()) out.terms.push_back(merged[k]);
  }
  return out;
}

/// Validates the double-occurrence/opposite-variance rule for contraction
/// indices and single occurrence for free indices. Returns true when sound.
inline bool index_expression_sound(const IndexExpression& e) {
  for (const auto& t : e.terms) {
    std::map<std::string, std::vector<bool>> occ;
    for (const auto& f : t.factors)
      for (const auto& sl : f.slots) occ[sl.name].push_back(sl.upper);
    for (const auto& [nm, vs] : occ) {
      const bool is_free =
          std::find(e.free_indices.begin(), e.free_indices.end(), nm) != e.free_indices.end();
      if (is_free) {
        if (vs.size() != 1 || vs[0]) return false;
      } else {
        if (vs.size() != 2 || vs[0] == vs[1]) return false;
      }
    }
  }
  return true;
}

inline std::string render_index_expression(const IndexExpression& e) {
  if (e.terms.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : e.terms) {
    const bool neg = t.coeff < Rational(0);
    Rational mag = neg ? -t.coeff : t.coeff;
    if (first) {
      if (neg) os << "-";
      first = false;
    } else {
      os << (neg ? " - " : " + ");
    }
    if (mag != Rational(1)) os << mag.str() << "*";
    for (std::size_t f = 0; f < t.factors.size(); ++f) {
      if (f) os << "*";
      os << detail::factor_str(t.factors[f]);
    }
  }
  return os.str();
}

}  // namespace madiag
