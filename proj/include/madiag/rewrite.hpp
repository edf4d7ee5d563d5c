#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "madiag/diagram.hpp"
#include "madiag/rational.hpp"

namespace madiag {

namespace detail {

inline void check_symmetric_mode(const DiagramSum& s, const char* op) {
  if (!s.all_unlabeled())
    throw RewriteError(std::string(op) + ": operand must be in symmetric (unlabeled) mode");
}

}  // namespace detail

/// Symmetric contraction product of order k. For each pair of term diagrams,
/// sums over all k-subsets A, B of their legs and bijections A -> B, joining
/// the chosen leg pairs into internal edges, each weighted by the reciprocal
/// of the number of choices. k = 0 is plain juxtaposition.
inline DiagramSum contract(const DiagramSum& d1, const DiagramSum& d2, int k) {
  if (k < 0) throw RewriteError("contract: negative order");
  if (k > 0) {
    detail::check_symmetric_mode(d1, "contract");
    detail::check_symmetric_mode(d2, "contract");
  }
  DiagramSum out;
  for (const auto& [k1, t1] : d1.terms()) {
    (void)k1;
    for (const auto& [k2, t2] : d2.terms()) {
      (void)k2;
      const int l1 = static_cast<int>(t1.diagram.legs.size());
      const int l2 = static_cast<int>(t2.diagram.legs.size());
      if (k > l1 || k > l2)
        throw RewriteError("contract: order k exceeds a term's leg count");
      if (k == 0) {
        out.add(disjoint_union(t1.diagram, t2.diagram), t1.coeff * t2.coeff);
        continue;
      }
      // enumerate subsets of size k of both leg lists and all bijections
      long long n_choices = 0;
      std::vector<std::pair<std::vector<int>, std::vector<int>>> pairings;
      std::vector<int> comb1, comb2;
      std::function<void(int, int)> choose1 = [&](int start, int need) {
        if (need == 0) {
          std::function<void(int, int)> choose2 = [&](int start2, int need2) {
            if (need2 == 0) {
              std::vector<int> perm = comb2;
              std::sort(perm.begin(), perm.end());
              do {
                pairings.emplace_back(comb1, perm);
                ++n_choices;
              } while (std::next_permutation(perm.begin(), perm.end()));
              return;
            }
            for (int j = start2; j <= l2 - need2; ++j) {
              comb2.push_back(j);
              choose2(j + 1, need2 - 1);
              comb2.pop_back();
            }
          };
          choose2(0, k);
          return;
        }
        for (int j = start; j <= l1 - need; ++j) {
          comb1.push_back(j);
          choose1(j + 1, need - 1);
          comb1.pop_back();
        }
      };
      choose1(0, k);

      const Rational w = t1.coeff * t2.coeff / Rational(n_choices);
      for (const auto& [a, b] : pairings) {
        BasicDiagram d = t1.diagram;
        const int off = static_cast<int>(d.verts.size());
        d.verts.insert(d.verts.end(), t2.diagram.verts.begin(), t2.diagram.verts.end());
        for (const auto& e : t2.diagram.edges) d.edges.emplace_back(e.first + off, e.second + off);
        d.n_power += t2.diagram.n_power;
        std::vector<bool> used1(static_cast<std::size_t>(l1), false);
        std::vector<bool> used2(static_cast<std::size_t>(l2), false);
        for (int m = 0; m < k; ++m) {
          const auto& leg1 = t1.diagram.legs[static_cast<std::size_t>(a[static_cast<std::size_t>(m)])];
          const auto& leg2 = t2.diagram.legs[static_cast<std::size_t>(b[static_cast<std::size_t>(m)])];
          d.add_edge(leg1.v, leg2.v + off);
          used1[static_cast<std::size_t>(a[static_cast<std::size_t>(m)])] = true;
          used2[static_cast<std::size_t>(b[static_cast<std::size_t>(m)])] = true;
        }
        d.legs.clear();
        for (int m = 0; m < l1; ++m)
          if (!used1[static_cast<std::size_t>(m)]) d.legs.push_back(t1.diagram.legs[static_cast<std::size_t>(m)]);
        for (int m = 0; m < l2; ++m)
          if (!used2[static_cast<std::size_t>(m)])
            d.legs.push_back({t2.diagram.legs[static_cast<std::size_t>(m)].v + off,
                              t2.diagram.legs[static_cast<std::size_t>(m)].label});
        out.add(d, w);
      }
    }
  }
  return out;
}

/// Picks a leg label not used by the sum; prefers 'p'.
inline char fresh_label(const DiagramSum& s) {
  const std::string pool = "pqrstuvwxyzabcdefghijklmno";
  auto used = s.labels();
  for (char c : pool)
    if (std::find(used.begin(), used.end(), c) == used.end()) return c;
  throw RewriteError("covariant_derivative: no fresh index letter available");
}

namespace detail {

// Differentiating the contraction factor of an edge: one inverse metric
// between natural-lower slots (Phi, V) gives weight -1, a plain pairing
// between a lower and an upper (W) slot carries no factor, and a metric
// between two W slots gives +1.
inline Rational edge_diff_weight(const BasicDiagram& d, std::size_t e) {
  const bool uw = d.verts[static_cast<std::size_t>(d.edges[e].first)] == VertexKind::W;
  const bool vw = d.verts[static_cast<std::size_t>(d.edges[e].second)] == VertexKind::W;
  if (uw && vw) return Rational(1);
  if (uw || vw) return Rational(0);
  return Rational(-1);
}

// Legs are reported lowered. On Phi/V vertices the Christoffel correction
// gives -1/2 per leg; on a W vertex the derivative of the lowering metric
// joins the correction and flips it to +1/2.
inline Rational leg_diff_weight(const BasicDiagram& d, std::size_t l) {
  return d.verts[static_cast<std::size_t>(d.legs[l].v)] == VertexKind::W ? frac(1, 2)
                                                                         : frac(-1, 2);
}

}  // namespace detail

/// Covariant derivative. Per basic diagram emits: a new leg at every vertex
/// (weight +1), a new degree-3 Phi vertex carrying the derivative leg in the
/// middle of every internal edge (weight -1; 0 and +1 for edges with one or
/// two W endpoints, where the contraction carries no inverse metric or a
/// plain metric), and the same subdivision on every external leg (weight
/// -1/2; +1/2 on W vertices). The derivative leg is labeled; other legs keep
/// their mode.
inline DiagramSum covariant_derivative(const DiagramSum& s, char label = '\0') {
  if (label == '\0') label = fresh_label(s);
  DiagramSum out;
  for (const auto& [key, t] : s.terms()) {
    (void)key;
    const BasicDiagram& d = t.diagram;
    for (int v = 0; v < static_cast<int>(d.verts.size()); ++v) {
      BasicDiagram nd = d;
      nd.legs.push_back({v, label});
      out.add(nd, t.coeff);
    }
    for (std::size_t e = 0; e < d.edges.size(); ++e) {
      const Rational w_e = detail::edge_diff_weight(d, e);
      if (w_e.is_zero()) continue;
      BasicDiagram nd = d;
      auto [u, w] = nd.edges[e];
      nd.edges.erase(nd.edges.begin() + static_cast<std::ptrdiff_t>(e));
      nd.verts.push_back(VertexKind::Phi);
      const int m = static_cast<int>(nd.verts.size()) - 1;
      nd.add_edge(u, m);
      nd.add_edge(m, w);
      nd.legs.push_back({m, label});
      out.add(nd, w_e * t.coeff);
    }
    for (std::size_t l = 0; l < d.legs.size(); ++l) {
      BasicDiagram nd = d;
      nd.verts.push_back(VertexKind::Phi);
      const int m = static_cast<int>(nd.verts.size()) - 1;
      nd.add_edge(nd.legs[l].v, m);
      nd.legs[l].v = m;  // the original leg (and its label) moves to the midpoint
      nd.legs.push_back({m, label});
      out.add(nd, detail::leg_diff_weight(d, l) * t.coeff);
    }
  }
  return out;
}

/// Joins the two legs labeled `a` and `b` of every term by a new internal
/// edge (contraction through the inverse metric in the lowered convention).
inline DiagramSum join_labeled_legs(const DiagramSum& s, char a, char b) {
  DiagramSum out;
  for (const auto& [key, t] : s.terms()) {
    (void)key;
    BasicDiagram nd = t.diagram;
    int va = -1, vb = -1;
    for (const auto& l : nd.legs) {
      if (l.label == a) va = l.v;
      if (l.label == b) vb = l.v;
    }
    if (va < 0 || vb < 0) throw RewriteError("join_labeled_legs: missing labeled leg");
    nd.legs.erase(std::remove_if(nd.legs.begin(), nd.legs.end(),
                                 [&](const BasicDiagram::Leg& l) {
                                   return l.label == a || l.label == b;
                                 }),
                  nd.legs.end());
    nd.add_edge(va, vb);
    out.add(nd, t.coeff);
  }
  return out;
}

namespace detail {

// An object of a diagram in the Laplacian rules: a vertex, an internal edge,
// or an external leg.
struct LObject {
  enum Kind { Vertex, Edge, Leg } kind;
  std::size_t index;
};

// Subdivides edge/leg objects, returning the vertex to attach new structure
// to. For a vertex object, just returns it. Mutates `d`; `obj` indices refer
// to the original diagram, so objects must be materialized before any edit —
// callers therefore apply attach points in a single pass built from a fresh
// copy each time.
inline int attach_point(BasicDiagram& d, const LObject& obj) {
  switch (obj.kind) {
    case LObject::Vertex:
      return static_cast<int>(obj.index);
    case LObject::Edge: {
      auto [u, w] = d.edges[obj.index];
      d.edges.erase(d.edges.begin() + static_cast<std::ptrdiff_t>(obj.index));
      d.verts.push_back(VertexKind::Phi);
      const int m = static_cast<int>(d.verts.size()) - 1;
      d.add_edge(u, m);
      d.add_edge(m, w);
      return m;
    }
    case LObject::Leg: {
      d.verts.push_back(VertexKind::Phi);
      const int m = static_cast<int>(d.verts.size()) - 1;
      d.add_edge(d.legs[obj.index].v, m);
      d.legs[obj.index].v = m;
      return m;
    }
  }
  return -1;
}

inline Rational lweight(const LObject& o) {
  switch (o.kind) {
    case LObject::Vertex: return Rational(1);
    case LObject::Edge: return Rational(-1);
    case LObject::Leg: return frac(-1, 2);
  }
  return Rational(0);
}

}  // namespace detail

/// Weighted Laplacian of a diagram sum, by the graphical rules: join every
/// ordered pair of objects by a new internal edge (weight w(a)w(b)), add a
/// loop at every object (weight w(a)), attach a new W vertex to every object
/// (weight -w(a)), and split every edge by two new vertices joined to each
/// other (weight 2 for internal edges, 3/4 for external legs), with
/// w(vertex) = 1, w(internal edge) = -1, w(leg) = -1/2. The output generally
/// contains loops.
inline DiagramSum weighted_laplacian(const DiagramSum& s) {
  using detail::LObject;
  DiagramSum out;
  for (const auto& [key, t] : s.terms()) {
    (void)key;
    const BasicDiagram& d = t.diagram;
    for (VertexKind k : d.verts)
      if (k == VertexKind::W)
        throw RewriteError(
            "weighted_laplacian: the tabulated rules cover diagrams without W "
            "vertices; use weighted_laplacian_via_derivative instead");
    std::vector<LObject> objs;
    for (std::size_t v = 0; v < d.verts.size(); ++v) objs.push_back({LObject::Vertex, v});
    for (std::size_t e = 0; e < d.edges.size(); ++e) objs.push_back({LObject::Edge, e});
    for (std::size_t l = 0; l < d.legs.size(); ++l) objs.push_back({LObject::Leg, l});

    // rule 2: unordered pairs, counted twice
    for (std::size_t a = 0; a < objs.size(); ++a) {
      for (std::size_t b = a + 1; b < objs.size(); ++b) {
        BasicDiagram nd = d;
        // subdivide the higher edge index first so stored indices stay valid
        LObject oa = objs[a], ob = objs[b];
        if (oa.kind == LObject::Edge && ob.kind == LObject::Edge && ob.index > oa.index)
          std::swap(oa, ob);
        const int pa = detail::attach_point(nd, oa);
        const int pb = detail::attach_point(nd, ob);
        nd.add_edge(pa, pb);
        out.add(nd, Rational(2) * detail::lweight(objs[a]) * detail::lweight(objs[b]) * t.coeff);
      }
    }
    // rule 3: loop at every object
    for (const auto& o : objs) {
      BasicDiagram nd = d;
      const int p = detail::attach_point(nd, o);
      nd.add_edge(p, p);
      out.add(nd, detail::lweight(o) * t.coeff);
    }
    // rule 4: W vertex attached to every object
    for (const auto& o : objs) {
      BasicDiagram nd = d;
      const int p = detail::attach_point(nd, o);
      nd.verts.push_back(VertexKind::W);
      nd.add_edge(p, static_cast<int>(nd.verts.size()) - 1);
      out.add(nd, -detail::lweight(o) * t.coeff);
    }
    // rule 5: split every edge twice, joining the two new vertices
    for (const auto& o : objs) {
      if (o.kind == LObject::Vertex) continue;
      BasicDiagram nd = d;
      const int m1 = detail::attach_point(nd, o);
      // the second midpoint subdivides the segment between m1 and the far end:
      // for an edge object the last edge added by attach_point is (m1, w);
      // for a leg object, subdivide the leg again (it now sits on m1).
      int m2;
      if (o.kind == LObject::Edge) {
        const std::size_t seg = nd.edges.size() - 1;  // (m1, w) added last
        auto [x, y] = nd.edges[seg];
        nd.edges.erase(nd.edges.begin() + static_cast<std::ptrdiff_t>(seg));
        nd.verts.push_back(VertexKind::Phi);
        m2 = static_cast<int>(nd.verts.size()) - 1;
        nd.add_edge(x, m2);
        nd.add_edge(m2, y);
      } else {
        nd.verts.push_back(VertexKind::Phi);
        m2 = static_cast<int>(nd.verts.size()) - 1;
        nd.add_edge(m1, m2);
        nd.legs[o.index].v = m2;  // the leg moves out to the far vertex
      }
      nd.add_edge(m1, m2);
      out.add(nd, (o.kind == LObject::Edge ? Rational(2) : frac(3, 4)) * t.coeff);
    }
  }
  return out;
}

/// The weighted Laplacian assembled from first principles: trace of the
/// second covariant derivative minus the gradient-of-potential term, with
/// the gradient of the measure potential entering as (1/2)(V_p + W_p).
/// Valid for any vertex kinds; on W-free diagrams it collects to exactly the
/// same sum as the tabulated rules, which the tests assert.
inline DiagramSum weighted_laplacian_via_derivative(const DiagramSum& s) {
  auto used = s.labels();
  std::string fresh;
  for (char c : std::string("pqrstuvwxyzabcdefghijklmno")) {
    if (std::find(used.begin(), used.end(), c) == used.end()) fresh.push_back(c);
    if (fresh.size() == 2) break;
  }
  if (fresh.size() < 2) throw RewriteError("weighted_laplacian: no fresh letters");
  const char q = fresh[0], p = fresh[1];

  DiagramSum dT = covariant_derivative(s, q);
  DiagramSum ddT = covariant_derivative(dT, p);
  DiagramSum lap = join_labeled_legs(ddT, p, q);

  DiagramSum grad_p;
  grad_p.add(star(VertexKind::V, std::string(1, p)), frac(1, 2));
  grad_p.add(star(VertexKind::W, std::string(1, p)), frac(1, 2));
  lap -= join_labeled_legs(disjoint_union(grad_p, dT), p, q);
  return lap;
}

namespace detail {

// One endpoint of a looped Phi vertex: either a leg or one side of an
// incident non-eliminated edge.
struct Endpoint {
  enum Kind { LegEnd, EdgeEnd } kind;
  std::size_t index;  // leg index or edge index
  int side;           // for EdgeEnd: 0 = first, 1 = second
};

// A loop-elimination rule term: template vertices/edges plus the template
// vertex each endpoint socket attaches to.
struct LoopRuleTerm {
  Rational coeff;
  std::vector<VertexKind> verts;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> socket;  // socket[s] = template vertex for endpoint s
};

inline const std::vector<LoopRuleTerm>& loop_rule(int k) {
  using VK = VertexKind;
  static const std::vector<LoopRuleTerm> k0{};  // handled by normalization
  // d/dx of the Monge-Ampere equation: trace(h^-1 Phi3_i) = -V_i + W_i
  static const std::vector<LoopRuleTerm> k1{
      {Rational(-1), {VK::V}, {}, {0}},
      {Rational(1), {VK::W}, {}, {0}},
  };
  // second derivative: Phi_ij^k contracted -> -V_ij + W_ij + Phi=Phi + Phi-W
  static const std::vector<LoopRuleTerm> k2{
      {Rational(-1), {VK::V}, {}, {0, 0}},
      {Rational(1), {VK::W}, {}, {0, 0}},
      {Rational(1), {VK::Phi, VK::Phi}, {{0, 1}, {0, 1}}, {0, 1}},
      {Rational(1), {VK::Phi, VK::W}, {{0, 1}}, {0, 0}},
  };
  // third derivative, socket-resolved
  static const std::vector<LoopRuleTerm> k3{
      {Rational(1), {VK::Phi, VK::Phi}, {{0, 1}, {0, 1}}, {1, 1, 0}},
      {Rational(1), {VK::Phi, VK::Phi}, {{0, 1}, {0, 1}}, {0, 1, 1}},
      {Rational(1), {VK::Phi, VK::Phi}, {{0, 1}, {0, 1}}, {1, 0, 1}},
      {Rational(-1), {VK::V}, {}, {0, 0, 0}},
      {Rational(1), {VK::W}, {}, {0, 0, 0}},
      {Rational(1), {VK::Phi, VK::W}, {{0, 1}}, {0, 0, 1}},
      {Rational(1), {VK::Phi, VK::W}, {{0, 1}}, {0, 1, 0}},
      {Rational(1), {VK::Phi, VK::W}, {{0, 1}}, {1, 0, 0}},
      {Rational(1), {VK::Phi, VK::W}, {{0, 1}}, {0, 0, 0}},
      {Rational(-2), {VK::Phi, VK::Phi, VK::Phi}, {{0, 1}, {1, 2}, {0, 2}}, {0, 1, 2}},
  };
  switch (k) {
    case 0: return k0;
    case 1: return k1;
    case 2: return k2;
    case 3: return k3;
    default: throw RewriteError("loop elimination with k >= 4 endpoints is unsupported");
  }
}

// Rewrites the loop at `v` (choosing the first loop edge) using the k-rules.
inline std::vector<std::pair<BasicDiagram, Rational>> eliminate_one_loop(
    const BasicDiagram& d, int v) {
  std::size_t loop_edge = d.edges.size();
  for (std::size_t e = 0; e < d.edges.size(); ++e) {
    if (d.edges[e].first == v && d.edges[e].second == v) {
      loop_edge = e;
      break;
    }
  }
  if (loop_edge == d.edges.size()) throw RewriteError("eliminate_one_loop: no loop at vertex");

  std::vector<Endpoint> eps;
  for (std::size_t e = 0; e < d.edges.size(); ++e) {
    if (e == loop_edge) continue;
    if (d.edges[e].first == v) eps.push_back({Endpoint::EdgeEnd, e, 0});
    if (d.edges[e].second == v) eps.push_back({Endpoint::EdgeEnd, e, 1});
  }
  for (std::size_t l = 0; l < d.legs.size(); ++l)
    if (d.legs[l].v == v) eps.push_back({Endpoint::LegEnd, l, 0});

  const int k = static_cast<int>(eps.size());
  const auto& rule = loop_rule(k);  // throws for k >= 4

  std::vector<std::pair<BasicDiagram, Rational>> out;
  for (const auto& rt : rule) {
    BasicDiagram nd = d;
    const int off = static_cast<int>(nd.verts.size());
    nd.verts.insert(nd.verts.end(), rt.verts.begin(), rt.verts.end());
    for (const auto& e : rt.edges) nd.edges.emplace_back(e.first + off, e.second + off);
    for (int s = 0; s < k; ++s) {
      const int target = rt.socket[static_cast<std::size_t>(s)] + off;
      const auto& ep = eps[static_cast<std::size_t>(s)];
      if (ep.kind == Endpoint::LegEnd) {
        nd.legs[ep.index].v = target;
      } else if (ep.side == 0) {
        nd.edges[ep.index].first = target;
      } else {
        nd.edges[ep.index].second = target;
      }
    }
    // drop the loop edge and the old vertex (now isolated)
    nd.edges.erase(nd.edges.begin() + static_cast<std::ptrdiff_t>(loop_edge));
    for (auto& e : nd.edges) {
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    nd.remove_vertex(v);
    out.emplace_back(std::move(nd), rt.coeff);
  }
  return out;
}

}  // namespace detail

/// Eliminates every loop sitting on a Phi vertex using the differentiated
/// Monge-Ampere identities (k = 0..3 endpoints; k >= 4 is an error). Loops on
/// V/W vertices stay. `pick` selects which looped vertex to rewrite next
/// among candidates (defaults to the first in canonical order); the normal
/// form is order-independent, which the tests assert.
inline DiagramSum eliminate_loops(
    const DiagramSum& s,
    const std::function<std::size_t(std::size_t)>& pick = {}) {
  DiagramSum out;
  std::vector<std::pair<BasicDiagram, Rational>> work;
  for (const auto& [key, t] : s.terms()) {
    (void)key;
    work.emplace_back(t.diagram, t.coeff);
  }
  while (!work.empty()) {
    auto [d, c] = std::move(work.back());
    work.pop_back();
    std::vector<int> looped;
    for (int v = 0; v < static_cast<int>(d.verts.size()); ++v)
      if (d.verts[static_cast<std::size_t>(v)] == VertexKind::Phi && d.loop_count(v) > 0)
        looped.push_back(v);
    if (looped.empty()) {
      out.add(d, c);
      continue;
    }
    const std::size_t which = pick ? pick(looped.size()) % looped.size() : 0;
    for (auto& [nd, nc] : detail::eliminate_one_loop(d, looped[which])) {
      // canonicalize as we go so path contractions fire between steps
      work.emplace_back(canonical_form(nd), nc * c);
    }
  }
  return out;
}

}  // namespace madiag
