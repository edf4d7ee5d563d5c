#include <gtest/gtest.h>

#include <cmath>

#include "madiag/dsl.hpp"
#include "madiag/geometry.hpp"
#include "madiag/instance.hpp"
#include "madiag/rewrite.hpp"
#include "madiag/rng.hpp"
#include "madiag/standard_sums.hpp"

using namespace madiag;

namespace {

// central-difference cross check of an analytic derivative oracle: order m
// against FD of order m-1, with one Richardson level
double oracle_fd_gap(const PotentialInstance& inst, int m, const Vec& x, bool wrt_w = false) {
  const int n = inst.dim();
  auto field = [&](const Vec& p) { return wrt_w ? inst.w(m - 1, p) : inst.phi(m - 1, p); };
  const DenseTensor exact = wrt_w ? inst.w(m, x) : inst.phi(m, x);
  auto fd_at = [&](double s) {
    DenseTensor out(n, m);
    for (int p = 0; p < n; ++p) {
      Vec xp = x, xm = x;
      xp[static_cast<std::size_t>(p)] += s;
      xm[static_cast<std::size_t>(p)] -= s;
      DenseTensor fp = field(xp), fm = field(xm);
      for_each_index(n, m - 1, [&](const std::vector<int>& I) {
        std::vector<int> O = I;
        O.push_back(p);
        out.at(O) = (fp.at(I) - fm.at(I)) / (2 * s);
      });
    }
    return out;
  };
  const double s = 1e-3;
  DenseTensor d1 = fd_at(s), d2 = fd_at(s / 2);
  d2 *= 4.0 / 3.0;
  d1 *= 1.0 / 3.0;
  DenseTensor fd = d2 - d1;
  fd -= exact;
  double denom = 1.0 + exact.max_abs();
  return fd.max_abs() / denom;
}

double max_rel(const DenseTensor& a, const DenseTensor& b) {
  DenseTensor d = a;
  d -= b;
  return d.max_abs() / (1.0 + b.max_abs());
}

}  // namespace

TEST(Instances, MongeAmpereResidualIsTiny) {
  const PotentialInstance insts[] = {
      make_quadratic_id(2), make_quadratic_id(3), make_orthant(2), make_orthant(3),
      make_sine1d(1.0),     make_gauss_pair_1d(0.5), make_perturbed_gauss_1d(0.2),
      make_manufactured(2, 42),
  };
  for (const auto& inst : insts) {
    Rng rng(derive_seed(7, inst.name()));
    Box box = inst.sample_box();
    for (int k = 0; k < 20; ++k) {
      Vec x = sample_point(box, rng);
      EXPECT_LT(std::abs(inst.ma_residual(x)), 1e-10) << inst.name();
    }
  }
}

TEST(Instances, OrthantClosedForms) {
  PotentialInstance inst = make_orthant(2);
  Vec x{1.0, 2.0};
  MetricPack mp = metric_pack(inst, x);
  EXPECT_NEAR(mp.h(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(mp.h(1, 1), 0.5, 1e-14);
  EXPECT_NEAR(mp.h(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(mp.g(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(mp.g(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(mp.g(0, 1), 0.0, 1e-12);
  // Gamma^1_11 = -1/x1, Gamma^2_22 = -1/x2
  EXPECT_NEAR(mp.christoffel.at({0, 0, 0}), -1.0, 1e-13);
  EXPECT_NEAR(mp.christoffel.at({1, 1, 1}), -0.5, 1e-13);
  EXPECT_NEAR(mp.christoffel.at({0, 1, 1}), 0.0, 1e-13);
  // orthant residual at a reference point
  EXPECT_LT(std::abs(inst.ma_residual(x)), 1e-12);
}

TEST(Instances, Sine1dClosedForms) {
  PotentialInstance inst = make_sine1d(1.0);
  Vec x{M_PI / 3.0};
  EXPECT_NEAR(inst.phi(2, x)[0], 8.0 / 3.0, 1e-13);
  EXPECT_NEAR(inst.phi(3, x)[0], -16.0 / (3.0 * std::sqrt(3.0)), 1e-12);
  CurvaturePack cp = curvature_pack(inst, x);
  EXPECT_NEAR(cp.ricci_mu(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(pencil_max_eig(cp.ricci_mu, cp.mp.h), -3.0 / 8.0, 1e-12);
}

TEST(Instances, QuadraticIsFlat) {
  PotentialInstance inst = make_quadratic_id(3);
  Vec x{0.3, -0.2, 0.7};
  CurvaturePack cp = curvature_pack(inst, x);
  EXPECT_LT(cp.riemann.max_abs(), 1e-14);
  EXPECT_LT(cp.ricci.norm(), 1e-14);
  EXPECT_LT(cp.mp.g.norm(), 1e-14);
  // Ric_mu = (1/2)(V2 + W2) = identity for standard Gaussians
  EXPECT_LT((cp.ricci_mu - Mat::Identity(3, 3)).norm(), 1e-13);
}

TEST(Instances, OrthantRicciMuVanishes) {
  PotentialInstance inst = make_orthant(2);
  Rng rng(11);
  Box box = inst.sample_box();
  for (int k = 0; k < 10; ++k) {
    Vec x = sample_point(box, rng);
    CurvaturePack cp = curvature_pack(inst, x);
    EXPECT_LT(cp.ricci_mu.norm(), 1e-11);
    EXPECT_LT(cp.ricci.norm(), 1e-11);  // flat cone
  }
}

TEST(Instances, DerivativeOraclesMatchFiniteDifferences) {
  const PotentialInstance insts[] = {
      make_orthant(2), make_sine1d(1.0), make_manufactured(2, 42), make_perturbed_gauss_1d(0.2),
  };
  for (const auto& inst : insts) {
    Rng rng(derive_seed(3, inst.name()));
    Box box = inst.sample_box();
    for (int k = 0; k < 5; ++k) {
      Vec x = sample_point(box, rng);
      for (int m = 2; m <= 5; ++m) EXPECT_LT(oracle_fd_gap(inst, m, x), 1e-6) << inst.name() << " phi order " << m;
    }
  }
}

TEST(Instances, ManufacturedVMatchesFiniteDifferences) {
  PotentialInstance inst = make_manufactured(2, 42);
  Rng rng(5);
  Box box = inst.sample_box();
  for (int k = 0; k < 5; ++k) {
    Vec x = sample_point(box, rng);
    for (int m = 1; m <= 3; ++m) {
      auto field = [&](const Vec& p) { return inst.v(m - 1, p); };
      const DenseTensor exact = inst.v(m, x);
      const double s = 1e-3;
      auto fd_at = [&](double step) {
        DenseTensor out(2, m);
        for (int p = 0; p < 2; ++p) {
          Vec xp = x, xm = x;
          xp[static_cast<std::size_t>(p)] += step;
          xm[static_cast<std::size_t>(p)] -= step;
          DenseTensor fp = field(xp), fm = field(xm);
          for_each_index(2, m - 1, [&](const std::vector<int>& I) {
            std::vector<int> O = I;
            O.push_back(p);
            out.at(O) = (fp.at(I) - fm.at(I)) / (2 * step);
          });
        }
        return out;
      };
      DenseTensor c = fd_at(s), f = fd_at(s / 2);
      f *= 4.0 / 3.0;
      c *= 1.0 / 3.0;
      DenseTensor fd = f - c;
      fd -= exact;
      EXPECT_LT(fd.max_abs() / (1.0 + exact.max_abs()), 1e-6) << "V order " << m;
    }
  }
}

TEST(Curvature, RiemannSymmetriesAndTraces) {
  PotentialInstance inst = make_manufactured(2, 42);
  Rng rng(9);
  Box box = inst.sample_box();
  for (int k = 0; k < 8; ++k) {
    Vec x = sample_point(box, rng);
    CurvaturePack cp = curvature_pack(inst, x);
    const int n = 2;
    for (int i = 0; i < n; ++i)
      for (int kk = 0; kk < n; ++kk)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) {
            EXPECT_NEAR(cp.riemann.at({i, kk, j, l}), -cp.riemann.at({kk, i, j, l}), 1e-10);
            EXPECT_NEAR(cp.riemann.at({i, kk, j, l}), cp.riemann.at({j, l, i, kk}), 1e-10);
          }
    EXPECT_LT((cp.ricci - cp.ricci_direct).norm(), 1e-10);
    // two-route Bakry-Emery equality
    EXPECT_LT((cp.ricci_mu - cp.ricci_mu_alt).norm(), 1e-9);
  }
}

TEST(Pencil, Examples) {
  PotentialInstance orthant = make_orthant(2);
  Vec x{1.0, 2.0};
  MetricPack mp = metric_pack(orthant, x);
  EXPECT_NEAR(pencil_max_eig(mp.h, mp.h), 1.0, 1e-12);
  EXPECT_NEAR(pencil_max_eig(mp.g, mp.h), 2.0, 1e-12);  // g = 2h on the orthant
  Mat bad = -Mat::Identity(2, 2);
  EXPECT_THROW(pencil_max_eig(mp.h, bad), EvalError);
}

TEST(SymmetricProduct, Examples) {
  PotentialInstance orthant = make_orthant(2);
  Vec x{1.0, 2.0};
  MetricPack mp = metric_pack(orthant, x);
  EXPECT_LT((symmetric_product(mp.h, mp.h, mp.h_inv) - mp.h).norm(), 1e-12);
  EXPECT_LT((symmetric_product(mp.g, mp.h, mp.h_inv) - mp.g).norm(), 1e-12);

  PotentialInstance sine = make_sine1d(1.0);
  Vec p{M_PI / 3.0};
  CurvaturePack cp = curvature_pack(sine, p);
  Mat r = symmetric_product(cp.mp.g, cp.ricci_mu, cp.mp.h_inv);
  EXPECT_NEAR(r(0, 0), -0.5, 1e-12);
}

TEST(Evaluate, MetricAndGDiagrams) {
  PotentialInstance orthant = make_orthant(2);
  Vec x{1.0, 2.0};
  DenseTensor g = evaluate_diagram(sums::g_diagram(), orthant, x);
  EXPECT_NEAR(g.at({0, 0}), 4.0, 1e-12);
  EXPECT_NEAR(g.at({1, 1}), 1.0, 1e-12);
  EXPECT_NEAR(g.at({0, 1}), 0.0, 1e-12);

  DenseTensor h = evaluate_diagram(DiagramSum::of(star(VertexKind::Phi, 2)), orthant, x);
  EXPECT_NEAR(h.at({0, 0}), 2.0, 1e-14);
  EXPECT_NEAR(h.at({1, 1}), 0.5, 1e-14);
}

TEST(Evaluate, LoweredWTwoLegDiagram) {
  // Phi_ai Phi_bj W^ab on the linear Gaussian pair: sigma^2 * (1/sigma^2) = 1
  PotentialInstance gp = make_gauss_pair_1d(0.5);
  Vec x{0.7};
  DenseTensor w2 = evaluate_diagram(symmetrize(parse_diagrams("W(i,j)")), gp, x);
  EXPECT_NEAR(w2.at({0, 0}), 1.0, 1e-13);
}

TEST(Evaluate, DimensionScalar) {
  PotentialInstance inst = make_manufactured(2, 42);
  Vec x{0.1, -0.2};
  DiagramSum n_scalar = eliminate_loops(DiagramSum::of(phi_loop(0)));
  DenseTensor t = evaluate_diagram(n_scalar, inst, x);
  EXPECT_NEAR(t.value(), 2.0, 1e-14);
}

TEST(Evaluate, DiagramVersusDirectLoops) {
  PotentialInstance inst = make_manufactured(2, 42);
  Rng rng(31);
  Box box = inst.sample_box();
  for (int k = 0; k < 4; ++k) {
    Vec x = sample_point(box, rng);
    const int n = 2;
    CurvaturePack cp = curvature_pack(inst, x);
    const Mat& A = cp.mp.h_inv;

    // g via diagram vs metric_pack
    DenseTensor g = evaluate_diagram(sums::g_diagram(), inst, x);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) EXPECT_NEAR(g.at({i, j}), cp.mp.g(i, j), 1e-9);

    // 8 R_iabc R_j^abc via diagrams vs direct index loops over the Riemann array
    DenseTensor rr = evaluate_diagram(sums::rr8_sum(), inst, x);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double direct = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
              for (int a2 = 0; a2 < n; ++a2)
                for (int b2 = 0; b2 < n; ++b2)
                  for (int c2 = 0; c2 < n; ++c2)
                    direct += 8.0 * cp.riemann.at({i, a, b, c}) * A(a, a2) * A(b, b2) *
                              A(c, c2) * cp.riemann.at({j, a2, b2, c2});
        EXPECT_NEAR(rr.at({i, j}), direct, 1e-9) << i << j;
      }

    // nabla_p Phi_iab nabla^p Phi_j^ab via diagrams vs direct covariant loops
    DenseTensor gradsq = evaluate_diagram(sums::grad_phi3_square(), inst, x);
    const DenseTensor p3 = inst.phi(3, x);
    const DenseTensor p4 = inst.phi(4, x);
    DenseTensor covd3(n, 4);  // [p, i, a, b]
    for_each_index(n, 4, [&](const std::vector<int>& I) {
      const int p = I[0], i = I[1], a = I[2], b = I[3];
      double val = p4.at({i, a, b, p});
      for (int m = 0; m < n; ++m) {
        val -= cp.mp.christoffel.at({m, p, i}) * p3.at({m, a, b});
        val -= cp.mp.christoffel.at({m, p, a}) * p3.at({i, m, b});
        val -= cp.mp.christoffel.at({m, p, b}) * p3.at({i, a, m});
      }
      covd3.at(I) = val;
    });
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double direct = 0.0;
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q)
            for (int a = 0; a < n; ++a)
              for (int a2 = 0; a2 < n; ++a2)
                for (int b = 0; b < n; ++b)
                  for (int b2 = 0; b2 < n; ++b2)
                    direct += A(p, q) * A(a, a2) * A(b, b2) * covd3.at({p, i, a, b}) *
                              covd3.at({q, j, a2, b2});
        EXPECT_NEAR(gradsq.at({i, j}), direct, 1e-9);
      }
  }
}

TEST(Evaluate, PathNormalizationPreservesValue) {
  // evaluate a raw subdivided presentation against its canonical form
  PotentialInstance inst = make_manufactured(2, 42);
  Rng rng(17);
  Box box = inst.sample_box();
  BasicDiagram raw;  // Phi3(i,a,b) with edge b subdivided by a degree-2 vertex
  raw.verts = {VertexKind::Phi, VertexKind::Phi, VertexKind::Phi, VertexKind::Phi};
  raw.add_edge(0, 1);  // a: v0 - v1 direct
  raw.add_edge(0, 2);  // b: v0 - mid
  raw.add_edge(2, 3);  //    mid - v3... build: v0= Phi(i,a,b), v1 = Phi(a,j,k) etc
  raw.legs = {{0, '\0'}, {1, '\0'}, {1, '\0'}, {3, '\0'}, {3, '\0'}};
  BasicDiagram canon = canonical_form(raw);
  for (int k = 0; k < 5; ++k) {
    Vec x = sample_point(box, rng);
    DiagramEvaluator ev(inst, x);
    DenseTensor a = ev.eval_basic(raw, false).symmetrized();
    DenseTensor b = ev.eval_basic(canon, false).symmetrized();
    EXPECT_LT(max_rel(a, b), 1e-10);
  }
}

TEST(Evaluate, RewritesPreserveValue) {
  const PotentialInstance insts[] = {
      make_manufactured(2, 42),      make_orthant(2),       make_sine1d(1.0),
      make_quadratic_id(2),          make_gauss_pair_1d(0.5),
      make_perturbed_gauss_1d(0.2),
  };
  const DiagramSum inputs[] = {
      DiagramSum::of(star(VertexKind::Phi, 1)),
      DiagramSum::of(star(VertexKind::Phi, 2)),
      DiagramSum::of(star(VertexKind::Phi, 3)),
      sums::g_diagram(),
  };
  for (const auto& inst : insts) {
    Rng rng(derive_seed(23, inst.name()));
    Box box = inst.sample_box();
    for (int k = 0; k < 10; ++k) {
      Vec x = sample_point(box, rng);
      for (const auto& d : inputs) {
        // loop elimination preserves the value (the instance solves the equation)
        DiagramSum lap = weighted_laplacian(d);
        DiagramSum lap_elim = eliminate_loops(lap);
        if (inst.phi_max_order() >= 5) {
          DenseTensor a = evaluate_diagram(lap, inst, x);
          DenseTensor b = evaluate_diagram(lap_elim, inst, x);
          EXPECT_LT(max_rel(a, b), 1e-8) << inst.name();
        }
      }
      // contraction agrees with the tensor-level contraction
      DiagramSum p3 = DiagramSum::of(star(VertexKind::Phi, 3));
      DiagramSum c = contract(p3, p3, 2);
      DenseTensor lhs = evaluate_diagram(c, inst, x);
      MetricPack mp = metric_pack(inst, x);
      DenseTensor t3 = inst.phi(3, x);
      const int n = inst.dim();
      DenseTensor direct(n, 2);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int a = 0; a < n; ++a)
            for (int a2 = 0; a2 < n; ++a2)
              for (int b = 0; b < n; ++b)
                for (int b2 = 0; b2 < n; ++b2)
                  s += t3.at({i, a, b}) * mp.h_inv(a, a2) * mp.h_inv(b, b2) * t3.at({j, a2, b2});
          direct.at({i, j}) = s;
        }
      EXPECT_LT(max_rel(lhs, direct), 1e-9) << inst.name();
    }
  }
}

TEST(Evaluate, CovariantDerivativeMatchesFiniteDifferences) {
  PotentialInstance inst = make_manufactured(2, 42);
  Vec x{0.25, -0.4};
  DiagramSum p3 = DiagramSum::of(star(VertexKind::Phi, 3));
  DiagramSum grad = symmetrize(covariant_derivative(p3, 'p'));
  DenseTensor sym = evaluate_diagram(grad, inst, x);
  // direct covariant derivative from arrays (see DiagramVersusDirectLoops)
  CurvaturePack cp = curvature_pack(inst, x);
  const DenseTensor t3 = inst.phi(3, x);
  const DenseTensor t4 = inst.phi(4, x);
  const int n = 2;
  DenseTensor direct(n, 4);
  for_each_index(n, 4, [&](const std::vector<int>& I) {
    const int p = I[0], i = I[1], a = I[2], b = I[3];
    double val = t4.at({i, a, b, p});
    for (int m = 0; m < n; ++m) {
      val -= cp.mp.christoffel.at({m, p, i}) * t3.at({m, a, b});
      val -= cp.mp.christoffel.at({m, p, a}) * t3.at({i, m, b});
      val -= cp.mp.christoffel.at({m, p, b}) * t3.at({i, a, m});
    }
    direct.at(I) = val;
  });
  EXPECT_LT(max_rel(sym, direct.symmetrized()), 1e-10);
  // and the tensor really is symmetric
  EXPECT_LT(direct.asymmetry(), 1e-10);
}

TEST(FdLaplacian, MetricCompatibility) {
  // FD covariant derivative of h vanishes
  const PotentialInstance insts[] = {make_manufactured(2, 42), make_orthant(2)};
  for (const auto& inst : insts) {
    Rng rng(derive_seed(29, inst.name()));
    Vec x = sample_point(inst.sample_box(), rng);
    TensorField hfield = [&](const Vec& p) { return inst.phi(2, p); };
    const double s = 1e-3 * inst.fd_scale(x);
    DenseTensor coarse = detail::covd_fd(hfield, inst, x, s);
    DenseTensor fine = detail::covd_fd(hfield, inst, x, 0.5 * s);
    fine *= 4.0 / 3.0;
    coarse *= 1.0 / 3.0;
    DenseTensor covh = fine - coarse;
    EXPECT_LT(covh.max_abs(), 1e-8) << inst.name();
  }
}

TEST(FdLaplacian, ScalarLaplacianOnLinearFunctions) {
  // L Phi_i with quadratic Phi and V = W: both sides equal -V_i exactly
  PotentialInstance inst = make_quadratic_id(2);
  Vec x{0.4, -0.3};
  for (int i = 0; i < 2; ++i) {
    auto f = [&](const Vec& p) { return inst.phi(1, p)[static_cast<std::size_t>(i)]; };
    double lhs = scalar_weighted_laplacian_fd(f, inst, x);
    double rhs = -inst.v(1, x)[static_cast<std::size_t>(i)];
    EXPECT_NEAR(lhs, rhs, 1e-9);
  }
}

TEST(FdLaplacian, TensorLaplacianReproducesFirstOrderFormula) {
  // L Phi_i (tensor form) against the diagram closed form
  const PotentialInstance insts[] = {make_manufactured(2, 42), make_sine1d(1.0)};
  for (const auto& inst : insts) {
    Rng rng(derive_seed(41, inst.name()));
    for (int k = 0; k < 3; ++k) {
      Vec x = sample_point(inst.sample_box(), rng);
      TensorField grad = [&](const Vec& p) { return inst.phi(1, p); };
      DenseTensor lhs = weighted_laplacian_fd(grad, inst, x);
      DenseTensor rhs = evaluate_diagram(parse_diagrams(sums::lphi1_rhs()), inst, x);
      EXPECT_LT(max_rel(lhs, rhs), 1e-7) << inst.name();
    }
  }
}

TEST(Curvature, HTensorVanishesForLinearGaussPair) {
  PotentialInstance gp = make_gauss_pair_1d(0.5);
  Vec x{0.3};
  CurvaturePack cp = curvature_pack(gp, x);
  ASSERT_TRUE(cp.H.has_value());
  EXPECT_NEAR((*cp.H)(0, 0), 0.0, 1e-14);
}

TEST(Curvature, GeneralizedTensorSubtractsGradientSquare) {
  PotentialInstance sine = make_sine1d(1.0);
  Vec x{M_PI / 3.0};
  CurvaturePack cp = curvature_pack(sine, x);
  // P = -Phi/2 so P' = cot(x); Ric_mu,2n = -1 - cot^2 at n = 1, N = 2
  const double expected = -1.0 - std::pow(1.0 / std::tan(M_PI / 3.0), 2);
  EXPECT_NEAR(cp.ricci_mu_N(2.0)(0, 0), expected, 1e-12);
}

TEST(Evaluate, NestedLoopEliminationPreservesValue) {
  PotentialInstance inst = make_manufactured(2, 42);
  BasicDiagram d;  // fully traced fourth derivative
  d.verts.push_back(VertexKind::Phi);
  d.add_edge(0, 0);
  d.add_edge(0, 0);
  DiagramSum in = DiagramSum::of(d);
  DiagramSum out = eliminate_loops(in);
  Rng rng(53);
  Box box = inst.sample_box();
  for (int k = 0; k < 5; ++k) {
    Vec x = sample_point(box, rng);
    const double a = evaluate_diagram(in, inst, x).value();
    const double b = evaluate_diagram(out, inst, x).value();
    EXPECT_NEAR(a, b, 1e-8 * (1.0 + std::abs(a)));
  }
}

TEST(Evaluate, LabeledSymmetricSumsEvaluateSymmetric) {
  // the third-derivative Laplacian right side is a symmetric tensor even in
  // labeled mode
  PotentialInstance inst = make_manufactured(2, 42);
  Vec x{0.3, -0.6};
  DenseTensor t = evaluate_diagram(parse_diagrams(sums::d3_rhs()), inst, x);
  EXPECT_LT(t.asymmetry(), 1e-12);
}

TEST(Evaluate, LaplacianRulesValidOnLoopCarryingInput) {
  // apply the Laplacian rules to a diagram that already carries a loop (the
  // third-derivative trace) and compare against the finite-difference route
  PotentialInstance inst = make_manufactured(2, 42);
  DiagramSum in = DiagramSum::of(phi_loop(1));
  DiagramSum rhs_sum = eliminate_loops(weighted_laplacian(in));
  Rng rng(67);
  Box box = inst.sample_box();
  for (int k = 0; k < 3; ++k) {
    Vec x = sample_point(box, rng);
    TensorField f = [&](const Vec& p) { return evaluate_diagram(in, inst, p); };
    DenseTensor lhs = weighted_laplacian_fd(f, inst, x);
    DenseTensor rhs = evaluate_diagram(rhs_sum, inst, x);
    EXPECT_LT(max_rel(lhs, rhs), 1e-6);
  }
}

TEST(Curvature, HTensorMatrixRouteMatchesScalarRoute) {
  // the n-dimensional trace formula against the 1D scalar assembly
  PotentialInstance inst = make_perturbed_gauss_1d(0.2);
  Rng rng(71);
  Box box = inst.sample_box();
  for (int k = 0; k < 8; ++k) {
    Vec x = sample_point(box, rng);
    CurvaturePack cp = curvature_pack(inst, x);
    ASSERT_TRUE(cp.H.has_value());
    const double t = inst.phi(1, x)[0];
    const double p2 = inst.phi(2, x)[0];
    const double vw2 = inst.v(2, x)[0] + inst.w(2, {t})[0] * p2 * p2;
    const double vw3 = inst.v(3, x)[0] - inst.w(3, {t})[0] * p2 * p2 * p2;
    const double h_scalar = vw3 * vw3 / (vw2 * p2);
    EXPECT_NEAR((*cp.H)(0, 0), h_scalar, 1e-10 * (1.0 + std::abs(h_scalar)));
  }
}

TEST(Curvature, HTensorSymmetricIn2d) {
  PotentialInstance inst = make_manufactured(2, 42);
  Vec x{0.4, -0.2};
  CurvaturePack cp = curvature_pack(inst, x);
  ASSERT_TRUE(cp.H.has_value());
  EXPECT_NEAR((*cp.H)(0, 1), (*cp.H)(1, 0), 1e-12);
}

TEST(Instances, ManufacturedVRecoversLogBarrier) {
  // feeding the orthant potential with a flat target into the manufactured-V
  // chain rule returns V = -Phi up to an additive constant
  PotentialInstance orthant = make_orthant(2);
  auto phi_oracle = [&](int order, const Vec& p) { return orthant.phi(order, p); };
  auto w_oracle = [&](int order, const Vec&) { return DenseTensor(2, order); };
  Rng rng(83);
  Box box = orthant.sample_box();
  for (int k = 0; k < 6; ++k) {
    Vec x = sample_point(box, rng);
    for (int m = 1; m <= 3; ++m) {
      DenseTensor v = detail::ManufacturedV::eval(2, m, x, phi_oracle, w_oracle);
      DenseTensor expect = orthant.phi(m, x);
      expect *= -1.0;
      v -= expect;
      EXPECT_LT(v.max_abs(), 1e-10) << "order " << m;
    }
  }
}
