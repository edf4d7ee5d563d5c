#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "madiag/dsl.hpp"
#include "madiag/geometry.hpp"
#include "madiag/instance.hpp"
#include "madiag/report.hpp"
#include "madiag/rewrite.hpp"
#include "madiag/rng.hpp"
#include "madiag/standard_sums.hpp"
#include "madiag/transport1d.hpp"

namespace madiag {

struct CheckContext {
  int points = 20;
  double tol_override = 0.0;  // 0: per-check default
  std::uint64_t seed = 42;
};

struct CheckDef {
  std::string id;
  std::string suite;  // "identities" | "bounds" | "diagrams"
  std::function<bool(const PotentialInstance&)> applies;
  std::function<CheckResult(const PotentialInstance&, const CheckContext&)> run;
};

namespace checks_detail {

inline bool any_instance(const PotentialInstance&) { return true; }
inline bool ke_only(const PotentialInstance& i) { return i.tagged(InstTag::KEHyperbolic); }
inline bool cone_only(const PotentialInstance& i) { return i.tagged(InstTag::Cone); }
inline bool transport_1d(const PotentialInstance& i) {
  return i.tagged(InstTag::Transport) && i.dim() == 1;
}

/// Shared runner for two-route identity checks: both sides evaluated per
/// point, residual is the max componentwise gap scaled by (1 + |rhs|).
inline CheckResult run_identity(
    const std::string& id, const PotentialInstance& inst, const CheckContext& ctx,
    double default_tol,
    const std::function<DenseTensor(const Vec&)>& lhs,
    const std::function<DenseTensor(const Vec&)>& rhs, std::string notes = "") {
  CheckResult r;
  r.id = id;
  r.instance = inst.name();
  r.tolerance = ctx.tol_override > 0 ? ctx.tol_override : default_tol;
  r.notes = std::move(notes);
  Rng rng(derive_seed(ctx.seed, id + "|" + inst.name()));
  Box box = inst.sample_box();
  try {
    for (int k = 0; k < ctx.points; ++k) {
      Vec x = sample_point(box, rng);
      DenseTensor a = lhs(x);
      DenseTensor b = rhs(x);
      double worst = 0.0;
      for (std::size_t q = 0; q < a.size(); ++q)
        worst = std::max(worst, std::abs(a[q] - b[q]) / (1.0 + std::abs(b[q])));
      r.trace.emplace_back(x, worst);
      if (worst > r.max_abs_residual) {
        r.max_abs_residual = worst;
        r.worst_point = x;
      }
      ++r.points;
    }
  } catch (const EvalError& e) {
    return CheckResult::skipped(id, inst.name(), e.what());
  }
  r.status = r.max_abs_residual <= r.tolerance ? CheckResult::Status::Pass
                                               : CheckResult::Status::Fail;
  return r;
}

/// Shared runner for pointwise bound checks: `violation(x)` returns the
/// positive violation (0 when satisfied).
inline CheckResult run_bound(
    const std::string& id, const PotentialInstance& inst, const CheckContext& ctx,
    double default_tol, const std::function<double(const Vec&)>& violation,
    std::string notes = "") {
  CheckResult r;
  r.id = id;
  r.instance = inst.name();
  r.tolerance = ctx.tol_override > 0 ? ctx.tol_override : default_tol;
  r.notes = std::move(notes);
  Rng rng(derive_seed(ctx.seed, id + "|" + inst.name()));
  Box box = inst.sample_box();
  try {
    for (int k = 0; k < ctx.points; ++k) {
      Vec x = sample_point(box, rng);
      const double v = violation(x);
      r.trace.emplace_back(x, v);
      if (v > r.max_abs_residual) {
        r.max_abs_residual = v;
        r.worst_point = x;
      }
      ++r.points;
    }
  } catch (const EvalError& e) {
    return CheckResult::skipped(id, inst.name(), e.what());
  }
  r.status = r.max_abs_residual <= r.tolerance ? CheckResult::Status::Pass
                                               : CheckResult::Status::Fail;
  return r;
}

// analytic test scalar fields for the general first-order Laplacian lemma
struct TestFunction {
  std::string label;
  // returns derivative array of the requested order (0..3)
  std::function<DenseTensor(int, const Vec&)> deriv;
};

inline std::vector<TestFunction> test_functions(int n) {
  std::vector<TestFunction> fs;
  {
    Vec c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = 1.0 - 0.3 * i;
    fs.push_back({"sin", [n, c](int order, const Vec& x) {
                    double t = 0.3;
                    for (int i = 0; i < n; ++i)
                      t += c[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
                    DenseTensor out(n, order);
                    const double base = std::sin(t + order * M_PI / 2.0);
                    for_each_index(n, order, [&](const std::vector<int>& idx) {
                      double v = base;
                      for (int q : idx) v *= c[static_cast<std::size_t>(q)];
                      out.at(idx) = v;
                    });
                    return out;
                  }});
  }
  {
    Vec c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = 0.2 + 0.1 * i;
    fs.push_back({"exp", [n, c](int order, const Vec& x) {
                    double t = 0.0;
                    for (int i = 0; i < n; ++i)
                      t += c[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
                    DenseTensor out(n, order);
                    const double base = std::exp(t);
                    for_each_index(n, order, [&](const std::vector<int>& idx) {
                      double v = base;
                      for (int q : idx) v *= c[static_cast<std::size_t>(q)];
                      out.at(idx) = v;
                    });
                    return out;
                  }});
  }
  return fs;
}

// 1D helpers for the transport bounds
struct Transport1dQuantities {
  double h, g_h, H_h;  // h = Phi'', norms of g and H in the h sense
};

inline Transport1dQuantities transport_quantities(const PotentialInstance& inst, double x) {
  Transport1dQuantities q{};
  const Vec xv{x};
  const double p2 = inst.phi(2, xv)[0];
  const double p3 = inst.phi(3, xv)[0];
  const double t = inst.phi(1, xv)[0];
  const double g = p3 * p3 / (p2 * p2);
  const double v2 = inst.v(2, xv)[0];
  const double v3 = inst.v(3, xv)[0];
  const double w2 = inst.w(2, {t})[0];
  const double w3 = inst.w(3, {t})[0];
  const double vw2_low = v2 + w2 * p2 * p2;
  const double vw3_low = v3 - w3 * p2 * p2 * p2;
  const double H = vw3_low * vw3_low / (vw2_low * p2);
  q.h = p2;
  q.g_h = g / p2;
  q.H_h = H / p2;
  return q;
}

/// Second-derivative range of a density potential over its support.
inline std::pair<double, double> potential_d2_range(const PotentialInstance& inst, bool of_w,
                                                    double lo, double hi) {
  double mn = 1e300, mx = -1e300;
  const int m = 2001;
  for (int k = 0; k < m; ++k) {
    const double y = lo + (hi - lo) * k / (m - 1);
    const double d2 = of_w ? inst.w(2, {y})[0] : inst.v(2, {y})[0];
    mn = std::min(mn, d2);
    mx = std::max(mx, d2);
  }
  return {mn, mx};
}

/// Integration window for the source measure: exactly where e^{-V} drops to
/// 1e-14 of its peak. Beyond it the map's quantile inversion used by the
/// transport oracles loses meaning in double precision, so the truncation
/// point matters.
inline std::pair<double, double> mu_window(const PotentialInstance& inst) {
  double best = 0.0, bestv = inst.v(0, {0.0}).value();
  for (double t = -6.0; t <= 6.0; t += 0.1) {
    const double v = inst.v(0, {t}).value();
    if (v < bestv) {
      bestv = v;
      best = t;
    }
  }
  const double drop = std::log(1e14);
  auto cutoff = [&](double dir) {
    double r = 1.0;
    while (r < 64.0 && inst.v(0, {best + dir * r}).value() - bestv < drop) r *= 2.0;
    double a = r / 2.0, b = r;
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (a + b);
      (inst.v(0, {best + dir * m}).value() - bestv < drop ? a : b) = m;
    }
    return best + dir * 0.5 * (a + b);
  };
  return {cutoff(-1.0), cutoff(1.0)};
}

}  // namespace checks_detail

// ---------------------------------------------------------------------------
// identity checks
// ---------------------------------------------------------------------------

inline std::vector<CheckDef> identity_checks() {
  using namespace checks_detail;
  std::vector<CheckDef> cs;

  // d1: L[Phi_i] = -V_i = -W_i + trace(Phi3)
  cs.push_back({"d1", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const int n = inst.dim();
                  auto lhs = [&inst, n](const Vec& x) {
                    DenseTensor out(n, 1);
                    for (int i = 0; i < n; ++i) {
                      auto f = [&inst, i](const Vec& p) {
                        return inst.phi(1, p)[static_cast<std::size_t>(i)];
                      };
                      out[static_cast<std::size_t>(i)] = scalar_weighted_laplacian_fd(f, inst, x);
                    }
                    return out;
                  };
                  auto rhs = [&inst](const Vec& x) {
                    DenseTensor t = inst.v(1, x);
                    t *= -1.0;
                    return t;
                  };
                  CheckResult r = run_identity("d1", inst, ctx, 1e-6, lhs, rhs,
                                               "scalar FD Laplacian of the gradient vs -V_i");
                  if (r.status == CheckResult::Status::Pass) {
                    // second closed form: -W_i + trace form, checked closed-form only
                    auto rhs2 = [&inst](const Vec& x) {
                      return evaluate_diagram(parse_diagrams(sums::d1_rhs_trace()), inst, x);
                    };
                    CheckResult r2 = run_identity("d1", inst, ctx, 1e-9, rhs, rhs2);
                    if (r2.status == CheckResult::Status::Fail) {
                      r.status = CheckResult::Status::Fail;
                      r.notes += "; trace form disagrees with -V_i (residual " +
                                 std::to_string(r2.max_abs_residual) + ")";
                    }
                  }
                  return r;
                }});

  // d2: L[Phi_ij] = -V_ij + W_ij + g_ij
  cs.push_back({"d2", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const int n = inst.dim();
                  DiagramSum rhs_sum = parse_diagrams(sums::d2_rhs());
                  auto lhs = [&inst, n](const Vec& x) {
                    DenseTensor out(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) {
                        auto f = [&inst, i, j](const Vec& p) { return inst.phi(2, p).at({i, j}); };
                        out.at({i, j}) = scalar_weighted_laplacian_fd(f, inst, x);
                      }
                    return out;
                  };
                  auto rhs = [&inst, rhs_sum](const Vec& x) {
                    return evaluate_diagram(rhs_sum, inst, x);
                  };
                  return run_identity("d2", inst, ctx, 1e-6, lhs, rhs,
                                      "scalar FD Laplacian of the Hessian vs diagram closed form");
                }});

  // d3: L[Phi_ijk] = the five-shape sum
  cs.push_back({"d3", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const int n = inst.dim();
                  DiagramSum rhs_sum = parse_diagrams(sums::d3_rhs());
                  auto lhs = [&inst, n](const Vec& x) {
                    DenseTensor out(n, 3);
                    for_each_index(n, 3, [&](const std::vector<int>& idx) {
                      auto f = [&inst, idx](const Vec& p) { return inst.phi(3, p).at(idx); };
                      out.at(idx) = scalar_weighted_laplacian_fd(f, inst, x);
                    });
                    return out;
                  };
                  auto rhs = [&inst, rhs_sum](const Vec& x) {
                    return evaluate_diagram(rhs_sum, inst, x);
                  };
                  return run_identity("d3", inst, ctx, 1e-6, lhs, rhs,
                                      "scalar FD Laplacian of the third derivative vs diagram closed form");
                }});

  // lf_i: tensor Laplacian of a gradient one-form, generic f
  cs.push_back({"lf_i", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const int n = inst.dim();
                  CheckResult agg;
                  agg.id = "lf_i";
                  agg.instance = inst.name();
                  agg.tolerance = ctx.tol_override > 0 ? ctx.tol_override : 1e-6;
                  for (const auto& tf : test_functions(n)) {
                    auto lhs = [&inst, &tf](const Vec& x) {
                      TensorField df = [&inst, &tf](const Vec& p) { return tf.deriv(1, p); };
                      return weighted_laplacian_fd(df, inst, x);
                    };
                    auto rhs = [&inst, &tf, n](const Vec& x) {
                      // Phi^mk f_imk - Phi_i^mk f_mk - W^a f_ai
                      //   + (1/2)(V_ik - W_ik) f^k + (1/4) g_i^k f_k
                      MetricPack mp = metric_pack(inst, x);
                      const Mat& A = mp.h_inv;
                      const DenseTensor p3 = inst.phi(3, x);
                      const DenseTensor f1 = tf.deriv(1, x);
                      const DenseTensor f2 = tf.deriv(2, x);
                      const DenseTensor f3 = tf.deriv(3, x);
                      const Vec y = inst.grad_phi(x);
                      const DenseTensor w1u = inst.w(1, y);
                      const DenseTensor v2 = inst.v(2, x);
                      const DenseTensor w2l = lower_all(inst.w(2, y), mp.h);
                      DenseTensor out(n, 1);
                      for (int i = 0; i < n; ++i) {
                        double s = 0.0;
                        for (int m = 0; m < n; ++m)
                          for (int k = 0; k < n; ++k) {
                            s += A(m, k) * f3.at({i, m, k});
                            for (int a = 0; a < n; ++a)
                              for (int b = 0; b < n; ++b)
                                s -= A(m, a) * A(k, b) * p3.at({i, a, b}) * f2.at({m, k});
                          }
                        for (int a = 0; a < n; ++a)
                          s -= w1u[static_cast<std::size_t>(a)] * f2.at({a, i});
                        for (int k = 0; k < n; ++k)
                          for (int a = 0; a < n; ++a) {
                            s += 0.5 * (v2.at({i, k}) - w2l.at({i, k})) * A(k, a) *
                                 f1[static_cast<std::size_t>(a)];
                            s += 0.25 * mp.g(i, k) * A(k, a) * f1[static_cast<std::size_t>(a)];
                          }
                        out[static_cast<std::size_t>(i)] = s;
                      }
                      return out;
                    };
                    CheckResult r = run_identity("lf_i", inst, ctx, agg.tolerance, lhs, rhs);
                    if (r.status == CheckResult::Status::Skipped) return r;
                    agg.points += r.points;
                    for (auto& t : r.trace) agg.trace.push_back(std::move(t));
                    if (r.max_abs_residual > agg.max_abs_residual) {
                      agg.max_abs_residual = r.max_abs_residual;
                      agg.worst_point = r.worst_point;
                    }
                  }
                  agg.notes = "generic-gradient Laplacian formula, test fields sin/exp";
                  agg.status = agg.max_abs_residual <= agg.tolerance
                                   ? CheckResult::Status::Pass
                                   : CheckResult::Status::Fail;
                  return agg;
                }});

  // cor32: tensor Laplacian of Phi_i
  cs.push_back({"cor32", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  DiagramSum rhs_sum = parse_diagrams(sums::lphi1_rhs());
                  auto lhs = [&inst](const Vec& x) {
                    TensorField grad = [&inst](const Vec& p) { return inst.phi(1, p); };
                    return weighted_laplacian_fd(grad, inst, x);
                  };
                  auto rhs = [&inst, rhs_sum](const Vec& x) {
                    return evaluate_diagram(rhs_sum, inst, x);
                  };
                  return run_identity("cor32", inst, ctx, 1e-6, lhs, rhs,
                                      "tensor FD Laplacian of the gradient vs diagram closed form");
                }});

  // lphi3: tensor Laplacian of Phi_iab
  cs.push_back({"lphi3", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  DiagramSum rhs_sum = parse_diagrams(sums::lphi3_rhs());
                  auto lhs = [&inst](const Vec& x) {
                    TensorField t3 = [&inst](const Vec& p) { return inst.phi(3, p); };
                    return weighted_laplacian_fd(t3, inst, x);
                  };
                  auto rhs = [&inst, rhs_sum](const Vec& x) {
                    return evaluate_diagram(rhs_sum, inst, x);
                  };
                  return run_identity("lphi3", inst, ctx, 1e-6, lhs, rhs,
                                      "tensor FD Laplacian of the third derivative vs diagram closed form");
                }});

  // lg: tensor Laplacian of the Calabi tensor, general form
  cs.push_back({"lg", "identities", any_instance,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  DiagramSum rhs_sum = sums::lg_rhs_full();
                  auto lhs = [&inst](const Vec& x) {
                    TensorField gf = [&inst](const Vec& p) {
                      MetricPack mp = metric_pack(inst, p);
                      const int n = inst.dim();
                      DenseTensor t(n, 2);
                      for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) t.at({i, j}) = mp.g(i, j);
                      return t;
                    };
                    return weighted_laplacian_fd(gf, inst, x);
                  };
                  auto rhs = [&inst, rhs_sum](const Vec& x) {
                    return evaluate_diagram(rhs_sum, inst, x);
                  };
                  return run_identity("lg", inst, ctx, 1e-6, lhs, rhs,
                                      "tensor FD Laplacian of g vs full diagram right side");
                }});

  // lg_hke: specialization on solutions of the KE equation
  cs.push_back({"lg_hke", "identities", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  DiagramSum gradsq = sums::grad_phi3_square();
                  DiagramSum rr8 = sums::rr8_sum();
                  auto lhs = [&inst](const Vec& x) {
                    TensorField gf = [&inst](const Vec& p) {
                      MetricPack mp = metric_pack(inst, p);
                      const int n = inst.dim();
                      DenseTensor t(n, 2);
                      for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) t.at({i, j}) = mp.g(i, j);
                      return t;
                    };
                    return weighted_laplacian_fd(gf, inst, x);
                  };
                  auto rhs = [&inst, gradsq, rr8](const Vec& x) {
                    CurvaturePack cp = curvature_pack(inst, x);
                    const int n = inst.dim();
                    Mat m = cp.mp.g * cp.mp.h_inv * cp.ricci_mu;
                    Mat sym = m + m.transpose();
                    DenseTensor out(n, 2);
                    DenseTensor a = evaluate_diagram(gradsq, inst, x);
                    DenseTensor b = evaluate_diagram(rr8, inst, x);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j)
                        out.at({i, j}) = sym(i, j) + 2.0 * a.at({i, j}) + b.at({i, j});
                    return out;
                  };
                  return run_identity("lg_hke", inst, ctx, 1e-6, lhs, rhs,
                                      "KE form: g-Ric_mu symmetrization plus gradient and curvature squares");
                }});

  // g_ric_relation: g = 4 Ric_mu - 2 alpha h (closed forms only)
  cs.push_back({"g_ric_relation", "identities", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const double alpha = *inst.alpha();
                  auto lhs = [&inst](const Vec& x) {
                    MetricPack mp = metric_pack(inst, x);
                    const int n = inst.dim();
                    DenseTensor t(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) t.at({i, j}) = mp.g(i, j);
                    return t;
                  };
                  auto rhs = [&inst, alpha](const Vec& x) {
                    CurvaturePack cp = curvature_pack(inst, x);
                    Mat m = 4.0 * cp.ricci_mu - 2.0 * alpha * cp.mp.h;
                    const int n = inst.dim();
                    DenseTensor t(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) t.at({i, j}) = m(i, j);
                    return t;
                  };
                  return run_identity("g_ric_relation", inst, ctx, 1e-9, lhs, rhs,
                                      "g vs 4 Ric_mu - 2 alpha h");
                }});

  // zerohess: Hess_h Phi = 0 on cones
  cs.push_back({"zerohess", "identities", cone_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto lhs = [&inst](const Vec& x) {
                    const int n = inst.dim();
                    const DenseTensor p1 = inst.phi(1, x);
                    const DenseTensor p2 = inst.phi(2, x);
                    const DenseTensor p3 = inst.phi(3, x);
                    MetricPack mp = metric_pack(inst, x);
                    DenseTensor out(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) {
                        double s = p2.at({i, j});
                        for (int k = 0; k < n; ++k)
                          for (int a = 0; a < n; ++a)
                            s -= 0.5 * mp.h_inv(k, a) * p1[static_cast<std::size_t>(a)] *
                                 p3.at({i, j, k});
                        out.at({i, j}) = s;
                      }
                    return out;
                  };
                  auto rhs = [&inst](const Vec&) { return DenseTensor(inst.dim(), 2); };
                  return run_identity("zerohess", inst, ctx, 1e-9, lhs, rhs,
                                      "logarithmic homogeneity: Hess_h Phi = 0");
                }});

  // rxx_zero: R(i, x, j, x) = 0 on cones
  cs.push_back({"rxx_zero", "identities", cone_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto lhs = [&inst](const Vec& x) {
                    const int n = inst.dim();
                    CurvaturePack cp = curvature_pack(inst, x);
                    DenseTensor out(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int k = 0; k < n; ++k)
                          for (int l = 0; l < n; ++l)
                            s += cp.riemann.at({i, k, j, l}) * x[static_cast<std::size_t>(k)] *
                                 x[static_cast<std::size_t>(l)];
                        out.at({i, j}) = s;
                      }
                    return out;
                  };
                  auto rhs = [&inst](const Vec&) { return DenseTensor(inst.dim(), 2); };
                  return run_identity("rxx_zero", inst, ctx, 1e-9, lhs, rhs,
                                      "radial curvature restriction vanishes on cones");
                }});

  // cone_relations: Euler relation and its two differentiated forms
  cs.push_back({"cone_relations", "identities", cone_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const double alpha = *inst.alpha();
                  auto lhs = [&inst, alpha](const Vec& x) {
                    const int n = inst.dim();
                    const DenseTensor p1 = inst.phi(1, x);
                    const DenseTensor p2 = inst.phi(2, x);
                    const DenseTensor p3 = inst.phi(3, x);
                    double worst = 0.0;
                    double euler = -2.0 * n / alpha;
                    for (int i = 0; i < n; ++i)
                      euler += p1[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
                    worst = std::abs(euler);
                    for (int i = 0; i < n; ++i) {
                      double first = p1[static_cast<std::size_t>(i)];
                      for (int j = 0; j < n; ++j)
                        first += p2.at({i, j}) * x[static_cast<std::size_t>(j)];
                      worst = std::max(worst, std::abs(first));
                      for (int j = 0; j < n; ++j) {
                        double second = 2.0 * p2.at({i, j});
                        for (int k = 0; k < n; ++k)
                          second += p3.at({i, j, k}) * x[static_cast<std::size_t>(k)];
                        worst = std::max(worst, std::abs(second));
                      }
                    }
                    return DenseTensor::scalar(worst);
                  };
                  auto rhs = [](const Vec&) { return DenseTensor::scalar(0.0); };
                  return run_identity(
                      "cone_relations", inst, ctx, 1e-9, lhs, rhs,
                      "Euler relation Phi_i x^i = 2n/alpha and both differentiated forms");
                }});

  return cs;
}

// ---------------------------------------------------------------------------
// bound checks
// ---------------------------------------------------------------------------

inline std::vector<CheckDef> bound_checks() {
  using namespace checks_detail;
  std::vector<CheckDef> cs;

  cs.push_back({"ricci_mu_nonpos", "bounds", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const bool is_sine = inst.name().rfind("sine1d", 0) == 0;
                  auto violation = [&inst, is_sine](const Vec& x) {
                    CurvaturePack cp = curvature_pack(inst, x);
                    const double lam = pencil_max_eig(cp.ricci_mu, cp.mp.h);
                    double v = std::max(0.0, lam);
                    if (is_sine) {
                      const double closed = -std::pow(std::sin(x[0]), 2) / 2.0;
                      v = std::max(v, std::abs(lam - closed));
                    }
                    return v;
                  };
                  return run_bound("ricci_mu_nonpos", inst, ctx, 1e-9, violation,
                                   is_sine ? "max h-eigenvalue of Ric_mu <= 0; matches -sin^2(x)/2"
                                           : "max h-eigenvalue of Ric_mu <= 0 (expected exactly 0)");
                }});

  cs.push_back({"lric_ineq", "bounds", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const double alpha = *inst.alpha();
                  double eq3_min = 1e300;
                  auto ric_field = [&inst](const Vec& p) {
                    CurvaturePack cp = curvature_pack(inst, p);
                    const int n = inst.dim();
                    DenseTensor t(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) t.at({i, j}) = cp.ricci_mu_alt(i, j);
                    return t;
                  };
                  auto violation = [&inst, alpha, ric_field, &eq3_min](const Vec& x) {
                    const int n = inst.dim();
                    DenseTensor l = weighted_laplacian_fd(ric_field, inst, x);
                    CurvaturePack cp = curvature_pack(inst, x);
                    Mat lm(n, n);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) lm(i, j) = l.at({i, j});
                    const Mat ric2 = symmetric_product(cp.ricci_mu, cp.ricci_mu, cp.mp.h_inv);
                    const Mat rhs = 2.0 * ric2 - alpha * cp.ricci_mu;
                    const double gap = pencil_min_eig(lm - rhs, cp.mp.h);
                    // headline form of the inequality, recorded not asserted
                    const Mat rhs_eq3 =
                        4.0 * symmetric_product(cp.ricci_mu, cp.mp.g, cp.mp.h_inv);
                    eq3_min = std::min(eq3_min, pencil_min_eig(lm - rhs_eq3, cp.mp.h));
                    return std::max(0.0, -gap);
                  };
                  CheckResult r = run_bound("lric_ineq", inst, ctx, 1e-5, violation,
                                            "L Ric_mu >= 2 Ric_mu^2 - alpha Ric_mu (proof form)");
                  std::ostringstream os;
                  os << r.notes << "; headline-form min gap eigenvalue " << eq3_min;
                  r.notes = os.str();
                  return r;
                }});

  cs.push_back({"ric2n_nonneg", "bounds", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto violation = [&inst](const Vec& x) {
                    CurvaturePack cp = curvature_pack(inst, x);
                    const double lam = pencil_min_eig(cp.ricci_mu_N(2.0 * inst.dim()), cp.mp.h);
                    return std::max(0.0, -lam);
                  };
                  return run_bound(
                      "ric2n_nonneg", inst, ctx, 1e-9, violation,
                      "Ric_{mu,2n} >= 0 as stated; on these solutions the tensor equals "
                      "(alpha/2) h plus a nonnegative part, so the sharp floor is alpha/2 = -1/2 "
                      "and pointwise nonnegativity fails (see ric2n_ke_floor)");
                }});

  cs.push_back({"ric2n_ke_floor", "bounds", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  const double alpha = *inst.alpha();
                  auto violation = [&inst, alpha](const Vec& x) {
                    CurvaturePack cp = curvature_pack(inst, x);
                    const Mat q = cp.ricci_mu_N(2.0 * inst.dim()) - 0.5 * alpha * cp.mp.h;
                    return std::max(0.0, -pencil_min_eig(q, cp.mp.h));
                  };
                  return run_bound(
                      "ric2n_ke_floor", inst, ctx, 1e-9, violation,
                      "derived sharp floor: Ric_{mu,2n} >= (alpha/2) h, equality in the radial "
                      "direction; the lower bound needed by the maximum principle");
                }});

  cs.push_back({"levelset_ricci", "bounds",
                [](const PotentialInstance& i) {
                  return i.tagged(InstTag::Cone) && i.dim() >= 2;
                },
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto violation = [&inst](const Vec& x) {
                    const int n = inst.dim();
                    CurvaturePack cp = curvature_pack(inst, x);
                    const DenseTensor p1 = inst.phi(1, x);
                    // basis of the tangent space {v : dPhi(v) = 0}
                    Eigen::VectorXd dphi(n);
                    for (int i = 0; i < n; ++i) dphi(i) = p1[static_cast<std::size_t>(i)];
                    Eigen::FullPivLU<Mat> lu(dphi.transpose());
                    Mat B = lu.kernel();  // n x (n-1)
                    const Mat ric_t = B.transpose() * cp.ricci * B;
                    const Mat h_t = B.transpose() * cp.mp.h * B;
                    return std::max(0.0, pencil_max_eig(ric_t, h_t));
                  };
                  return run_bound("levelset_ricci", inst, ctx, 1e-9, violation,
                                   "Ricci restricted to level-set tangents is nonpositive "
                                   "(II = 0 and radial curvature vanish on cones)");
                }});

  cs.push_back({"caffarelli2", "bounds", transport_1d,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto [vlo, vhi] = mu_window(inst);
                  auto [cv, Cv] = potential_d2_range(inst, false, vlo, vhi);
                  auto [cw, Cw] = potential_d2_range(inst, true, vlo - 2, vhi + 2);
                  (void)cv;
                  (void)Cw;
                  if (cw <= 0) return CheckResult::skipped("caffarelli2", inst.name(),
                                                           "target not uniformly convex");
                  const double bound = std::sqrt(Cv / cw);
                  const bool equality_case = inst.name().rfind("gauss_pair_1d", 0) == 0;
                  auto violation = [&inst, bound, equality_case](const Vec& x) {
                    const double p2 = inst.phi(2, x)[0];
                    double v = std::max(0.0, p2 - bound);
                    if (equality_case) v = std::max(v, std::abs(p2 - bound));
                    return v;
                  };
                  std::ostringstream os;
                  os << "second-order contraction bound sqrt(C/c) = " << bound
                     << " with C = sup V'' = " << Cv << ", c = inf W'' = " << cw
                     << (equality_case ? "; linear map attains the bound exactly" : "");
                  return run_bound("caffarelli2", inst, ctx, equality_case ? 1e-10 : 1e-8,
                                   violation, os.str());
                }});

  cs.push_back({"prop51", "bounds", transport_1d,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto violation = [&inst](const Vec& x) {
                    auto q = transport_quantities(inst, x[0]);
                    auto gnorm = [&inst](const Vec& p) {
                      return transport_quantities(inst, p[0]).g_h;
                    };
                    const double lg = scalar_weighted_laplacian_fd(gnorm, inst, x);
                    const double lhs = q.H_h + 2.0 * lg;
                    return std::max(0.0, q.g_h * q.g_h - lhs);
                  };
                  return run_bound("prop51", inst, ctx, 1e-5, violation,
                                   "third-order bound |H|_h + 2 L|g|_h >= |g|_h^2 "
                                   "(scalar FD Laplacian for L|g|_h)");
                }});

  cs.push_back({"lg_odot", "bounds", ke_only,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto g_field = [&inst](const Vec& p) {
                    MetricPack mp = metric_pack(inst, p);
                    const int n = inst.dim();
                    DenseTensor t(n, 2);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) t.at({i, j}) = mp.g(i, j);
                    return t;
                  };
                  auto violation = [&inst, g_field](const Vec& x) {
                    const int n = inst.dim();
                    DenseTensor l = weighted_laplacian_fd(g_field, inst, x);
                    CurvaturePack cp = curvature_pack(inst, x);
                    Mat lm(n, n);
                    for (int i = 0; i < n; ++i)
                      for (int j = 0; j < n; ++j) lm(i, j) = l.at({i, j});
                    const Mat rhs = 2.0 * symmetric_product(cp.mp.g, cp.ricci_mu, cp.mp.h_inv);
                    const double scale = 1.0 + lm.cwiseAbs().maxCoeff();
                    return std::max(0.0, -pencil_min_eig(lm - rhs, cp.mp.h) / scale);
                  };
                  return run_bound("lg_odot", inst, ctx, 1e-6, violation,
                                   "L g >= 2 g . Ric_mu, violation scaled by dominant magnitude");
                }});

  cs.push_back({"lp_moment", "bounds", transport_1d,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto [lo, hi] = mu_window(inst);
                  auto dens = [&inst](double t) { return std::exp(-inst.v(0, {t}).value()); };
                  const double z = detail::adaptive_simpson(dens, lo, hi, 1e-13);
                  auto lhs_f = [&inst, &dens, z](double t) {
                    auto q = transport_quantities(inst, t);
                    return std::pow(q.g_h, 4) * dens(t) / z;
                  };
                  auto rhs_f = [&inst, &dens, z](double t) {
                    auto q = transport_quantities(inst, t);
                    return std::pow(q.H_h, 2) * dens(t) / z;
                  };
                  double lhs = 0.0, rhs = 0.0;
                  try {
                    // the acceptance budget for quadrature error is 1e-6;
                    // 1e-8 keeps a two-decade margin without deep recursion
                    lhs = detail::adaptive_simpson(lhs_f, lo, hi, 1e-8);
                    rhs = detail::adaptive_simpson(rhs_f, lo, hi, 1e-8);
                  } catch (const EvalError& e) {
                    return CheckResult::skipped("lp_moment", inst.name(), e.what());
                  }
                  CheckResult r;
                  r.id = "lp_moment";
                  r.instance = inst.name();
                  r.points = ctx.points;
                  r.tolerance = ctx.tol_override > 0 ? ctx.tol_override : 1e-6;
                  r.max_abs_residual = std::max(0.0, lhs - rhs);
                  r.worst_point = {lo, hi};
                  std::ostringstream os;
                  os << "p = 4 moment inequality: int |g|^4 dmu = " << lhs
                     << " <= int |H|^2 dmu = " << rhs << " (adaptive quadrature)";
                  r.notes = os.str();
                  r.status = r.max_abs_residual <= r.tolerance ? CheckResult::Status::Pass
                                                               : CheckResult::Status::Fail;
                  return r;
                }});

  cs.push_back({"g_sqrtK", "bounds", transport_1d,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  Box box = inst.sample_box();
                  double K = 0.0, gmax = 0.0;
                  const int m = 400;
                  for (int k = 0; k < m; ++k) {
                    const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * k / (m - 1);
                    auto q = transport_quantities(inst, x);
                    K = std::max(K, q.H_h);
                    gmax = std::max(gmax, q.g_h);
                  }
                  auto violation = [&inst, K](const Vec& x) {
                    auto q = transport_quantities(inst, x[0]);
                    return std::max(0.0, q.g_h - std::sqrt(K));
                  };
                  std::ostringstream os;
                  os << "norm bound |g|_h <= sqrt(K) with K = sup |H|_h = " << K
                     << " (sampled sup; max |g|_h seen " << gmax << ")";
                  return run_bound("g_sqrtK", inst, ctx, 1e-8, violation, os.str());
                }});

  cs.push_back({"phi3_bound", "bounds", transport_1d,
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto [vlo, vhi] = mu_window(inst);
                  auto [cv, Cv] = potential_d2_range(inst, false, vlo, vhi);
                  auto [cw, Cw] = potential_d2_range(inst, true, vlo - 2, vhi + 2);
                  const double c = std::min(cv, cw), C = std::max(Cv, Cw);
                  if (c <= 0)
                    return CheckResult::skipped("phi3_bound", inst.name(),
                                                "potentials not uniformly convex");
                  double B = 0.0;
                  const int m = 2001;
                  for (int k = 0; k < m; ++k) {
                    const double y = vlo + (vhi - vlo) * k / (m - 1);
                    B = std::max(B, std::pow(inst.v(3, {y})[0], 2));
                    B = std::max(B, std::pow(inst.w(3, {y})[0], 2));
                  }
                  const double lo2 = c / C;                // lower bound on Phi''^2
                  const double hi = std::sqrt(C / c);      // upper bound on Phi''
                  const double KH = 2.0 * B * (1.0 + std::pow(hi, 6)) / (c * (1.0 + lo2) * lo2);
                  const double bound = std::sqrt(KH) * std::pow(hi, 3);
                  auto violation = [&inst, bound](const Vec& x) {
                    return std::max(0.0, std::pow(inst.phi(3, x)[0], 2) - bound);
                  };
                  std::ostringstream os;
                  os << "uniform third-order bound sup (Phi''')^2 <= " << bound
                     << " from c = " << c << ", C = " << C << ", B = " << B
                     << "; stated D(c,C)*B form gives D = " << (B > 0 ? bound / B : 0.0);
                  return run_bound("phi3_bound", inst, ctx, 1e-8, violation, os.str());
                }});

  cs.push_back({"phi3_gauss", "bounds",
                [](const PotentialInstance& i) {
                  // needs a Gaussian target: the linear pair or the manufactured
                  // perturbation of it
                  return i.dim() == 1 && i.tagged(InstTag::Transport) &&
                         (i.name().rfind("gauss_pair_1d", 0) == 0 ||
                          i.name().rfind("perturbed_gauss_1d", 0) == 0 ||
                          i.name().find("->gauss") != std::string::npos);
                },
                [](const PotentialInstance& inst, const CheckContext& ctx) {
                  auto [vlo, vhi] = mu_window(inst);
                  auto [cv, Cv] = potential_d2_range(inst, false, vlo, vhi);
                  (void)Cv;
                  const double Cw = inst.w(2, {0.0})[0];  // constant for Gaussian targets
                  if (cv <= 0)
                    return CheckResult::skipped("phi3_gauss", inst.name(),
                                                "source not uniformly convex");
                  double BV = 0.0;
                  const int m = 2001;
                  for (int k = 0; k < m; ++k) {
                    const double y = vlo + (vhi - vlo) * k / (m - 1);
                    BV = std::max(BV, std::pow(inst.v(3, {y})[0], 2) / inst.v(2, {y})[0]);
                  }
                  const double K_impl = (Cw / cv) * BV;
                  Box box = inst.sample_box();
                  double hmax = 0.0;
                  const int mm = 400;
                  for (int k = 0; k < mm; ++k) {
                    const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * k / (mm - 1);
                    hmax = std::max(hmax, transport_quantities(inst, x).H_h);
                  }
                  auto violation = [&inst, hmax, K_impl](const Vec& x) {
                    auto q = transport_quantities(inst, x[0]);
                    double v = std::max(0.0, q.g_h * q.g_h - hmax);
                    v = std::max(v, std::max(0.0, q.H_h - K_impl));
                    return v;
                  };
                  std::ostringstream os;
                  os << "Gaussian-target chain |g|_h^2 <= sup|H|_h = " << hmax
                     << " <= K = " << K_impl
                     << " with K = (sup W''/inf V'') * sup (V''')^2/V''; the stated constant "
                        "uses the quadratic-form norm and equals K/2 = "
                     << K_impl / 2.0;
                  return run_bound("phi3_gauss", inst, ctx, 1e-8, violation, os.str());
                }});

  return cs;
}

// ---------------------------------------------------------------------------
// exact diagram assertions
// ---------------------------------------------------------------------------

namespace checks_detail {

inline CheckResult exact_result(const std::string& id, bool ok, const std::string& notes) {
  CheckResult r;
  r.id = id;
  r.instance = "-";
  r.points = 0;
  r.tolerance = 0.0;
  r.max_abs_residual = ok ? 0.0 : 1.0;
  r.status = ok ? CheckResult::Status::Pass : CheckResult::Status::Fail;
  r.notes = notes;
  return r;
}

}  // namespace checks_detail

/// The six exact rational assertions (no instances, no tolerances).
inline std::vector<CheckResult> run_diagram_assertions() {
  using checks_detail::exact_result;
  std::vector<CheckResult> out;

  {
    DiagramSum s = symmetrize(parse_diagrams(sums::d3_rhs()));
    bool ok = s.size() == 5;
    auto coeff = [&s](const char* dsl) {
      DiagramSum probe = symmetrize(parse_diagrams(dsl));
      auto it = s.terms().find(probe.terms().begin()->first);
      return it == s.terms().end() ? Rational(0) : it->second.coeff;
    };
    ok = ok && coeff("V(i,j,k)") == Rational(-1) && coeff("W(i,j,k)") == Rational(1) &&
         coeff("W(s,i)*Phi(s,j,k)") == Rational(3) &&
         coeff("Phi(a,b,i)*Phi(a,b,j,k)") == Rational(3) &&
         coeff("Phi(a,b,i)*Phi(b,c,j)*Phi(c,a,k)") == Rational(-2);
    out.push_back(exact_result("fig1_d3_parse", ok,
                               "third-derivative Laplacian parses to five shapes "
                               "weighted -1, 1, 3, 3, -2"));
  }
  {
    DiagramSum d = symmetrize(covariant_derivative(DiagramSum::of(star(VertexKind::Phi, 3)), 'p'));
    bool ok = (d == sums::grad_phi3_sum()) && d.size() == 2;
    out.push_back(exact_result("fig3_derivative", ok,
                               "covariant derivative of the third-derivative vertex: "
                               "two shapes weighted 1 and -3/2"));
  }
  {
    DiagramSum l = eliminate_loops(weighted_laplacian(parse_diagrams("Phi(i)")));
    bool ok = l == parse_diagrams(sums::lphi1_rhs());
    out.push_back(exact_result("cor32_diagram", ok,
                               "Laplacian of the gradient equals the first-order formula"));
  }
  {
    DiagramSum l =
        symmetrize(eliminate_loops(weighted_laplacian(DiagramSum::of(star(VertexKind::Phi, 3)))));
    bool ok = l == symmetrize(parse_diagrams(sums::lphi3_rhs()));
    out.push_back(exact_result("lphi3_diagram", ok,
                               "Laplacian of the third-derivative vertex equals the "
                               "six-shape formula"));
  }
  {
    DiagramSum lg = eliminate_loops(weighted_laplacian(sums::g_diagram()));
    DiagramSum lhs = lg - Rational(2) * sums::grad_phi3_square() - sums::rr8_sum();
    bool ok = lhs == symmetrize(parse_diagrams(sums::lg_rhs_reduced()));
    out.push_back(exact_result("lg_diagram", ok,
                               "Laplacian of g minus gradient- and curvature-squares equals "
                               "the four-shape combination"));
  }
  {
    DiagramSum k2_lhs = DiagramSum::of(phi_loop(2));
    DiagramSum k2_rhs = symmetrize(parse_diagrams(sums::loop_k2_rhs()));
    DiagramSum dlhs = covariant_derivative(k2_lhs, 'p');
    DiagramSum drhs = covariant_derivative(k2_rhs, 'p');
    BasicDiagram k3 = phi_loop(2);
    k3.legs.push_back({0, 'p'});
    DiagramSum k3_sum = DiagramSum::of(k3);
    DiagramSum derived = eliminate_loops(drhs - (dlhs - k3_sum));
    bool ok = derived == eliminate_loops(k3_sum);
    out.push_back(exact_result("k3_from_k2", ok,
                               "three-endpoint loop rule re-derives from the two-endpoint "
                               "rule by differentiation"));
  }
  return out;
}

inline std::vector<CheckDef> all_checks() {
  std::vector<CheckDef> cs = identity_checks();
  std::vector<CheckDef> bs = bound_checks();
  cs.insert(cs.end(), bs.begin(), bs.end());
  return cs;
}

}  // namespace madiag
