#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "madiag/dense_tensor.hpp"
#include "madiag/rng.hpp"

namespace madiag {

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& m) : std::runtime_error(m) {}
};

enum class InstTag { Cone, KEHyperbolic, Transport, Manufactured };

using Vec = std::vector<double>;

/// A triple (Phi, V, W) satisfying the generalized Monge-Ampere equation
/// e^{-V} = e^{-W(grad Phi)} det D^2 Phi on a sampling domain, with raw
/// partial-derivative oracles. Phi derivatives are plain partials in x; V is
/// a function of x, W a function of the target coordinate y (checks compose
/// it with grad Phi themselves).
class InstanceImpl {
 public:
  virtual ~InstanceImpl() = default;
  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual Box sample_box() const = 0;
  virtual bool in_domain(const Vec& x) const = 0;
  virtual int phi_max_order() const { return 5; }
  virtual int phi_min_order() const { return 0; }
  virtual DenseTensor phi(int order, const Vec& x) const = 0;
  virtual DenseTensor v(int order, const Vec& x) const = 0;
  virtual DenseTensor w(int order, const Vec& y) const = 0;
  virtual std::optional<double> alpha() const { return std::nullopt; }
  virtual bool tagged(InstTag) const { return false; }
  /// Local length scale for finite-difference steps; instances with singular
  /// boundaries shrink it with the distance to the boundary.
  virtual double fd_scale(const Vec& x) const {
    double s = 1.0;
    for (double c : x) s = std::max(s, std::abs(c));
    return s;
  }
};

class PotentialInstance {
 public:
  PotentialInstance() = default;
  explicit PotentialInstance(std::shared_ptr<const InstanceImpl> impl)
      : impl_(std::move(impl)) {}

  bool valid() const { return impl_ != nullptr; }
  int dim() const { return impl_->dim(); }
  std::string name() const { return impl_->name(); }
  Box sample_box() const { return impl_->sample_box(); }
  bool in_domain(const Vec& x) const { return impl_->in_domain(x); }
  int phi_max_order() const { return impl_->phi_max_order(); }
  int phi_min_order() const { return impl_->phi_min_order(); }
  std::optional<double> alpha() const { return impl_->alpha(); }
  bool tagged(InstTag t) const { return impl_->tagged(t); }
  double fd_scale(const Vec& x) const { return impl_->fd_scale(x); }

  DenseTensor phi(int order, const Vec& x) const {
    if (order > impl_->phi_max_order() || order < impl_->phi_min_order())
      throw EvalError(name() + ": Phi derivative order " + std::to_string(order) +
                      " unavailable");
    return impl_->phi(order, x);
  }
  DenseTensor v(int order, const Vec& x) const { return impl_->v(order, x); }
  DenseTensor w(int order, const Vec& y) const { return impl_->w(order, y); }

  Vec grad_phi(const Vec& x) const {
    DenseTensor g = phi(1, x);
    Vec y(static_cast<std::size_t>(dim()));
    for (int i = 0; i < dim(); ++i) y[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)];
    return y;
  }

  Eigen::MatrixXd hessian(const Vec& x) const {
    const int n = dim();
    DenseTensor h = phi(2, x);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = h.at({i, j});
    return m;
  }

  /// Log-form Monge-Ampere residual  -V + W(grad Phi) - log det D^2 Phi.
  double ma_residual(const Vec& x) const {
    Eigen::MatrixXd h = hessian(x);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success)
      throw EvalError(name() + ": Hessian not positive definite at sample point");
    double logdet = 0.0;
    for (int i = 0; i < dim(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -v(0, x).value() + w(0, grad_phi(x)).value() - logdet;
  }

 private:
  std::shared_ptr<const InstanceImpl> impl_;
};

// ---------------------------------------------------------------------------
// 1D scalar function with derivatives, used for density/potential specs.
// ---------------------------------------------------------------------------
class Fun1d {
 public:
  virtual ~Fun1d() = default;
  virtual double d(int order, double y) const = 0;  // order 0..3
};

/// a*y^2/2 + c
class QuadraticFun : public Fun1d {
 public:
  explicit QuadraticFun(double a, double c = 0.0) : a_(a), c_(c) {}
  double d(int order, double y) const override {
    switch (order) {
      case 0: return 0.5 * a_ * y * y + c_;
      case 1: return a_ * y;
      case 2: return a_;
      default: return 0.0;
    }
  }

 private:
  double a_, c_;
};

/// y^4/4 + y^2/2 + c (strictly log-concave quartic well)
class QuarticFun : public Fun1d {
 public:
  explicit QuarticFun(double c = 0.0) : c_(c) {}
  double d(int order, double y) const override {
    switch (order) {
      case 0: return 0.25 * y * y * y * y + 0.5 * y * y + c_;
      case 1: return y * y * y + y;
      case 2: return 3.0 * y * y + 1.0;
      case 3: return 6.0 * y;
      default: return 0.0;
    }
  }

 private:
  double c_;
};

// ---------------------------------------------------------------------------
// Catalog instances
// ---------------------------------------------------------------------------

namespace detail {

inline DenseTensor diag_only_tensor(int n, int order, const Vec& per_axis) {
  DenseTensor t(n, order);
  for (int i = 0; i < n; ++i) {
    std::vector<int> idx(static_cast<std::size_t>(order), i);
    t.at(idx) = per_axis[static_cast<std::size_t>(i)];
  }
  return t;
}

}  // namespace detail

/// Phi = |x|^2/2, V = W = |y|^2/2: the identity transport of the standard
/// Gaussian. All curvature quantities vanish.
class QuadraticIdImpl final : public InstanceImpl {
 public:
  explicit QuadraticIdImpl(int n) : n_(n) {}
  int dim() const override { return n_; }
  std::string name() const override { return "quadratic_id" + std::to_string(n_); }
  Box sample_box() const override {
    return {Vec(static_cast<std::size_t>(n_), -1.5), Vec(static_cast<std::size_t>(n_), 1.5)};
  }
  bool in_domain(const Vec&) const override { return true; }
  bool tagged(InstTag t) const override {
    return t == InstTag::Transport || t == InstTag::Manufactured;
  }
  DenseTensor phi(int order, const Vec& x) const override { return quad(order, x); }
  DenseTensor v(int order, const Vec& x) const override { return quad(order, x); }
  DenseTensor w(int order, const Vec& y) const override { return quad(order, y); }

 private:
  DenseTensor quad(int order, const Vec& x) const {
    if (order == 0) {
      double s = 0.0;
      for (double xi : x) s += xi * xi;
      DenseTensor t(n_, 0);
      t[0] = 0.5 * s;
      return t;
    }
    if (order == 1) {
      DenseTensor t(n_, 1);
      for (int i = 0; i < n_; ++i) t[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
      return t;
    }
    if (order == 2) return detail::diag_only_tensor(n_, 2, Vec(static_cast<std::size_t>(n_), 1.0));
    return DenseTensor(n_, order);
  }
  int n_;
};

/// Phi = -2 sum log x_i + n log 2 on the positive orthant; solves
/// e^{Phi} = det D^2 Phi (hyperbolic case, alpha = -1) with V = -Phi, W = 0.
/// Logarithmically homogeneous: a cone solution.
class OrthantImpl final : public InstanceImpl {
 public:
  explicit OrthantImpl(int n) : n_(n) {}
  int dim() const override { return n_; }
  std::string name() const override { return "orthant" + std::to_string(n_); }
  Box sample_box() const override {
    return {Vec(static_cast<std::size_t>(n_), 0.2), Vec(static_cast<std::size_t>(n_), 3.0)};
  }
  bool in_domain(const Vec& x) const override {
    for (double xi : x)
      if (xi <= 1e-12) return false;
    return true;
  }
  std::optional<double> alpha() const override { return -1.0; }
  bool tagged(InstTag t) const override {
    return t == InstTag::Cone || t == InstTag::KEHyperbolic;
  }
  DenseTensor phi(int order, const Vec& x) const override {
    if (order == 0) {
      double s = n_ * std::log(2.0);
      for (double xi : x) s -= 2.0 * std::log(xi);
      DenseTensor t(n_, 0);
      t[0] = s;
      return t;
    }
    // d^k (-2 log x) = -2 (-1)^(k-1) (k-1)! / x^k
    Vec per(static_cast<std::size_t>(n_));
    double fact = 1.0;
    for (int m = 1; m < order; ++m) fact *= m;
    const double sign = (order % 2 == 1) ? -1.0 : 1.0;
    for (int i = 0; i < n_; ++i)
      per[static_cast<std::size_t>(i)] =
          sign * 2.0 * fact / std::pow(x[static_cast<std::size_t>(i)], order);
    return detail::diag_only_tensor(n_, order, per);
  }
  DenseTensor v(int order, const Vec& x) const override {
    DenseTensor t = phi(order, x);
    t *= -1.0;
    return t;
  }
  DenseTensor w(int order, const Vec&) const override { return DenseTensor(n_, order); }
  double fd_scale(const Vec& x) const override {
    double s = 1.0;
    for (double c : x) s = std::min(s, c);
    return s;
  }

 private:
  int n_;
};

/// Phi = -2 log sin(a x) + log(2 a^2) on (0, pi/a); solves e^{Phi} = Phi''
/// with V = -Phi, W = 0. Interval solution of the hyperbolic equation.
class Sine1dImpl final : public InstanceImpl {
 public:
  explicit Sine1dImpl(double a) : a_(a) {
    if (a <= 0) throw EvalError("sine1d: parameter must be positive");
  }
  int dim() const override { return 1; }
  std::string name() const override { return a_ == 1.0 ? "sine1d" : "sine1d(" + std::to_string(a_) + ")"; }
  Box sample_box() const override { return {{0.3 / a_}, {(M_PI - 0.3) / a_}}; }
  bool in_domain(const Vec& x) const override { return x[0] > 0 && x[0] < M_PI / a_; }
  std::optional<double> alpha() const override { return -1.0; }
  bool tagged(InstTag t) const override { return t == InstTag::KEHyperbolic; }
  DenseTensor phi(int order, const Vec& x) const override {
    const double u = 1.0 / std::tan(a_ * x[0]);  // cot
    const double a = a_;
    double val = 0.0;
    switch (order) {
      case 0: val = -2.0 * std::log(std::sin(a * x[0])) + std::log(2.0 * a * a); break;
      case 1: val = -2.0 * a * u; break;
      case 2: val = 2.0 * a * a * (1.0 + u * u); break;
      case 3: val = -4.0 * a * a * a * u * (1.0 + u * u); break;
      case 4: val = 4.0 * std::pow(a, 4) * (1.0 + u * u) * (1.0 + 3.0 * u * u); break;
      case 5: val = -16.0 * std::pow(a, 5) * u * (1.0 + u * u) * (2.0 + 3.0 * u * u); break;
      default: throw EvalError("sine1d: order > 5");
    }
    DenseTensor t(1, order);
    t[0] = val;
    return t;
  }
  DenseTensor v(int order, const Vec& x) const override {
    DenseTensor t = phi(order, x);
    t *= -1.0;
    return t;
  }
  DenseTensor w(int order, const Vec&) const override { return DenseTensor(1, order); }
  double fd_scale(const Vec& x) const override {
    return std::min({1.0 / a_, x[0], M_PI / a_ - x[0]});
  }

 private:
  double a_;
};

/// Phi = sigma x^2 / 2: the linear map transporting the standard Gaussian to
/// N(0, sigma^2). W carries the constant log(sigma) so the equation holds
/// exactly including constants.
class GaussPair1dImpl final : public InstanceImpl {
 public:
  explicit GaussPair1dImpl(double sigma) : sigma_(sigma) {
    if (sigma <= 0) throw EvalError("gauss_pair_1d: sigma must be positive");
  }
  int dim() const override { return 1; }
  std::string name() const override { return "gauss_pair_1d(" + std::to_string(sigma_) + ")"; }
  Box sample_box() const override { return {{-2.5}, {2.5}}; }
  bool in_domain(const Vec&) const override { return true; }
  bool tagged(InstTag t) const override { return t == InstTag::Transport; }
  DenseTensor phi(int order, const Vec& x) const override {
    DenseTensor t(1, order);
    if (order == 0) t[0] = 0.5 * sigma_ * x[0] * x[0];
    if (order == 1) t[0] = sigma_ * x[0];
    if (order == 2) t[0] = sigma_;
    return t;
  }
  DenseTensor v(int order, const Vec& x) const override {
    DenseTensor t(1, order);
    if (order == 0) t[0] = 0.5 * x[0] * x[0];
    if (order == 1) t[0] = x[0];
    if (order == 2) t[0] = 1.0;
    return t;
  }
  DenseTensor w(int order, const Vec& y) const override {
    DenseTensor t(1, order);
    const double s2 = sigma_ * sigma_;
    if (order == 0) t[0] = 0.5 * y[0] * y[0] / s2 + std::log(sigma_);
    if (order == 1) t[0] = y[0] / s2;
    if (order == 2) t[0] = 1.0 / s2;
    return t;
  }

 private:
  double sigma_;
};

// ---------------------------------------------------------------------------
// Manufactured instances: Phi and W are chosen analytic, V is defined by
// V := W(grad Phi) - log det D^2 Phi so the equation holds identically.
// ---------------------------------------------------------------------------

/// Ridge potential  |x|^2/2 + sum_k eps_k f(alpha_k . x + beta_k) with
/// f = log cosh; smooth, strictly convex for the parameter ranges used, all
/// derivative orders closed-form.
class RidgePotential {
 public:
  struct Ridge {
    double eps;
    Vec alpha;
    double beta;
  };

  RidgePotential(int n, std::vector<Ridge> ridges) : n_(n), ridges_(std::move(ridges)) {}

  int dim() const { return n_; }

  // m-th derivative of log cosh
  static double logcosh_d(int m, double t) {
    const double u = std::tanh(t);
    const double s = 1.0 - u * u;  // sech^2
    switch (m) {
      case 0: {
        // overflow-safe log cosh
        const double a = std::abs(t);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
      }
      case 1: return u;
      case 2: return s;
      case 3: return -2.0 * u * s;
      case 4: return -2.0 * s * (1.0 - 3.0 * u * u);
      case 5: return 8.0 * u * s * (2.0 - 3.0 * u * u);
      default: throw EvalError("ridge: derivative order > 5");
    }
  }

  DenseTensor deriv(int order, const Vec& x) const {
    DenseTensor t(n_, order);
    if (order == 0) {
      double s = 0.0;
      for (double xi : x) s += 0.5 * xi * xi;
      for (const auto& r : ridges_) s += r.eps * logcosh_d(0, dot(r, x));
      t[0] = s;
      return t;
    }
    if (order == 1)
      for (int i = 0; i < n_; ++i) t[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
    if (order == 2)
      for (int i = 0; i < n_; ++i) t.at({i, i}) = 1.0;
    for (const auto& r : ridges_) {
      const double fm = r.eps * logcosh_d(order, dot(r, x));
      for_each_index(n_, order, [&](const std::vector<int>& idx) {
        double prod = fm;
        for (int k : idx) prod *= r.alpha[static_cast<std::size_t>(k)];
        t.at(idx) += prod;
      });
    }
    return t;
  }

 private:
  double dot(const Ridge& r, const Vec& x) const {
    double s = r.beta;
    for (int i = 0; i < n_; ++i)
      s += r.alpha[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    return s;
  }
  int n_;
  std::vector<Ridge> ridges_;
};

namespace detail {

/// V-derivatives (orders 0..3) of V = W(grad Phi) - log det D^2 Phi by the
/// chain rule, from Phi-oracles (orders up to 5) and W-oracles (up to 3).
class ManufacturedV {
 public:
  template <typename PhiF, typename WF>
  static DenseTensor eval(int n, int order, const Vec& x, PhiF&& phi, WF&& w) {
    if (order > 3) throw EvalError("manufactured V: order > 3");
    using Mat = Eigen::MatrixXd;
    const DenseTensor p2 = phi(2, x);
    Mat h(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h(i, j) = p2.at({i, j});
    Eigen::LLT<Mat> llt(h);
    if (llt.info() != Eigen::Success)
      throw EvalError("manufactured V: Hessian not positive definite");
    Mat A = llt.solve(Mat::Identity(n, n));

    const DenseTensor p1 = phi(1, x);
    Vec y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = p1[static_cast<std::size_t>(i)];

    DenseTensor out(n, order);
    if (order == 0) {
      double logdet = 0.0;
      for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
      out[0] = w(0, y).value() - logdet;
      return out;
    }

    const DenseTensor p3 = phi(3, x);
    auto P = [&](int j) {
      Mat m(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) m(a, b) = p3.at({a, b, j});
      return m;
    };

    const DenseTensor w1 = w(1, y);
    if (order == 1) {
      // u_i = W_a Phi_ai ; l_i = tr(A P_i)
      for (int i = 0; i < n; ++i) {
        double u = 0.0;
        for (int a = 0; a < n; ++a)
          u += w1[static_cast<std::size_t>(a)] * p2.at({a, i});
        out[static_cast<std::size_t>(i)] = u - (A * P(i)).trace();
      }
      return out;
    }

    const DenseTensor p4 = phi(4, x);
    auto Q = [&](int i, int j) {
      Mat m(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) m(a, b) = p4.at({a, b, i, j});
      return m;
    };
    const DenseTensor w2 = w(2, y);
    if (order == 2) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          double u = 0.0;
          for (int a = 0; a < n; ++a) {
            u += w1[static_cast<std::size_t>(a)] * p3.at({a, i, j});
            for (int b = 0; b < n; ++b)
              u += w2.at({a, b}) * p2.at({a, i}) * p2.at({b, j});
          }
          const double l = (A * Q(i, j)).trace() - (A * P(i) * A * P(j)).trace();
          out.at({i, j}) = u - l;
        }
      }
      return out;
    }

    const DenseTensor p5 = phi(5, x);
    const DenseTensor w3 = w(3, y);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          double u = 0.0;
          for (int a = 0; a < n; ++a) {
            u += w1[static_cast<std::size_t>(a)] * p4.at({a, i, j, k});
            for (int b = 0; b < n; ++b) {
              u += w2.at({a, b}) * (p3.at({a, i, k}) * p2.at({b, j}) +
                                    p2.at({a, i}) * p3.at({b, j, k}) +
                                    p3.at({a, i, j}) * p2.at({b, k}));
              for (int c = 0; c < n; ++c)
                u += w3.at({a, b, c}) * p2.at({a, i}) * p2.at({b, j}) * p2.at({c, k});
            }
          }
          Mat R(n, n);
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) R(a, b) = p5.at({a, b, i, j, k});
          const Mat Pi = P(i), Pj = P(j), Pk = P(k);
          double l = (A * R).trace();
          l -= (A * Pk * A * Q(i, j)).trace();
          l -= (A * Pi * A * Q(j, k)).trace();
          l -= (A * Pj * A * Q(i, k)).trace();
          l += 2.0 * (A * Pi * A * Pj * A * Pk).trace();
          out.at({i, j, k}) = u - l;
        }
      }
    }
    return out;
  }
};

}  // namespace detail

/// Generic manufactured instance: ridge Phi, ridge-or-quadratic W, V defined
/// by the equation. Exact by construction.
class ManufacturedImpl final : public InstanceImpl {
 public:
  ManufacturedImpl(std::string name, RidgePotential phi, RidgePotential w, Box box)
      : name_(std::move(name)),
        phi_(std::move(phi)),
        w_(std::move(w)),
        box_(std::move(box)) {}

  int dim() const override { return phi_.dim(); }
  std::string name() const override { return name_; }
  Box sample_box() const override { return box_; }
  bool in_domain(const Vec&) const override { return true; }
  bool tagged(InstTag t) const override {
    return t == InstTag::Manufactured || t == InstTag::Transport;
  }
  DenseTensor phi(int order, const Vec& x) const override { return phi_.deriv(order, x); }
  DenseTensor w(int order, const Vec& y) const override { return w_.deriv(order, y); }
  DenseTensor v(int order, const Vec& x) const override {
    return detail::ManufacturedV::eval(
        dim(), order, x,
        [this](int o, const Vec& p) { return phi_.deriv(o, p); },
        [this](int o, const Vec& p) { return w_.deriv(o, p); });
  }

 private:
  std::string name_;
  RidgePotential phi_;
  RidgePotential w_;
  Box box_;
};

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

inline PotentialInstance make_quadratic_id(int n) {
  return PotentialInstance(std::make_shared<QuadraticIdImpl>(n));
}
inline PotentialInstance make_orthant(int n) {
  return PotentialInstance(std::make_shared<OrthantImpl>(n));
}
inline PotentialInstance make_sine1d(double a) {
  return PotentialInstance(std::make_shared<Sine1dImpl>(a));
}
inline PotentialInstance make_gauss_pair_1d(double sigma) {
  return PotentialInstance(std::make_shared<GaussPair1dImpl>(sigma));
}

/// Phi = x^2/2 + eps log cosh(x + 0.2), W standard Gaussian, V manufactured.
inline PotentialInstance make_perturbed_gauss_1d(double eps) {
  if (std::abs(eps) >= 0.9)
    throw EvalError("perturbed_gauss_1d: |eps| must be < 0.9 to keep convexity");
  RidgePotential phi(1, {{eps, {1.0}, 0.2}});
  RidgePotential w(1, {});
  Box box{{-2.5}, {2.5}};
  return PotentialInstance(std::make_shared<ManufacturedImpl>(
      "perturbed_gauss_1d(" + std::to_string(eps) + ")", std::move(phi), std::move(w),
      std::move(box)));
}

/// Seeded smooth strictly-convex potential with a non-quadratic target, so
/// all of V3, W3, Phi3 are active in the identity checks.
inline PotentialInstance make_manufactured(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RidgePotential::Ridge> phir;
  for (int k = 0; k < 2; ++k) {
    RidgePotential::Ridge r;
    r.eps = rng.uniform(0.05, 0.12);  // positive, so the Hessian stays >= identity
    r.alpha.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r.alpha[static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
    r.beta = rng.uniform(-0.5, 0.5);
    phir.push_back(std::move(r));
  }
  std::vector<RidgePotential::Ridge> wr;
  {
    RidgePotential::Ridge r;
    r.eps = rng.uniform(0.05, 0.1);
    r.alpha.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) r.alpha[static_cast<std::size_t>(i)] = rng.uniform(-0.8, 0.8);
    r.beta = rng.uniform(-0.3, 0.3);
    wr.push_back(std::move(r));
  }
  Box box{Vec(static_cast<std::size_t>(n), -1.5), Vec(static_cast<std::size_t>(n), 1.5)};
  return PotentialInstance(std::make_shared<ManufacturedImpl>(
      "manufactured" + std::to_string(n) + "_s" + std::to_string(seed),
      RidgePotential(n, std::move(phir)), RidgePotential(n, std::move(wr)), std::move(box)));
}

}  // namespace madiag
