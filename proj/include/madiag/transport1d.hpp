#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <limits>
#include <mutex>
#include <string>
#include <vector>

#include "madiag/instance.hpp"

namespace madiag {

namespace detail {

/// Adaptive Simpson quadrature. The depth cap matters: integrands built on
/// iterative inversions carry noise near machine precision, and an uncapped
/// recursion degenerates into an exponential tree once the requested
/// per-interval error drops below that noise. Smooth integrands converge far
/// above the cap.
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int max_depth = 16) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace detail

/// One-dimensional density e^{-V}: potential with derivatives to order 3,
/// numeric support window, normalization, and a cached cumulative table so
/// CDF and quantile evaluations cost a short local quadrature instead of a
/// full one.
class Density1d {
 public:
  explicit Density1d(std::shared_ptr<const Fun1d> pot, std::string label)
      : pot_(std::move(pot)), label_(std::move(label)) {
    // locate the mode coarsely, then expand until the tails are negligible
    double best = 0.0, bestv = pot_->d(0, 0.0);
    for (double t = -8.0; t <= 8.0; t += 0.125) {
      const double v = pot_->d(0, t);
      if (v < bestv) {
        bestv = v;
        best = t;
      }
    }
    mode_ = best;
    double r = 1.0;
    const double drop = std::log(1e22);
    while (r < 1e6 && (pot_->d(0, mode_ + r) - bestv < drop || pot_->d(0, mode_ - r) - bestv < drop))
      r *= 1.25;
    if (r >= 1e6) throw EvalError("transport1d: density '" + label_ + "' not integrable enough");
    lo_ = mode_ - r;
    hi_ = mode_ + r;
    auto dens = [this](double t) { return std::exp(-pot_->d(0, t)); };
    // per-cell integrals with forward and backward prefix sums; the backward
    // sums keep full relative precision in the upper tail
    cell_.assign(static_cast<std::size_t>(cells_), 0.0);
    const double dx = (hi_ - lo_) / cells_;
    for (int c = 0; c < cells_; ++c) {
      const double a = lo_ + c * dx;
      cell_[static_cast<std::size_t>(c)] = detail::adaptive_simpson(dens, a, a + dx, 1e-16);
    }
    cum_.assign(static_cast<std::size_t>(cells_) + 1, 0.0);
    for (int c = 0; c < cells_; ++c)
      cum_[static_cast<std::size_t>(c) + 1] =
          cum_[static_cast<std::size_t>(c)] + cell_[static_cast<std::size_t>(c)];
    sur_.assign(static_cast<std::size_t>(cells_) + 1, 0.0);
    for (int c = cells_ - 1; c >= 0; --c)
      sur_[static_cast<std::size_t>(c)] =
          sur_[static_cast<std::size_t>(c) + 1] + cell_[static_cast<std::size_t>(c)];
    z_ = cum_.back();
    if (!(z_ > 0.0) || !std::isfinite(z_))
      throw EvalError("transport1d: density '" + label_ + "' normalization failed");
  }

  double potential(int order, double y) const { return pot_->d(order, y); }
  double log_z() const { return std::log(z_); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::string& label() const { return label_; }

  /// CDF: cached cumulative up to the enclosing cell plus a short local
  /// quadrature.
  double cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double dx = (hi_ - lo_) / cells_;
    int c = static_cast<int>((x - lo_) / dx);
    c = std::min(std::max(c, 0), cells_ - 1);
    auto dens = [this](double t) { return std::exp(-pot_->d(0, t)); };
    return (cum_[static_cast<std::size_t>(c)] +
            detail::adaptive_simpson(dens, lo_ + c * dx, x, 1e-16)) /
           z_;
  }

  double pdf(double x) const { return std::exp(-pot_->d(0, x)) / z_; }

  /// Upper-tail probability 1 - CDF, computed by backward summation so small
  /// values keep full relative precision.
  double survival(double x) const {
    if (x <= lo_) return 1.0;
    if (x >= hi_) return 0.0;
    const double dx = (hi_ - lo_) / cells_;
    int c = static_cast<int>((x - lo_) / dx);
    c = std::min(std::max(c, 0), cells_ - 1);
    auto dens = [this](double t) { return std::exp(-pot_->d(0, t)); };
    return (sur_[static_cast<std::size_t>(c) + 1] +
            detail::adaptive_simpson(dens, x, lo_ + (c + 1) * dx, 1e-16)) /
           z_;
  }

  /// Lower quantile: solve CDF(t) = u. Precise for u not too close to 1.
  double quantile(double u) const {
    if (u > 0.5) return quantile_survival(1.0 - u);
    const double target = u * z_;
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    int c = static_cast<int>(it - cum_.begin()) - 1;
    c = std::min(std::max(c, 0), cells_ - 1);
    return invert_in_cell(c, [this, u](double t) { return cdf(t) - u; });
  }

  /// Upper quantile: solve survival(t) = s. Precise for small s.
  double quantile_survival(double s) const {
    if (s > 0.5) return quantile(1.0 - s);
    const double target = s * z_;
    // sur_ decreases; find the cell whose suffix brackets the target
    int lo = 0, hi = cells_;
    while (lo < hi) {
      const int m = (lo + hi) / 2;
      if (sur_[static_cast<std::size_t>(m)] > target) lo = m + 1;
      else hi = m;
    }
    const int c = std::min(std::max(lo - 1, 0), cells_ - 1);
    return invert_in_cell(c, [this, s](double t) { return s - survival(t); });
  }

 private:
  template <typename G>
  double invert_in_cell(int c, G&& g) const {
    const double dx = (hi_ - lo_) / cells_;
    double a = lo_ + c * dx, b = a + dx;
    double t = 0.5 * (a + b);
    for (int iter = 0; iter < 100; ++iter) {
      const double gv = g(t);  // increasing in t
      (gv < 0 ? a : b) = t;
      const double d = pdf(t);
      double next = d > 0 ? t - gv / d : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - t) < 1e-16 * (1.0 + std::abs(t))) return next;
      t = next;
    }
    return t;
  }

  static constexpr int cells_ = 2048;
  std::shared_ptr<const Fun1d> pot_;
  std::string label_;
  double mode_ = 0.0, lo_ = 0.0, hi_ = 0.0, z_ = 0.0;
  std::vector<double> cell_;
  std::vector<double> cum_;
  std::vector<double> sur_;
};

/// Monotone-rearrangement transport instance: T = G^{-1} o F with F, G the
/// source/target CDFs; Phi' = T, Phi'' from the equation itself and higher
/// orders by differentiating log Phi'' = -V + W(Phi') repeatedly. Order 0 of
/// Phi is not available.
class Transport1dImpl final : public InstanceImpl {
 public:
  Transport1dImpl(Density1d source, Density1d target)
      : src_(std::move(source)), tgt_(std::move(target)) {
    box_ = Box{{src_.quantile(0.01)}, {src_.quantile(0.99)}};
  }

  int dim() const override { return 1; }
  std::string name() const override {
    return "transport1d(" + src_.label() + "->" + tgt_.label() + ")";
  }
  Box sample_box() const override { return box_; }
  bool in_domain(const Vec& x) const override { return x[0] > src_.lo() && x[0] < src_.hi(); }
  int phi_min_order() const override { return 1; }
  bool tagged(InstTag t) const override { return t == InstTag::Transport; }

  double map(double x) const {
    // consecutive oracle calls evaluate several orders at the same point;
    // memoize the last inversion
    {
      std::lock_guard<std::mutex> lk(cache_mu_);
      if (x == cache_x_) return cache_t_;
    }
    // two-sided matching: quantiles from the lower tail on the left half,
    // survival functions on the right, so both tails keep relative precision
    const double F = src_.cdf(x);
    const double t =
        F <= 0.5 ? tgt_.quantile(F) : tgt_.quantile_survival(src_.survival(x));
    std::lock_guard<std::mutex> lk(cache_mu_);
    cache_x_ = x;
    cache_t_ = t;
    return t;
  }

  /// max |G(T(x)) - F(x)| style residual at a point (quantile match quality)
  double quantile_residual(double x) const { return std::abs(tgt_.cdf(map(x)) - src_.cdf(x)); }

  DenseTensor phi(int order, const Vec& x) const override {
    DenseTensor out(1, order);
    out[0] = phi_d(order, x[0]);
    return out;
  }
  DenseTensor v(int order, const Vec& x) const override {
    DenseTensor out(1, order);
    out[0] = src_.potential(order, x[0]) + (order == 0 ? src_.log_z() : 0.0);
    return out;
  }
  DenseTensor w(int order, const Vec& y) const override {
    DenseTensor out(1, order);
    out[0] = tgt_.potential(order, y[0]) + (order == 0 ? tgt_.log_z() : 0.0);
    return out;
  }

  const Density1d& source() const { return src_; }
  const Density1d& target() const { return tgt_; }

 private:
  double phi_d(int order, double x) const {
    if (order < 1) throw EvalError("transport1d: Phi value (order 0) is not available");
    const double t = map(x);
    if (order == 1) return t;
    // veff = V + log Z_V etc.; log Phi'' = -veff(x) + weff(T(x))
    const double p2 = std::exp(-(src_.potential(0, x) + src_.log_z()) +
                               (tgt_.potential(0, t) + tgt_.log_z()));
    if (order == 2) return p2;
    const double v1 = src_.potential(1, x), v2 = src_.potential(2, x),
                 v3 = src_.potential(3, x);
    const double w1 = tgt_.potential(1, t), w2 = tgt_.potential(2, t),
                 w3 = tgt_.potential(3, t);
    const double s = -v1 + w1 * p2;
    const double p3 = p2 * s;
    if (order == 3) return p3;
    const double sp = -v2 + w2 * p2 * p2 + w1 * p3;
    const double p4 = p3 * s + p2 * sp;
    if (order == 4) return p4;
    const double spp = -v3 + w3 * p2 * p2 * p2 + 3.0 * w2 * p2 * p3 + w1 * p4;
    const double p5 = p4 * s + 2.0 * p3 * sp + p2 * spp;
    if (order == 5) return p5;
    throw EvalError("transport1d: Phi order > 5");
  }

  Density1d src_;
  Density1d tgt_;
  Box box_;
  mutable std::mutex cache_mu_;
  mutable double cache_x_ = std::numeric_limits<double>::quiet_NaN();
  mutable double cache_t_ = 0.0;
};

/// Density spec strings: "gauss" (standard), "gauss:VAR" (centered, variance
/// VAR), "quartic" (y^4/4 + y^2/2).
inline Density1d make_density_1d(const std::string& spec) {
  if (spec == "gauss") return Density1d(std::make_shared<QuadraticFun>(1.0), "gauss");
  if (spec.rfind("gauss:", 0) == 0) {
    const double var = std::stod(spec.substr(6));
    if (var <= 0) throw EvalError("density spec: variance must be positive");
    return Density1d(std::make_shared<QuadraticFun>(1.0 / var), spec);
  }
  if (spec == "quartic") return Density1d(std::make_shared<QuarticFun>(), "quartic");
  throw EvalError("unknown density spec '" + spec + "' (want gauss, gauss:VAR or quartic)");
}

inline PotentialInstance solve_transport_1d(const std::string& source, const std::string& target) {
  return PotentialInstance(std::make_shared<Transport1dImpl>(make_density_1d(source),
                                                             make_density_1d(target)));
}

/// Legendre dual check: computes Psi' = (Phi')^{-1} numerically and reports
/// the max of |Phi'(Psi'(y)) - y| over a sample of the image interval.
inline double legendre_dual_residual_1d(const PotentialInstance& inst, int samples = 40) {
  if (inst.dim() != 1) throw EvalError("legendre_dual_1d: needs a 1D instance");
  Box box = inst.sample_box();
  const double xlo = box.lo[0], xhi = box.hi[0];
  const double ylo = inst.phi(1, {xlo})[0];
  const double yhi = inst.phi(1, {xhi})[0];
  if (!(yhi > ylo)) throw EvalError("legendre_dual_1d: Phi' sample is not increasing");
  double worst = 0.0;
  for (int k = 1; k < samples; ++k) {
    const double y = ylo + (yhi - ylo) * k / samples;
    double a = xlo, b = xhi;
    for (int it = 0; it < 80; ++it) {
      const double m = 0.5 * (a + b);
      const double tm = inst.phi(1, {m})[0];
      if (!(std::isfinite(tm))) throw EvalError("legendre_dual_1d: map evaluation failed");
      (tm < y ? a : b) = m;
    }
    const double psi_prime = 0.5 * (a + b);
    worst = std::max(worst, std::abs(inst.phi(1, {psi_prime})[0] - y));
  }
  return worst;
}

}  // namespace madiag
