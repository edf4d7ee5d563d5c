#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace madiag {

/// Dense component array of a tensor of a given order over R^dim,
/// row-major, all indices running 0..dim-1. Order 0 is a scalar.
class DenseTensor {
 public:
  DenseTensor() : dim_(0), order_(0), data_(1, 0.0) {}
  DenseTensor(int dim, int order)
      : dim_(dim), order_(order), data_(size_of(dim, order), 0.0) {}

  static DenseTensor scalar(double v) {
    DenseTensor t(1, 0);
    t.data_[0] = v;
    return t;
  }

  int dim() const { return dim_; }
  int order() const { return order_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& at(const std::vector<int>& idx) { return data_[flatten(idx)]; }
  double at(const std::vector<int>& idx) const { return data_[flatten(idx)]; }

  double value() const { return data_[0]; }  // order-0 access

  std::size_t flatten(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (int i : idx) f = f * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
    return f;
  }

  std::vector<int> unflatten(std::size_t flat) const {
    std::vector<int> idx(static_cast<std::size_t>(order_), 0);
    for (int k = order_ - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = static_cast<int>(flat % static_cast<std::size_t>(dim_));
      flat /= static_cast<std::size_t>(dim_);
    }
    return idx;
  }

  DenseTensor& operator+=(const DenseTensor& o) {
    check_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  DenseTensor& operator-=(const DenseTensor& o) {
    check_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  DenseTensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Average over all permutations of the index tuple.
  DenseTensor symmetrized() const {
    if (order_ <= 1) return *this;
    DenseTensor out(dim_, order_);
    std::vector<int> perm(static_cast<std::size_t>(order_));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t nperm = 0;
    do {
      ++nperm;
      for (std::size_t f = 0; f < data_.size(); ++f) {
        std::vector<int> idx = unflatten(f);
        std::vector<int> pidx(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k)
          pidx[k] = idx[static_cast<std::size_t>(perm[k])];
        out.data_[f] += at(pidx);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    out *= 1.0 / static_cast<double>(nperm);
    return out;
  }

  /// Max deviation from full symmetry.
  double asymmetry() const {
    DenseTensor d = *this;
    d -= symmetrized();
    return d.max_abs();
  }

  const std::vector<double>& data() const { return data_; }

 private:
  static std::size_t size_of(int dim, int order) {
    std::size_t s = 1;
    for (int i = 0; i < order; ++i) s *= static_cast<std::size_t>(dim);
    return s;
  }
  void check_shape(const DenseTensor& o) const {
    if (dim_ != o.dim_ || order_ != o.order_)
      throw std::invalid_argument("DenseTensor: shape mismatch");
  }

  int dim_;
  int order_;
  std::vector<double> data_;
};

/// Iterates all multi-indices of the given order over 0..dim-1.
template <typename F>
void for_each_index(int dim, int order, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(order), 0);
  while (true) {
    f(idx);
    int k = order - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == dim) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
}

}  // namespace madiag
