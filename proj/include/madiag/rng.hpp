#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace madiag {

/// splitmix64: small deterministic PRNG, identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

 private:
  std::uint64_t state_;
};

/// Stable sub-seed derived from a base seed and a textual tag, so that each
/// check draws its own point sequence independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
  std::uint64_t h = 1469598103934665603ULL ^ base;
  for (char c : tag) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ULL;
  }
  return h;
}

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
  int dim() const { return static_cast<int>(lo.size()); }
};

inline std::vector<double> sample_point(const Box& box, Rng& rng) {
  std::vector<double> x(box.lo.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(box.lo[i], box.hi[i]);
  return x;
}

}  // namespace madiag
