#pragma once

// Small sampling helpers shared by the Monte-Carlo code. Internal header.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace qtele::detail {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) {
  return mix64(mix64(seed ^ mix64(stream)) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Inverse-CDF sampler over a fixed weight vector.
class Categorical {
 public:
  Categorical() = default;
  explicit Categorical(const std::vector<double>& weights) {
    cumulative_.reserve(weights.size());
    double acc = 0.0;
    for (double w : weights) {
      acc += std::max(w, 0.0);
      cumulative_.push_back(acc);
    }
    total_ = acc;
  }

  double total() const { return total_; }
  bool empty() const { return !(total_ > 0.0); }

  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng) * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    // Skip zero-weight entries that share the cumulative value.
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

/// Poisson count conditioned on being at least one.
inline std::uint64_t zero_truncated_poisson(double mean, Rng& rng) {
  if (mean > 1e-3) {
    std::poisson_distribution<std::uint64_t> pois(mean);
    for (;;) {
      const auto k = pois(rng);
      if (k > 0) return k;
    }
  }
  // Inverse CDF; for small means the series converges in a few terms.
  const double norm = -std::expm1(-mean);
  double u = uniform01(rng) * norm;
  double term = std::exp(-mean);
  for (std::uint64_t k = 1;; ++k) {
    term *= mean / static_cast<double>(k);
    u -= term;
    if (u <= 0.0 || k > 64) return k;
  }
}

/// P(at least one of n independent trials with success probability p).
inline double any_of(int n, double p) {
  if (n <= 0 || p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(n) * std::log1p(-p));
}

}  // namespace qtele::detail
