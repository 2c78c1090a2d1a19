#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace saddle {

using Seed = std::uint64_t;

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and an ordered list of indices.
///
/// mix64(s, i) = splitmix64(s ^ splitmix64(i)); further indices fold left, so
/// mix64(s, i, j) = mix64(mix64(s, i), j). Every seeded loop in the library
/// (Lyapunov runs, grid cells, replicate seeds) derives its stream this way,
/// which makes results independent of execution order.
constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed ^ splitmix64(index));
}

template <typename... Rest>
constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t index,
                              Rest... rest) noexcept {
  return mix64(mix64(seed, index), static_cast<std::uint64_t>(rest)...);
}

/// Thin wrapper over mt19937_64 with the handful of draws the simulators need.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  double uniform() { return unit_(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_));
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Uniform draw on the unit sphere in R^n via a normalized Gaussian.
  Eigen::VectorXd unit_sphere(Eigen::Index n) {
    for (;;) {
      Eigen::VectorXd v = normal_vector(n);
      const double norm = v.norm();
      if (norm > 1e-300) return v / norm;
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Inverse-CDF sampler over a fixed probability vector.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> probabilities) {
    cumulative_.reserve(probabilities.size());
    double acc = 0.0;
    for (double p : probabilities) {
      acc += p;
      cumulative_.push_back(acc);
    }
    if (!cumulative_.empty()) cumulative_.back() = std::max(cumulative_.back(), 1.0);
  }

  std::size_t operator()(Rng& rng) const {
    if (cumulative_.size() == 1) return 0;
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

  std::size_t size() const { return cumulative_.size(); }

 private:
  std::vector<double> cumulative_;
};

}  // namespace saddle
