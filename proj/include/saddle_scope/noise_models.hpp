#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "saddle_scope/rng.hpp"

namespace saddle {

struct Atom {
  double value = 0.0;
  double probability = 0.0;
};

/// Finite-support law of a scalar curvature h(x) or of a batch statistic.
///
/// Atoms are kept sorted by value. Values closer than `kMergeTolerance` are
/// merged and their probabilities summed, so equal values from different data
/// points collapse into a single atom.
class ScalarNoiseDistribution {
 public:
  static constexpr double kMergeTolerance = 1e-12;
  static constexpr double kProbabilityTolerance = 1e-12;

  /// Validates and canonicalizes. Throws std::invalid_argument on
  /// non-positive or non-finite probabilities, a total away from 1, or
  /// non-finite values.
  explicit ScalarNoiseDistribution(std::vector<Atom> atoms);

  /// Uniform weight on each value (duplicates accumulate weight).
  static ScalarNoiseDistribution empirical(std::span<const double> values);
  static ScalarNoiseDistribution point(double value);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  double mean() const;
  double variance() const;
  /// E[h^k].
  double moment(int k) const;
  /// E[|h|^k].
  double abs_moment(int k) const;
  double max_abs() const;

  /// Law of h + shift, e.g. the weight-decay shift h = h' + gamma.
  ScalarNoiseDistribution shifted(double shift) const;

  template <typename F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (const auto& a : atoms_) acc += a.probability * f(a.value);
    return acc;
  }

 private:
  std::vector<Atom> atoms_;
};

/// Finite family of symmetric per-sample Hessians with sampling weights.
class HessianEnsemble {
 public:
  static constexpr double kSymmetryTolerance = 1e-10;

  HessianEnsemble(std::vector<Eigen::MatrixXd> matrices, std::vector<double> probabilities);
  static HessianEnsemble uniform(std::vector<Eigen::MatrixXd> matrices);

  Eigen::Index dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return matrices_.size(); }
  const std::vector<Eigen::MatrixXd>& matrices() const noexcept { return matrices_; }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }

  /// Probability-weighted mean matrix E[H].
  const Eigen::MatrixXd& mean() const noexcept { return mean_; }

  /// Law of each diagonal entry H[k,k].
  std::vector<ScalarNoiseDistribution> diagonal_marginals() const;

  std::size_t sample_index(Rng& rng) const { return sampler_(rng); }

 private:
  Eigen::Index dimension_ = 0;
  std::vector<Eigen::MatrixXd> matrices_;
  std::vector<double> probabilities_;
  Eigen::MatrixXd mean_;
  DiscreteSampler sampler_;
};

/// Data points with xy = 1 and xy = a, each with probability 1/2.
struct TwoPointDataset {
  double a = 0.0;

  std::vector<double> products() const { return {1.0, a}; }
  ScalarNoiseDistribution distribution() const;
};

/// x_i ~ N(0,1), eps_i ~ N(0, noise_std^2), y_i = mu x_i + (1 - mu) eps_i.
class GaussianLabelDataset {
 public:
  static GaussianLabelDataset generate(std::size_t n, double mu, double noise_std, Seed seed);

  /// Same draws of x and eps, labels recomputed for a different mu.
  GaussianLabelDataset with_mu(double mu) const;

  std::size_t size() const noexcept { return x_.size(); }
  double mu() const noexcept { return mu_; }
  double noise_std() const noexcept { return noise_std_; }
  Seed seed() const noexcept { return seed_; }
  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& eps() const noexcept { return eps_; }
  const std::vector<double>& y() const noexcept { return y_; }

  /// x_i * y_i for each point.
  std::vector<double> products() const;
  ScalarNoiseDistribution distribution() const;

 private:
  std::vector<double> x_, eps_, y_;
  double mu_ = 0.0;
  double noise_std_ = 2.0;
  Seed seed_ = 0;
};

enum class BatchMode { exact, monte_carlo };

/// Number of size-S multisets from n items, C(n+S-1, S), saturating at `cap + 1`.
std::uint64_t multiset_count(std::size_t n, std::size_t batch_size, std::uint64_t cap);

/// Law of chi = (1/S) sum_{b in B} xy_b for batches B of S points drawn
/// uniformly with replacement from `products`.
///
/// exact mode enumerates all multisets (multinomial weights) and refuses when
/// there are more than `kExactLimit`; monte_carlo mode returns the empirical
/// law of `n_draws` sampled batches.
ScalarNoiseDistribution batch_statistic_distribution(std::span<const double> products,
                                                     std::size_t batch_size, BatchMode mode,
                                                     std::size_t n_draws = 100000,
                                                     Seed seed = 0);
inline constexpr std::uint64_t kExactLimit = 1'000'000;

/// Samples h_i * n n^T. Throws std::invalid_argument unless |n| = 1 within 1e-10.
HessianEnsemble rank1_ensemble(const ScalarNoiseDistribution& dist,
                               const Eigen::VectorXd& direction);

/// 2x2 ensemble E[H] + M + M^T with M standard normal entries, E[H] = diag(0.1, -0.1).
///
/// This is the noisy strict-saddle used for the Lyapunov-vs-learning-rate
/// curve; `mean_diagonal` overrides the default mean.
HessianEnsemble gaussian_saddle_ensemble(std::size_t n_samples, Seed seed,
                                         const Eigen::Vector2d& mean_diagonal = {0.1, -0.1});

/// Parses "v1:p1,v2:p2,..."; throws std::invalid_argument on malformed input.
ScalarNoiseDistribution parse_atoms(std::string_view text);

/// Contents of a dataset file: either xy products or explicit atoms.
using DatasetFile = std::variant<std::vector<double>, ScalarNoiseDistribution>;

/// Reads {"pairs": [[x,y],...]} or {"atoms": [[value,prob],...]}.
DatasetFile load_dataset_file(const std::filesystem::path& path);
/// Parses the same schema from a JSON string.
DatasetFile parse_dataset_json(const std::string& text);

/// Reads {"matrices": [[[...],...],...], "probabilities": [...]} (probabilities optional).
HessianEnsemble load_ensemble_file(const std::filesystem::path& path);

}  // namespace saddle
