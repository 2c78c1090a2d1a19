#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "saddle_scope/noise_models.hpp"

namespace saddle {

struct LyapunovProtocol {
  std::size_t max_steps = 5000;
  double upper_cutoff = 1e100;
  double lower_cutoff = 1e-140;
  std::size_t n_runs = 800;
  Seed seed = 0;
  /// Rescale theta to unit norm this often, carrying log|theta| separately.
  std::size_t renormalize_every = 50;
  /// Worker threads; results do not depend on this.
  unsigned threads = 1;

  void validate() const;
};

struct StopHistogram {
  std::size_t upper = 0;
  std::size_t lower = 0;
  std::size_t max_steps = 0;
};

struct LyapunovEstimate {
  double lambda = 0.0;
  double mean = 0.0;
  /// Sample standard deviation / sqrt(n_runs); 0 for a single run.
  double std_error = 0.0;
  std::size_t n_runs = 0;
  StopHistogram stops;
};

/// Monte-Carlo estimate of the maximal Lyapunov exponent of prod (I - lr H_t).
///
/// Run r draws theta_0 uniformly on the unit sphere from Rng(mix64(seed, r)),
/// multiplies by I - lr H_t with H_t sampled i.i.d. from the ensemble, and
/// stops the first time |theta_t| leaves [lower_cutoff, upper_cutoff] or at
/// max_steps. The run value is log|theta_t| / t. A factor that maps theta to
/// exactly zero counts as a lower-cutoff hit with value log(lower_cutoff) / t.
LyapunovEstimate estimate_max_lyapunov(const HessianEnsemble& ens, double lr,
                                       const LyapunovProtocol& proto = {});

struct LyapunovBounds {
  double lower = 0.0;  // log min_i sigma_min(I - lr H_i); -inf if some factor is singular
  double upper = 0.0;  // log max_i rho(I - lr H_i)
};

LyapunovBounds lyapunov_bounds(const HessianEnsemble& ens, double lr);

/// -2 lr theta0' Hbar theta0 / |theta0|^2.
///
/// This is the first-order change of log|theta|^2 over one step, so it
/// approximates 2 * Lambda when theta0 points along the dominant (most
/// negative curvature) direction of Hbar. The factor of two has been checked
/// against estimate_max_lyapunov.
double small_lr_expansion(const HessianEnsemble& ens, const Eigen::VectorXd& theta0, double lr);

/// Scalar log rate of each diagonal entry: sum_i p_i log|1 - lr H_i[k,k]|.
std::vector<double> diagonal_approx_exponents(const HessianEnsemble& ens, double lr);
std::vector<double> diagonal_approx_exponents(const std::vector<ScalarNoiseDistribution>& diag,
                                              double lr);

/// sum_i p_i log(1 - lr h*_i) with h*_i the top eigenvalue of H_i.
/// Throws InapplicableConditionError if some 1 - lr h*_i <= 0.
double upper_bound_rate(const HessianEnsemble& ens, double lr);

}  // namespace saddle
