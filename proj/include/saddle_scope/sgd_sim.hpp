#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "saddle_scope/noise_models.hpp"
#include "saddle_scope/stability.hpp"

namespace saddle {

enum class Outcome { converged, escaped, max_steps };
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view name);

using ExtraValue = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

struct SeriesPoint {
  std::size_t t = 0;
  double log_norm = 0.0;
};

/// Seeded trajectory summary shared by every simulator.
struct RunRecord {
  std::string experiment;
  Seed seed = 0;
  std::size_t steps = 0;
  std::vector<SeriesPoint> lognorm_series;  // strictly increasing in t
  Outcome outcome = Outcome::max_steps;
  std::map<std::string, ExtraValue> extras;

  /// Appends (t, v) unless t repeats the last sample.
  void record(std::size_t t, double log_norm);

  template <typename T>
  const T& extra(const std::string& key) const {
    return std::get<T>(extras.at(key));
  }
};

/// Sampling stride ceil(max_steps / 512) used by the trajectory recorders.
std::size_t series_stride(std::size_t max_steps);

// ---------------------------------------------------------------------------
// Linearized dynamics

/// theta <- theta - lr H_t theta with H_t drawn i.i.d. from the ensemble.
/// Stops when |theta| drops below conv_radius or exceeds esc_radius.
/// A non-finite iterate stops the run as `escaped` with extras["nan"] = true.
RunRecord run_linearized(const HessianEnsemble& ens, double lr, const Eigen::VectorXd& theta0,
                         std::size_t max_steps, Seed seed, double conv_radius,
                         double esc_radius);

// ---------------------------------------------------------------------------
// Saddle classification

enum class SaddleType { TypeI, TypeII };
std::string_view to_string(SaddleType t);

struct SaddleProbe {
  Eigen::VectorXd point;
  Eigen::MatrixXd projection;
  std::vector<Eigen::VectorXd> per_sample_gradients;

  /// Throws std::invalid_argument unless P is square, matches the gradients,
  /// and P^2 = P within 1e-10.
  void validate() const;
};

/// TypeII iff max_x |P g_x| <= tol (1 + mean_x |g_x|).
SaddleType classify_saddle_type(const SaddleProbe& probe, double tol = 1e-8);

// ---------------------------------------------------------------------------
// u-w model

enum class ComponentStatus { converged, diverged, unresolved };
std::string_view to_string(ComponentStatus s);

struct UvConfig {
  std::size_t batch_size = 1;
  double lr = 0.1;
  std::size_t dim = 1;
  double init_scale = 1.0;
  std::size_t steps = 4000;
  Seed seed = 0;
  /// Components shrinking below conv_factor * initial (or growing beyond
  /// div_factor * initial) are resolved.
  double conv_factor = 1e-8;
  double div_factor = 1e8;
};

/// Per-coordinate coupled recursion w <- w + lr chi u, u <- u + lr chi w with a
/// fresh mini-batch statistic chi each step.
///
/// The substitution h = w + u, m = w - u splits it into h <- (1 + lr chi) h and
/// m <- (1 - lr chi) m. Both are tracked exactly as log-magnitude and sign, so
/// the phase label is read off at the final step without cancellation error.
/// The literal (w, u) iterate is carried until the first component leaves the
/// threshold band and is frozen from then on (extras["freeze_step"]).
///
/// Extras: phase (empirical label), h_status, m_status, log_h, log_m (final
/// log-magnitudes relative to the initial ones, per coordinate), q_m (time
/// average of (1 - lr chi_t)^2), w, u (carried iterate), freeze_step.
RunRecord run_uv_model(std::span<const double> products, const UvConfig& cfg);

/// Empirical phase label from the component statuses and the measured L2 factor.
Phase uv_phase(ComponentStatus h, ComponentStatus m, double q_m);

}  // namespace saddle
