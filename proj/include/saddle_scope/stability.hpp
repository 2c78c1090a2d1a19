#pragma once

#include <string>
#include <string_view>

#include "saddle_scope/noise_models.hpp"

namespace saddle {

/// Direction of the per-step factor 1 - sign * lr * h.
/// plus is the (m, minimum-like) factor 1 - lr h, minus the (h) factor 1 + lr h.
enum class Sign : int { plus = 1, minus = -1 };

struct StabilityQuery {
  const ScalarNoiseDistribution& dist;
  double lr = 0.0;
  double weight_decay = 0.0;

  /// Throws std::invalid_argument unless lr >= 0 and weight_decay >= 0, both finite.
  void validate() const;
};

/// E[log|1 - sign lr (h + gamma)|]. Returns -infinity when any atom makes the
/// factor exactly zero: the trajectory then hits the fixed point with positive
/// probability in a single step.
double log_contraction_rate(const StabilityQuery& q, Sign sign = Sign::plus);

/// E[|1 - sign lr (h + gamma)|^p]; below 1 means L_p contraction of the scalar recursion.
double lp_rate(const StabilityQuery& q, double p, Sign sign = Sign::plus);

/// -2 E[h] / E[h^2]. Throws DegenerateDistributionError when E[h^2] = 0.
double critical_lr(const ScalarNoiseDistribution& dist);

enum class Phase : int { Ia = 0, Ib = 1, II = 2, III = 3, IV = 4, Error = 5 };

std::string_view to_string(Phase phase);
/// Inverse of to_string; throws std::invalid_argument on unknown names.
Phase phase_from_string(std::string_view name);

struct PhaseRates {
  double r_m = 0.0;  // E log|1 - lr chi|
  double r_h = 0.0;  // E log|1 + lr chi|
  double q_m = 0.0;  // E (1 - lr chi)^2
  double q_h = 0.0;  // E (1 + lr chi)^2
  /// Some rate sits exactly on its threshold (r = 0 or q_m = 1).
  bool marginal = false;
};

PhaseRates phase_rates(const ScalarNoiseDistribution& chi, double lr);

/// Ties count as unstable: r >= 0 does not contract.
Phase classify_rates(const PhaseRates& rates);

/// Requires lr > 0.
Phase classify_phase(const ScalarNoiseDistribution& chi, double lr);

enum class LpVerdict { stable, unstable, inconclusive };
std::string_view to_string(LpVerdict v);

struct LpCounterexample {
  double lr = 0.0;
  double p = 0.0;
  double c0 = 0.0;
  bool prob_stable = true;
  /// 1/2 |1 - lr c0|^p, the per-step growth factor of E|theta_t|^p.
  double lp_rate = 0.0;
  LpVerdict lp = LpVerdict::inconclusive;
  ScalarNoiseDistribution dist;
};

/// Law {1/lr, c0} with equal weights. The first atom zeroes the iterate, so the
/// recursion is probabilistically stable for every c0, while E|theta_t|^p
/// grows like (lp_rate)^t.
LpCounterexample lp_counterexample(double lr, double p, double c0);

}  // namespace saddle
