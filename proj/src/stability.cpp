#include "saddle_scope/stability.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "saddle_scope/errors.hpp"

namespace saddle {

void StabilityQuery::validate() const {
  if (!std::isfinite(lr) || lr < 0.0)
    throw std::invalid_argument(fmt::format("learning rate must be finite and >= 0, got {}", lr));
  if (!std::isfinite(weight_decay) || weight_decay < 0.0)
    throw std::invalid_argument(
        fmt::format("weight decay must be finite and >= 0, got {}", weight_decay));
}

double log_contraction_rate(const StabilityQuery& q, Sign sign) {
  q.validate();
  const double s = static_cast<double>(static_cast<int>(sign));
  double acc = 0.0;
  for (const auto& a : q.dist.atoms()) {
    const double factor = std::abs(1.0 - s * q.lr * (a.value + q.weight_decay));
    if (factor == 0.0) return -std::numeric_limits<double>::infinity();
    acc += a.probability * std::log(factor);
  }
  return acc;
}

double lp_rate(const StabilityQuery& q, double p, Sign sign) {
  q.validate();
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::invalid_argument(fmt::format("p must be >= 1, got {}", p));
  const double s = static_cast<double>(static_cast<int>(sign));
  return q.dist.expect([&](double h) {
    const double factor = std::abs(1.0 - s * q.lr * (h + q.weight_decay));
    return p == 2.0 ? factor * factor : std::pow(factor, p);
  });
}

double critical_lr(const ScalarNoiseDistribution& dist) {
  const double m2 = dist.moment(2);
  if (m2 == 0.0) throw DegenerateDistributionError("E[h^2] = 0: critical learning rate undefined");
  return -2.0 * dist.mean() / m2;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Ia: return "Ia";
    case Phase::Ib: return "Ib";
    case Phase::II: return "II";
    case Phase::III: return "III";
    case Phase::IV: return "IV";
    case Phase::Error: return "ERR";
  }
  return "ERR";
}

Phase phase_from_string(std::string_view name) {
  for (int i = 0; i <= 5; ++i) {
    const auto p = static_cast<Phase>(i);
    if (to_string(p) == name) return p;
  }
  throw std::invalid_argument(fmt::format("unknown phase label '{}'", name));
}

PhaseRates phase_rates(const ScalarNoiseDistribution& chi, double lr) {
  const StabilityQuery q{chi, lr};
  PhaseRates r;
  r.r_m = log_contraction_rate(q, Sign::plus);
  r.r_h = log_contraction_rate(q, Sign::minus);
  r.q_m = lp_rate(q, 2.0, Sign::plus);
  r.q_h = lp_rate(q, 2.0, Sign::minus);
  r.marginal = r.r_m == 0.0 || r.r_h == 0.0 || r.q_m == 1.0;
  return r;
}

Phase classify_rates(const PhaseRates& r) {
  const bool m_contracts = r.r_m < 0.0;
  const bool h_contracts = r.r_h < 0.0;
  if (m_contracts && h_contracts) return Phase::III;
  if (m_contracts) return r.q_m < 1.0 ? Phase::Ia : Phase::Ib;
  if (h_contracts) return Phase::II;
  return Phase::IV;
}

Phase classify_phase(const ScalarNoiseDistribution& chi, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw std::invalid_argument(fmt::format("classify_phase needs lr > 0, got {}", lr));
  return classify_rates(phase_rates(chi, lr));
}

std::string_view to_string(LpVerdict v) {
  switch (v) {
    case LpVerdict::stable: return "stable";
    case LpVerdict::unstable: return "unstable";
    case LpVerdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

LpCounterexample lp_counterexample(double lr, double p, double c0) {
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw std::invalid_argument(fmt::format("lp_counterexample needs lr > 0, got {}", lr));
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::invalid_argument(fmt::format("p must be >= 1, got {}", p));
  if (!std::isfinite(c0)) throw std::invalid_argument("c0 must be finite");
  // One mass point at exactly 1/lr would not survive lr * (1/lr) != 1 in floating
  // point, so the two defining quantities are evaluated in closed form.
  const double rate = 0.5 * std::pow(std::abs(1.0 - lr * c0), p);
  LpVerdict verdict = LpVerdict::inconclusive;
  if (rate < 1.0) verdict = LpVerdict::stable;
  if (rate > 1.0) verdict = LpVerdict::unstable;
  return LpCounterexample{lr, p, c0, true, rate, verdict,
                          ScalarNoiseDistribution({{1.0 / lr, 0.5}, {c0, 0.5}})};
}

}  // namespace saddle
