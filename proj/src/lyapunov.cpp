#include "saddle_scope/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "saddle_scope/errors.hpp"
#include "parallel.hpp"
#include "saddle_scope/stability.hpp"

namespace saddle {

void LyapunovProtocol::validate() const {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");
  if (!(lower_cutoff > 0.0 && lower_cutoff < 1.0 && upper_cutoff > 1.0 &&
        std::isfinite(upper_cutoff)))
    throw std::invalid_argument("cutoffs must satisfy 0 < lower < 1 < upper < inf");
  if (renormalize_every < 1) throw std::invalid_argument("renormalize_every must be >= 1");
}

namespace {

enum class Stop { upper, lower, max_steps };

struct RunResult {
  double value = 0.0;
  Stop stop = Stop::max_steps;
};

constexpr double kRescaleHigh = 1e100;
constexpr double kRescaleLow = 1e-100;

template <int D>
class Kernel {
 public:
  using Mat = Eigen::Matrix<double, D, D>;
  using Vec = Eigen::Matrix<double, D, 1>;

  Kernel(const HessianEnsemble& ens, double lr) : ens_(ens) {
    const auto d = ens.dimension();
    factors_.reserve(ens.size());
    for (const auto& h : ens.matrices()) factors_.push_back(Mat::Identity(d, d) - lr * h);
  }

  RunResult run(std::size_t r, const LyapunovProtocol& proto) const {
    Rng rng(mix64(proto.seed, r));
    Vec theta = rng.unit_sphere(ens_.dimension());
    const double log_up = std::log(proto.upper_cutoff);
    const double log_low = std::log(proto.lower_cutoff);
    double log_scale = 0.0;
    double log_norm = 0.0;
    for (std::size_t t = 1; t <= proto.max_steps; ++t) {
      theta = factors_[ens_.sample_index(rng)] * theta;
      const double n = theta.norm();
      const double td = static_cast<double>(t);
      if (n == 0.0) return {log_low / td, Stop::lower};
      log_norm = log_scale + std::log(n);
      if (log_norm >= log_up) return {log_norm / td, Stop::upper};
      if (log_norm <= log_low) return {log_norm / td, Stop::lower};
      if (t % proto.renormalize_every == 0 || n > kRescaleHigh || n < kRescaleLow) {
        theta /= n;
        log_scale = log_norm;
      }
    }
    return {log_norm / static_cast<double>(proto.max_steps), Stop::max_steps};
  }

 private:
  const HessianEnsemble& ens_;
  std::vector<Mat, Eigen::aligned_allocator<Mat>> factors_;
};

template <int D>
std::vector<RunResult> run_all(const HessianEnsemble& ens, double lr,
                               const LyapunovProtocol& proto) {
  const Kernel<D> kernel(ens, lr);
  std::vector<RunResult> results(proto.n_runs);
  detail::parallel_for(proto.n_runs, proto.threads,
                       [&](std::size_t r) { results[r] = kernel.run(r, proto); });
  return results;
}

}  // namespace

LyapunovEstimate estimate_max_lyapunov(const HessianEnsemble& ens, double lr,
                                       const LyapunovProtocol& proto) {
  proto.validate();
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw std::invalid_argument(fmt::format("learning rate must be > 0, got {}", lr));
  std::vector<RunResult> results;
  switch (ens.dimension()) {
    case 2: results = run_all<2>(ens, lr, proto); break;
    case 3: results = run_all<3>(ens, lr, proto); break;
    case 4: results = run_all<4>(ens, lr, proto); break;
    default: results = run_all<Eigen::Dynamic>(ens, lr, proto); break;
  }

  LyapunovEstimate est;
  est.lambda = lr;
  est.n_runs = results.size();
  double sum = 0.0;
  for (const auto& r : results) {
    sum += r.value;
    switch (r.stop) {
      case Stop::upper: ++est.stops.upper; break;
      case Stop::lower: ++est.stops.lower; break;
      case Stop::max_steps: ++est.stops.max_steps; break;
    }
  }
  const double n = static_cast<double>(results.size());
  est.mean = sum / n;
  if (results.size() > 1) {
    double ss = 0.0;
    for (const auto& r : results) ss += (r.value - est.mean) * (r.value - est.mean);
    est.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return est;
}

LyapunovBounds lyapunov_bounds(const HessianEnsemble& ens, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& h : ens.matrices()) {
    // I - lr H is symmetric: singular values are |1 - lr e| over eigenvalues e of H.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      const double f = std::abs(1.0 - lr * es.eigenvalues()[k]);
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
  }
  return {lo == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(lo), std::log(hi)};
}

double small_lr_expansion(const HessianEnsemble& ens, const Eigen::VectorXd& theta0, double lr) {
  if (theta0.size() != ens.dimension())
    throw std::invalid_argument("theta0 dimension does not match the ensemble");
  const double n2 = theta0.squaredNorm();
  if (!(n2 > 0.0)) throw std::invalid_argument("theta0 must be nonzero");
  return -2.0 * lr * theta0.dot(ens.mean() * theta0) / n2;
}

std::vector<double> diagonal_approx_exponents(const std::vector<ScalarNoiseDistribution>& diag,
                                              double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  std::vector<double> out;
  out.reserve(diag.size());
  for (const auto& d : diag) out.push_back(log_contraction_rate({d, lr}, Sign::plus));
  return out;
}

std::vector<double> diagonal_approx_exponents(const HessianEnsemble& ens, double lr) {
  return diagonal_approx_exponents(ens.diagonal_marginals(), lr);
}

double upper_bound_rate(const HessianEnsemble& ens, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ens.matrices()[i],
                                                            Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    const double f = 1.0 - lr * top;
    if (!(f > 0.0))
      throw InapplicableConditionError(fmt::format(
          "sample {} has 1 - lr h* = {} <= 0; the sufficient condition does not apply", i, f));
    acc += ens.probabilities()[i] * std::log(f);
  }
  return acc;
}

}  // namespace saddle
