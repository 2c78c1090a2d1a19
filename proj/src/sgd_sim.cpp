#include "saddle_scope/sgd_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace saddle {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::converged: return "converged";
    case Outcome::escaped: return "escaped";
    case Outcome::max_steps: return "max_steps";
  }
  return "max_steps";
}

Outcome outcome_from_string(std::string_view name) {
  if (name == "converged") return Outcome::converged;
  if (name == "escaped") return Outcome::escaped;
  if (name == "max_steps") return Outcome::max_steps;
  throw std::invalid_argument(fmt::format("unknown outcome '{}'", name));
}

void RunRecord::record(std::size_t t, double log_norm) {
  if (!lognorm_series.empty() && lognorm_series.back().t >= t) return;
  lognorm_series.push_back({t, log_norm});
}

std::size_t series_stride(std::size_t max_steps) {
  return std::max<std::size_t>(1, (max_steps + 511) / 512);
}

RunRecord run_linearized(const HessianEnsemble& ens, double lr, const Eigen::VectorXd& theta0,
                         std::size_t max_steps, Seed seed, double conv_radius,
                         double esc_radius) {
  if (theta0.size() != ens.dimension())
    throw std::invalid_argument("theta0 dimension does not match the ensemble");
  const double n0 = theta0.norm();
  if (!(conv_radius < n0 && n0 < esc_radius))
    throw std::invalid_argument(
        fmt::format("radii must satisfy conv_radius < |theta0| < esc_radius ({} < {} < {})",
                    conv_radius, n0, esc_radius));
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be >= 0");

  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(ens.size());
  for (const auto& h : ens.matrices())
    factors.push_back(Eigen::MatrixXd::Identity(h.rows(), h.cols()) - lr * h);

  RunRecord rec;
  rec.experiment = "linearized";
  rec.seed = seed;
  rec.extras["nan"] = false;
  Rng rng(seed);
  Eigen::VectorXd theta = theta0;
  const std::size_t stride = series_stride(max_steps);
  rec.record(0, std::log(n0));
  std::size_t t = 0;
  while (t < max_steps) {
    ++t;
    theta = factors[ens.sample_index(rng)] * theta;
    const double n = theta.norm();
    if (!std::isfinite(n)) {
      rec.outcome = Outcome::escaped;
      rec.extras["nan"] = true;
      break;
    }
    const double ln = n > 0.0 ? std::log(n) : -std::numeric_limits<double>::infinity();
    if (n < conv_radius) {
      rec.outcome = Outcome::converged;
      rec.record(t, ln);
      break;
    }
    if (n > esc_radius) {
      rec.outcome = Outcome::escaped;
      rec.record(t, ln);
      break;
    }
    if (t % stride == 0 || t == max_steps) rec.record(t, ln);
  }
  rec.steps = t;
  return rec;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SaddleType t) { return t == SaddleType::TypeI ? "TypeI" : "TypeII"; }

void SaddleProbe::validate() const {
  const auto n = projection.rows();
  if (projection.cols() != n) throw std::invalid_argument("projection must be square");
  if (per_sample_gradients.empty()) throw std::invalid_argument("no per-sample gradients");
  for (const auto& g : per_sample_gradients)
    if (g.size() != n) throw std::invalid_argument("gradient and projection sizes differ");
  if (point.size() != 0 && point.size() != n)
    throw std::invalid_argument("point and projection sizes differ");
  if ((projection * projection - projection).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("projection is not idempotent");
}

SaddleType classify_saddle_type(const SaddleProbe& probe, double tol) {
  probe.validate();
  double max_proj = 0.0, mean_norm = 0.0;
  for (const auto& g : probe.per_sample_gradients) {
    max_proj = std::max(max_proj, (probe.projection * g).norm());
    mean_norm += g.norm();
  }
  mean_norm /= static_cast<double>(probe.per_sample_gradients.size());
  return max_proj <= tol * (1.0 + mean_norm) ? SaddleType::TypeII : SaddleType::TypeI;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ComponentStatus s) {
  switch (s) {
    case ComponentStatus::converged: return "converged";
    case ComponentStatus::diverged: return "diverged";
    case ComponentStatus::unresolved: return "max_steps";
  }
  return "max_steps";
}

Phase uv_phase(ComponentStatus h, ComponentStatus m, double q_m) {
  const bool m_conv = m == ComponentStatus::converged;
  const bool h_conv = h == ComponentStatus::converged;
  if (m_conv && h_conv) return Phase::III;
  if (m_conv) return q_m < 1.0 ? Phase::Ia : Phase::Ib;
  if (h_conv) return Phase::II;
  return Phase::IV;
}

namespace {

struct LogSigned {
  double log_abs = 0.0;
  bool negative = false;

  void multiply(double f) {
    if (f < 0.0) negative = !negative;
    log_abs += std::log(std::abs(f));
  }
};

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

RunRecord run_uv_model(std::span<const double> products, const UvConfig& cfg) {
  if (products.empty()) throw std::invalid_argument("no data points");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (cfg.dim < 1) throw std::invalid_argument("dim must be at least 1");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw std::invalid_argument("lr must be >= 0");
  if (!(cfg.init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
  if (!(cfg.conv_factor > 0.0 && cfg.conv_factor < 1.0 && cfg.div_factor > 1.0))
    throw std::invalid_argument("need 0 < conv_factor < 1 < div_factor");

  Rng rng(cfg.seed);
  const std::size_t d = cfg.dim;
  Eigen::VectorXd w(d), u(d);
  for (std::size_t k = 0; k < d; ++k) {
    w[k] = cfg.init_scale * rng.normal();
    u[k] = cfg.init_scale * rng.normal();
  }
  const Eigen::VectorXd h0 = w + u, m0 = w - u;
  const double log_h0 = std::log(h0.squaredNorm());
  const double log_m0 = std::log(m0.squaredNorm());
  // log |theta|^2 = log((|h|^2 + |m|^2) / 2)
  auto log_theta = [&](double gh, double gm) {
    return 0.5 * (log_add_exp(log_h0 + 2.0 * gh, log_m0 + 2.0 * gm) - std::log(2.0));
  };

  const double log_conv = std::log(cfg.conv_factor);
  const double log_div = std::log(cfg.div_factor);
  const double inv_s = 1.0 / static_cast<double>(cfg.batch_size);
  LogSigned gh, gm;
  double q_sum = 0.0;
  std::int64_t freeze_step = -1;

  RunRecord rec;
  rec.experiment = "uv-model";
  rec.seed = cfg.seed;
  rec.steps = cfg.steps;
  const std::size_t stride = series_stride(cfg.steps);
  const double ln0 = log_theta(0.0, 0.0);
  rec.record(0, ln0);

  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    double chi = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) chi += products[rng.index(products.size())];
    chi *= inv_s;
    const double step = cfg.lr * chi;
    gh.multiply(1.0 + step);
    gm.multiply(1.0 - step);
    q_sum += (1.0 - step) * (1.0 - step);
    if (freeze_step < 0) {
      const Eigen::VectorXd w_next = w + step * u;
      u += step * w;
      w = w_next;
      const auto out = [&](double g) { return g <= log_conv || g >= log_div; };
      if (out(gh.log_abs) || out(gm.log_abs)) freeze_step = static_cast<std::int64_t>(t);
    }
    if (t % stride == 0 || t == cfg.steps) rec.record(t, log_theta(gh.log_abs, gm.log_abs));
  }

  auto status = [&](double g) {
    if (g <= log_conv) return ComponentStatus::converged;
    if (g >= log_div) return ComponentStatus::diverged;
    return ComponentStatus::unresolved;
  };
  const auto hs = status(gh.log_abs);
  const auto ms = status(gm.log_abs);
  const double q_m = cfg.steps > 0 ? q_sum / static_cast<double>(cfg.steps) : 1.0;

  const double growth = log_theta(gh.log_abs, gm.log_abs) - ln0;
  if (growth <= log_conv)
    rec.outcome = Outcome::converged;
  else if (growth >= log_div)
    rec.outcome = Outcome::escaped;
  else
    rec.outcome = Outcome::max_steps;

  rec.extras["phase"] = std::string(to_string(uv_phase(hs, ms, q_m)));
  rec.extras["h_status"] = std::string(to_string(hs));
  rec.extras["m_status"] = std::string(to_string(ms));
  rec.extras["log_h"] = gh.log_abs;
  rec.extras["log_m"] = gm.log_abs;
  rec.extras["h_negative"] = gh.negative;
  rec.extras["m_negative"] = gm.negative;
  rec.extras["q_m"] = q_m;
  rec.extras["freeze_step"] = freeze_step;
  rec.extras["w"] = std::vector<double>(w.data(), w.data() + w.size());
  rec.extras["u"] = std::vector<double>(u.data(), u.data() + u.size());
  rec.extras["h0"] = std::vector<double>(h0.data(), h0.data() + h0.size());
  rec.extras["m0"] = std::vector<double>(m0.data(), m0.data() + m0.size());
  return rec;
}

}  // namespace saddle
