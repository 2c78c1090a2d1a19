#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "saddle_scope/experiments.hpp"

namespace saddle {

SpredProblem planted_spred_problem(std::size_t dim, std::size_t n_samples, double kappa,
                                   double support_fraction, Seed seed) {
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  if (n_samples < dim) throw std::invalid_argument("need n_samples >= dim for a whitened design");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (!(support_fraction >= 0.0 && support_fraction <= 1.0))
    throw std::invalid_argument("support_fraction must lie in [0, 1]");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(n_samples), d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);

  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_support = static_cast<std::size_t>(std::llround(support_fraction * static_cast<double>(dim)));

  SpredProblem p;
  p.kappa = kappa;
  p.support_fraction = static_cast<double>(n_support) / static_cast<double>(dim);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
  p.lasso_solution = Eigen::VectorXd::Zero(d);
  for (std::size_t s = 0; s < n_support; ++s) {
    const auto j = static_cast<Eigen::Index>(order[s]);
    const double excess = 0.5 + rng.uniform();
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    c[j] = sign * (kappa + excess);
    p.lasso_solution[j] = sign * excess;
  }
  p.data.x = std::sqrt(static_cast<double>(n)) * q;
  p.data.y = p.data.x * c;
  return p;
}

double sparsity(const Eigen::VectorXd& beta, double tol) {
  if (beta.size() == 0) return 1.0;
  const double m = beta.cwiseAbs().maxCoeff();
  if (m == 0.0) return 1.0;
  const auto small = (beta.array().abs() < tol * m).count();
  return static_cast<double>(small) / static_cast<double>(beta.size());
}

RunRecord run_spred_lasso(const SpredProblem& problem, const SpredConfig& cfg) {
  if (!(cfg.lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (!(cfg.init_scale >= 0.0)) throw std::invalid_argument("init_scale must be >= 0");
  const auto& X = problem.data.x;
  const auto& y = problem.data.y;
  const auto d = X.cols();
  Rng rng(cfg.seed);
  Eigen::VectorXd u = cfg.init_scale * rng.normal_vector(d);
  Eigen::VectorXd w = cfg.init_scale * rng.normal_vector(d);

  RunRecord rec;
  rec.experiment = "spred";
  rec.seed = cfg.seed;
  rec.steps = cfg.steps;
  const std::size_t stride = series_stride(cfg.steps);
  auto log_err = [&] {
    const double e = (u.cwiseProduct(w) - problem.lasso_solution).norm();
    return e > 0.0 ? std::log(e) : -std::numeric_limits<double>::infinity();
  };
  rec.record(0, log_err());
  const double k2 = 2.0 * problem.kappa;
  bool diverged = false;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const auto n = static_cast<Eigen::Index>(rng.index(problem.data.size()));
    const auto x = X.row(n).transpose();
    const double r = 2.0 * (u.cwiseProduct(w).dot(x) - y[n]);
    const Eigen::VectorXd gu = r * w.cwiseProduct(x) + k2 * u;
    const Eigen::VectorXd gw = r * u.cwiseProduct(x) + k2 * w;
    u -= cfg.lr * gu;
    w -= cfg.lr * gw;
    const double norm = u.squaredNorm() + w.squaredNorm();
    if (!std::isfinite(norm) || norm > cfg.divergence_norm * cfg.divergence_norm) {
      diverged = true;
      rec.steps = t;
      break;
    }
    if (t % stride == 0 || t == cfg.steps) rec.record(t, log_err());
  }
  const Eigen::VectorXd beta = u.cwiseProduct(w);
  rec.extras["diverged"] = diverged;
  if (diverged) {
    rec.outcome = Outcome::escaped;
    rec.extras["sparsity"] = std::numeric_limits<double>::quiet_NaN();
  } else {
    rec.outcome = Outcome::max_steps;
    rec.extras["sparsity"] = sparsity(beta, cfg.sparsity_tol);
    rec.extras["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  }
  rec.extras["lasso_error"] = diverged ? std::numeric_limits<double>::quiet_NaN()
                                       : (beta - problem.lasso_solution).norm();
  rec.extras["lr"] = cfg.lr;
  return rec;
}

}  // namespace saddle
