#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "saddle_scope/experiments.hpp"
#include "saddle_scope/root_finding.hpp"
#include "saddle_scope/stability.hpp"

namespace saddle {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double act_value(Activation a, double z) { return a == Activation::tanh ? std::tanh(z) : z; }
double act_slope(Activation a, double z) {
  if (a == Activation::linear) return 1.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}
}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument(fmt::format("unknown activation '{}' (expected linear|tanh)", name));
}

Mlp::Mlp(std::vector<std::size_t> widths, Activation act, bool hidden_bias)
    : widths_(std::move(widths)), act_(act), hidden_bias_(hidden_bias) {
  if (widths_.size() < 2) throw std::invalid_argument("an MLP needs at least input and output widths");
  for (auto w : widths_)
    if (w == 0) throw std::invalid_argument("layer widths must be positive");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(widths_[l + 1]);
    weights_.push_back(Eigen::MatrixXd::Zero(out, static_cast<Eigen::Index>(widths_[l])));
    const bool has_bias = hidden_bias_ && l + 2 < widths_.size();
    biases_.push_back(Eigen::VectorXd::Zero(has_bias ? out : 0));
  }
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(n_params()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    theta.segment(off, weights_[l].size()) = weights_[l].reshaped();
    off += weights_[l].size();
    theta.segment(off, biases_[l].size()) = biases_[l];
    off += biases_[l].size();
  }
  return theta;
}

void Mlp::set_parameters(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != n_params())
    throw std::invalid_argument(fmt::format("expected {} parameters, got {}", n_params(), theta.size()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l].reshaped() = theta.segment(off, weights_[l].size());
    off += weights_[l].size();
    biases_[l] = theta.segment(off, biases_[l].size());
    off += biases_[l].size();
  }
}

void Mlp::set_zero() {
  for (auto& w : weights_) w.setZero();
  for (auto& b : biases_) b.setZero();
}

void Mlp::kaiming_init(Rng& rng) {
  for (auto& w : weights_) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = sd * rng.normal();
  }
  for (auto& b : biases_) b.setZero();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a;
    if (biases_[l].size()) z += biases_[l];
    if (l + 1 < weights_.size()) z = z.unaryExpr([&](double v) { return act_value(act_, v); });
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd Mlp::gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const std::size_t L = weights_.size();
  std::vector<Eigen::VectorXd> acts{x}, pre;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::VectorXd z = weights_[l] * acts.back();
    if (biases_[l].size()) z += biases_[l];
    pre.push_back(z);
    acts.push_back(l + 1 < L ? Eigen::VectorXd(z.unaryExpr([&](double v) { return act_value(act_, v); }))
                             : z);
  }
  Eigen::VectorXd delta = acts.back() - y;
  std::vector<Eigen::MatrixXd> gw(L);
  std::vector<Eigen::VectorXd> gb(L);
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L)
      delta = delta.cwiseProduct(pre[l].unaryExpr([&](double v) { return act_slope(act_, v); }));
    gw[l] = delta * acts[l].transpose();
    gb[l] = biases_[l].size() ? delta : Eigen::VectorXd();
    if (l > 0) delta = weights_[l].transpose() * delta;
  }
  Eigen::VectorXd g(static_cast<Eigen::Index>(n_params()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    g.segment(off, gw[l].size()) = gw[l].reshaped();
    off += gw[l].size();
    g.segment(off, gb[l].size()) = gb[l];
    off += gb[l].size();
  }
  return g;
}

void Mlp::sgd_step(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, double lr) {
  if (xs.cols() != ys.cols() || xs.cols() == 0) throw std::invalid_argument("batch shape mismatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params()));
  for (Eigen::Index b = 0; b < xs.cols(); ++b) g += gradient(xs.col(b), ys.col(b));
  set_parameters(parameters() - (lr / static_cast<double>(xs.cols())) * g);
}

std::size_t numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (!(s[0] > 0.0)) return 0;
  return static_cast<std::size_t>((s.array() > tol * s[0]).count());
}

RunRecord run_deep_linear_rank(const DeepRankConfig& cfg) {
  if (cfg.widths.size() < 3) throw std::invalid_argument("need at least one hidden layer");
  if (cfg.widths.front() != cfg.widths.back())
    throw std::invalid_argument("input and output widths must match (y = mu x + ...)");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw std::invalid_argument("lr must be >= 0");
  if (cfg.batch_size == 0 || cfg.steps == 0)
    throw std::invalid_argument("batch_size and steps must be positive");
  const auto d = static_cast<Eigen::Index>(cfg.widths.front());
  if (cfg.input_rotation) {
    const auto& r = *cfg.input_rotation;
    if (r.rows() != d || r.cols() != d ||
        !(r.transpose() * r).isApprox(Eigen::MatrixXd::Identity(d, d), 1e-10))
      throw std::invalid_argument("input_rotation must be an orthogonal d x d matrix");
  }

  Rng rng(cfg.seed);
  Mlp net(cfg.widths, cfg.activation);
  net.kaiming_init(rng);
  if (cfg.input_rotation) net.weight(0) = net.weight(0) * cfg.input_rotation->transpose();

  RunRecord rec;
  rec.experiment = "deep-rank";
  rec.seed = cfg.seed;
  rec.steps = cfg.steps;
  const std::size_t stride = series_stride(cfg.steps);
  rec.record(0, std::log(net.parameters().norm()));

  const auto bs = static_cast<Eigen::Index>(cfg.batch_size);
  Eigen::MatrixXd xs(d, bs), ys(d, bs);
  bool diverged = false;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    for (Eigen::Index b = 0; b < bs; ++b) {
      for (Eigen::Index i = 0; i < d; ++i) {
        const double x = rng.normal();
        const double eps = cfg.noise_std * rng.normal();
        xs(i, b) = x;
        ys(i, b) = cfg.mu * x + (1.0 - cfg.mu) * eps;
      }
    }
    if (cfg.input_rotation) xs = (*cfg.input_rotation) * xs;
    net.sgd_step(xs, ys, cfg.lr);
    const double norm = net.parameters().norm();
    if (!std::isfinite(norm) || norm > 1e8) {
      diverged = true;
      rec.steps = t;
      break;
    }
    if (t % stride == 0 || t == cfg.steps) rec.record(t, std::log(norm));
  }

  rec.outcome = diverged ? Outcome::escaped : Outcome::max_steps;
  rec.extras["diverged"] = diverged;
  if (diverged) {
    rec.extras["rank"] = std::int64_t{-1};
    rec.extras["singular_values"] = std::vector<double>{};
  } else {
    const auto& w2 = net.weight(1);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(w2);
    const auto& s = svd.singularValues();
    rec.extras["rank"] = static_cast<std::int64_t>(numerical_rank(w2, cfg.rank_tol));
    rec.extras["singular_values"] = std::vector<double>(s.data(), s.data() + s.size());
  }
  rec.extras["lr"] = cfg.lr;
  rec.extras["mu"] = cfg.mu;
  return rec;
}

std::vector<double> masked_noise_variances(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  std::vector<double> s(dim);
  for (std::size_t k = 0; k < dim; ++k)
    s[k] = dim == 1 ? 0.01 : 0.01 + 2.0 * static_cast<double>(k) / static_cast<double>(dim - 1);
  return s;
}

namespace {
// Draws per direction: chi = X (mu X + (1 - mu) eps), eps ~ N(0, 2 s_k).
std::vector<std::vector<double>> masked_chi_draws(std::size_t dim, double mu, std::size_t samples,
                                                  Seed seed) {
  if (samples == 0) throw std::invalid_argument("samples must be positive");
  const auto s = masked_noise_variances(dim);
  std::vector<std::vector<double>> out(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    Rng rng(mix64(seed, k));
    const double sd = std::sqrt(2.0 * s[k]);
    out[k].resize(samples);
    for (auto& v : out[k]) {
      const double x = rng.normal();
      v = x * (mu * x + (1.0 - mu) * sd * rng.normal());
    }
  }
  return out;
}
}  // namespace

std::vector<ScalarNoiseDistribution> masked_factorization_chi(std::size_t dim, double mu,
                                                              std::size_t samples, Seed seed) {
  const auto draws = masked_chi_draws(dim, mu, samples, seed);
  const double p_active = 1.0 / static_cast<double>(dim);
  std::vector<ScalarNoiseDistribution> out;
  for (const auto& d : draws) {
    std::vector<Atom> atoms;
    atoms.reserve(d.size() + 1);
    if (dim > 1) atoms.push_back({0.0, 1.0 - p_active});
    for (double v : d) atoms.push_back({v, p_active / static_cast<double>(d.size())});
    out.emplace_back(std::move(atoms));
  }
  return out;
}

HessianEnsemble masked_factorization_ensemble(std::size_t dim, double mu, std::size_t samples,
                                              Seed seed) {
  const auto draws = masked_chi_draws(dim, mu, samples, seed);
  const auto n = static_cast<Eigen::Index>(2 * dim);
  std::vector<Eigen::MatrixXd> mats;
  std::vector<double> probs;
  const double p = 1.0 / static_cast<double>(dim * samples);
  for (std::size_t k = 0; k < dim; ++k) {
    for (double v : draws[k]) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
      h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = -v;
      h(static_cast<Eigen::Index>(dim + k), static_cast<Eigen::Index>(dim + k)) = v;
      mats.push_back(std::move(h));
      probs.push_back(p);
    }
  }
  return HessianEnsemble(std::move(mats), std::move(probs));
}

double masked_collapse_lr(const ScalarNoiseDistribution& chi, double lr_max) {
  if (!(lr_max > 0.0)) throw std::invalid_argument("lr_max must be positive");
  auto r_h = [&](double lr) { return log_contraction_rate({chi, lr, 0.0}, Sign::minus); };
  auto r_m = [&](double lr) { return log_contraction_rate({chi, lr, 0.0}, Sign::plus); };
  RootOptions opt;
  opt.scan_points = 2048;
  for (double root : scan_roots(r_h, 0.0, lr_max, opt)) {
    // The h rate changes sign at root; collapse needs it to turn negative.
    const double after = std::min(lr_max, root * (1.0 + 1e-6));
    if (r_h(after) < 0.0 && r_m(after) < 0.0) return root;
  }
  return kNaN;
}

RunRecord run_masked_factorization(const MaskedFactorizationConfig& cfg,
                                   std::vector<Eigen::VectorXd>* gradient_trace) {
  if (cfg.dim == 0 || cfg.steps == 0) throw std::invalid_argument("dim and steps must be positive");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw std::invalid_argument("lr must be >= 0");
  if (!(cfg.init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  const auto s = masked_noise_variances(cfg.dim);
  Rng rng(cfg.seed);
  Eigen::MatrixXd w1(d, d), w2(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) w1(i, j) = cfg.init_scale * rng.normal();
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) w2(i, j) = cfg.init_scale * rng.normal();

  auto direction_norms = [&] {
    Eigen::VectorXd n(d);
    for (Eigen::Index k = 0; k < d; ++k) n[k] = w2.row(k).squaredNorm() + w1.col(k).squaredNorm();
    return n;
  };
  const Eigen::VectorXd n0 = direction_norms();

  RunRecord rec;
  rec.experiment = "masked-factorization";
  rec.seed = cfg.seed;
  rec.steps = cfg.steps;
  const std::size_t stride = series_stride(cfg.steps);
  auto total_norm = [&] { return std::sqrt(w1.squaredNorm() + w2.squaredNorm()); };
  rec.record(0, std::log(total_norm()));

  bool diverged = false;
  Eigen::VectorXd resid(d), hidden(d);
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const auto k = static_cast<Eigen::Index>(rng.index(cfg.dim));
    const double x = rng.normal();
    const double eps = std::sqrt(2.0 * s[static_cast<std::size_t>(k)]) * rng.normal();
    hidden = w1.col(k) * x;
    resid = w2 * hidden;
    resid[k] -= cfg.mu * x + (1.0 - cfg.mu) * eps;
    const Eigen::VectorXd g1 = (w2.transpose() * resid) * x;
    if (gradient_trace && (t % stride == 0 || t == cfg.steps)) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * d * d);
      g.segment(k * d, d) = g1;
      g.segment(d * d, d * d) = (resid * hidden.transpose()).reshaped();
      gradient_trace->push_back(std::move(g));
    }
    w2.noalias() -= cfg.lr * resid * hidden.transpose();
    w1.col(k) -= cfg.lr * g1;
    if (t % stride == 0 || t == cfg.steps) {
      const double norm = total_norm();
      if (!std::isfinite(norm) || norm > 1e8) {
        diverged = true;
        rec.steps = t;
        break;
      }
      rec.record(t, std::log(norm));
    }
  }

  const Eigen::VectorXd n1 = direction_norms();
  std::vector<double> exps(cfg.dim);
  for (Eigen::Index k = 0; k < d; ++k)
    exps[static_cast<std::size_t>(k)] =
        diverged ? std::numeric_limits<double>::infinity()
                 : (std::log(n1[k]) - std::log(n0[k])) / (2.0 * static_cast<double>(rec.steps));
  rec.outcome = diverged ? Outcome::escaped : Outcome::max_steps;
  rec.extras["exponents"] = exps;
  rec.extras["rank"] = diverged ? std::int64_t{-1} : static_cast<std::int64_t>(numerical_rank(w2 * w1));
  rec.extras["diverged"] = diverged;
  rec.extras["lr"] = cfg.lr;
  return rec;
}

SubspaceReport subspace_convergence_diagnostic(const RunRecord& record,
                                               const std::vector<Eigen::VectorXd>& gradients,
                                               const Eigen::VectorXd& direction,
                                               double tail_fraction) {
  (void)record;
  if (gradients.empty()) throw std::invalid_argument("empty gradient series");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("tail_fraction must lie in (0, 1]");
  if (std::abs(direction.norm() - 1.0) > 1e-8) throw std::invalid_argument("direction must be a unit vector");
  const std::size_t n = gradients.size();
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * n)));
  SubspaceReport r;
  for (std::size_t i = n - tail; i < n; ++i) {
    if (gradients[i].size() != direction.size())
      throw std::invalid_argument("gradient and direction dimensions differ");
    r.grad_tail += gradients[i].norm();
    r.projected_tail += std::abs(direction.dot(gradients[i]));
  }
  r.grad_tail /= static_cast<double>(tail);
  r.projected_tail /= static_cast<double>(tail);
  r.subspace_converged = r.grad_tail > 10.0 * r.projected_tail;
  return r;
}

}  // namespace saddle
