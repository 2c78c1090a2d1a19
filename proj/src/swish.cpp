#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "parallel.hpp"
#include "saddle_scope/experiments.hpp"

namespace saddle {

namespace {
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
// d/dz swish(z) = s(z) (1 + z (1 - s(z)))
double swish_prime(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}
}  // namespace

double swish(double z) { return z * sigmoid(z); }

RegressionData swish_data(std::size_t n, Seed seed) {
  if (n == 0) throw std::invalid_argument("n must be positive");
  Rng rng(seed);
  RegressionData d;
  d.x.resize(static_cast<Eigen::Index>(n), 1);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    const double x = rng.normal();
    d.x(i, 0) = x;
    d.y[i] = 0.1 * swish(x) + 0.9 * rng.normal();
  }
  return d;
}

double swish_loss(const RegressionData& data, const Eigen::Vector2d& p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const double r = p[1] * swish(p[0] * data.x(i, 0)) - data.y[i];
    acc += r * r;
  }
  return acc / static_cast<double>(data.x.rows());
}

namespace {
Eigen::Vector2d sample_gradient(const Eigen::Vector2d& p, double x, double y) {
  const double z = p[0] * x;
  const double r = 2.0 * (p[1] * swish(z) - y);
  return {r * p[1] * swish_prime(z) * x, r * swish(z)};
}
}  // namespace

Eigen::Vector2d swish_gradient(const RegressionData& data, const Eigen::Vector2d& p) {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) g += sample_gradient(p, data.x(i, 0), data.y[i]);
  return g / static_cast<double>(data.x.rows());
}

Eigen::Matrix2d swish_hessian(const RegressionData& data, const Eigen::Vector2d& p, double step) {
  Eigen::Matrix2d h;
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e[j] = step;
    h.col(j) = (swish_gradient(data, p + e) - swish_gradient(data, p - e)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

std::vector<SwishMinimum> swish_landscape_minima(const RegressionData& data, double lo, double hi,
                                                 std::size_t n) {
  if (n < 3 || !(lo < hi)) throw std::invalid_argument("scan needs n >= 3 and lo < hi");
  const double step = (hi - lo) / static_cast<double>(n - 1);
  Eigen::MatrixXd grid(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      grid(i, j) = swish_loss(data, {lo + step * i, lo + step * j});

  std::vector<SwishMinimum> out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    for (std::size_t j = 1; j + 1 < n; ++j) {
      bool local = true;
      for (int di = -1; di <= 1 && local; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          if ((di || dj) && grid(i + di, j + dj) < grid(i, j)) {
            local = false;
            break;
          }
      if (!local) continue;
      // Newton refinement with a gradient-descent fallback.
      Eigen::Vector2d p(lo + step * i, lo + step * j);
      for (int it = 0; it < 500; ++it) {
        const Eigen::Vector2d g = swish_gradient(data, p);
        if (g.norm() < 1e-12) break;
        const Eigen::Matrix2d h = swish_hessian(data, p);
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
        Eigen::Vector2d dp = es.eigenvalues().minCoeff() > 1e-8 ? Eigen::Vector2d(h.ldlt().solve(g))
                                                                : Eigen::Vector2d(0.1 * g);
        if (dp.norm() > step) dp *= step / dp.norm();
        p -= dp;
      }
      SwishMinimum m;
      m.point = p;
      m.loss = swish_loss(data, p);
      m.hessian = swish_hessian(data, p);
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m.hessian);
      m.top_eigenvalue = es.eigenvalues().maxCoeff();
      if (es.eigenvalues().minCoeff() <= 0.0) continue;
      if (p.norm() < 1e-3 || p.minCoeff() < lo || p.maxCoeff() > hi) continue;
      const bool dup = std::any_of(out.begin(), out.end(), [&](const SwishMinimum& o) {
        return (o.point - p).norm() < 1e-4;
      });
      if (!dup) out.push_back(m);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SwishMinimum& a, const SwishMinimum& b) { return a.loss < b.loss; });
  return out;
}

const SwishMinimum& nearest_minimum(const std::vector<SwishMinimum>& minima,
                                    const Eigen::Vector2d& target) {
  if (minima.empty()) throw std::invalid_argument("no minima located");
  return *std::min_element(minima.begin(), minima.end(), [&](const auto& a, const auto& b) {
    return (a.point - target).norm() < (b.point - target).norm();
  });
}

RunRecord run_swish_selection(const RegressionData& data, const SwishConfig& cfg,
                              const Eigen::Vector2d& min_a, const Eigen::Vector2d& min_b) {
  if (!(cfg.lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (cfg.steps == 0) throw std::invalid_argument("steps must be positive");
  if (!(cfg.tail_fraction > 0.0 && cfg.tail_fraction <= 1.0))
    throw std::invalid_argument("tail_fraction must lie in (0, 1]");
  Rng rng(cfg.seed);
  Eigen::Vector2d p = cfg.init;
  const std::size_t tail_start =
      cfg.steps - static_cast<std::size_t>(std::ceil(cfg.tail_fraction * static_cast<double>(cfg.steps)));
  Eigen::Vector2d tail = Eigen::Vector2d::Zero();
  std::size_t tail_n = 0;

  RunRecord rec;
  rec.experiment = "swish";
  rec.seed = cfg.seed;
  rec.steps = cfg.steps;
  const std::size_t stride = series_stride(cfg.steps);
  rec.record(0, std::log(p.norm()));
  bool diverged = false;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const auto n = static_cast<Eigen::Index>(rng.index(data.size()));
    p -= cfg.lr * sample_gradient(p, data.x(n, 0), data.y[n]);
    const double norm = p.norm();
    if (!std::isfinite(norm) || norm > cfg.divergence_norm) {
      diverged = true;
      rec.steps = t;
      break;
    }
    if (t > tail_start) {
      tail += p;
      ++tail_n;
    }
    if (t % stride == 0 || t == cfg.steps) rec.record(t, norm > 0.0 ? std::log(norm) : -1e300);
  }

  std::string basin = "diverged";
  if (!diverged) {
    tail /= static_cast<double>(tail_n);
    if (tail.norm() <= cfg.basin_radius)
      basin = "C";
    else
      basin = (tail - min_a).norm() <= (tail - min_b).norm() ? "A" : "B";
    rec.extras["tail_w"] = tail[0];
    rec.extras["tail_u"] = tail[1];
  }
  rec.outcome = diverged ? Outcome::escaped : Outcome::max_steps;
  rec.extras["basin"] = basin;
  rec.extras["lr"] = cfg.lr;
  return rec;
}

std::vector<SwishSweepPoint> swish_lr_sweep(const RegressionData& data, const SwishConfig& cfg,
                                            const std::vector<double>& lrs, std::size_t replicates,
                                            const Eigen::Vector2d& min_a,
                                            const Eigen::Vector2d& min_b, unsigned threads) {
  if (replicates == 0) throw std::invalid_argument("replicates must be positive");
  const std::size_t n = lrs.size() * replicates;
  std::vector<std::string> basins(n);
  detail::parallel_for(n, threads, [&](std::size_t k) {
    SwishConfig c = cfg;
    const std::size_t i = k / replicates, r = k % replicates;
    c.lr = lrs[i];
    c.seed = mix64(cfg.seed, i, r);
    basins[k] = run_swish_selection(data, c, min_a, min_b).extra<std::string>("basin");
  });

  static const std::array<const char*, 4> order{"A", "B", "C", "diverged"};
  std::vector<SwishSweepPoint> out(lrs.size());
  for (std::size_t i = 0; i < lrs.size(); ++i) {
    out[i].lr = lrs[i];
    for (std::size_t r = 0; r < replicates; ++r) ++out[i].votes[basins[i * replicates + r]];
    int best = -1;
    for (const char* label : order) {
      const auto it = out[i].votes.find(label);
      if (it != out[i].votes.end() && it->second > best) {
        best = it->second;
        out[i].basin = label;
      }
    }
  }
  return out;
}

std::vector<std::string> compress_sequence(const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  for (const auto& l : labels)
    if (out.empty() || out.back() != l) out.push_back(l);
  return out;
}

}  // namespace saddle
