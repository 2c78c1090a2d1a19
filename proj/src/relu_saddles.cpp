#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "saddle_scope/errors.hpp"
#include "saddle_scope/experiments.hpp"
#include "saddle_scope/root_finding.hpp"

namespace saddle {

LineFit fit_line(std::span<const double> t, std::span<const double> v) {
  if (t.size() != v.size() || t.size() < 2) throw std::invalid_argument("fit needs >= 2 points");
  const double n = static_cast<double>(t.size());
  double mt = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    mv += v[i];
  }
  mt /= n;
  mv /= n;
  double stt = 0.0, stv = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    stv += (t[i] - mt) * (v[i] - mv);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  LineFit f;
  f.slope = stt > 0.0 ? stv / stt : 0.0;
  f.intercept = mv - f.slope * mt;
  f.r2 = svv > 0.0 ? stv * stv / (stt * svv) : 1.0;
  return f;
}

RegressionData relu_teacher_data(std::size_t n, std::size_t dim, double noise_std, Seed seed) {
  if (n == 0 || dim == 0) throw std::invalid_argument("need n >= 1 and dim >= 1");
  Rng rng(seed);
  RegressionData d;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(i, j) = rng.normal();
    d.y[i] = std::tanh(2.0 * d.x(i, 0)) + noise_std * rng.normal();
  }
  return d;
}

ReluNet::ReluNet(std::size_t width, std::size_t dim) : width_(width), dim_(dim) {
  if (width == 0 || dim == 0) throw std::invalid_argument("width and dim must be positive");
}

double ReluNet::predict(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
  double f = 0.0;
  const auto k = static_cast<Eigen::Index>(width_), d = static_cast<Eigen::Index>(dim_);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double pre = theta.segment(k + i * d, d).dot(x);
    if (pre > 0.0) f += theta[i] * pre;
  }
  return f;
}

Eigen::VectorXd ReluNet::gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                  double y) const {
  const auto k = static_cast<Eigen::Index>(width_), d = static_cast<Eigen::Index>(dim_);
  Eigen::VectorXd pre(k);
  double f = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    pre[i] = theta.segment(k + i * d, d).dot(x);
    if (pre[i] > 0.0) f += theta[i] * pre[i];
  }
  const double r = 2.0 * (f - y);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params()));
  for (Eigen::Index i = 0; i < k; ++i) {
    if (pre[i] <= 0.0) continue;
    g[i] = r * pre[i];
    g.segment(k + i * d, d) = r * theta[i] * x;
  }
  return g;
}

std::vector<Eigen::Vector2d> relu_type1_directions(const RegressionData& data) {
  if (data.x.cols() != 2) throw std::invalid_argument("type-I construction needs 2-D inputs");
  auto drive = [&](double phi) {
    const Eigen::Vector2d w(std::cos(phi), std::sin(phi));
    double s = 0.0;
    for (Eigen::Index n = 0; n < data.x.rows(); ++n) {
      const double pre = data.x.row(n).dot(w);
      if (pre > 0.0) s += data.y[n] * pre;
    }
    return s;
  };
  const double g0 = drive(0.0), gpi = drive(M_PI);
  if ((g0 < 0.0) == (gpi < 0.0))
    throw std::invalid_argument("E[y relu(w.x)] has the same sign at w = e1 and w = -e1");
  RootOptions opt;
  opt.f_tol = 0.0;
  opt.x_tol = 1e-15;
  std::vector<Eigen::Vector2d> out;
  for (double end : {M_PI, -M_PI}) {
    const double lo = std::min(0.0, end), hi = std::max(0.0, end);
    const double phi = bisect(drive, lo, hi, drive(lo), opt);
    out.emplace_back(std::cos(phi), std::sin(phi));
  }
  return out;
}

Eigen::VectorXd relu_saddle_point(const ReluNet& net, const RegressionData& data,
                                  SaddleType which) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_params()));
  if (which == SaddleType::TypeII) return theta;
  const auto dirs = relu_type1_directions(data);
  const auto k = static_cast<Eigen::Index>(net.width());
  for (Eigen::Index i = 0; i < k; ++i) theta.segment(k + 2 * i, 2) = dirs[static_cast<std::size_t>(i) % 2];
  return theta;
}

SaddleProbe relu_saddle_probe(const ReluNet& net, const RegressionData& data,
                              const Eigen::VectorXd& point) {
  SaddleProbe p;
  p.point = point;
  p.projection = Eigen::MatrixXd::Identity(point.size(), point.size());
  for (Eigen::Index n = 0; n < data.x.rows(); ++n)
    p.per_sample_gradients.push_back(net.gradient(point, data.x.row(n).transpose(), data.y[n]));
  return p;
}

RunRecord run_two_saddle_escape(const RegressionData& data, const TwoSaddleConfig& cfg) {
  if (!(cfg.perturbation > 0.0)) throw std::invalid_argument("perturbation must be positive");
  if (!(cfg.lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  const ReluNet net(cfg.width, static_cast<std::size_t>(data.x.cols()));
  const Eigen::VectorXd star = relu_saddle_point(net, data, cfg.which);
  const auto kind = classify_saddle_type(relu_saddle_probe(net, data, star), 1e-8);

  Rng rng(cfg.seed);
  Eigen::VectorXd theta = star + cfg.perturbation * rng.normal_vector(star.size());
  const double d0 = (theta - star).norm();
  std::vector<double> ts, logs;
  ts.reserve(cfg.steps + 1);
  logs.reserve(cfg.steps + 1);
  ts.push_back(0.0);
  logs.push_back(std::log(d0));

  RunRecord rec;
  rec.experiment = "two-saddle";
  rec.seed = cfg.seed;
  rec.steps = cfg.steps;
  rec.record(0, logs.back());
  const std::size_t stride = series_stride(cfg.steps);
  std::int64_t onset = -1, window_end = -1;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const auto n = static_cast<Eigen::Index>(rng.index(data.size()));
    const Eigen::VectorXd x = data.x.row(n).transpose();
    theta -= cfg.lr * net.gradient(theta, x, data.y[n]);
    const double dist = (theta - star).norm();
    if (!std::isfinite(dist))
      throw DivergenceError(fmt::format("two-saddle run diverged at step {} (lr {})", t, cfg.lr));
    const double ld = std::log(dist);
    ts.push_back(static_cast<double>(t));
    logs.push_back(ld);
    if (onset < 0 && dist >= 2.0 * d0) onset = static_cast<std::int64_t>(t);
    if (window_end < 0 && dist >= 100.0 * d0) window_end = static_cast<std::int64_t>(t);
    if (t % stride == 0 || t == cfg.steps) rec.record(t, ld);
  }

  double exponent = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  if (onset >= 0) {
    const auto a = static_cast<std::size_t>(onset);
    const auto b = window_end >= 0 ? static_cast<std::size_t>(window_end) : cfg.steps;
    if (b > a) {
      const auto fit = fit_line(std::span(ts).subspan(a, b - a + 1),
                                std::span(logs).subspan(a, b - a + 1));
      exponent = fit.slope;
      r2 = fit.r2;
    }
  }
  rec.outcome = window_end >= 0 ? Outcome::escaped : Outcome::max_steps;
  rec.extras["saddle"] = std::string(to_string(cfg.which));
  rec.extras["saddle_type"] = std::string(to_string(kind));
  rec.extras["onset_step"] = onset;
  rec.extras["window_end"] = window_end;
  rec.extras["escape_exponent"] = exponent;
  rec.extras["fit_r2"] = r2;
  rec.extras["lr"] = cfg.lr;
  return rec;
}

}  // namespace saddle
