#include "saddle_scope/noise_models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include "json.hpp"

#include "saddle_scope/errors.hpp"

namespace saddle {

namespace {

// Neumaier-compensated sum; naive accumulation over 1e5+ atoms drifts past
// the 1e-12 normalization tolerance.
double compensated_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

std::vector<Atom> canonicalize(std::vector<Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("distribution needs at least one atom");
  std::vector<double> probs;
  probs.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (!std::isfinite(a.value))
      throw std::invalid_argument(fmt::format("atom value {} is not finite", a.value));
    if (!(a.probability > 0.0) || !std::isfinite(a.probability))
      throw std::invalid_argument(
          fmt::format("atom probability {} must be strictly positive", a.probability));
    probs.push_back(a.probability);
  }
  const double total = compensated_sum(probs);
  if (std::abs(total - 1.0) > ScalarNoiseDistribution::kProbabilityTolerance)
    throw std::invalid_argument(
        fmt::format("atom probabilities sum to {:.17g}, expected 1", total));

  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& l, const Atom& r) { return l.value < r.value; });
  std::vector<Atom> merged;
  merged.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (!merged.empty() &&
        a.value - merged.back().value <= ScalarNoiseDistribution::kMergeTolerance) {
      merged.back().probability += a.probability;
    } else {
      merged.push_back(a);
    }
  }
  return merged;
}

}  // namespace

ScalarNoiseDistribution::ScalarNoiseDistribution(std::vector<Atom> atoms)
    : atoms_(canonicalize(std::move(atoms))) {}

ScalarNoiseDistribution ScalarNoiseDistribution::empirical(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empirical law of an empty sample");
  const double w = 1.0 / static_cast<double>(values.size());
  std::vector<Atom> atoms;
  atoms.reserve(values.size());
  for (double v : values) atoms.push_back({v, w});
  return ScalarNoiseDistribution(std::move(atoms));
}

ScalarNoiseDistribution ScalarNoiseDistribution::point(double value) {
  return ScalarNoiseDistribution({{value, 1.0}});
}

double ScalarNoiseDistribution::mean() const {
  return expect([](double h) { return h; });
}

double ScalarNoiseDistribution::variance() const {
  const double m = mean();
  return expect([m](double h) { return (h - m) * (h - m); });
}

double ScalarNoiseDistribution::moment(int k) const {
  return expect([k](double h) { return std::pow(h, k); });
}

double ScalarNoiseDistribution::abs_moment(int k) const {
  return expect([k](double h) { return std::pow(std::abs(h), k); });
}

double ScalarNoiseDistribution::max_abs() const {
  double m = 0.0;
  for (const auto& a : atoms_) m = std::max(m, std::abs(a.value));
  return m;
}

ScalarNoiseDistribution ScalarNoiseDistribution::shifted(double shift) const {
  std::vector<Atom> out = atoms_;
  for (auto& a : out) a.value += shift;
  return ScalarNoiseDistribution(std::move(out));
}

// ---------------------------------------------------------------------------

HessianEnsemble::HessianEnsemble(std::vector<Eigen::MatrixXd> matrices,
                                 std::vector<double> probabilities)
    : matrices_(std::move(matrices)), probabilities_(std::move(probabilities)) {
  if (matrices_.empty()) throw std::invalid_argument("ensemble needs at least one matrix");
  if (matrices_.size() != probabilities_.size())
    throw std::invalid_argument("one probability per matrix is required");
  dimension_ = matrices_.front().rows();
  if (dimension_ == 0) throw std::invalid_argument("ensemble dimension must be positive");
  for (std::size_t i = 0; i < matrices_.size(); ++i) {
    const auto& m = matrices_[i];
    if (m.rows() != dimension_ || m.cols() != dimension_)
      throw std::invalid_argument(fmt::format("matrix {} is not {}x{}", i, dimension_, dimension_));
    if (!m.allFinite()) throw std::invalid_argument(fmt::format("matrix {} is not finite", i));
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance)
      throw std::invalid_argument(fmt::format("matrix {} is not symmetric", i));
    if (!(probabilities_[i] > 0.0))
      throw std::invalid_argument(fmt::format("probability {} must be positive", i));
  }
  const double total = compensated_sum(probabilities_);
  if (std::abs(total - 1.0) > ScalarNoiseDistribution::kProbabilityTolerance)
    throw std::invalid_argument(fmt::format("probabilities sum to {:.17g}, expected 1", total));

  mean_ = Eigen::MatrixXd::Zero(dimension_, dimension_);
  for (std::size_t i = 0; i < matrices_.size(); ++i) mean_ += probabilities_[i] * matrices_[i];
  sampler_ = DiscreteSampler(probabilities_);
}

HessianEnsemble HessianEnsemble::uniform(std::vector<Eigen::MatrixXd> matrices) {
  std::vector<double> p(matrices.size(), 1.0 / static_cast<double>(matrices.size()));
  return HessianEnsemble(std::move(matrices), std::move(p));
}

std::vector<ScalarNoiseDistribution> HessianEnsemble::diagonal_marginals() const {
  std::vector<ScalarNoiseDistribution> out;
  out.reserve(static_cast<std::size_t>(dimension_));
  for (Eigen::Index k = 0; k < dimension_; ++k) {
    std::vector<Atom> atoms;
    atoms.reserve(matrices_.size());
    for (std::size_t i = 0; i < matrices_.size(); ++i)
      atoms.push_back({matrices_[i](k, k), probabilities_[i]});
    out.emplace_back(std::move(atoms));
  }
  return out;
}

// ---------------------------------------------------------------------------

ScalarNoiseDistribution TwoPointDataset::distribution() const {
  return ScalarNoiseDistribution({{1.0, 0.5}, {a, 0.5}});
}

GaussianLabelDataset GaussianLabelDataset::generate(std::size_t n, double mu, double noise_std,
                                                    Seed seed) {
  if (n == 0) throw std::invalid_argument("dataset size must be positive");
  if (!(noise_std > 0.0)) throw std::invalid_argument("noise_std must be positive");
  GaussianLabelDataset d;
  d.noise_std_ = noise_std;
  d.seed_ = seed;
  Rng rng(seed);
  d.x_.resize(n);
  d.eps_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.x_[i] = rng.normal();
    d.eps_[i] = noise_std * rng.normal();
  }
  return d.with_mu(mu);
}

GaussianLabelDataset GaussianLabelDataset::with_mu(double mu) const {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must lie in [0, 1]");
  GaussianLabelDataset d = *this;
  d.mu_ = mu;
  d.y_.resize(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) d.y_[i] = mu * x_[i] + (1.0 - mu) * eps_[i];
  return d;
}

std::vector<double> GaussianLabelDataset::products() const {
  std::vector<double> out(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) out[i] = x_[i] * y_[i];
  return out;
}

ScalarNoiseDistribution GaussianLabelDataset::distribution() const {
  const auto p = products();
  return ScalarNoiseDistribution::empirical(p);
}

// ---------------------------------------------------------------------------

std::uint64_t multiset_count(std::size_t n, std::size_t batch_size, std::uint64_t cap) {
  // C(n+S-1, S) built incrementally as prod_{i=1..k} (m - k + i) / i with
  // k = min(S, n-1); every partial product is itself a binomial coefficient.
  if (n == 0) return 0;
  const std::uint64_t m = n + batch_size - 1;
  const std::uint64_t k = std::min<std::uint64_t>(batch_size, n - 1);
  unsigned __int128 c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * (m - k + i) / i;
    if (c > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(c);
}

namespace {

void enumerate_multisets(std::span<const double> values, std::size_t batch_size,
                         std::vector<Atom>& out) {
  const std::size_t n = values.size();
  std::vector<double> log_factorial(batch_size + 1, 0.0);
  for (std::size_t i = 1; i <= batch_size; ++i)
    log_factorial[i] = log_factorial[i - 1] + std::log(static_cast<double>(i));
  const double log_total = static_cast<double>(batch_size) * std::log(static_cast<double>(n));
  const double inv_s = 1.0 / static_cast<double>(batch_size);

  // Depth-first over count vectors c_0..c_{n-1} summing to S.
  std::vector<std::size_t> counts(n, 0);
  auto recurse = [&](auto&& self, std::size_t item, std::size_t remaining, double sum,
                     double log_weight) -> void {
    if (item + 1 == n) {
      counts[item] = remaining;
      const double lw = log_weight - log_factorial[remaining];
      const double chi = (sum + static_cast<double>(remaining) * values[item]) * inv_s;
      out.push_back({chi, std::exp(log_factorial[batch_size] + lw - log_total)});
      return;
    }
    for (std::size_t c = 0; c <= remaining; ++c) {
      counts[item] = c;
      self(self, item + 1, remaining - c, sum + static_cast<double>(c) * values[item],
           log_weight - log_factorial[c]);
    }
  };
  recurse(recurse, 0, batch_size, 0.0, 0.0);

  double total = 0.0;
  for (const auto& a : out) total += a.probability;
  for (auto& a : out) a.probability /= total;
}

}  // namespace

ScalarNoiseDistribution batch_statistic_distribution(std::span<const double> products,
                                                     std::size_t batch_size, BatchMode mode,
                                                     std::size_t n_draws, Seed seed) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (products.empty()) throw std::invalid_argument("no data points");
  if (batch_size == 1) return ScalarNoiseDistribution::empirical(products);

  if (mode == BatchMode::exact) {
    const auto count = multiset_count(products.size(), batch_size, kExactLimit);
    if (count > kExactLimit)
      throw EnumerationLimitError(fmt::format(
          "exact enumeration of C({}+{}-1, {}) batches exceeds {}; use monte_carlo mode",
          products.size(), batch_size, batch_size, kExactLimit));
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(count));
    enumerate_multisets(products, batch_size, atoms);
    return ScalarNoiseDistribution(std::move(atoms));
  }

  if (n_draws < 1) throw std::invalid_argument("monte_carlo mode needs n_draws >= 1");
  Rng rng(seed);
  std::map<double, std::size_t> counts;
  const double inv_s = 1.0 / static_cast<double>(batch_size);
  for (std::size_t d = 0; d < n_draws; ++d) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch_size; ++b) sum += products[rng.index(products.size())];
    ++counts[sum * inv_s];
  }
  std::vector<Atom> atoms;
  atoms.reserve(counts.size());
  const double inv_n = 1.0 / static_cast<double>(n_draws);
  for (const auto& [v, c] : counts) atoms.push_back({v, static_cast<double>(c) * inv_n});
  return ScalarNoiseDistribution(std::move(atoms));
}

HessianEnsemble rank1_ensemble(const ScalarNoiseDistribution& dist,
                               const Eigen::VectorXd& direction) {
  if (direction.size() == 0 || std::abs(direction.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("rank-1 direction must be a unit vector");
  const Eigen::MatrixXd outer = direction * direction.transpose();
  std::vector<Eigen::MatrixXd> mats;
  std::vector<double> probs;
  for (const auto& a : dist.atoms()) {
    mats.push_back(a.value * outer);
    probs.push_back(a.probability);
  }
  return HessianEnsemble(std::move(mats), std::move(probs));
}

HessianEnsemble gaussian_saddle_ensemble(std::size_t n_samples, Seed seed,
                                         const Eigen::Vector2d& mean_diagonal) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
  Rng rng(seed);
  const Eigen::Matrix2d mean = mean_diagonal.asDiagonal();
  std::vector<Eigen::MatrixXd> mats;
  mats.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Eigen::Matrix2d noise;
    noise << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    mats.emplace_back(mean + noise + noise.transpose());
  }
  return HessianEnsemble::uniform(std::move(mats));
}

// ---------------------------------------------------------------------------

ScalarNoiseDistribution parse_atoms(std::string_view text) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end)
      throw std::invalid_argument(fmt::format("bad number '{}' in atom list '{}'", s, text));
    return v;
  };
  std::vector<Atom> atoms;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, comma - start);
    const std::size_t colon = item.rfind(':');
    if (colon == std::string_view::npos)
      throw std::invalid_argument(fmt::format("atom '{}' must be value:probability", item));
    atoms.push_back({number(item.substr(0, colon)), number(item.substr(colon + 1))});
    start = comma + 1;
  }
  return ScalarNoiseDistribution(std::move(atoms));
}

DatasetFile parse_dataset_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("dataset is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw std::invalid_argument("dataset must be a JSON object");
  try {
    if (j.contains("pairs")) {
      std::vector<double> products;
      for (const auto& p : j.at("pairs")) {
        if (!p.is_array() || p.size() != 2)
          throw std::invalid_argument("each entry of \"pairs\" must be [x, y]");
        products.push_back(p[0].get<double>() * p[1].get<double>());
      }
      if (products.empty()) throw std::invalid_argument("\"pairs\" is empty");
      return products;
    }
    if (j.contains("atoms")) {
      std::vector<Atom> atoms;
      for (const auto& a : j.at("atoms")) {
        if (!a.is_array() || a.size() != 2)
          throw std::invalid_argument("each entry of \"atoms\" must be [value, probability]");
        atoms.push_back({a[0].get<double>(), a[1].get<double>()});
      }
      return ScalarNoiseDistribution(std::move(atoms));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("dataset entries must be numbers: {}", e.what()));
  }
  throw std::invalid_argument("dataset needs a \"pairs\" or an \"atoms\" field");
}

namespace {
std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

DatasetFile load_dataset_file(const std::filesystem::path& path) {
  return parse_dataset_json(read_file(path));
}

HessianEnsemble load_ensemble_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& m : j.at("matrices")) {
      const auto rows = static_cast<Eigen::Index>(m.size());
      Eigen::MatrixXd mat(rows, rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = m.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != rows)
          throw std::invalid_argument("ensemble matrices must be square");
        for (Eigen::Index c = 0; c < rows; ++c)
          mat(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
      }
      mats.push_back(std::move(mat));
    }
    if (j.contains("probabilities"))
      return HessianEnsemble(std::move(mats), j.at("probabilities").get<std::vector<double>>());
    return HessianEnsemble::uniform(std::move(mats));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("malformed ensemble file: {}", e.what()));
  }
}

}  // namespace saddle
