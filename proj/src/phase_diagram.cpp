#include "saddle_scope/phase_diagram.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include <fmt/format.h>

#include "json_util.hpp"
#include "parallel.hpp"
#include "saddle_scope/serialization.hpp"

namespace saddle {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::invalid_argument(fmt::format("cannot parse {} '{}'", what, s));
  return v;
}

}  // namespace

double Axis::value(std::size_t i) const {
  if (i == 0) return min;
  if (i + 1 == n) return max;
  const double ratio = static_cast<double>(i) / static_cast<double>(n - 1);
  if (scale == AxisScale::log) return std::exp(std::log(min) + (std::log(max) - std::log(min)) * ratio);
  return min + (max - min) * ratio;
}

void Axis::validate() const {
  if (name.empty()) throw std::invalid_argument("axis needs a name");
  if (n < 2) throw std::invalid_argument(fmt::format("axis '{}' needs n >= 2, got {}", name, n));
  if (!(min < max) || !std::isfinite(min) || !std::isfinite(max))
    throw std::invalid_argument(fmt::format("axis '{}' needs finite min < max", name));
  if (scale == AxisScale::log && !(min > 0.0))
    throw std::invalid_argument(fmt::format("log axis '{}' needs min > 0", name));
}

Axis parse_axis(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 4 && parts.size() != 5)
    throw std::invalid_argument(
        fmt::format("axis '{}' must look like name:min:max:n[:log|linear]", text));
  Axis a;
  a.name = std::string(parts[0]);
  a.min = parse_double(parts[1], "axis min");
  a.max = parse_double(parts[2], "axis max");
  const double n = parse_double(parts[3], "axis size");
  if (n < 0 || n != std::floor(n)) throw std::invalid_argument("axis size must be an integer");
  a.n = static_cast<std::size_t>(n);
  if (parts.size() == 5) {
    if (parts[4] == "log")
      a.scale = AxisScale::log;
    else if (parts[4] != "linear")
      throw std::invalid_argument(fmt::format("unknown axis scale '{}'", parts[4]));
  }
  a.validate();
  return a;
}

void GridSpec::validate() const {
  x.validate();
  y.validate();
  if (x.name == y.name) throw std::invalid_argument("the two axes must differ");
}

PhaseGrid::PhaseGrid(GridSpec spec)
    : spec_(std::move(spec)),
      labels_(spec_.x.n * spec_.y.n, Phase::Error),
      rates_(spec_.x.n * spec_.y.n, CellRates{kNaN, kNaN, kNaN}) {}

void PhaseGrid::set(std::size_t ix, std::size_t iy, Phase p, CellRates r) {
  labels_.at(iy * nx() + ix) = p;
  rates_.at(iy * nx() + ix) = r;
}

double PhaseGrid::fraction(Phase p) const {
  if (labels_.empty()) return 0.0;
  return static_cast<double>(std::count(labels_.begin(), labels_.end(), p)) /
         static_cast<double>(labels_.size());
}

std::size_t PhaseGrid::regions(Phase p, bool diagonal) const {
  std::vector<char> seen(labels_.size(), 0);
  std::size_t count = 0;
  for (std::size_t start = 0; start < labels_.size(); ++start) {
    if (seen[start] || labels_[start] != p) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      const auto c = q.front();
      q.pop();
      const std::size_t ix = c % nx(), iy = c / nx();
      static constexpr std::array<std::pair<long, long>, 8> nb{
          {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};
      for (std::size_t k = 0; k < (diagonal ? 8u : 4u); ++k) {
        const auto [dx, dy] = nb[k];
        const long jx = static_cast<long>(ix) + dx, jy = static_cast<long>(iy) + dy;
        if (jx < 0 || jy < 0 || jx >= static_cast<long>(nx()) || jy >= static_cast<long>(ny()))
          continue;
        const auto n = static_cast<std::size_t>(jy) * nx() + static_cast<std::size_t>(jx);
        if (!seen[n] && labels_[n] == p) {
          seen[n] = 1;
          q.push(n);
        }
      }
    }
  }
  return count;
}

ScalarNoiseDistribution cell_distribution(const CellProblem& cell, Seed seed) {
  if (cell.chi) return *cell.chi;
  if (multiset_count(cell.products.size(), cell.batch_size, kExactLimit) <= kExactLimit)
    return batch_statistic_distribution(cell.products, cell.batch_size, BatchMode::exact);
  return batch_statistic_distribution(cell.products, cell.batch_size, BatchMode::monte_carlo,
                                      100000, seed);
}

PhaseGrid sweep_analytic(const GridSpec& spec, const CellFactory& factory, unsigned threads) {
  spec.validate();
  PhaseGrid grid(spec);
  detail::parallel_for(spec.y.n, threads, [&](std::size_t iy) {
    for (std::size_t ix = 0; ix < spec.x.n; ++ix) {
      try {
        const auto cell = factory(spec.x.value(ix), spec.y.value(iy));
        const auto chi = cell_distribution(cell, mix64(spec.seed, iy, ix));
        const auto r = phase_rates(chi, cell.lr);
        grid.set(ix, iy, classify_phase(chi, cell.lr), {r.r_m, r.r_h, r.q_m});
      } catch (const std::exception&) {
        grid.set(ix, iy, Phase::Error, {kNaN, kNaN, kNaN});
      }
    }
  });
  return grid;
}

PhaseGrid sweep_empirical(const GridSpec& spec, const CellFactory& factory, std::size_t n_seeds,
                          const UvConfig& base, unsigned threads) {
  spec.validate();
  if (n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");
  PhaseGrid grid(spec);
  detail::parallel_for(spec.y.n, threads, [&](std::size_t iy) {
    for (std::size_t ix = 0; ix < spec.x.n; ++ix) {
      try {
        const auto cell = factory(spec.x.value(ix), spec.y.value(iy));
        std::array<std::size_t, 5> votes{};
        CellRates acc{0.0, 0.0, 0.0};
        for (std::size_t s = 0; s < n_seeds; ++s) {
          UvConfig cfg = base;
          cfg.lr = cell.lr;
          cfg.batch_size = cell.batch_size;
          cfg.seed = mix64(spec.seed, iy, ix, s);
          const auto rec = run_uv_model(cell.products, cfg);
          ++votes[static_cast<std::size_t>(phase_from_string(rec.extra<std::string>("phase")))];
          const double steps = static_cast<double>(std::max<std::size_t>(cfg.steps, 1));
          acc.r_m += rec.extra<double>("log_m") / steps;
          acc.r_h += rec.extra<double>("log_h") / steps;
          acc.q_m += rec.extra<double>("q_m");
        }
        const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
        const double ns = static_cast<double>(n_seeds);
        grid.set(ix, iy, static_cast<Phase>(best), {acc.r_m / ns, acc.r_h / ns, acc.q_m / ns});
      } catch (const std::exception&) {
        grid.set(ix, iy, Phase::Error, {kNaN, kNaN, kNaN});
      }
    }
  });
  return grid;
}

std::vector<double> find_boundary(BoundaryCondition cond, const ScalarNoiseDistribution& chi,
                                  double lo, double hi, const RootOptions& opt) {
  if (!(lo >= 0.0)) throw std::invalid_argument("learning-rate bracket must be non-negative");
  auto f = [&](double lr) {
    const StabilityQuery q{chi, lr};
    switch (cond) {
      case BoundaryCondition::m: return log_contraction_rate(q, Sign::plus);
      case BoundaryCondition::h: return log_contraction_rate(q, Sign::minus);
      case BoundaryCondition::l2: return lp_rate(q, 2.0, Sign::plus) - 1.0;
    }
    return kNaN;
  };
  return scan_roots(f, lo, hi, opt, true);
}

// ---------------------------------------------------------------------------

namespace {

struct AxisBinding {
  const GridSpec& spec;

  /// Value of parameter `name` at (x, y): an axis if one is named so, else a
  /// fixed parameter, else the fallback.
  std::optional<double> get(std::string_view name, double x, double y) const {
    if (spec.x.name == name) return x;
    if (spec.y.name == name) return y;
    const auto it = spec.fixed_params.find(std::string(name));
    if (it != spec.fixed_params.end()) return it->second;
    return std::nullopt;
  }

  void require_known(std::initializer_list<std::string_view> names) const {
    for (const auto* axis : {&spec.x, &spec.y}) {
      if (std::find(names.begin(), names.end(), axis->name) == names.end())
        throw std::invalid_argument(fmt::format("axis '{}' is not a parameter of this dataset",
                                                axis->name));
    }
  }
};

std::size_t batch_from(std::optional<double> s) {
  if (!s) return 1;
  const double r = std::round(*s);
  if (r < 1.0) throw std::invalid_argument("batch size must be at least 1");
  return static_cast<std::size_t>(r);
}

double lr_from(std::optional<double> lr) {
  if (!lr) throw std::invalid_argument("no learning rate: add an 'lr' axis or fixed parameter");
  return *lr;
}

}  // namespace

CellFactory two_point_factory(const GridSpec& spec) {
  AxisBinding bind{spec};
  bind.require_known({"lr", "a", "S"});
  return [bind](double x, double y) {
    const auto a = bind.get("a", x, y);
    if (!a) throw std::invalid_argument("two-point dataset needs 'a'");
    CellProblem c;
    c.lr = lr_from(bind.get("lr", x, y));
    c.products = {1.0, *a};
    c.batch_size = batch_from(bind.get("S", x, y));
    return c;
  };
}

CellFactory gaussian_factory(const GridSpec& spec, const GaussianLabelDataset& data) {
  AxisBinding bind{spec};
  bind.require_known({"lr", "mu", "S"});
  return [bind, data](double x, double y) {
    CellProblem c;
    c.lr = lr_from(bind.get("lr", x, y));
    c.products = data.with_mu(bind.get("mu", x, y).value_or(data.mu())).products();
    c.batch_size = batch_from(bind.get("S", x, y));
    return c;
  };
}

CellFactory products_factory(const GridSpec& spec, std::vector<double> products) {
  AxisBinding bind{spec};
  bind.require_known({"lr", "S"});
  return [bind, products = std::move(products)](double x, double y) {
    CellProblem c;
    c.lr = lr_from(bind.get("lr", x, y));
    c.products = products;
    c.batch_size = batch_from(bind.get("S", x, y));
    return c;
  };
}

FiniteSizeFamily finite_size_family(const std::vector<std::size_t>& sizes, double mu,
                                    Seed base_seed, const GridSpec& spec, unsigned threads) {
  if (sizes.empty()) throw std::invalid_argument("finite_size_family needs at least one size");
  spec.validate();
  const auto it = spec.fixed_params.find("noise_std");
  const double noise_std = it == spec.fixed_params.end() ? 2.0 : it->second;
  FiniteSizeFamily fam;
  fam.sizes = sizes;
  for (const auto n : sizes) {
    const auto data = GaussianLabelDataset::generate(n, mu, noise_std, base_seed);
    fam.grids.push_back(sweep_analytic(spec, gaussian_factory(spec, data), threads));
    fam.phase2_fraction.push_back(fam.grids.back().fraction(Phase::II));
  }
  return fam;
}

// ---------------------------------------------------------------------------

std::string phase_grid_csv(const PhaseGrid& grid) {
  const auto& s = grid.spec();
  std::string out = fmt::format("# axes: {} {}; phases: Ia=0 Ib=1 II=2 III=3 IV=4 ERR=5\n",
                                s.x.name, s.y.name);
  out += "x,y,label,r_m,r_h,q_m\n";
  for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const auto& r = grid.rates(ix, iy);
      out += fmt::format("{},{},{},{},{},{}\n", format_double(s.x.value(ix)),
                         format_double(s.y.value(iy)), static_cast<int>(grid.label(ix, iy)),
                         format_double(r.r_m), format_double(r.r_h), format_double(r.q_m));
    }
  }
  return out;
}

namespace {
nlohmann::ordered_json axis_json(const Axis& a) {
  return {{"name", a.name},
          {"min", a.min},
          {"max", a.max},
          {"n", a.n},
          {"scale", a.scale == AxisScale::log ? "log" : "linear"}};
}

Axis axis_from_json(const nlohmann::json& j) {
  Axis a;
  a.name = j.at("name").get<std::string>();
  a.min = j.at("min").get<double>();
  a.max = j.at("max").get<double>();
  a.n = j.at("n").get<std::size_t>();
  const auto scale = j.at("scale").get<std::string>();
  if (scale == "log")
    a.scale = AxisScale::log;
  else if (scale != "linear")
    throw std::invalid_argument(fmt::format("unknown axis scale '{}'", scale));
  a.validate();
  return a;
}
}  // namespace

std::string phase_grid_json(const PhaseGrid& grid) {
  const auto& s = grid.spec();
  nlohmann::ordered_json j;
  j["axes"] = {axis_json(s.x), axis_json(s.y)};
  j["classifier"] = s.classifier == Classifier::analytic ? "analytic" : "empirical";
  j["seed"] = s.seed;
  j["fixed_params"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.fixed_params) j["fixed_params"][k] = v;
  j["phases"] = {{"Ia", 0}, {"Ib", 1}, {"II", 2}, {"III", 3}, {"IV", 4}, {"ERR", 5}};
  auto cells = nlohmann::ordered_json::array();
  for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const auto& r = grid.rates(ix, iy);
      cells.push_back({
          {"x", s.x.value(ix)},
          {"y", s.y.value(iy)},
          {"label", static_cast<int>(grid.label(ix, iy))},
          {"r_m", json_number(r.r_m)},
          {"r_h", json_number(r.r_h)},
          {"q_m", json_number(r.q_m)},
      });
    }
  }
  j["cells"] = std::move(cells);
  return j.dump(1) + "\n";
}

PhaseGrid parse_phase_grid_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GridSpec spec;
    spec.x = axis_from_json(j.at("axes").at(0));
    spec.y = axis_from_json(j.at("axes").at(1));
    spec.classifier =
        j.at("classifier").get<std::string>() == "empirical" ? Classifier::empirical
                                                             : Classifier::analytic;
    spec.seed = j.at("seed").get<Seed>();
    for (const auto& [k, v] : j.at("fixed_params").items()) spec.fixed_params[k] = v.get<double>();
    PhaseGrid grid(spec);
    const auto& cells = j.at("cells");
    if (cells.size() != spec.x.n * spec.y.n)
      throw std::invalid_argument("cell count does not match the axes");
    std::size_t i = 0;
    for (std::size_t iy = 0; iy < spec.y.n; ++iy)
      for (std::size_t ix = 0; ix < spec.x.n; ++ix, ++i) {
        const auto& c = cells.at(i);
        const int label = c.at("label").get<int>();
        if (label < 0 || label > 5) throw std::invalid_argument("label out of range");
        grid.set(ix, iy, static_cast<Phase>(label),
                 {number_from_json(c.at("r_m")), number_from_json(c.at("r_h")),
                  number_from_json(c.at("q_m"))});
      }
    return grid;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("malformed phase grid JSON: {}", e.what()));
  }
}

}  // namespace saddle
