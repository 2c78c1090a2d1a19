#include "saddle_scope/serialization.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "json_util.hpp"

namespace saddle {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

namespace {

ojson estimate_to_json(const LyapunovEstimate& e) {
  ojson j;
  j["lambda"] = json_number(e.lambda);
  j["mean"] = json_number(e.mean);
  j["std_error"] = e.n_runs > 1 ? json_number(e.std_error) : ojson(nullptr);
  j["n_runs"] = e.n_runs;
  j["stops"] = {{"upper", e.stops.upper}, {"lower", e.stops.lower},
                {"max_steps", e.stops.max_steps}};
  return j;
}

LyapunovEstimate estimate_from_json(const nlohmann::json& j) {
  LyapunovEstimate e;
  e.lambda = number_from_json(j.at("lambda"));
  e.mean = number_from_json(j.at("mean"));
  e.std_error = j.at("std_error").is_null() ? 0.0 : j.at("std_error").get<double>();
  e.n_runs = j.at("n_runs").get<std::size_t>();
  const auto& s = j.at("stops");
  e.stops = {s.at("upper").get<std::size_t>(), s.at("lower").get<std::size_t>(),
             s.at("max_steps").get<std::size_t>()};
  if (e.stops.upper + e.stops.lower + e.stops.max_steps != e.n_runs)
    throw std::invalid_argument("stop counts do not sum to n_runs");
  return e;
}

ojson extra_to_json(const ExtraValue& v) {
  return std::visit(
      [](const auto& x) -> ojson {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) {
          return json_number(x);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          auto arr = ojson::array();
          for (double d : x) arr.push_back(json_number(d));
          return arr;
        } else {
          return x;
        }
      },
      v);
}

ExtraValue extra_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float() || j.is_null()) return number_from_json(j);
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<double> out;
    for (const auto& e : j) out.push_back(number_from_json(e));
    return out;
  }
  throw std::invalid_argument("unsupported extras value");
}

}  // namespace

std::string lyapunov_json(const LyapunovEstimate& est) { return estimate_to_json(est).dump(1) + "\n"; }

std::string lyapunov_sweep_json(const LyapunovProtocol& proto,
                                const std::vector<LyapunovEstimate>& records) {
  ojson j;
  j["protocol"] = {{"max_steps", proto.max_steps},
                   {"upper_cutoff", proto.upper_cutoff},
                   {"lower_cutoff", proto.lower_cutoff},
                   {"n_runs", proto.n_runs},
                   {"seed", proto.seed},
                   {"renormalize_every", proto.renormalize_every}};
  j["records"] = ojson::array();
  for (const auto& r : records) j["records"].push_back(estimate_to_json(r));
  return j.dump(1) + "\n";
}

std::vector<LyapunovEstimate> parse_lyapunov_sweep_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<LyapunovEstimate> out;
    if (j.is_object() && j.contains("records")) {
      for (const auto& r : j.at("records")) out.push_back(estimate_from_json(r));
    } else {
      out.push_back(estimate_from_json(j));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("malformed Lyapunov JSON: {}", e.what()));
  }
}

std::string run_record_json(const RunRecord& rec) {
  ojson j;
  j["experiment"] = rec.experiment;
  j["seed"] = rec.seed;
  j["steps"] = rec.steps;
  j["outcome"] = std::string(to_string(rec.outcome));
  auto series = ojson::array();
  for (const auto& p : rec.lognorm_series) series.push_back({p.t, json_number(p.log_norm)});
  j["lognorm_series"] = std::move(series);
  auto extras = ojson::object();
  for (const auto& [k, v] : rec.extras) extras[k] = extra_to_json(v);
  j["extras"] = std::move(extras);
  return j.dump(1) + "\n";
}

RunRecord parse_run_record_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunRecord rec;
    rec.experiment = j.at("experiment").get<std::string>();
    rec.seed = j.at("seed").get<Seed>();
    rec.steps = j.at("steps").get<std::size_t>();
    rec.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    for (const auto& p : j.at("lognorm_series")) {
      const auto t = p.at(0).get<std::size_t>();
      if (!rec.lognorm_series.empty() && rec.lognorm_series.back().t >= t)
        throw std::invalid_argument("lognorm_series must be strictly increasing in t");
      rec.lognorm_series.push_back({t, number_from_json(p.at(1))});
    }
    for (const auto& [k, v] : j.at("extras").items()) rec.extras[k] = extra_from_json(v);
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("malformed RunRecord JSON: {}", e.what()));
  }
}

std::string trajectory_csv(const RunRecord& rec) {
  std::string out = "t,log_norm\n";
  for (const auto& p : rec.lognorm_series)
    out += fmt::format("{},{}\n", p.t, format_double(p.log_norm));
  return out;
}

}  // namespace saddle
