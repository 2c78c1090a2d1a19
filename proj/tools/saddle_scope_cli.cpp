// saddle-scope: stability rates, Lyapunov sweeps, phase diagrams and the
// SGD experiments from one entry point.
//
// Exit codes: 0 success, 1 computation failed or diverged, 2 usage error.
// Every handler parses and validates all of its inputs before computing, and
// files are only written after the computation has finished.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "saddle_scope/errors.hpp"
#include "saddle_scope/experiments.hpp"
#include "saddle_scope/lyapunov.hpp"
#include "saddle_scope/noise_models.hpp"
#include "saddle_scope/phase_diagram.hpp"
#include "saddle_scope/serialization.hpp"
#include "saddle_scope/stability.hpp"

namespace fs = std::filesystem;
using namespace saddle;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Globals {
  Seed seed = 0;
  unsigned threads = 1;
};

/// Everything a command produces, held until the computation is complete.
struct Outputs {
  std::vector<std::pair<fs::path, std::string>> files;
  std::string stdout_text;
  int status = kOk;
};

ojson num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::vector<double> parse_lr_range(const std::string& text) {
  const Axis a = parse_axis("lr:" + (text.find(":log") == std::string::npos &&
                                             text.find(":linear") == std::string::npos
                                         ? text + ":log"
                                         : text));
  a.validate();
  std::vector<double> out(a.n);
  for (std::size_t i = 0; i < a.n; ++i) out[i] = a.value(i);
  return out;
}

std::string dump(const ojson& j) { return j.dump(1) + "\n"; }

// ---------------------------------------------------------------------------

struct StabilityArgs {
  std::string atoms, dataset;
  std::size_t batch_size = 1;
  std::string batch_mode = "exact";
  double lr = 0.0, weight_decay = 0.0, p = 2.0;
  std::string output;
};

ScalarNoiseDistribution distribution_from(const std::string& atoms, const std::string& dataset,
                                          std::size_t batch_size, const std::string& mode,
                                          Seed seed) {
  if (atoms.empty() == dataset.empty()) throw UsageError("give exactly one of --atoms or --dataset");
  if (!atoms.empty()) {
    if (batch_size != 1) throw UsageError("--batch-size needs a dataset of xy pairs");
    return parse_atoms(atoms);
  }
  const auto file = load_dataset_file(dataset);
  if (const auto* d = std::get_if<ScalarNoiseDistribution>(&file)) {
    if (batch_size != 1) throw UsageError("--batch-size needs a dataset of xy pairs");
    return *d;
  }
  const auto& products = std::get<std::vector<double>>(file);
  return batch_statistic_distribution(products, batch_size,
                                      mode == "exact" ? BatchMode::exact : BatchMode::monte_carlo,
                                      100000, seed);
}

Outputs cmd_stability(const StabilityArgs& a, const Globals& g) {
  if (!(a.lr >= 0.0) || !(a.weight_decay >= 0.0)) throw UsageError("--lr and --weight-decay must be >= 0");
  if (!(a.p >= 1.0)) throw UsageError("--p must be >= 1");
  const auto dist = distribution_from(a.atoms, a.dataset, a.batch_size, a.batch_mode, g.seed);

  const StabilityQuery q{dist, a.lr, a.weight_decay};
  q.validate();
  const auto shifted = dist.shifted(a.weight_decay);
  const PhaseRates rates = phase_rates(shifted, a.lr);
  std::optional<double> crit;
  try {
    crit = critical_lr(shifted);
  } catch (const DegenerateDistributionError&) {
  }

  ojson j;
  j["lr"] = a.lr;
  j["weight_decay"] = a.weight_decay;
  j["log_rate_m"] = num(log_contraction_rate(q, Sign::plus));
  j["log_rate_h"] = num(log_contraction_rate(q, Sign::minus));
  j["l2_rate"] = num(lp_rate(q, 2.0, Sign::plus));
  j["p"] = a.p;
  j["lp_rate"] = num(lp_rate(q, a.p, Sign::plus));
  j["critical_lr"] = crit ? num(*crit) : ojson(nullptr);
  j["phase"] = std::string(to_string(classify_rates(rates)));
  j["marginal"] = rates.marginal;

  Outputs out;
  if (a.output.empty())
    out.stdout_text = dump(j);
  else
    out.files.emplace_back(a.output, dump(j));
  return out;
}

// ---------------------------------------------------------------------------

struct LyapunovArgs {
  std::string preset, ensemble;
  std::size_t ensemble_samples = 10000;
  Seed ensemble_seed = 1;
  std::optional<double> lr;
  std::string lr_range;
  LyapunovProtocol proto;
  std::string output;
};

Outputs cmd_lyapunov(LyapunovArgs a, const Globals& g) {
  if (a.preset.empty() == a.ensemble.empty()) throw UsageError("give exactly one of --preset or --ensemble");
  if (a.lr.has_value() == !a.lr_range.empty()) throw UsageError("give exactly one of --lr or --lr-range");
  std::vector<double> lrs = a.lr ? std::vector<double>{*a.lr} : parse_lr_range(a.lr_range);
  for (double lr : lrs)
    if (!(lr > 0.0)) throw UsageError("learning rates must be > 0");
  a.proto.seed = g.seed;
  a.proto.threads = g.threads;
  a.proto.validate();
  if (a.ensemble_samples == 0) throw UsageError("--ensemble-samples must be positive");

  const HessianEnsemble ens = a.preset.empty()
                                  ? load_ensemble_file(a.ensemble)
                                  : gaussian_saddle_ensemble(a.ensemble_samples, a.ensemble_seed);

  std::vector<LyapunovEstimate> records;
  for (double lr : lrs) records.push_back(estimate_max_lyapunov(ens, lr, a.proto));
  Outputs out;
  const std::string text = lyapunov_sweep_json(a.proto, records);
  if (a.output.empty())
    out.stdout_text = text;
  else
    out.files.emplace_back(a.output, text);
  return out;
}

// ---------------------------------------------------------------------------

struct PhaseArgs {
  std::string dataset = "two-point";
  std::string x, y, data_file;
  std::size_t n = 100;
  double mu = 0.5, noise_std = 2.0, a = 0.5;
  std::optional<Seed> data_seed;
  std::size_t batch_size = 1;
  bool mu_axis = false;
  std::string classifier = "analytic";
  std::size_t n_seeds = 5, uv_steps = 4000;
  bool finite_size = false;
  std::vector<std::size_t> sizes = kDefaultFiniteSizes;
  std::string format = "csv", output, output_dir = ".";
};

std::string grid_text(const PhaseGrid& grid, const std::string& format) {
  return format == "json" ? phase_grid_json(grid) : phase_grid_csv(grid);
}

Outputs cmd_phase_diagram(PhaseArgs a, const Globals& g) {
  if (a.mu_axis) {
    if (a.x.empty()) a.x = "lr:0.01:10:100:log";
    if (a.y.empty()) a.y = "mu:0:1:100";
  }
  if (a.x.empty() || a.y.empty()) throw UsageError("--x and --y are required (or --mu-axis)");
  GridSpec spec;
  spec.x = parse_axis(a.x);
  spec.y = parse_axis(a.y);
  spec.seed = g.seed;
  spec.classifier = a.classifier == "empirical" ? Classifier::empirical : Classifier::analytic;
  spec.fixed_params["noise_std"] = a.noise_std;
  if (a.batch_size != 1) spec.fixed_params["S"] = static_cast<double>(a.batch_size);
  spec.validate();
  const Seed data_seed = a.data_seed.value_or(g.seed);

  Outputs out;
  if (a.finite_size) {
    if (a.dataset != "gaussian") throw UsageError("--finite-size needs --dataset gaussian");
    if (spec.classifier != Classifier::analytic) throw UsageError("--finite-size is analytic only");
    gaussian_factory(spec, GaussianLabelDataset::generate(1, a.mu, a.noise_std, data_seed));
    for (auto n : a.sizes)
      if (n == 0) throw UsageError("dataset sizes must be positive");
    const auto fam = finite_size_family(a.sizes, a.mu, data_seed, spec, g.threads);
    ojson summary;
    summary["sizes"] = fam.sizes;
    summary["phase2_fraction"] = fam.phase2_fraction;
    for (std::size_t i = 0; i < fam.sizes.size(); ++i)
      out.files.emplace_back(fs::path(a.output_dir) / fmt::format("phase_N{}.{}", fam.sizes[i], a.format),
                             grid_text(fam.grids[i], a.format));
    out.files.emplace_back(fs::path(a.output_dir) / "finite_size.json", dump(summary));
    return out;
  }

  CellFactory factory;
  if (a.dataset == "two-point") {
    if (!spec.fixed_params.count("a") && spec.x.name != "a" && spec.y.name != "a")
      spec.fixed_params["a"] = a.a;
    factory = two_point_factory(spec);
  } else if (a.dataset == "gaussian") {
    if (a.n == 0) throw UsageError("--n must be positive");
    factory = gaussian_factory(spec, GaussianLabelDataset::generate(a.n, a.mu, a.noise_std, data_seed));
  } else if (a.dataset == "file") {
    if (a.data_file.empty()) throw UsageError("--dataset file needs --data-file");
    auto file = load_dataset_file(a.data_file);
    auto* products = std::get_if<std::vector<double>>(&file);
    if (!products) throw UsageError("phase-diagram needs a dataset of xy pairs");
    factory = products_factory(spec, std::move(*products));
  } else {
    throw UsageError(fmt::format("unknown dataset '{}'", a.dataset));
  }
  // Surface bad axis bindings (and unknown names) before the sweep starts.
  factory(spec.x.value(0), spec.y.value(0));

  UvConfig base;
  base.steps = a.uv_steps;
  const PhaseGrid grid = spec.classifier == Classifier::analytic
                             ? sweep_analytic(spec, factory, g.threads)
                             : sweep_empirical(spec, factory, a.n_seeds, base, g.threads);
  if (a.output.empty())
    out.stdout_text = grid_text(grid, a.format);
  else
    out.files.emplace_back(a.output, grid_text(grid, a.format));
  return out;
}

// ---------------------------------------------------------------------------
// experiment <name>

void add_record(Outputs& out, const fs::path& dir, const RunRecord& rec) {
  out.files.emplace_back(dir / (rec.experiment + ".json"), run_record_json(rec));
  out.files.emplace_back(dir / (rec.experiment + "_trajectory.csv"), trajectory_csv(rec));
}

bool diverged(const RunRecord& rec) {
  const auto it = rec.extras.find("diverged");
  return it != rec.extras.end() && std::holds_alternative<bool>(it->second) && std::get<bool>(it->second);
}

struct TwoSaddleArgs {
  std::string which = "type2";
  TwoSaddleConfig cfg;
  std::size_t n_data = 200;
  double noise_std = 0.1;
  Seed data_seed = 11;
};

Outputs cmd_two_saddle(TwoSaddleArgs a, const Globals& g, const fs::path& dir) {
  a.cfg.which = a.which == "type1" ? SaddleType::TypeI : SaddleType::TypeII;
  a.cfg.seed = g.seed;
  if (!(a.cfg.lr > 0.0) || a.cfg.steps == 0 || a.cfg.width == 0 || a.n_data == 0)
    throw UsageError("--lr, --steps, --width and --n-data must be positive");
  const auto data = relu_teacher_data(a.n_data, 2, a.noise_std, a.data_seed);
  Outputs out;
  add_record(out, dir, run_two_saddle_escape(data, a.cfg));
  return out;
}

struct SpredArgs {
  SpredConfig cfg;
  double kappa = 2.0, support = 0.5;
  std::size_t dim = 20, n_samples = 80;
  Seed problem_seed = 5;
};

Outputs cmd_spred(SpredArgs a, const Globals& g, const fs::path& dir) {
  a.cfg.seed = g.seed;
  if (!(a.cfg.lr >= 0.0) || a.cfg.steps == 0) throw UsageError("--lr must be >= 0 and --steps positive");
  const auto problem = planted_spred_problem(a.dim, a.n_samples, a.kappa, a.support, a.problem_seed);
  Outputs out;
  const auto rec = run_spred_lasso(problem, a.cfg);
  add_record(out, dir, rec);
  if (diverged(rec)) out.status = kFailed;
  return out;
}

struct SwishArgs {
  std::string init = "B";
  std::optional<double> lr;
  std::string lr_sweep;
  std::size_t n_data = 100, steps = 20000, replicates = 25;
  Seed data_seed = kSwishDataSeed;
};

Outputs cmd_swish(const SwishArgs& a, const Globals& g, const fs::path& dir) {
  if (a.lr.has_value() == !a.lr_sweep.empty()) throw UsageError("give exactly one of --lr or --lr-sweep");
  const std::vector<double> lrs = a.lr ? std::vector<double>{*a.lr} : parse_lr_range(a.lr_sweep);
  for (double lr : lrs)
    if (!(lr >= 0.0)) throw UsageError("learning rates must be >= 0");
  if (a.n_data == 0 || a.steps == 0 || a.replicates == 0)
    throw UsageError("--n-data, --steps and --replicates must be positive");

  const auto data = swish_data(a.n_data, a.data_seed);
  const auto minima = swish_landscape_minima(data);
  if (minima.empty()) throw std::runtime_error("the loss landscape has no local minima in the scan box");
  const Eigen::Vector2d min_a = nearest_minimum(minima, kSwishA).point;
  const Eigen::Vector2d min_b = nearest_minimum(minima, kSwishB).point;

  SwishConfig cfg;
  cfg.init = a.init == "A" ? min_a : min_b;
  cfg.steps = a.steps;
  cfg.seed = g.seed;
  Outputs out;
  if (a.lr) {
    cfg.lr = *a.lr;
    const auto rec = run_swish_selection(data, cfg, min_a, min_b);
    add_record(out, dir, rec);
    if (rec.extra<std::string>("basin") == "diverged") out.status = kFailed;
    return out;
  }
  const auto sweep = swish_lr_sweep(data, cfg, lrs, a.replicates, min_a, min_b, g.threads);
  std::string csv = "lr,basin,A,B,C,diverged\n";
  std::vector<std::string> labels;
  for (const auto& p : sweep) {
    auto votes = [&](const char* k) {
      const auto it = p.votes.find(k);
      return it == p.votes.end() ? 0 : it->second;
    };
    csv += fmt::format("{},{},{},{},{},{}\n", format_double(p.lr), p.basin, votes("A"), votes("B"),
                       votes("C"), votes("diverged"));
    labels.push_back(p.basin);
  }
  std::string seq;
  for (const auto& l : compress_sequence(labels)) seq += (seq.empty() ? "" : " -> ") + l;
  out.files.emplace_back(dir / "swish_sweep.csv", csv);
  out.stdout_text = csv + "sequence: " + seq + "\n";
  return out;
}

struct DeepRankArgs {
  DeepRankConfig cfg;
  std::string activation = "linear";
};

Outputs cmd_deep_rank(DeepRankArgs a, const Globals& g, const fs::path& dir) {
  a.cfg.activation = activation_from_string(a.activation);
  a.cfg.seed = g.seed;
  Outputs out;
  const auto rec = run_deep_linear_rank(a.cfg);
  add_record(out, dir, rec);
  if (diverged(rec)) out.status = kFailed;
  return out;
}

struct UvArgs {
  UvConfig cfg;
  std::optional<double> a;
  std::vector<double> products;
  std::string data_file;
};

Outputs cmd_uv_model(UvArgs a, const Globals& g, const fs::path& dir) {
  const int sources = a.a.has_value() + !a.products.empty() + !a.data_file.empty();
  if (sources > 1) throw UsageError("give at most one of --a, --products, --data-file");
  std::vector<double> products;
  if (!a.products.empty()) {
    products = a.products;
  } else if (!a.data_file.empty()) {
    auto file = load_dataset_file(a.data_file);
    auto* p = std::get_if<std::vector<double>>(&file);
    if (!p) throw UsageError("uv-model needs a dataset of xy pairs");
    products = *p;
  } else {
    products = TwoPointDataset{a.a.value_or(0.5)}.products();
  }
  a.cfg.seed = g.seed;
  Outputs out;
  add_record(out, dir, run_uv_model(products, a.cfg));
  return out;
}

// ---------------------------------------------------------------------------

void write_outputs(const Outputs& out) {
  for (const auto& [path, text] : out.files) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    f << text;
    if (!f) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
  }
  std::cout << out.stdout_text << std::flush;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic stability of SGD near saddle points"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file mirroring the flags; flags win");

  Globals g;
  app.add_option("--seed", g.seed, "Base seed for every random stream");
  app.add_option("--threads", g.threads, "Worker threads for sweeps and Lyapunov runs")
      ->envname("SADDLE_SCOPE_THREADS")
      ->check(CLI::Range(1u, 1024u));

  std::function<Outputs()> run;

  // stability
  StabilityArgs st;
  auto* stability = app.add_subcommand("stability", "Rates and phase of a scalar noise law");
  stability->add_option("--atoms", st.atoms, "Inline law v1:p1,v2:p2,...");
  stability->add_option("--dataset", st.dataset, "JSON file with \"pairs\" or \"atoms\"");
  stability->add_option("--batch-size", st.batch_size)->check(CLI::PositiveNumber);
  stability->add_option("--batch-mode", st.batch_mode)->check(CLI::IsMember({"exact", "monte-carlo"}));
  stability->add_option("--lr", st.lr)->required();
  stability->add_option("--weight-decay", st.weight_decay);
  stability->add_option("--p", st.p, "Moment order for lp_rate");
  stability->add_option("--output", st.output, "Write JSON here instead of stdout");
  stability->callback([&] { run = [&] { return cmd_stability(st, g); }; });

  // lyapunov
  LyapunovArgs ly;
  auto* lyapunov = app.add_subcommand("lyapunov", "Maximal Lyapunov exponent of linearized SGD");
  lyapunov->add_option("--preset", ly.preset, "Built-in ensemble")
      ->check(CLI::IsMember({"appendix-a2", "noisy-saddle"}));
  lyapunov->add_option("--ensemble", ly.ensemble, "JSON file with \"matrices\" (and \"probabilities\")");
  lyapunov->add_option("--ensemble-samples", ly.ensemble_samples, "Preset ensemble size");
  lyapunov->add_option("--ensemble-seed", ly.ensemble_seed, "Preset ensemble draw");
  lyapunov->add_option("--lr", ly.lr);
  lyapunov->add_option("--lr-range", ly.lr_range, "min:max:n[:log|linear], log by default");
  lyapunov->add_option("--max-steps", ly.proto.max_steps);
  lyapunov->add_option("--upper-cutoff", ly.proto.upper_cutoff);
  lyapunov->add_option("--lower-cutoff", ly.proto.lower_cutoff);
  lyapunov->add_option("--n-runs", ly.proto.n_runs);
  lyapunov->add_option("--renormalize-every", ly.proto.renormalize_every);
  lyapunov->add_option("--output", ly.output);
  lyapunov->callback([&] { run = [&] { return cmd_lyapunov(ly, g); }; });

  // phase-diagram
  PhaseArgs ph;
  auto* phase = app.add_subcommand("phase-diagram", "Phase labels over a 2-D grid");
  phase->add_option("--dataset", ph.dataset)->check(CLI::IsMember({"two-point", "gaussian", "file"}));
  phase->add_option("--x", ph.x, "name:min:max:n[:log]");
  phase->add_option("--y", ph.y, "name:min:max:n[:log]");
  phase->add_option("--data-file", ph.data_file);
  phase->add_option("--n", ph.n, "Gaussian dataset size");
  phase->add_option("--mu", ph.mu);
  phase->add_option("--noise-std", ph.noise_std);
  phase->add_option("--a", ph.a, "Two-point parameter when it is not an axis");
  phase->add_option("--data-seed", ph.data_seed, "Dataset draw (defaults to --seed)");
  phase->add_option("--batch-size", ph.batch_size)->check(CLI::PositiveNumber);
  phase->add_flag("--mu-axis", ph.mu_axis, "Default axes lr:0.01:10:100:log by mu:0:1:100");
  phase->add_option("--classifier", ph.classifier)->check(CLI::IsMember({"analytic", "empirical"}));
  phase->add_option("--n-seeds", ph.n_seeds)->check(CLI::PositiveNumber);
  phase->add_option("--uv-steps", ph.uv_steps)->check(CLI::PositiveNumber);
  phase->add_flag("--finite-size", ph.finite_size, "One grid per dataset size");
  phase->add_option("--sizes", ph.sizes)->delimiter(',');
  phase->add_option("--format", ph.format)->check(CLI::IsMember({"csv", "json"}));
  phase->add_option("--output", ph.output);
  phase->add_option("--output-dir", ph.output_dir, "Used by --finite-size");
  phase->callback([&] { run = [&] { return cmd_phase_diagram(ph, g); }; });

  // experiment
  std::string out_dir = ".";
  auto* experiment = app.add_subcommand("experiment", "SGD simulations");
  experiment->require_subcommand(1);
  experiment->fallthrough();
  experiment->add_option("--output-dir", out_dir, "Directory for <name>.json and <name>_trajectory.csv");

  TwoSaddleArgs ts;
  auto* two = experiment->add_subcommand("two-saddle", "Escape from a Type-I or Type-II ReLU saddle");
  two->add_option("--which", ts.which)->check(CLI::IsMember({"type1", "type2"}));
  two->add_option("--lr", ts.cfg.lr);
  two->add_option("--width", ts.cfg.width);
  two->add_option("--steps", ts.cfg.steps);
  two->add_option("--perturbation", ts.cfg.perturbation);
  two->add_option("--n-data", ts.n_data);
  two->add_option("--noise-std", ts.noise_std);
  two->add_option("--data-seed", ts.data_seed);
  two->callback([&] { run = [&] { return cmd_two_saddle(ts, g, out_dir); }; });

  SpredArgs sp;
  auto* spred = experiment->add_subcommand("spred", "Lasso through the u*w reparametrization");
  spred->add_option("--lr", sp.cfg.lr);
  spred->add_option("--kappa", sp.kappa);
  spred->add_option("--dim", sp.dim);
  spred->add_option("--n-samples", sp.n_samples);
  spred->add_option("--support", sp.support, "Planted support fraction");
  spred->add_option("--steps", sp.cfg.steps);
  spred->add_option("--init-scale", sp.cfg.init_scale);
  spred->add_option("--problem-seed", sp.problem_seed);
  spred->callback([&] { run = [&] { return cmd_spred(sp, g, out_dir); }; });

  SwishArgs sw;
  auto* swish = experiment->add_subcommand("swish", "Solution selection in u * swish(w x)");
  swish->add_option("--init", sw.init)->check(CLI::IsMember({"A", "B"}));
  swish->add_option("--lr", sw.lr);
  swish->add_option("--lr-sweep", sw.lr_sweep, "min:max:n[:log|linear], log by default");
  swish->add_option("--n-data", sw.n_data);
  swish->add_option("--steps", sw.steps);
  swish->add_option("--replicates", sw.replicates, "Seeds per learning rate in a sweep");
  swish->add_option("--data-seed", sw.data_seed);
  swish->callback([&] { run = [&] { return cmd_swish(sw, g, out_dir); }; });

  DeepRankArgs dr;
  auto* deep = experiment->add_subcommand("deep-rank", "Rank of the second layer after SGD");
  deep->add_option("--widths", dr.cfg.widths)->delimiter(',');
  deep->add_option("--activation", dr.activation)->check(CLI::IsMember({"linear", "tanh"}));
  deep->add_option("--mu", dr.cfg.mu);
  deep->add_option("--noise-std", dr.cfg.noise_std);
  deep->add_option("--lr", dr.cfg.lr);
  deep->add_option("--steps", dr.cfg.steps);
  deep->add_option("--batch-size", dr.cfg.batch_size);
  deep->add_option("--rank-tol", dr.cfg.rank_tol);
  deep->callback([&] { run = [&] { return cmd_deep_rank(dr, g, out_dir); }; });

  UvArgs uv;
  auto* uvm = experiment->add_subcommand("uv-model", "The u-w saddle model");
  uvm->add_option("--a", uv.a, "Two-point data {1, a} (default 0.5)");
  uvm->add_option("--products", uv.products, "Explicit xy values")->delimiter(',');
  uvm->add_option("--data-file", uv.data_file);
  uvm->add_option("--lr", uv.cfg.lr);
  uvm->add_option("--batch-size", uv.cfg.batch_size)->check(CLI::PositiveNumber);
  uvm->add_option("--dim", uv.cfg.dim)->check(CLI::PositiveNumber);
  uvm->add_option("--init-scale", uv.cfg.init_scale);
  uvm->add_option("--steps", uv.cfg.steps)->check(CLI::PositiveNumber);
  uvm->callback([&] { run = [&] { return cmd_uv_model(uv, g, out_dir); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const Outputs out = run();
    write_outputs(out);
    return out.status;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const EnumerationLimitError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
}
