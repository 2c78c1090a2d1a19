#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <unistd.h>

#include "saddle_scope/experiments.hpp"
#include "saddle_scope/lyapunov.hpp"
#include "saddle_scope/phase_diagram.hpp"
#include "saddle_scope/root_finding.hpp"
#include "saddle_scope/sgd_sim.hpp"
#include "saddle_scope/stability.hpp"

using namespace saddle;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Verdict()> run;
};

std::string g_cli;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> geomspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = i + 1 == n ? hi : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return out;
}

ScalarNoiseDistribution random_dist(Rng& rng, double mean, double spread) {
  const std::size_t k = 2 + rng.index(4);
  std::vector<Atom> atoms;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 0.2 + rng.uniform();
    atoms.push_back({rng.normal(mean, spread), w});
    total += w;
  }
  for (auto& a : atoms) a.probability /= total;
  return ScalarNoiseDistribution(atoms);
}

// ---------------------------------------------------------------------------

Verdict log_rate_oracle() {
  Rng rng(2024);
  std::size_t queries = 0, agree = 0, total = 0, weak = 0;
  const double log_small = std::log(1e-8), log_big = std::log(1e8);
  while (queries < 200) {
    const auto d = random_dist(rng, 0.3, 1.0);
    const double lr = 0.05 * std::pow(40.0, rng.uniform());
    const double r = log_contraction_rate({d, lr});
    if (!(std::abs(r) > 0.02)) continue;
    std::vector<double> logf, p;
    for (const auto& a : d.atoms()) {
      logf.push_back(std::log(std::abs(1.0 - lr * a.value)));
      p.push_back(a.probability);
    }
    const DiscreteSampler sampler(p);
    std::size_t ok = 0;
    for (int s = 0; s < 100; ++s) {
      Rng run(mix64(7, queries, s));
      double lt = 0.0;  // log|theta_t / theta_0| of the literal recursion
      for (int t = 0; t < 10000; ++t) lt += logf[sampler(run)];
      ok += r < 0 ? lt < log_small : lt > log_big;
    }
    agree += ok;
    total += 100;
    weak += ok < 95;
    ++queries;
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(total);
  return {frac >= 0.95, fmt::format("agreement {:.4f} over {} queries x 100 seeds ({} queries below 0.95)",
                                    frac, queries, weak)};
}

Verdict critical_lr_second_order() {
  Rng rng(99);
  std::size_t dists = 0, in_regime = 0, within = 0;
  double worst = 0.0;
  while (dists < 50) {
    const auto raw = random_dist(rng, 0.0, 1.0);
    if (!(raw.variance() > 1e-3)) continue;
    const double delta = (0.01 + 0.49 * rng.uniform()) * std::sqrt(raw.variance());
    const auto d = raw.shifted(-raw.mean() - delta);
    ++dists;
    const double lc = critical_lr(d);
    if (!(lc * d.max_abs() < 0.5)) continue;
    ++in_regime;
    const auto roots = scan_roots([&](double lr) { return log_contraction_rate({d, lr}); }, 1e-6, 4.0 * lc);
    if (roots.empty()) continue;
    const double err = std::abs(roots.front() - lc) / lc;
    worst = std::max(worst, err);
    within += err <= 0.25;
  }
  return {in_regime > 0 && within == in_regime,
          fmt::format("{}/{} dists in the second-order regime within 25% (worst {:.3f})", within,
                      in_regime, worst)};
}

Verdict two_point_grid() {
  GridSpec spec;
  spec.x = parse_axis("lr:0.01:4:100:log");
  spec.y = parse_axis("a:-1:1:100");
  const auto grid = sweep_analytic(spec, two_point_factory(spec));
  std::size_t labels = 0, regions = 0;
  std::string per_phase;
  for (auto p : {Phase::Ia, Phase::Ib, Phase::II, Phase::III, Phase::IV}) {
    labels += grid.fraction(p) > 0.0;
    regions += grid.regions(p);
    per_phase += fmt::format(" {}:{}/{}", to_string(p), grid.regions(p), grid.regions(p, true));
  }
  const bool five = labels == 5 && regions == 5 && grid.fraction(Phase::Error) == 0.0;

  const ScalarNoiseDistribution chi({{1.0, 0.5}, {-0.5, 0.5}});
  const auto roots = find_boundary(BoundaryCondition::h, chi, 0.0, 4.0);
  const bool hand = roots.size() == 2 && std::abs(roots[0] - 1.0) < 1e-9 &&
                    std::abs(roots[1] - (1.0 + std::sqrt(17.0)) / 2.0) < 1e-9;

  const auto emp = sweep_empirical(spec, two_point_factory(spec), 5);
  std::size_t interior = 0, agree = 0;
  for (std::size_t iy = 2; iy + 2 < spec.y.n; ++iy)
    for (std::size_t ix = 2; ix + 2 < spec.x.n; ++ix) {
      bool near = false;
      for (std::size_t jy = iy - 2; jy <= iy + 2; ++jy)
        for (std::size_t jx = ix - 2; jx <= ix + 2; ++jx)
          near = near || grid.label(jx, jy) != grid.label(ix, iy);
      if (near) continue;
      ++interior;
      agree += grid.label(ix, iy) == emp.label(ix, iy);
    }
  const double frac = static_cast<double>(agree) / static_cast<double>(interior);
  return {five && hand && frac >= 0.9,
          fmt::format("labels {} regions {} (4/8-connected{}); h roots at a=-0.5: {:.12f} {:.12f}; empirical agreement "
                      "{:.4f} on {} interior cells",
                      labels, regions, per_phase, roots.size() > 0 ? roots[0] : NAN,
                      roots.size() > 1 ? roots[1] : NAN, frac, interior)};
}

Verdict lp_counterexample_growth() {
  const auto ce = lp_counterexample(1.0, 1.0, 4.0);
  const std::size_t seeds = 1000, horizon = 20;
  // theta_{t+1} = (1 - lr h) theta_t with h in {1/lr, c0}
  std::vector<std::size_t> zeros(horizon + 1, 0);
  std::vector<double> mean_abs(horizon + 1, 0.0);
  mean_abs[0] = 1.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(mix64(5, s));
    double theta = 1.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
      const double h = rng.uniform() < 0.5 ? 1.0 / ce.lr : ce.c0;
      theta *= 1.0 - ce.lr * h;
      zeros[t] += theta == 0.0;
      mean_abs[t] += std::abs(theta) / static_cast<double>(seeds);
    }
  }
  bool prob_ok = true;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const double q = 1.0 - std::pow(2.0, -static_cast<double>(t));
    const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(seeds));
    prob_ok = prob_ok && static_cast<double>(zeros[t]) / static_cast<double>(seeds) >= q - 3.0 * se;
  }
  std::size_t t_peak = 0;
  for (std::size_t t = 1; t <= horizon; ++t)
    if (mean_abs[t] > mean_abs[t_peak]) t_peak = t;
  const double growth = mean_abs[t_peak];
  return {ce.prob_stable && ce.lp == LpVerdict::unstable && prob_ok && growth >= 10.0,
          fmt::format("lp_rate {}, P(theta_t = 0) within binomial error: {}, max_t E|theta_t|/|theta_0| = "
                      "{:.1f} at t = {} (expected 1.5^t), E|theta_20| = {}",
                      ce.lp_rate, prob_ok ? "yes" : "no", growth, t_peak, mean_abs[horizon])};
}

Verdict lyapunov_sign_curve() {
  const auto ens = gaussian_saddle_ensemble(10000, 1);
  LyapunovProtocol proto;  // 5000 steps, cutoffs 1e100 / 1e-140, 800 runs
  const auto lrs = geomspace(0.01, 3.0, 60);
  std::vector<int> signs;
  std::size_t judged = 0, agree = 0;
  for (std::size_t i = 0; i < lrs.size(); ++i) {
    const auto est = estimate_max_lyapunov(ens, lrs[i], proto);
    const int sg = est.mean > 0 ? 1 : -1;
    if (signs.empty() || signs.back() != sg) signs.push_back(sg);
    if (!(std::abs(est.mean) > 3.0 * est.std_error)) continue;
    // fate is whichever protocol cutoff is hit first; the horizon allows 3x the drift time
    const auto horizon = std::max<std::size_t>(
        10000, static_cast<std::size_t>(std::ceil(3.0 * std::log(1.0 / proto.lower_cutoff) / std::abs(est.mean))));
    for (int s = 0; s < 20; ++s) {
      Rng rng(mix64(31, i, s));
      const Eigen::VectorXd theta0 = rng.unit_sphere(2);
      const auto rec = run_linearized(ens, lrs[i], theta0, horizon, mix64(32, i, s), proto.lower_cutoff,
                                      proto.upper_cutoff);
      ++judged;
      agree += sg < 0 ? rec.outcome == Outcome::converged : rec.outcome == Outcome::escaped;
    }
  }
  const bool pattern = signs == std::vector<int>{1, -1, 1};
  std::string seq;
  for (int s : signs) seq += s > 0 ? '+' : '-';
  const double frac = judged ? static_cast<double>(agree) / static_cast<double>(judged) : 0.0;
  return {pattern && frac >= 0.95,
          fmt::format("sign pattern {} over 60 lr in [0.01, 3]; fresh-trajectory agreement {:.4f} ({} runs)",
                      seq, frac, judged)};
}

Verdict zero_init_gradient() {
  Mlp net({10, 20, 20, 10}, Activation::tanh);
  net.set_zero();
  Rng rng(4);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i)
    worst = std::max(worst, net.gradient(rng.normal_vector(10), rng.normal_vector(10)).lpNorm<Eigen::Infinity>());
  return {worst < 1e-12, fmt::format("max per-sample gradient entry {} over 500 samples", worst)};
}

Verdict two_saddle_escape() {
  const auto data = relu_teacher_data(200, 2, 0.1, 11);
  std::vector<double> on1, on2, r2;
  for (Seed s = 0; s < 20; ++s) {
    TwoSaddleConfig cfg;
    cfg.seed = s;
    cfg.which = SaddleType::TypeI;
    const auto a = run_two_saddle_escape(data, cfg);
    cfg.which = SaddleType::TypeII;
    const auto b = run_two_saddle_escape(data, cfg);
    const auto o1 = a.extra<std::int64_t>("onset_step"), o2 = b.extra<std::int64_t>("onset_step");
    on1.push_back(o1 < 0 ? INFINITY : static_cast<double>(o1));
    on2.push_back(o2 < 0 ? INFINITY : static_cast<double>(o2));
    r2.push_back(b.extra<double>("fit_r2"));
  }
  const double m1 = median(on1), m2 = median(on2);
  const double min_r2 = *std::min_element(r2.begin(), r2.end());
  return {m2 >= 5.0 * m1 && std::isfinite(m2) && min_r2 >= 0.95,
          fmt::format("median onset Type-I {} Type-II {} (ratio {:.1f}); Type-II fit R2 min {:.4f} median {:.4f}",
                      m1, m2, m2 / m1, min_r2, median(r2))};
}

Verdict spred_sparsity() {
  const auto problem = planted_spred_problem(20, 80, 2.0, 0.5, 5);
  auto run = [&](double lr, Seed s) {
    SpredConfig cfg;
    cfg.lr = lr;
    cfg.seed = s;
    return run_spred_lasso(problem, cfg);
  };
  auto median_sparsity = [&](double lr) {
    std::vector<double> v;
    for (Seed s = 0; s < 10; ++s) v.push_back(run(lr, s).extra<double>("sparsity"));
    return median(v);
  };
  double lr_div = 0.001;
  for (;;) {
    bool any = false;
    for (Seed s = 0; s < 10 && !any; ++s) any = run(lr_div, s).extra<bool>("diverged");
    if (any || lr_div > 10.0) break;
    lr_div *= 1.15;
  }
  const auto lrs = geomspace(0.001, lr_div / 1.15, 10);
  std::vector<double> sp;
  for (double lr : lrs) sp.push_back(median_sparsity(lr));
  bool monotone = sp.back() > sp.front();
  for (std::size_t i = 1; i < sp.size(); ++i) monotone = monotone && sp[i] >= sp[i - 1];
  const bool small = std::abs(sp.front() - 0.5) <= 0.1;
  return {small && monotone,
          fmt::format("sparsity at lr {} = {:.2f}; divergence from lr {:.4f}; median sparsity sweep [{:.2f}]",
                      lrs.front(), sp.front(), lr_div, fmt::join(sp, ", "))};
}

Verdict swish_selection() {
  const auto data = swish_data(100, kSwishDataSeed);
  const auto minima = swish_landscape_minima(data);
  if (minima.empty()) return {false, "no minima found"};
  const auto& a = nearest_minimum(minima, kSwishA);
  const auto& b = nearest_minimum(minima, kSwishB);
  const double da = (a.point - kSwishA).norm(), db = (b.point - kSwishB).norm();
  const bool coords = da <= 0.2 && db <= 0.2;
  const bool hess = std::abs(a.top_eigenvalue - 7.7) <= 0.3 * 7.7 && std::abs(b.top_eigenvalue - 3.0) <= 0.3 * 3.0;

  SwishConfig cfg;
  const auto lrs = geomspace(0.01, 2.0, 40);
  auto sequence = [&](const Eigen::Vector2d& init) {
    cfg.init = init;
    std::vector<std::string> labels;
    for (const auto& p : swish_lr_sweep(data, cfg, lrs, 25, a.point, b.point)) labels.push_back(p.basin);
    return compress_sequence(labels);
  };
  const auto seq_b = sequence(b.point);
  const auto seq_a = sequence(a.point);
  const bool sweep_b = seq_b == std::vector<std::string>{"B", "C", "diverged"};
  const bool sweep_a = seq_a == std::vector<std::string>{"A", "C", "diverged"};
  return {sweep_a && sweep_b && coords && hess,
          fmt::format("B sweep {} [{}]; A sweep {} [{}]; minima A ({:.3f}, {:.3f}) off by {:.3f}, B ({:.3f}, "
                      "{:.3f}) off by {:.3f} (limit 0.2): {}; top eigenvalues {:.3f} and {:.3f} vs 7.7 and "
                      "3.0 +-30%: {}",
                      sweep_b ? "ok" : "wrong", fmt::join(seq_b, " > "), sweep_a ? "ok" : "wrong",
                      fmt::join(seq_a, " > "), a.point[0], a.point[1], da, b.point[0], b.point[1], db,
                      coords ? "ok" : "no", a.top_eigenvalue, b.top_eigenvalue, hess ? "ok" : "no")};
}

Verdict finite_size() {
  GridSpec spec;
  spec.x = parse_axis("lr:0.01:10:60:log");
  spec.y = parse_axis("mu:0:1:40");
  std::vector<std::vector<double>> frac(kDefaultFiniteSizes.size());
  for (Seed s = 1; s <= 5; ++s) {
    const auto fam = finite_size_family(kDefaultFiniteSizes, 0.5, s, spec);
    for (std::size_t i = 0; i < fam.grids.size(); ++i) {
      if (fam.grids[i].fraction(Phase::Error) > 0.0) return {false, "error cells in the family"};
      frac[i].push_back(fam.phase2_fraction[i]);
    }
  }
  std::vector<double> med;
  for (const auto& f : frac) med.push_back(median(f));
  bool ok = true;
  for (std::size_t i = 1; i < med.size(); ++i) ok = ok && med[i] <= med[i - 1];
  return {ok, fmt::format("median phase-II fraction for N = 3,4,8,10,24,100: [{:.4f}]", fmt::join(med, ", "))};
}

Verdict masked_diagonal() {
  const std::size_t dim = 20;
  const double mu = 0.15;
  const auto chi = masked_factorization_chi(dim, mu, 20000, 3);
  std::vector<double> predicted;
  for (const auto& c : chi) predicted.push_back(masked_collapse_lr(c, 20.0));

  const auto lrs = geomspace(0.05, 2.0, 60);
  std::vector<double> observed(dim, NAN);
  double lr_div = INFINITY;
  for (std::size_t i = 0; i < lrs.size(); ++i) {
    std::vector<std::vector<double>> ex(dim);
    for (Seed s = 0; s < 5; ++s) {
      MaskedFactorizationConfig cfg;
      cfg.dim = dim;
      cfg.mu = mu;
      cfg.lr = lrs[i];
      cfg.seed = mix64(9, i, s);
      const auto rec = run_masked_factorization(cfg);
      const auto& e = rec.extra<std::vector<double>>("exponents");
      for (std::size_t k = 0; k < dim; ++k) ex[k].push_back(e[k]);
    }
    bool diverged = false;
    for (std::size_t k = 0; k < dim; ++k) {
      const double m = median(ex[k]);
      diverged = diverged || std::isinf(m);
      if (std::isnan(observed[k]) && m < 0.0) observed[k] = lrs[i];
    }
    if (diverged) {
      lr_div = lrs[i];
      for (std::size_t k = 0; k < dim; ++k)
        if (observed[k] == lrs[i]) observed[k] = NAN;
      break;
    }
  }
  std::size_t match = 0;
  std::string rows;
  for (std::size_t k = 0; k < dim; ++k) {
    const bool pred_absent = std::isnan(predicted[k]) || predicted[k] >= lr_div;
    const bool obs_absent = std::isnan(observed[k]);
    bool ok = false;
    if (pred_absent && obs_absent)
      ok = true;
    else if (!pred_absent && !obs_absent)
      ok = std::abs(observed[k] - predicted[k]) / predicted[k] <= 0.2;
    match += ok;
    rows += fmt::format(" {}:{:.3g}/{:.3g}{}", k, predicted[k], observed[k], ok ? "" : "*");
  }
  return {match >= 16, fmt::format("{}/{} directions match (divergence from lr {:.3f}); predicted/observed:{}",
                                   match, dim, lr_div, rows)};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the command in a fresh directory and returns stdout plus every file it wrote.
std::string capture(const std::string& args, const fs::path& dir, int& rc) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "pairs.json") << R"({"pairs": [[1.0, 1.0], [1.0, -0.5], [2.0, 0.25]]})";
  const std::string cmd = fmt::format("cd '{}' && '{}' {} > stdout.txt 2> stderr.txt", dir.string(), g_cli, args);
  rc = std::system(cmd.c_str());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "stderr.txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.lexically_relative(dir).string() + "\n" + slurp(f);
  return all;
}

Verdict determinism() {
  if (g_cli.empty()) return {false, "no CLI path given"};
  const std::vector<std::string> commands = {
      "--seed 3 stability --atoms 1:0.5,-0.5:0.5 --lr 1.5",
      "--seed 3 stability --dataset pairs.json --batch-size 3 --batch-mode monte-carlo --lr 0.7 --output s.json",
      "--seed 3 lyapunov --preset appendix-a2 --lr-range 0.01:3:8 --n-runs 50 --max-steps 2000 --output l.json",
      "--seed 3 --threads 2 lyapunov --preset appendix-a2 --lr 0.2 --n-runs 1 --output l1.json",
      "--seed 3 phase-diagram --dataset two-point --x lr:0.01:4:40:log --y a:-1:1:40 --output p.csv",
      "--seed 3 phase-diagram --dataset gaussian --n 30 --mu-axis --format json --output p.json",
      "--seed 3 phase-diagram --dataset two-point --x lr:0.05:4:12 --y a:-1:1:12 --classifier empirical "
      "--n-seeds 3 --output e.csv",
      "--seed 3 phase-diagram --dataset gaussian --finite-size --sizes 3,4,8 --x lr:0.01:10:20:log --y "
      "mu:0:1:10 --output-dir fs",
      "--seed 3 experiment two-saddle --which type2 --lr 0.05 --steps 1500",
      "--seed 3 experiment two-saddle --which type1 --lr 0.05 --steps 500",
      "--seed 3 experiment spred --lr 0.005 --steps 5000",
      "--seed 3 experiment swish --init B --lr 0.1 --steps 5000",
      "--seed 3 experiment swish --init A --lr-sweep 0.01:2:6 --steps 4000 --replicates 3",
      "--seed 3 experiment deep-rank --widths 8,8,8 --mu 0.5 --lr 0.02 --steps 1500",
      "--seed 3 experiment uv-model --a -0.5 --lr 1.5 --dim 3 --steps 2000",
  };
  const fs::path root = fs::temp_directory_path() / fmt::format("saddle_scope_det_{}", ::getpid());
  std::size_t same = 0;
  std::string bad;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    int rc1 = 0, rc2 = 0;
    const auto a = capture(commands[i], root / fmt::format("c{}a", i), rc1);
    const auto b = capture(commands[i], root / fmt::format("c{}b", i), rc2);
    const bool ok = a == b && rc1 == rc2 && rc1 == 0 && a.size() > 20;
    same += ok;
    if (!ok) bad += fmt::format(" [{} rc {} {}]", commands[i], rc1, rc2);
  }
  fs::remove_all(root);
  return {same == commands.size(),
          fmt::format("{}/{} commands byte-identical across two runs{}", same, commands.size(), bad)};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--cli=", 0) == 0)
      g_cli = fs::absolute(a.substr(6)).string();
    else if (a.rfind("--only=", 0) == 0)
      only = a.substr(7);
  }
  const std::vector<Criterion> criteria = {
      {"log-rate-oracle", 30, log_rate_oracle},
      {"critical-lr-second-order", 5, critical_lr_second_order},
      {"two-point-phase-grid", 120, two_point_grid},
      {"lp-counterexample", 10, lp_counterexample_growth},
      {"lyapunov-sign-curve", 180, lyapunov_sign_curve},
      {"zero-init-gradient", 1, zero_init_gradient},
      {"two-saddle-escape", 60, two_saddle_escape},
      {"spred-sparsity", 120, spred_sparsity},
      {"swish-selection", 120, swish_selection},
      {"finite-size-phase2", 300, finite_size},
      {"masked-diagonal-approx", 180, masked_diagonal},
      {"cli-determinism", 60, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = v.pass && in_time;
    failed += !pass;
    fmt::print("{} {}: {} ({:.1f}s of {:.0f}s{})\n", pass ? "PASS" : "FAIL", c.name, v.detail, secs,
               c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
