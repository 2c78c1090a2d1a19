#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "saddle_scope/errors.hpp"
#include "saddle_scope/lyapunov.hpp"
#include "saddle_scope/noise_models.hpp"
#include "saddle_scope/phase_diagram.hpp"
#include "saddle_scope/serialization.hpp"
#include "saddle_scope/sgd_sim.hpp"
#include "saddle_scope/stability.hpp"

namespace py = pybind11;
using namespace saddle;

namespace {

Sign sign_arg(int s) {
  if (s == 1) return Sign::plus;
  if (s == -1) return Sign::minus;
  throw std::invalid_argument("sign must be +1 or -1");
}

ScalarNoiseDistribution make_dist(const std::vector<std::pair<double, double>>& atoms) {
  std::vector<Atom> v;
  v.reserve(atoms.size());
  for (const auto& [x, p] : atoms) v.push_back({x, p});
  return ScalarNoiseDistribution(std::move(v));
}

BatchMode batch_mode(const std::string& s) {
  if (s == "exact") return BatchMode::exact;
  if (s == "monte-carlo" || s == "monte_carlo") return BatchMode::monte_carlo;
  throw std::invalid_argument("batch mode must be 'exact' or 'monte-carlo'");
}

BoundaryCondition boundary(const std::string& s) {
  if (s == "m") return BoundaryCondition::m;
  if (s == "h") return BoundaryCondition::h;
  if (s == "l2") return BoundaryCondition::l2;
  throw std::invalid_argument("condition must be 'm', 'h' or 'l2'");
}

GridSpec grid_spec(const std::string& x, const std::string& y, Seed seed) {
  GridSpec spec;
  spec.x = parse_axis(x);
  spec.y = parse_axis(y);
  spec.seed = seed;
  spec.validate();
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stability of SGD at saddle points: rates, Lyapunov exponents, phase diagrams";

  py::register_exception<DegenerateDistributionError>(m, "DegenerateDistributionError",
                                                      PyExc_ValueError);
  py::register_exception<EnumerationLimitError>(m, "EnumerationLimitError", PyExc_ValueError);
  py::register_exception<InapplicableConditionError>(m, "InapplicableConditionError",
                                                     PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::class_<ScalarNoiseDistribution>(m, "ScalarNoiseDistribution")
      .def(py::init(&make_dist), py::arg("atoms"))
      .def_static("empirical", [](const std::vector<double>& v) {
        return ScalarNoiseDistribution::empirical(v);
      })
      .def_static("point", &ScalarNoiseDistribution::point)
      .def_static("parse", [](const std::string& s) { return parse_atoms(s); })
      .def_property_readonly("atoms",
                             [](const ScalarNoiseDistribution& d) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto& a : d.atoms()) out.emplace_back(a.value, a.probability);
                               return out;
                             })
      .def("mean", &ScalarNoiseDistribution::mean)
      .def("variance", &ScalarNoiseDistribution::variance)
      .def("moment", &ScalarNoiseDistribution::moment)
      .def("max_abs", &ScalarNoiseDistribution::max_abs)
      .def("shifted", &ScalarNoiseDistribution::shifted)
      .def("__len__", &ScalarNoiseDistribution::size)
      .def("__repr__", [](const ScalarNoiseDistribution& d) {
        std::string s = "ScalarNoiseDistribution([";
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (i) s += ", ";
          s += "(" + format_double(d.atoms()[i].value) + ", " +
               format_double(d.atoms()[i].probability) + ")";
        }
        return s + "])";
      });

  m.def("batch_statistic_distribution",
        [](const std::vector<double>& products, std::size_t batch_size, const std::string& mode,
           std::size_t n_draws, Seed seed) {
          return batch_statistic_distribution(products, batch_size, batch_mode(mode), n_draws,
                                              seed);
        },
        py::arg("products"), py::arg("batch_size"), py::arg("mode") = "exact",
        py::arg("n_draws") = 100000, py::arg("seed") = 0);
  m.def("two_point_distribution", [](double a) { return TwoPointDataset{a}.distribution(); },
        py::arg("a"));

  py::class_<HessianEnsemble>(m, "HessianEnsemble")
      .def(py::init<std::vector<Eigen::MatrixXd>, std::vector<double>>(), py::arg("matrices"),
           py::arg("probabilities"))
      .def_static("uniform", &HessianEnsemble::uniform)
      .def_property_readonly("dimension", &HessianEnsemble::dimension)
      .def_property_readonly("matrices", &HessianEnsemble::matrices)
      .def_property_readonly("probabilities", &HessianEnsemble::probabilities)
      .def("mean", &HessianEnsemble::mean)
      .def("diagonal_marginals", &HessianEnsemble::diagonal_marginals)
      .def("__len__", &HessianEnsemble::size);
  m.def("rank1_ensemble", &rank1_ensemble, py::arg("dist"), py::arg("direction"));
  m.def("gaussian_saddle_ensemble",
        [](std::size_t n, Seed seed, const Eigen::Vector2d& mean_diag) {
          return gaussian_saddle_ensemble(n, seed, mean_diag);
        },
        py::arg("n_samples") = 10000, py::arg("seed") = 1,
        py::arg("mean_diagonal") = Eigen::Vector2d(0.1, -0.1));

  m.def("log_contraction_rate",
        [](const ScalarNoiseDistribution& d, double lr, double gamma, int sign) {
          return log_contraction_rate({d, lr, gamma}, sign_arg(sign));
        },
        py::arg("dist"), py::arg("lr"), py::arg("weight_decay") = 0.0, py::arg("sign") = 1);
  m.def("lp_rate",
        [](const ScalarNoiseDistribution& d, double lr, double p, double gamma, int sign) {
          return lp_rate({d, lr, gamma}, p, sign_arg(sign));
        },
        py::arg("dist"), py::arg("lr"), py::arg("p"), py::arg("weight_decay") = 0.0,
        py::arg("sign") = 1);
  m.def("critical_lr", &critical_lr, py::arg("dist"));
  m.def("classify_phase",
        [](const ScalarNoiseDistribution& chi, double lr) {
          return std::string(to_string(classify_phase(chi, lr)));
        },
        py::arg("chi"), py::arg("lr"));
  m.def("phase_rates",
        [](const ScalarNoiseDistribution& chi, double lr) {
          const auto r = phase_rates(chi, lr);
          py::dict d;
          d["r_m"] = r.r_m;
          d["r_h"] = r.r_h;
          d["q_m"] = r.q_m;
          d["q_h"] = r.q_h;
          d["marginal"] = r.marginal;
          return d;
        },
        py::arg("chi"), py::arg("lr"));
  m.def("lp_counterexample",
        [](double lr, double p, double c0) {
          const auto ce = lp_counterexample(lr, p, c0);
          py::dict d;
          d["lr"] = ce.lr;
          d["p"] = ce.p;
          d["c0"] = ce.c0;
          d["prob_stable"] = ce.prob_stable;
          d["lp_rate"] = ce.lp_rate;
          d["lp"] = std::string(to_string(ce.lp));
          d["dist"] = ce.dist;
          return d;
        },
        py::arg("lr"), py::arg("p"), py::arg("c0"));

  py::class_<LyapunovProtocol>(m, "LyapunovProtocol")
      .def(py::init<>())
      .def_readwrite("max_steps", &LyapunovProtocol::max_steps)
      .def_readwrite("upper_cutoff", &LyapunovProtocol::upper_cutoff)
      .def_readwrite("lower_cutoff", &LyapunovProtocol::lower_cutoff)
      .def_readwrite("n_runs", &LyapunovProtocol::n_runs)
      .def_readwrite("seed", &LyapunovProtocol::seed)
      .def_readwrite("renormalize_every", &LyapunovProtocol::renormalize_every)
      .def_readwrite("threads", &LyapunovProtocol::threads);
  m.def("estimate_max_lyapunov",
        [](const HessianEnsemble& ens, double lr, const LyapunovProtocol& proto) {
          py::gil_scoped_release release;
          return lyapunov_json(estimate_max_lyapunov(ens, lr, proto));
        },
        py::arg("ensemble"), py::arg("lr"), py::arg("protocol") = LyapunovProtocol{},
        "LyapunovEstimate as a JSON string");
  m.def("lyapunov_bounds",
        [](const HessianEnsemble& ens, double lr) {
          const auto b = lyapunov_bounds(ens, lr);
          return std::make_pair(b.lower, b.upper);
        },
        py::arg("ensemble"), py::arg("lr"));
  m.def("small_lr_expansion", &small_lr_expansion, py::arg("ensemble"), py::arg("theta0"),
        py::arg("lr"));
  m.def("diagonal_approx_exponents",
        py::overload_cast<const HessianEnsemble&, double>(&diagonal_approx_exponents),
        py::arg("ensemble"), py::arg("lr"));
  m.def("upper_bound_rate", &upper_bound_rate, py::arg("ensemble"), py::arg("lr"));

  m.def("run_linearized",
        [](const HessianEnsemble& ens, double lr, const Eigen::VectorXd& theta0,
           std::size_t max_steps, Seed seed, double conv, double esc) {
          py::gil_scoped_release release;
          return run_record_json(run_linearized(ens, lr, theta0, max_steps, seed, conv, esc));
        },
        py::arg("ensemble"), py::arg("lr"), py::arg("theta0"), py::arg("max_steps"),
        py::arg("seed") = 0, py::arg("conv_radius") = 1e-8, py::arg("esc_radius") = 1e8,
        "RunRecord as a JSON string");
  m.def("run_uv_model",
        [](const std::vector<double>& products, double lr, std::size_t batch_size,
           std::size_t dim, double init_scale, std::size_t steps, Seed seed) {
          UvConfig cfg;
          cfg.lr = lr;
          cfg.batch_size = batch_size;
          cfg.dim = dim;
          cfg.init_scale = init_scale;
          cfg.steps = steps;
          cfg.seed = seed;
          py::gil_scoped_release release;
          return run_record_json(run_uv_model(products, cfg));
        },
        py::arg("products"), py::arg("lr"), py::arg("batch_size") = 1, py::arg("dim") = 1,
        py::arg("init_scale") = 1.0, py::arg("steps") = 4000, py::arg("seed") = 0,
        "RunRecord as a JSON string");

  m.def("two_point_phase_grid",
        [](const std::string& x, const std::string& y, const std::string& fmt, Seed seed,
           unsigned threads) {
          const auto spec = grid_spec(x, y, seed);
          py::gil_scoped_release release;
          const auto grid = sweep_analytic(spec, two_point_factory(spec), threads);
          return fmt == "json" ? phase_grid_json(grid) : phase_grid_csv(grid);
        },
        py::arg("x") = "lr:0.01:4:100:log", py::arg("y") = "a:-1:1:100",
        py::arg("format") = "csv", py::arg("seed") = 0, py::arg("threads") = 1,
        "PhaseGrid as CSV or JSON text");
  m.def("products_phase_grid",
        [](std::vector<double> products, const std::string& x, const std::string& y,
           const std::string& fmt, Seed seed, unsigned threads) {
          const auto spec = grid_spec(x, y, seed);
          py::gil_scoped_release release;
          const auto grid = sweep_analytic(spec, products_factory(spec, std::move(products)), threads);
          return fmt == "json" ? phase_grid_json(grid) : phase_grid_csv(grid);
        },
        py::arg("products"), py::arg("x"), py::arg("y"), py::arg("format") = "csv",
        py::arg("seed") = 0, py::arg("threads") = 1);
  m.def("find_boundary",
        [](const std::string& cond, const ScalarNoiseDistribution& chi, double lo, double hi) {
          return find_boundary(boundary(cond), chi, lo, hi);
        },
        py::arg("condition"), py::arg("chi"), py::arg("lo"), py::arg("hi"));
}
