#include <cmath>

#include "doctest.h"
#include "saddle_scope/phase_diagram.hpp"

using namespace saddle;

namespace {

GridSpec two_point_spec(std::size_t nx, std::size_t ny) {
  GridSpec s;
  s.x = parse_axis("lr:0.01:4:" + std::to_string(nx) + ":log");
  s.y = parse_axis("a:-1:1:" + std::to_string(ny));
  return s;
}

}  // namespace

TEST_SUITE("phase_diagram") {

TEST_CASE("axis parsing") {
  const auto a = parse_axis("lr:0.01:10:5:log");
  CHECK(a.name == "lr");
  CHECK(a.scale == AxisScale::log);
  CHECK(a.value(0) == 0.01);
  CHECK(a.value(4) == 10.0);
  CHECK(a.value(2) == doctest::Approx(std::sqrt(0.1)));
  const auto b = parse_axis("mu:0:1:3");
  CHECK(b.scale == AxisScale::linear);
  CHECK(b.value(1) == 0.5);
  CHECK_THROWS_AS(parse_axis("lr:0.01:10:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_axis("lr:0:10:5:log"), std::invalid_argument);
  CHECK_THROWS_AS(parse_axis("lr:1:0.5:5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_axis("lr:1:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_axis("lr:1:2:3.5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_axis("lr:1:2:3:cubic"), std::invalid_argument);
}

TEST_CASE("refined axes share coordinates bit for bit") {
  for (auto text : {"lr:0.01:4:17:log", "a:-1:1:33"}) {
    const auto a = parse_axis(text);
    Axis fine = a;
    fine.n = 2 * a.n - 1;
    for (std::size_t i = 0; i < a.n; ++i) CHECK(a.value(i) == fine.value(2 * i));
  }
}

TEST_CASE("refined grids agree at shared points") {
  const auto coarse = sweep_analytic(two_point_spec(21, 11), two_point_factory(two_point_spec(21, 11)));
  const auto fs = two_point_spec(41, 21);
  const auto fine = sweep_analytic(fs, two_point_factory(fs));
  for (std::size_t iy = 0; iy < 11; ++iy)
    for (std::size_t ix = 0; ix < 21; ++ix) CHECK(coarse.label(ix, iy) == fine.label(2 * ix, 2 * iy));
}

TEST_CASE("two-point grid has the five phases") {
  const auto spec = two_point_spec(100, 100);
  const auto grid = sweep_analytic(spec, two_point_factory(spec));
  for (auto p : {Phase::Ia, Phase::Ib, Phase::II, Phase::III, Phase::IV}) CHECK(grid.fraction(p) > 0.0);
  CHECK(grid.fraction(Phase::Error) == 0.0);
  // small learning rate column: Ia wherever E[chi] = (1 + a) / 2 > 0
  for (std::size_t iy = 0; iy < grid.ny(); ++iy)
    if (spec.y.value(iy) > -0.9) CHECK(grid.label(0, iy) == Phase::Ia);
}

TEST_CASE("hand-evaluated cell") {
  GridSpec s;
  s.x = parse_axis("lr:0.05:0.1:2");
  s.y = parse_axis("a:0.5:0.6:2");
  const auto g = sweep_analytic(s, two_point_factory(s));
  CHECK(g.label(0, 0) == Phase::Ia);
  const double lr = 0.05, a = 0.5;
  CHECK(g.rates(0, 0).r_m == doctest::Approx(0.5 * std::log((1 - lr) * (1 - lr * a))));
  CHECK(g.rates(0, 0).r_h == doctest::Approx(0.5 * std::log((1 + lr) * (1 + lr * a))));
  CHECK(g.rates(0, 0).q_m == doctest::Approx(0.5 * ((1 - lr) * (1 - lr) + (1 - lr * a) * (1 - lr * a))));
}

TEST_CASE("phase III stays off the small learning rate edge") {
  const auto spec = two_point_spec(60, 40);
  const auto grid = sweep_analytic(spec, two_point_factory(spec));
  // a = -1 has E[chi] = 0 and is excluded
  for (std::size_t iy = 1; iy < grid.ny(); ++iy) CHECK(grid.label(0, iy) != Phase::III);
  CHECK(grid.label(0, 0) == Phase::III);
}

TEST_CASE("region counting") {
  GridSpec s;
  s.x = parse_axis("lr:1:3:3");
  s.y = parse_axis("a:1:3:3");
  PhaseGrid g(s);
  const Phase layout[3][3] = {{Phase::Ia, Phase::II, Phase::Ia},
                              {Phase::II, Phase::Ia, Phase::II},
                              {Phase::Ia, Phase::II, Phase::Ia}};
  for (std::size_t iy = 0; iy < 3; ++iy)
    for (std::size_t ix = 0; ix < 3; ++ix) g.set(ix, iy, layout[iy][ix], {});
  CHECK(g.regions(Phase::Ia) == 5);
  CHECK(g.regions(Phase::Ia, true) == 1);
  CHECK(g.regions(Phase::II) == 4);
  CHECK(g.regions(Phase::III) == 0);
  CHECK(g.fraction(Phase::Ia) == doctest::Approx(5.0 / 9.0));
}

TEST_CASE("failing cells are labeled as errors") {
  const auto spec = two_point_spec(5, 5);
  const CellFactory bad = [](double lr, double a) -> CellProblem {
    if (a > 0.0) throw std::runtime_error("no data here");
    CellProblem c;
    c.lr = lr;
    c.products = {1.0, a};
    return c;
  };
  const auto g = sweep_analytic(spec, bad);
  for (std::size_t iy = 0; iy < 5; ++iy) {
    const bool err = spec.y.value(iy) > 0.0;
    CHECK((g.label(2, iy) == Phase::Error) == err);
    if (err) CHECK(std::isnan(g.rates(2, iy).r_m));
  }
}

TEST_CASE("hand-derived h boundary at a = -0.5") {
  const ScalarNoiseDistribution chi({{1.0, 0.5}, {-0.5, 0.5}});
  const auto roots = find_boundary(BoundaryCondition::h, chi, 0.0, 4.0);
  REQUIRE(roots.size() == 2);
  CHECK(std::abs(roots[0] - 1.0) < 1e-9);
  CHECK(std::abs(roots[1] - (1.0 + std::sqrt(17.0)) / 2.0) < 1e-9);
}

TEST_CASE("boundary trivia") {
  const ScalarNoiseDistribution chi({{1.0, 0.5}, {0.5, 0.5}});
  CHECK(find_boundary(BoundaryCondition::m, chi, 0.0, 0.05).empty());
  const auto one = find_boundary(BoundaryCondition::m, ScalarNoiseDistribution::point(1.0), 0.5, 3.0);
  // the rate log|1 - lr| is -inf at lr = 1, so only the crossing at 2 is a sign change
  REQUIRE(one.size() == 1);
  CHECK(std::abs(one[0] - 2.0) < 1e-9);
}

TEST_CASE("boundary roots sit next to label changes") {
  const auto spec = two_point_spec(200, 5);
  const auto grid = sweep_analytic(spec, two_point_factory(spec));
  for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
    const double a = spec.y.value(iy);
    const ScalarNoiseDistribution chi = TwoPointDataset{a}.distribution();
    for (auto cond : {BoundaryCondition::m, BoundaryCondition::h}) {
      for (double root : find_boundary(cond, chi, spec.x.min, spec.x.max)) {
        std::size_t ix = 0;
        while (ix + 1 < grid.nx() && spec.x.value(ix + 1) < root) ++ix;
        bool change = false;
        for (std::size_t j = ix > 0 ? ix - 1 : 0; j + 1 < grid.nx() && j <= ix + 1; ++j)
          change = change || grid.label(j, iy) != grid.label(j + 1, iy);
        CHECK(change);
      }
    }
  }
}

TEST_CASE("sweeps do not depend on the thread count") {
  const auto spec = two_point_spec(30, 20);
  const auto a = sweep_analytic(spec, two_point_factory(spec), 1);
  const auto b = sweep_analytic(spec, two_point_factory(spec), 3);
  CHECK(phase_grid_csv(a) == phase_grid_csv(b));
  const auto es = two_point_spec(6, 5);
  UvConfig base;
  base.steps = 500;
  const auto c = sweep_empirical(es, two_point_factory(es), 3, base, 1);
  const auto d = sweep_empirical(es, two_point_factory(es), 3, base, 4);
  CHECK(phase_grid_json(c) == phase_grid_json(d));
}

TEST_CASE("empirical sweep tracks the analytic labels") {
  GridSpec spec;
  spec.x = parse_axis("lr:0.05:4:40");
  spec.y = parse_axis("a:-1:1:40");
  const auto analytic = sweep_analytic(spec, two_point_factory(spec));
  const auto empirical = sweep_empirical(spec, two_point_factory(spec), 5, {}, 2);
  std::size_t interior = 0, agree = 0;
  for (std::size_t iy = 2; iy + 2 < spec.y.n; ++iy)
    for (std::size_t ix = 2; ix + 2 < spec.x.n; ++ix) {
      bool near = false;
      for (std::size_t jy = iy - 2; jy <= iy + 2; ++jy)
        for (std::size_t jx = ix - 2; jx <= ix + 2; ++jx)
          near = near || analytic.label(jx, jy) != analytic.label(ix, iy);
      if (near) continue;
      ++interior;
      agree += analytic.label(ix, iy) == empirical.label(ix, iy);
    }
  REQUIRE(interior > 100);
  CHECK(static_cast<double>(agree) / static_cast<double>(interior) >= 0.9);
}

TEST_CASE("single point dataset gives unanimous empirical seeds") {
  GridSpec spec;
  spec.x = parse_axis("lr:0.1:1.5:4");
  spec.y = parse_axis("S:1:2:2");
  const auto emp = sweep_empirical(spec, products_factory(spec, {0.8}), 4);
  const auto ana = sweep_analytic(spec, products_factory(spec, {0.8}));
  for (std::size_t iy = 0; iy < 2; ++iy)
    for (std::size_t ix = 0; ix < 4; ++ix) CHECK(emp.label(ix, iy) == ana.label(ix, iy));
}

TEST_CASE("factories reject unknown axes") {
  GridSpec spec;
  spec.x = parse_axis("lr:0.1:1:3");
  spec.y = parse_axis("beta:0:1:3");
  CHECK_THROWS_AS(two_point_factory(spec), std::invalid_argument);
}

TEST_CASE("csv layout") {
  const auto spec = two_point_spec(4, 3);
  const auto csv = phase_grid_csv(sweep_analytic(spec, two_point_factory(spec)));
  CHECK(csv.rfind("# axes: lr a; phases: Ia=0 Ib=1 II=2 III=3 IV=4 ERR=5\nx,y,label,r_m,r_h,q_m\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 14);
}

TEST_CASE("json round-trip is byte identical") {
  auto spec = two_point_spec(7, 6);
  spec.fixed_params["S"] = 2;
  auto grid = sweep_analytic(spec, two_point_factory(spec));
  grid.set(0, 0, Phase::Error, {NAN, INFINITY, -INFINITY});
  const auto text = phase_grid_json(grid);
  const auto back = parse_phase_grid_json(text);
  CHECK(phase_grid_json(back) == text);
  CHECK(back.label(0, 0) == Phase::Error);
  CHECK(std::isnan(back.rates(0, 0).r_m));
  CHECK_THROWS_AS(parse_phase_grid_json("{}"), std::invalid_argument);
}

TEST_CASE("gaussian grid holds the draws fixed across mu") {
  GridSpec spec;
  spec.x = parse_axis("lr:0.01:10:20:log");
  spec.y = parse_axis("mu:0:1:10");
  const auto data = GaussianLabelDataset::generate(20, 0.5, 2.0, 4);
  const auto f = gaussian_factory(spec, data);
  const auto cell = f(0.5, 0.3);
  CHECK(cell.products == data.with_mu(0.3).products());
  CHECK(cell.lr == 0.5);
}

TEST_CASE("finite-size family") {
  GridSpec spec;
  spec.x = parse_axis("lr:0.01:10:20:log");
  spec.y = parse_axis("mu:0:1:10");
  const auto fam = finite_size_family(kDefaultFiniteSizes, 0.5, 1, spec);
  REQUIRE(fam.grids.size() == 6);
  CHECK(fam.sizes == std::vector<std::size_t>{3, 4, 8, 10, 24, 100});
  for (std::size_t i = 0; i < fam.grids.size(); ++i) {
    CHECK(fam.grids[i].fraction(Phase::Error) == 0.0);
    CHECK(fam.phase2_fraction[i] == fam.grids[i].fraction(Phase::II));
  }
  CHECK_THROWS_AS(finite_size_family({}, 0.5, 1, spec), std::invalid_argument);

  // one pair: every cell follows the single-atom rates
  const auto one = finite_size_family({1}, 0.5, 1, spec);
  const auto data = GaussianLabelDataset::generate(1, 0.5, 2.0, 1);
  for (std::size_t iy = 0; iy < spec.y.n; ++iy)
    for (std::size_t ix = 0; ix < spec.x.n; ++ix) {
      const double chi = data.with_mu(spec.y.value(iy)).products()[0];
      CHECK(one.grids[0].label(ix, iy) ==
            classify_phase(ScalarNoiseDistribution::point(chi), spec.x.value(ix)));
    }
}

}  // TEST_SUITE
