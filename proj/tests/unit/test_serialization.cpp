#include <cmath>
#include <cstdlib>
#include <limits>

#include "doctest.h"
#include "saddle_scope/serialization.hpp"

using namespace saddle;

TEST_SUITE("serialization") {

TEST_CASE("doubles print with round-trip precision") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.normal(), static_cast<int>(rng.index(200)) - 100);
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("run record round-trip") {
  RunRecord rec;
  rec.experiment = "demo";
  rec.seed = 18446744073709551615ULL;
  rec.steps = 12;
  rec.outcome = Outcome::escaped;
  rec.record(0, 0.0);
  rec.record(5, -1.25);
  rec.record(12, std::numeric_limits<double>::infinity());
  rec.extras["flag"] = true;
  rec.extras["count"] = std::int64_t{-3};
  rec.extras["rate"] = 0.1;
  rec.extras["whole"] = 2.0;
  rec.extras["bad"] = std::numeric_limits<double>::quiet_NaN();
  rec.extras["label"] = std::string("C");
  rec.extras["vec"] = std::vector<double>{1.5, -INFINITY, 3.0};
  rec.extras["empty"] = std::vector<double>{};

  const auto text = run_record_json(rec);
  const auto back = parse_run_record_json(text);
  CHECK(run_record_json(back) == text);
  CHECK(back.seed == rec.seed);
  CHECK(back.outcome == Outcome::escaped);
  CHECK(back.extra<bool>("flag"));
  CHECK(back.extra<std::int64_t>("count") == -3);
  CHECK(back.extra<double>("rate") == 0.1);
  CHECK(back.extra<double>("whole") == 2.0);
  CHECK(std::isnan(back.extra<double>("bad")));
  CHECK(back.extra<std::string>("label") == "C");
  CHECK(std::isnan(back.lognorm_series[2].log_norm));
  CHECK(back.extra<std::vector<double>>("vec")[0] == 1.5);
  CHECK(back.extra<std::vector<double>>("empty").empty());
}

TEST_CASE("run record parse errors") {
  CHECK_THROWS_AS(parse_run_record_json("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_record_json(R"({"experiment": "x"})"), std::invalid_argument);
  CHECK_THROWS_AS(
      parse_run_record_json(
          R"({"experiment":"x","seed":1,"steps":2,"outcome":"escaped","lognorm_series":[[2,0],[1,0]],"extras":{}})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      parse_run_record_json(
          R"({"experiment":"x","seed":1,"steps":2,"outcome":"lost","lognorm_series":[],"extras":{}})"),
      std::invalid_argument);
}

TEST_CASE("trajectory csv") {
  RunRecord rec;
  rec.record(0, 0.5);
  rec.record(10, -2.0);
  CHECK(trajectory_csv(rec) == "t,log_norm\n0,0.5\n10,-2\n");
}

TEST_CASE("lyapunov json") {
  LyapunovEstimate e;
  e.lambda = 0.25;
  e.mean = -0.01;
  e.std_error = 0.0;
  e.n_runs = 1;
  e.stops.max_steps = 1;
  const auto single = lyapunov_json(e);
  CHECK(single.find("\"std_error\": null") != std::string::npos);

  LyapunovProtocol proto;
  proto.seed = 9;
  LyapunovEstimate f = e;
  f.n_runs = 3;
  f.std_error = 0.125;
  f.stops = {1, 1, 1};
  const auto text = lyapunov_sweep_json(proto, {e, f});
  const auto back = parse_lyapunov_sweep_json(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1].std_error == 0.125);
  CHECK(back[0].std_error == 0.0);
  CHECK(lyapunov_sweep_json(proto, back) == text);
  CHECK(parse_lyapunov_sweep_json(single).size() == 1);

  f.stops = {1, 1, 0};
  CHECK_THROWS_AS(parse_lyapunov_sweep_json(lyapunov_json(f)), std::invalid_argument);
}

}  // TEST_SUITE
