#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mtn/pipeline.hpp"

using namespace mtn;
using nlohmann::json;

namespace {

json small_p3_config() {
  return json{{"problem", "circle2d"},
              {"contrast", {1.0, 10.0}},
              {"M", 60},
              {"seed", 9},
              {"strategy", {{"kind", "formula"}, {"C", 0.073}}},
              {"sampling",
               {{"interior_spacing", 0.1},
                {"boundary_counts", {11, 11, 11, 11}},
                {"interface_counts", {24}},
                {"test_count", 400}}}};
}

}  // namespace

TEST_CASE("config: unknown keys and bad enums are rejected") {
  json j = small_p3_config();
  j["extra_key"] = 1;
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  j = small_p3_config();
  j["weight_mode"] = "sometimes";
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  j = small_p3_config();
  j["strategy"]["kind"] = "guess";
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  j = small_p3_config();
  j["sampling"]["typo"] = 3;
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  j = small_p3_config();
  j.erase("M");
  CHECK_THROWS_AS(parse_run_config(j), ConfigError);

  CHECK_NOTHROW(parse_run_config(small_p3_config()));
}

TEST_CASE("run_solve produces a sane report on a small problem") {
  const RunConfig config = parse_run_config(small_p3_config());
  const ErrorReport report = run_solve(config);
  CHECK(report.problem == "circle2d");
  CHECK(report.M == 60);
  CHECK(report.counts == std::vector<Index>{24, 36});
  CHECK(report.rows > report.cols);
  CHECK(report.cols == 62);
  CHECK(report.metrics.rl2[0] > 0.0);
  CHECK(report.metrics.rl2[0] < 0.1);
  CHECK(report.test_count == 400);
}

TEST_CASE("reports are byte-identical for the same config and seed") {
  const RunConfig config = parse_run_config(small_p3_config());
  const ErrorReport a = run_solve(config);
  const ErrorReport b = run_solve(config);
  CHECK(report_json(a, false).dump() == report_json(b, false).dump());

  RunConfig other = config;
  other.seed = 10;
  const ErrorReport c = run_solve(other);
  CHECK(report_json(a, false).dump() != report_json(c, false).dump());
}

TEST_CASE("infeasible allocation surfaces with the stage tag") {
  json j = small_p3_config();
  j["M"] = 1;
  const RunConfig config = parse_run_config(j);
  try {
    run_solve(config);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("[allocation]") != std::string::npos);
  }
}

TEST_CASE("stage timings cover the run") {
  const RunConfig config = parse_run_config(small_p3_config());
  const auto t0 = std::chrono::steady_clock::now();
  const ErrorReport report = run_solve(config);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(report.times.sum() <= report.times.total * 1.0001);
  CHECK(report.times.sum() >= report.times.total * 0.95);
  CHECK(report.times.total <= wall * 1.05 + 1e-3);
  bool has_assembly = false, has_solve = false;
  for (const auto& [name, s] : report.times.stages) {
    has_assembly |= name == std::string("assembly");
    has_solve |= name == std::string("solve");
  }
  CHECK(has_assembly);
  CHECK(has_solve);
}

TEST_CASE("csv row follows the documented stable columns") {
  const RunConfig config = parse_run_config(small_p3_config());
  const ErrorReport report = run_solve(config);
  CHECK(report_csv_header(report.field_names) ==
        "problem,M,contrast,seed_policy,strategy,weight_mode,rl2_u,rlinf_u,rl2_grad,"
        "assembly_s,solve_s");
  const std::string row = report_csv_row(report, "seed=9");
  CHECK(row.rfind("circle2d,60,1:10,seed=9,formula,augmented,", 0) == 0);
}

TEST_CASE("trimmed mean: paper protocol and edge cases") {
  std::vector<double> v{10, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(trimmed_mean(v, 2) == doctest::Approx(5.5));  // drop 1 and 10
  CHECK(trimmed_mean({4.0}, 0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(trimmed_mean({1.0, 2.0}, 2), ConfigError);
}

TEST_CASE("sweep config validation and row counts") {
  json sweep{{"run", small_p3_config()},
             {"M_values", {40, 60}},
             {"contrasts", {{1.0, 10.0}, {1.0, 100.0}}},
             {"repetitions", 3},
             {"trim", 2},
             {"workers", 2}};
  const SweepConfig config = parse_sweep_config(sweep);
  const std::string csv = run_sweep(config);
  std::istringstream is(csv);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 1 + 2 * 2);  // header + |M| x |contrasts| cells
  CHECK(csv.find("seed=9;reps=3;trim=2") != std::string::npos);

  json bad = sweep;
  bad["repetitions"] = 2;
  CHECK_THROWS_AS(parse_sweep_config(bad), ConfigError);

  // repetitions=1, trim=0 is the identity over one run
  json single = sweep;
  single["repetitions"] = 1;
  single["trim"] = 0;
  single["M_values"] = {40};
  single["contrasts"] = json::array();
  const std::string one = run_sweep(parse_sweep_config(single));
  const ErrorReport ref = run_solve([&] {
    RunConfig rc = parse_run_config(small_p3_config());
    rc.M = 40;
    return rc;
  }());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", ref.metrics.rl2[0]);
  CHECK(one.find(buf) != std::string::npos);
}

TEST_CASE("tune returns the constant and a geometric trace") {
  json j = small_p3_config();
  j["strategy"] = {{"kind", "optimize"}, {"M0", 40}, {"iterations", 7}};
  const RunConfig config = parse_run_config(j);
  const TuneResult result = run_tune(config);
  CHECK(result.M0 == 40);
  CHECK(result.C > 0.0);
  CHECK(result.trace.evaluations.size() == 9);
  const double w = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t i = 1; i < result.trace.brackets.size(); ++i) {
    const double a = result.trace.brackets[i - 1].second - result.trace.brackets[i - 1].first;
    const double b = result.trace.brackets[i].second - result.trace.brackets[i].first;
    CHECK(b / a == doctest::Approx(w).epsilon(1e-10));
  }
  const json out = tune_json(result);
  CHECK(out.at("eta_calls") == 9);
}

TEST_CASE("density command: tau zero gives zeros, scaling halves the level") {
  DensityConfig dc;
  dc.center = Vector::Zero(2);
  dc.radius = 1.0;
  dc.M = 5000;
  dc.tau = 0.0;
  dc.seed = 4;
  dc.grid = 5;
  const std::string zeros = run_density(dc);
  std::istringstream is(zeros);
  std::string line;
  std::getline(is, line);
  CHECK(line == "x,y,density");
  while (std::getline(is, line))
    CHECK(line.substr(line.rfind(',') + 1) == "0");

  dc.tau = 0.1;
  dc.M = 30000;
  dc.grid = 3;  // center of the 3x3 grid probes the origin
  const std::string csv = run_density(dc);
  std::istringstream is2(csv);
  std::getline(is2, line);
  double center_density = -1;
  while (std::getline(is2, line)) {
    if (line.rfind("0,0,", 0) == 0)
      center_density = std::stod(line.substr(line.rfind(',') + 1));
  }
  CHECK(std::abs(center_density - 0.1) < 0.01);
}

TEST_CASE("cli: exit codes for config errors and check mode") {
  const std::string good = "/tmp/mtn_cli_good.json";
  const std::string bad = "/tmp/mtn_cli_bad.json";
  {
    json j = small_p3_config();
    j["check"] = {{"rl2_u", 1e-30}};  // unreachable threshold
    std::ofstream(good) << j.dump();
    std::ofstream(bad) << "{ not json";
  }
  auto run = [](std::vector<std::string> args) {
    std::vector<char*> argv;
    args.insert(args.begin(), "mtn");
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(run({"solve", "-c", bad}) == 2);
  CHECK(run({"solve", "-c", "/tmp/does_not_exist.json"}) == 2);
  CHECK(run({"solve", "-c", good}) == 0);
  CHECK(run({"solve", "-c", good, "--check"}) == 4);
  std::remove(good.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("solve writes report and csv outputs") {
  RunConfig config = parse_run_config(small_p3_config());
  config.output.report = "/tmp/mtn_report_test.json";
  config.output.csv = "/tmp/mtn_row_test.csv";
  run_solve(config);
  std::ifstream rep(config.output.report);
  REQUIRE(rep.good());
  json j;
  rep >> j;
  CHECK(j.at("problem") == "circle2d");
  CHECK(j.contains("timings"));
  std::ifstream csv(config.output.csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("problem,M,contrast,", 0) == 0);
  std::remove(config.output.report.c_str());
  std::remove(config.output.csv.c_str());
}
