#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtn/assembly.hpp"
#include "mtn/benchmarks.hpp"
#include "mtn/shapes.hpp"
#include "mtn/types.hpp"

namespace mtn {

struct StrategyConfig {
  enum class Kind { Optimize, FormulaC, FormulaM0 };
  Kind kind = Kind::FormulaM0;
  double C = 0.0;    // FormulaC: use this empirical constant directly
  Index M0 = 0;      // FormulaM0: preprocessing size (0 = problem default)
  double search_lo = 0.0;
  double search_hi = 5.0;
  int iterations = 7;
};

struct AllocationConfig {
  enum class Kind { Global, Equal, Explicit };
  Kind kind = Kind::Global;
  std::vector<Index> counts;  // Explicit
};

struct SamplingOverrides {
  std::optional<double> interior_spacing;
  std::optional<std::vector<std::array<Index, 2>>> boundary_counts;
  std::optional<std::vector<std::array<Index, 2>>> interface_counts;
  std::optional<Index> test_count;  // default: 2^d x training count
  std::optional<std::uint64_t> test_seed;
};

struct OutputConfig {
  std::string report;       // ErrorReport JSON path
  std::string csv;          // single CSV row path
  std::string dump_system;  // binary (F, T) dump path
};

struct RunConfig {
  int schema = 1;
  std::string problem;
  std::vector<double> contrast;
  Index M = 0;
  std::uint64_t seed = 0;
  StrategyConfig strategy;
  WeightMode weight_mode = WeightMode::Augmented;
  AllocationConfig allocation;
  SamplingOverrides sampling;
  std::optional<std::vector<BallCover>> covers;  // override problem defaults
  double rank_tol = -1.0;
  bool pressure_gauge = false;
  OutputConfig output;
  std::map<std::string, double> check;  // metric name -> max allowed
};

/// Schema-validated parse; unknown keys are rejected.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

struct StageTimes {
  std::vector<std::pair<std::string, double>> stages;
  double total = 0.0;

  double sum() const;
};

struct ErrorReport {
  // configuration echo
  std::string problem;
  std::vector<std::string> field_names;
  Index M = 0;
  std::vector<double> contrast;
  std::uint64_t seed = 0;
  std::string strategy;
  std::string weight_mode;
  std::string allocation;
  std::vector<Index> counts;
  std::vector<double> gammas;
  std::vector<double> weights;
  double C = std::numeric_limits<double>::quiet_NaN();
  // sampling and system shape
  std::vector<Index> interior_counts;
  Index boundary_count = 0;
  std::vector<Index> interface_counts;
  Index rows = 0, cols = 0, rank = 0;
  Index test_count = 0;
  // errors
  ErrorMetrics metrics;
  // runtime split
  StageTimes times;
};

nlohmann::json report_json(const ErrorReport& report, bool include_timings = true);
std::string report_csv_header(const std::vector<std::string>& field_names);
std::string report_csv_row(const ErrorReport& report, const std::string& seed_policy);

/// Algorithm-2 pipeline: covers -> allocation -> banks -> shapes -> sampling
/// -> weighted assembly -> least-squares solve -> test metrics. Errors are
/// re-thrown with a [stage] tag.
ErrorReport run_solve(const RunConfig& config);

/// Look up a metric by report column name (rl2_u, rlinf_u, rl2_all, rl2_grad, ...).
double report_metric(const ErrorReport& report, const std::string& name);

struct SweepConfig {
  RunConfig base;
  std::vector<Index> M_values;
  std::vector<std::vector<double>> contrasts;  // empty = base contrast only
  int repetitions = 10;
  int trim = 2;  // total extrema dropped per metric (max and min for 2)
  int workers = 0;  // 0 = auto
};

SweepConfig parse_sweep_config(const nlohmann::json& j);
SweepConfig load_sweep_config(const std::string& path);

/// Runs repetitions per (M, contrast) cell with seeds base+r, trims extrema
/// per metric, averages the rest; returns the CSV table.
std::string run_sweep(const SweepConfig& config);

struct TuneResult {
  double C = 0.0;
  double gamma_opt = 0.0;
  double eta_opt = 0.0;
  Index M0 = 0;
  SearchTrace trace;
};

/// Preprocessing only: golden-section at M0, then C = gamma_opt R / M0^(1/d).
TuneResult run_tune(const RunConfig& config);
nlohmann::json tune_json(const TuneResult& result);

struct DensityConfig {
  Vector center;
  double radius = 1.0;
  Index M = 10000;
  double tau = 0.1;
  std::uint64_t seed = 0;
  Index grid = 21;  // probe grid nodes per axis over the ball's bounding box
};

/// Density values on a probe grid, as CSV (x[,y[,z]],density).
std::string run_density(const DensityConfig& config);

/// Trimmed mean: drops trim/2 smallest and trim - trim/2 largest values.
double trimmed_mean(std::vector<double> values, int trim);

/// Command-line entry point (exit codes: 0 ok, 2 config, 3 numerical,
/// 4 check-threshold failure).
int run_cli(int argc, char** argv);

}  // namespace mtn
