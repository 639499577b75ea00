#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mtn/pipeline.hpp"

namespace mtn {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot open output path " + path);
  os << text;
}

int cmd_solve(const std::string& config_path, bool check) {
  const RunConfig config = load_run_config(config_path);
  const ErrorReport report = run_solve(config);

  std::cout << report.problem << " M=" << report.M << " strategy=" << report.strategy
            << " weights=" << report.weight_mode;
  for (std::size_t f = 0; f < report.field_names.size(); ++f)
    std::cout << " rl2_" << report.field_names[f] << "=" << report.metrics.rl2[f];
  std::cout << " rl2_grad=" << report.metrics.rl2_grad << " rows=" << report.rows
            << " cols=" << report.cols << " total_s=" << report.times.total << "\n";

  if (check) {
    bool ok = true;
    for (const auto& [name, limit] : config.check) {
      const double got = report_metric(report, name);
      const bool pass = got <= limit;
      ok = ok && pass;
      std::cout << (pass ? "  ok   " : "  FAIL ") << name << " = " << got
                << " (limit " << limit << ")\n";
    }
    if (!ok) return kExitCheck;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out) {
  const SweepConfig config = load_sweep_config(config_path);
  write_or_print(run_sweep(config), out);
  return kExitOk;
}

int cmd_tune(const std::string& config_path, const std::string& out) {
  const RunConfig config = load_run_config(config_path);
  const TuneResult result = run_tune(config);
  write_or_print(tune_json(result).dump(2) + "\n", out);
  std::cerr << "C=" << result.C << " gamma_opt=" << result.gamma_opt << " M0=" << result.M0
            << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-TransNet solver for linear elliptic interface problems"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  bool check = false;

  auto* solve = app.add_subcommand("solve", "run the full pipeline on one configuration");
  solve->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
  solve->add_flag("--check", check, "compare metrics against the config's check thresholds");

  auto* sweep = app.add_subcommand("sweep", "run a sweep and emit a CSV table");
  sweep->add_option("-c,--config", config_path, "sweep configuration (JSON)")->required();
  sweep->add_option("-o,--out", out_path, "CSV output path (default stdout)");

  auto* tune = app.add_subcommand("tune", "preprocessing: fit the empirical constant");
  tune->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
  tune->add_option("-o,--out", out_path, "trace output path (default stdout)");

  DensityConfig dc;
  std::vector<double> center{0.0, 0.0};
  auto* dens = app.add_subcommand("density", "neuron hyperplane density on a probe grid");
  dens->add_option("--center", center, "ball center coordinates")->required();
  dens->add_option("--radius", dc.radius, "ball radius")->required();
  dens->add_option("--m", dc.M, "number of neurons")->required();
  dens->add_option("--tau", dc.tau, "density neighborhood size")->required();
  dens->add_option("--seed", dc.seed, "generator seed");
  dens->add_option("--grid", dc.grid, "probe grid nodes per axis");
  dens->add_option("-o,--out", out_path, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (solve->parsed()) return cmd_solve(config_path, check);
    if (sweep->parsed()) return cmd_sweep(config_path, out_path);
    if (tune->parsed()) return cmd_tune(config_path, out_path);
    if (dens->parsed()) {
      dc.center = Eigen::Map<const Vector>(center.data(), static_cast<Index>(center.size()));
      write_or_print(run_density(dc), out_path);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace mtn
