#include "mtn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mtn/rng.hpp"

namespace mtn {

using nlohmann::json;

namespace {

// ---- config parsing -------------------------------------------------------

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("config: " + ctx + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + ctx);
  }
}

WeightMode parse_weight_mode(const std::string& s) {
  if (s == "ones") return WeightMode::Ones;
  if (s == "matrix") return WeightMode::MatrixOnly;
  if (s == "augmented") return WeightMode::Augmented;
  throw ConfigError("config: weight_mode must be ones | matrix | augmented, got '" + s + "'");
}

const char* weight_mode_name(WeightMode m) {
  switch (m) {
    case WeightMode::Ones: return "ones";
    case WeightMode::MatrixOnly: return "matrix";
    default: return "augmented";
  }
}

std::vector<std::array<Index, 2>> parse_counts_list(const json& j, const std::string& ctx) {
  std::vector<std::array<Index, 2>> out;
  for (const auto& e : j) {
    if (e.is_number_integer())
      out.push_back({e.get<Index>(), 1});
    else if (e.is_array() && e.size() == 2)
      out.push_back({e[0].get<Index>(), e[1].get<Index>()});
    else
      throw ConfigError("config: " + ctx + " entries must be n or [n1, n2]");
  }
  return out;
}

StrategyConfig parse_strategy(const json& j) {
  require_keys(j, {"kind", "C", "M0", "interval", "iterations"}, "strategy");
  StrategyConfig s;
  const std::string kind = j.value("kind", "formula");
  if (kind == "optimize") {
    s.kind = StrategyConfig::Kind::Optimize;
  } else if (kind == "formula") {
    if (j.contains("C")) {
      s.kind = StrategyConfig::Kind::FormulaC;
      s.C = j.at("C").get<double>();
      if (s.C <= 0) throw ConfigError("config: strategy.C must be positive");
    } else {
      s.kind = StrategyConfig::Kind::FormulaM0;
    }
  } else {
    throw ConfigError("config: strategy.kind must be optimize | formula");
  }
  s.M0 = j.value("M0", Index{0});
  if (j.contains("interval")) {
    if (!j["interval"].is_array() || j["interval"].size() != 2)
      throw ConfigError("config: strategy.interval must be [a, b]");
    s.search_lo = j["interval"][0].get<double>();
    s.search_hi = j["interval"][1].get<double>();
  }
  s.iterations = j.value("iterations", 7);
  return s;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  require_keys(j,
               {"schema", "problem", "contrast", "M", "seed", "strategy", "weight_mode",
                "allocation", "sampling", "covers", "rank_tol", "pressure_gauge", "output",
                "check"},
               "run config");
  RunConfig c;
  c.schema = j.value("schema", 1);
  if (c.schema != 1) throw ConfigError("config: unsupported schema version");
  if (!j.contains("problem")) throw ConfigError("config: 'problem' is required");
  c.problem = j.at("problem").get<std::string>();
  if (j.contains("contrast")) c.contrast = j.at("contrast").get<std::vector<double>>();
  if (!j.contains("M")) throw ConfigError("config: 'M' is required");
  c.M = j.at("M").get<Index>();
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy"));
  if (j.contains("weight_mode")) c.weight_mode = parse_weight_mode(j.at("weight_mode"));

  if (j.contains("allocation")) {
    const json& a = j.at("allocation");
    if (a.is_string()) {
      const std::string s = a.get<std::string>();
      if (s == "global")
        c.allocation.kind = AllocationConfig::Kind::Global;
      else if (s == "equal")
        c.allocation.kind = AllocationConfig::Kind::Equal;
      else
        throw ConfigError("config: allocation must be global | equal | [counts]");
    } else if (a.is_array()) {
      c.allocation.kind = AllocationConfig::Kind::Explicit;
      c.allocation.counts = a.get<std::vector<Index>>();
    } else {
      throw ConfigError("config: allocation must be global | equal | [counts]");
    }
  }

  if (j.contains("sampling")) {
    const json& s = j.at("sampling");
    require_keys(s,
                 {"interior_spacing", "boundary_counts", "interface_counts", "test_count",
                  "test_seed"},
                 "sampling");
    if (s.contains("interior_spacing"))
      c.sampling.interior_spacing = s.at("interior_spacing").get<double>();
    if (s.contains("boundary_counts"))
      c.sampling.boundary_counts = parse_counts_list(s.at("boundary_counts"), "boundary_counts");
    if (s.contains("interface_counts"))
      c.sampling.interface_counts =
          parse_counts_list(s.at("interface_counts"), "interface_counts");
    if (s.contains("test_count")) c.sampling.test_count = s.at("test_count").get<Index>();
    if (s.contains("test_seed")) c.sampling.test_seed = s.at("test_seed").get<std::uint64_t>();
  }

  if (j.contains("covers")) {
    std::vector<BallCover> covers;
    for (const auto& e : j.at("covers")) {
      require_keys(e, {"center", "radius"}, "covers entry");
      BallCover b;
      const auto center = e.at("center").get<std::vector<double>>();
      b.center = Eigen::Map<const Vector>(center.data(), static_cast<Index>(center.size()));
      b.radius = e.at("radius").get<double>();
      if (b.radius <= 0) throw ConfigError("config: cover radius must be positive");
      covers.push_back(std::move(b));
    }
    c.covers = std::move(covers);
  }

  c.rank_tol = j.value("rank_tol", -1.0);
  c.pressure_gauge = j.value("pressure_gauge", false);
  if (j.contains("output")) {
    const json& o = j.at("output");
    require_keys(o, {"report", "csv", "dump_system"}, "output");
    c.output.report = o.value("report", "");
    c.output.csv = o.value("csv", "");
    c.output.dump_system = o.value("dump_system", "");
  }
  if (j.contains("check")) {
    for (auto it = j.at("check").begin(); it != j.at("check").end(); ++it)
      c.check[it.key()] = it.value().get<double>();
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

double StageTimes::sum() const {
  double s = 0;
  for (const auto& [name, t] : stages) s += t;
  return s;
}

namespace {

// ---- stage helper ----------------------------------------------------------

class StageClock {
 public:
  explicit StageClock(StageTimes& times) : times_(times) {}

  template <typename F>
  auto run(const char* name, F&& f) -> decltype(f()) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        lap(name, t0);
      } else {
        auto result = f();
        lap(name, t0);
        return result;
      }
    } catch (const ConfigError& e) {
      throw ConfigError(tag(name, e.what()));
    } catch (const GeometryError& e) {
      throw GeometryError(tag(name, e.what()));
    } catch (const NumericalError& e) {
      throw NumericalError(tag(name, e.what()));
    } catch (const Error& e) {
      throw Error(tag(name, e.what()));
    }
  }

 private:
  static std::string tag(const char* name, const char* what) {
    return "[" + std::string(name) + "] " + what;
  }
  void lap(const char* name, std::chrono::steady_clock::time_point t0) {
    times_.stages.emplace_back(name,
                               std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count());
  }
  StageTimes& times_;
};

// ---- prepared context ------------------------------------------------------

struct PreparedRun {
  BenchmarkProblem problem;
  std::vector<BallCover> covers;
  std::vector<PointCloud> interior;
  PointCloud boundary;
  std::vector<PointCloud> interfaces;
  bool pressure_gauge = false;
  double rank_tol = -1.0;

  Index training_count() const {
    Index n = boundary.size();
    for (const auto& c : interior) n += c.size();
    for (const auto& c : interfaces) n += c.size();
    return n;
  }

  std::vector<double> radii() const {
    std::vector<double> r;
    for (const auto& b : covers) r.push_back(b.radius);
    return r;
  }

  std::vector<EquationBlock> build_blocks(const MultiNetBasis& basis,
                                          const ColumnMap& map) const;
  EquationBlock gauge_block(const MultiNetBasis& basis, const ColumnMap& map) const;

  /// Posterior error indicator: assemble the weighted system for this basis,
  /// solve, return the achieved weighted squared residual.
  double posterior(const MultiNetBasis& basis, const ColumnMap& map, WeightMode mode) const;
};

std::vector<EquationBlock> PreparedRun::build_blocks(const MultiNetBasis& basis,
                                                     const ColumnMap& map) const {
  std::vector<EquationBlock> blocks;
  const int K = problem.num_regions();
  const int n_int_eq = static_cast<int>(problem.interior_ops.size());

  for (int k = 0; k < K; ++k) {
    std::vector<DataFn> data;
    for (int e = 0; e < n_int_eq; ++e) data.push_back(problem.interior_data(e, k));
    blocks.push_back(
        build_block(problem.interior_ops, basis, interior[static_cast<std::size_t>(k)], data,
                    map, problem.partition));
  }
  {
    std::vector<DataFn> data;
    for (int e = 0; e < static_cast<int>(problem.boundary_ops.size()); ++e)
      data.push_back(problem.boundary_data(e));
    blocks.push_back(
        build_block(problem.boundary_ops, basis, boundary, data, map, problem.partition));
  }
  for (std::size_t g = 0; g < interfaces.size(); ++g) {
    std::vector<DataFn> value_data, flux_data;
    for (int e = 0; e < static_cast<int>(problem.jump_value_ops.size()); ++e)
      value_data.push_back(problem.jump_value_data(e, static_cast<int>(g)));
    for (int e = 0; e < static_cast<int>(problem.jump_flux_ops.size()); ++e)
      flux_data.push_back(problem.jump_flux_data(e, static_cast<int>(g)));
    blocks.push_back(build_block(problem.jump_value_ops, basis, interfaces[g], value_data, map,
                                 problem.partition));
    blocks.back().tag.kind = BlockKind::JumpValue;
    blocks.push_back(build_block(problem.jump_flux_ops, basis, interfaces[g], flux_data, map,
                                 problem.partition));
    blocks.back().tag.kind = BlockKind::JumpFlux;
  }
  if (pressure_gauge) blocks.push_back(gauge_block(basis, map));
  return blocks;
}

EquationBlock PreparedRun::gauge_block(const MultiNetBasis& basis, const ColumnMap& map) const {
  // Single row: mean of the pressure field over all interior points equals 0.
  const auto it = std::find(problem.field_names.begin(), problem.field_names.end(), "p");
  if (it == problem.field_names.end())
    throw ConfigError("pressure_gauge requested for a problem without a 'p' field");
  const int pf = static_cast<int>(it - problem.field_names.begin());

  Index total = 0;
  for (const auto& c : interior) total += c.size();

  EquationBlock block;
  block.tag = {BlockKind::Gauge, -1, {-1, -1}};
  block.target = Vector::Zero(1);
  for (int k = 0; k < problem.num_regions(); ++k) {
    const auto& cloud = interior[static_cast<std::size_t>(k)];
    if (cloud.size() == 0) continue;
    const BasisEvaluation eval =
        basis_eval(basis.banks[static_cast<std::size_t>(k)],
                   basis.gammas[static_cast<std::size_t>(k)], cloud.points, 0,
                   *basis.activation);
    EquationBlock::Piece piece;
    piece.col0 = map.offset(k, pf);
    piece.m = eval.values.colwise().sum() / double(total);
    block.pieces.push_back(std::move(piece));
  }
  return block;
}

Vector flat_coefficients(const SolutionModel& model, const ColumnMap& map) {
  Vector alpha(map.total());
  for (int k = 0; k < model.basis.num_subdomains(); ++k)
    for (int f = 0; f < model.fields; ++f)
      alpha.segment(map.offset(k, f), map.width(k)) = model.coefficients(k, f);
  return alpha;
}

ColumnMap grouped_map(const BenchmarkProblem& problem,
                      const std::vector<NeuronBank>& group_banks) {
  std::vector<Index> sizes;
  for (const auto& b : group_banks) sizes.push_back(b.size());
  return ColumnMap::grouped(sizes, problem.region_group, problem.fields());
}

/// Per-region basis from per-group banks and shapes.
MultiNetBasis expand_basis(const std::vector<NeuronBank>& group_banks,
                           const std::vector<double>& group_gammas,
                           const std::vector<int>& region_group) {
  MultiNetBasis basis;
  for (int g : region_group) {
    basis.banks.push_back(group_banks[static_cast<std::size_t>(g)]);
    basis.gammas.push_back(group_gammas[static_cast<std::size_t>(g)]);
  }
  return basis;
}

double PreparedRun::posterior(const MultiNetBasis& basis, const ColumnMap& map,
                              WeightMode mode) const {
  std::vector<EquationBlock> blocks = build_blocks(basis, map);
  const std::vector<double> weights = compute_weights(blocks, mode);
  AssembledSystem sys = assemble(std::move(blocks), weights, map, basis, problem.partition);
  SolutionModel model = solve(std::move(sys), SolveOptions{rank_tol}, nullptr);
  const Vector alpha = flat_coefficients(model, map);
  // The matrix was consumed by the solver; stream the residual off rebuilt blocks.
  const std::vector<EquationBlock> again = build_blocks(basis, map);
  return residual_norm2(again, weights, alpha);
}

MultiNetBasis linked_basis(const std::vector<NeuronBank>& group_banks,
                           const AllocationPlan& plan, double gamma_anchor, int d,
                           const std::vector<int>& region_group) {
  return expand_basis(group_banks, link_shapes(gamma_anchor, 0, plan, d).gammas, region_group);
}

AllocationPlan make_plan(const AllocationConfig& alloc, Index M, const std::vector<double>& radii) {
  switch (alloc.kind) {
    case AllocationConfig::Kind::Global:
      return allocate_neurons(M, radii);
    case AllocationConfig::Kind::Equal:
      return allocate_equal(M, radii);
    case AllocationConfig::Kind::Explicit: {
      if (alloc.counts.size() != radii.size())
        throw ConfigError("allocation: explicit counts must list every subdomain");
      AllocationPlan plan;
      plan.counts = alloc.counts;
      plan.radii = radii;
      plan.total = std::accumulate(alloc.counts.begin(), alloc.counts.end(), Index{0});
      for (Index c : plan.counts)
        if (c < 1) throw ConfigError("allocation: explicit counts must be >= 1");
      return plan;
    }
  }
  throw ConfigError("allocation: bad kind");
}

const char* strategy_name(const StrategyConfig& s) {
  switch (s.kind) {
    case StrategyConfig::Kind::Optimize: return "optimize";
    case StrategyConfig::Kind::FormulaC: return "formula";
    default: return "formula_m0";
  }
}

const char* allocation_name(const AllocationConfig& a) {
  switch (a.kind) {
    case AllocationConfig::Kind::Global: return "global";
    case AllocationConfig::Kind::Equal: return "equal";
    default: return "explicit";
  }
}

std::uint64_t derive_test_seed(std::uint64_t seed) { return rng::mix64(seed ^ 0x7E57C0DEull); }

}  // namespace

ErrorReport run_solve(const RunConfig& config) {
  ErrorReport report;
  StageClock clock(report.times);
  const auto wall0 = std::chrono::steady_clock::now();

  PreparedRun run;
  run.pressure_gauge = config.pressure_gauge;
  run.rank_tol = config.rank_tol;

  clock.run("problem", [&] { run.problem = make_problem(config.problem, config.contrast); });
  const int d = run.problem.dim;
  const int G = run.problem.num_groups();
  const std::vector<int>& region_group = run.problem.region_group;

  clock.run("covers", [&] {
    run.covers = config.covers ? *config.covers : run.problem.covers;
    if (static_cast<int>(run.covers.size()) != G)
      throw ConfigError("covers: expected one ball per network group");
    for (const auto& b : run.covers)
      if (b.dim() != d) throw ConfigError("covers: dimension mismatch");
  });

  AllocationPlan plan;
  clock.run("allocation",
            [&] { plan = make_plan(config.allocation, config.M, run.radii()); });

  std::vector<NeuronBank> banks;
  clock.run("banks", [&] {
    for (int g = 0; g < G; ++g)
      banks.push_back(generate_bank(run.covers[static_cast<std::size_t>(g)],
                                    plan.counts[static_cast<std::size_t>(g)], config.seed, g));
  });

  clock.run("sampling", [&] {
    const double spacing =
        config.sampling.interior_spacing.value_or(run.problem.sampling.interior_spacing);
    run.interior = sample_interior(run.problem.partition, spacing);
    const auto bcounts =
        config.sampling.boundary_counts.value_or(run.problem.sampling.boundary_counts);
    run.boundary = sample_boundary(run.problem.partition, bcounts);
    const auto icounts =
        config.sampling.interface_counts.value_or(run.problem.sampling.interface_counts);
    if (icounts.size() != run.problem.partition.interfaces.size())
      throw ConfigError("sampling: one interface count entry per interface required");
    for (std::size_t g = 0; g < icounts.size(); ++g)
      run.interfaces.push_back(
          sample_interface(run.problem.partition.interfaces[g], icounts[g]));
  });

  const ColumnMap map = grouped_map(run.problem, banks);

  ShapePlan shapes;
  SearchTrace trace;
  clock.run("shapes", [&] {
    switch (config.strategy.kind) {
      case StrategyConfig::Kind::Optimize: {
        auto eta = [&](double gamma_anchor) {
          return run.posterior(linked_basis(banks, plan, gamma_anchor, d, region_group), map,
                               config.weight_mode);
        };
        std::tie(shapes, trace) =
            optimize_multinet_shape(eta, config.strategy.search_lo, config.strategy.search_hi,
                                    config.strategy.iterations, plan, d);
        report.C = fit_constant(shapes.anchor_gamma, plan.counts[0], run.covers[0].radius, d);
        break;
      }
      case StrategyConfig::Kind::FormulaC: {
        shapes.strategy = ShapeStrategy::EmpiricalFormula;
        shapes.C = config.strategy.C;
        for (int g = 0; g < G; ++g)
          shapes.gammas.push_back(predict_shape(config.strategy.C,
                                                plan.counts[static_cast<std::size_t>(g)],
                                                run.covers[static_cast<std::size_t>(g)].radius,
                                                d));
        report.C = config.strategy.C;
        break;
      }
      case StrategyConfig::Kind::FormulaM0: {
        const Index M0 = config.strategy.M0 > 0 ? config.strategy.M0
                                                : run.problem.sampling.preprocessing_M0;
        const AllocationPlan plan0 = make_plan(config.allocation, M0, run.radii());
        std::vector<NeuronBank> banks0;
        for (int g = 0; g < G; ++g)
          banks0.push_back(generate_bank(run.covers[static_cast<std::size_t>(g)],
                                         plan0.counts[static_cast<std::size_t>(g)], config.seed,
                                         g));
        const ColumnMap map0 = grouped_map(run.problem, banks0);
        auto eta = [&](double gamma_anchor) {
          return run.posterior(linked_basis(banks0, plan0, gamma_anchor, d, region_group), map0,
                               config.weight_mode);
        };
        auto [gopt, tr] =
            golden_section(eta, config.strategy.search_lo, config.strategy.search_hi,
                           config.strategy.iterations);
        trace = std::move(tr);
        const double C = fit_constant(gopt, plan0.counts[0], run.covers[0].radius, d);
        shapes.strategy = ShapeStrategy::EmpiricalFormula;
        shapes.C = C;
        for (int g = 0; g < G; ++g)
          shapes.gammas.push_back(predict_shape(C, plan.counts[static_cast<std::size_t>(g)],
                                                run.covers[static_cast<std::size_t>(g)].radius,
                                                d));
        report.C = C;
        break;
      }
    }
  });

  const MultiNetBasis basis = expand_basis(banks, shapes.gammas, region_group);

  AssembledSystem sys;
  clock.run("assembly", [&] {
    std::vector<EquationBlock> blocks = run.build_blocks(basis, map);
    const std::vector<double> weights = compute_weights(blocks, config.weight_mode);
    sys = assemble(std::move(blocks), weights, map, basis, run.problem.partition);
    if (!config.output.dump_system.empty()) dump_system(sys, config.output.dump_system);
  });
  report.weights = sys.weights;
  report.rows = sys.rows();
  report.cols = sys.cols();

  SolveInfo info;
  SolutionModel model;
  clock.run("solve",
            [&] { model = solve(std::move(sys), SolveOptions{config.rank_tol}, &info); });
  report.rank = info.rank;

  clock.run("metrics", [&] {
    const Index n_test =
        config.sampling.test_count.value_or((Index{1} << d) * run.training_count());
    const std::uint64_t test_seed =
        config.sampling.test_seed.value_or(derive_test_seed(config.seed));
    const LabeledPoints test =
        latin_hypercube_test_points(run.problem.partition, n_test, test_seed);
    report.metrics = error_metrics(model, run.problem, test);
    report.test_count = n_test;
  });

  report.problem = run.problem.id;
  report.field_names = run.problem.field_names;
  report.M = plan.total;
  report.contrast = run.problem.contrast;
  report.seed = config.seed;
  report.strategy = strategy_name(config.strategy);
  report.weight_mode = weight_mode_name(config.weight_mode);
  report.allocation = allocation_name(config.allocation);
  report.counts = plan.counts;
  report.gammas = basis.gammas;
  for (const auto& c : run.interior) report.interior_counts.push_back(c.size());
  report.boundary_count = run.boundary.size();
  for (const auto& c : run.interfaces) report.interface_counts.push_back(c.size());
  report.times.total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

  if (!config.output.report.empty()) {
    std::ofstream os(config.output.report);
    if (!os) throw Error("cannot open report path " + config.output.report);
    os << report_json(report).dump(2) << "\n";
  }
  if (!config.output.csv.empty()) {
    std::ofstream os(config.output.csv);
    if (!os) throw Error("cannot open csv path " + config.output.csv);
    os << report_csv_header(report.field_names) << "\n"
       << report_csv_row(report, "seed=" + std::to_string(config.seed)) << "\n";
  }
  return report;
}

namespace {

double stage_seconds(const StageTimes& t, const std::string& name) {
  for (const auto& [n, s] : t.stages)
    if (n == name) return s;
  return 0.0;
}

json json_double(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

std::string format_contrast(const std::vector<double>& c) {
  if (c.empty()) return "-";
  std::ostringstream os;
  os.precision(12);
  for (std::size_t i = 0; i < c.size(); ++i) os << (i ? ":" : "") << c[i];
  return os.str();
}

}  // namespace

json report_json(const ErrorReport& r, bool include_timings) {
  json j;
  j["schema"] = 1;
  j["problem"] = r.problem;
  j["fields"] = r.field_names;
  j["M"] = r.M;
  j["contrast"] = r.contrast;
  j["seed"] = r.seed;
  j["strategy"] = r.strategy;
  j["C"] = json_double(r.C);
  j["weight_mode"] = r.weight_mode;
  j["allocation"] = r.allocation;
  j["counts"] = r.counts;
  j["gammas"] = r.gammas;
  j["block_weights"] = r.weights;
  j["sampling"] = {{"interior_counts", r.interior_counts},
                   {"boundary_count", r.boundary_count},
                   {"interface_counts", r.interface_counts},
                   {"test_count", r.test_count}};
  j["system"] = {{"rows", r.rows}, {"cols", r.cols}, {"rank", r.rank}};
  json rl2 = json::object(), rlinf = json::object();
  for (std::size_t f = 0; f < r.field_names.size(); ++f) {
    rl2[r.field_names[f]] = r.metrics.rl2[f];
    rlinf[r.field_names[f]] = r.metrics.rlinf[f];
  }
  j["metrics"] = {{"rl2", rl2},
                  {"rlinf", rlinf},
                  {"rl2_all", r.metrics.rl2_all},
                  {"rlinf_all", r.metrics.rlinf_all},
                  {"rl2_grad", r.metrics.rl2_grad},
                  {"rlinf_grad", r.metrics.rlinf_grad}};
  if (include_timings) {
    json t = json::object();
    for (const auto& [name, s] : r.times.stages) t[name] = s;
    t["total"] = r.times.total;
    j["timings"] = t;
  }
  return j;
}

std::string report_csv_header(const std::vector<std::string>& field_names) {
  std::ostringstream os;
  os << "problem,M,contrast,seed_policy,strategy,weight_mode";
  for (const auto& f : field_names) os << ",rl2_" << f;
  for (const auto& f : field_names) os << ",rlinf_" << f;
  os << ",rl2_grad,assembly_s,solve_s";
  return os.str();
}

std::string report_csv_row(const ErrorReport& r, const std::string& seed_policy) {
  std::ostringstream os;
  os.precision(12);
  os << r.problem << "," << r.M << "," << format_contrast(r.contrast) << "," << seed_policy
     << "," << r.strategy << "," << r.weight_mode;
  for (double v : r.metrics.rl2) os << "," << v;
  for (double v : r.metrics.rlinf) os << "," << v;
  os << "," << r.metrics.rl2_grad << "," << stage_seconds(r.times, "assembly") << ","
     << stage_seconds(r.times, "solve");
  return os.str();
}

double report_metric(const ErrorReport& r, const std::string& name) {
  auto field_index = [&](const std::string& f) {
    for (std::size_t i = 0; i < r.field_names.size(); ++i)
      if (r.field_names[i] == f) return static_cast<int>(i);
    throw ConfigError("unknown field '" + f + "' in metric name");
  };
  if (name == "rl2_all") return r.metrics.rl2_all;
  if (name == "rlinf_all") return r.metrics.rlinf_all;
  if (name == "rl2_grad") return r.metrics.rl2_grad;
  if (name == "rlinf_grad") return r.metrics.rlinf_grad;
  if (name.rfind("rl2_", 0) == 0)
    return r.metrics.rl2[static_cast<std::size_t>(field_index(name.substr(4)))];
  if (name.rfind("rlinf_", 0) == 0)
    return r.metrics.rlinf[static_cast<std::size_t>(field_index(name.substr(6)))];
  throw ConfigError("unknown metric '" + name + "'");
}

SweepConfig parse_sweep_config(const json& j) {
  require_keys(j, {"schema", "run", "M_values", "contrasts", "repetitions", "trim", "workers"},
               "sweep config");
  SweepConfig c;
  if (!j.contains("run")) throw ConfigError("sweep config: 'run' is required");
  c.base = parse_run_config(j.at("run"));
  if (j.contains("M_values")) c.M_values = j.at("M_values").get<std::vector<Index>>();
  if (c.M_values.empty()) c.M_values = {c.base.M};
  if (j.contains("contrasts"))
    c.contrasts = j.at("contrasts").get<std::vector<std::vector<double>>>();
  c.repetitions = j.value("repetitions", 10);
  c.trim = j.value("trim", 2);
  c.workers = j.value("workers", 0);
  if (c.repetitions < 1) throw ConfigError("sweep config: repetitions must be >= 1");
  if (c.trim < 0) throw ConfigError("sweep config: trim must be >= 0");
  if (c.trim > 0 && c.repetitions < 3)
    throw ConfigError("sweep config: trimming requires repetitions >= 3");
  if (c.repetitions - c.trim < 1)
    throw ConfigError("sweep config: trim leaves no runs to average");
  return c;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
  }
  return parse_sweep_config(j);
}

double trimmed_mean(std::vector<double> values, int trim) {
  if (values.empty()) throw ConfigError("trimmed_mean: empty input");
  if (trim >= static_cast<int>(values.size()))
    throw ConfigError("trimmed_mean: trim leaves nothing to average");
  std::sort(values.begin(), values.end());
  const int lo = trim / 2, hi = trim - lo;
  double s = 0.0;
  const int n = static_cast<int>(values.size());
  for (int i = lo; i < n - hi; ++i) s += values[i];
  return s / double(n - trim);
}

std::string run_sweep(const SweepConfig& config) {
  struct Cell {
    Index M;
    std::vector<double> contrast;
  };
  std::vector<Cell> cells;
  const std::vector<std::vector<double>> contrasts =
      config.contrasts.empty() ? std::vector<std::vector<double>>{config.base.contrast}
                               : config.contrasts;
  for (Index M : config.M_values)
    for (const auto& c : contrasts) cells.push_back({M, c});

  std::vector<std::string> rows(cells.size());
  std::vector<std::string> header_fields;
  std::mutex header_mutex;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      if (failure) return;
      try {
        RunConfig rc = config.base;
        rc.M = cells[i].M;
        rc.contrast = cells[i].contrast;
        rc.output = {};  // cells never write their own files

        std::vector<ErrorReport> reports;
        for (int r = 0; r < config.repetitions; ++r) {
          rc.seed = config.base.seed + static_cast<std::uint64_t>(r);
          reports.push_back(run_solve(rc));
        }
        const ErrorReport& first = reports.front();
        {
          std::lock_guard<std::mutex> lock(header_mutex);
          if (header_fields.empty()) header_fields = first.field_names;
        }
        auto trimmed = [&](auto&& get) {
          std::vector<double> v;
          for (const auto& rep : reports) v.push_back(get(rep));
          return trimmed_mean(std::move(v), config.trim);
        };

        std::ostringstream os;
        os.precision(12);
        os << first.problem << "," << cells[i].M << "," << format_contrast(first.contrast)
           << ","
           << "seed=" << config.base.seed << ";reps=" << config.repetitions
           << ";trim=" << config.trim << "," << first.strategy << "," << first.weight_mode;
        const int F = static_cast<int>(first.field_names.size());
        for (int f = 0; f < F; ++f)
          os << ","
             << trimmed([f](const ErrorReport& r) { return r.metrics.rl2[std::size_t(f)]; });
        for (int f = 0; f < F; ++f)
          os << ","
             << trimmed([f](const ErrorReport& r) { return r.metrics.rlinf[std::size_t(f)]; });
        os << "," << trimmed([](const ErrorReport& r) { return r.metrics.rl2_grad; });
        os << "," << trimmed([](const ErrorReport& r) { return stage_seconds(r.times, "assembly"); });
        os << "," << trimmed([](const ErrorReport& r) { return stage_seconds(r.times, "solve"); });
        rows[i] = os.str();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::min<std::size_t>(
                                         2, std::max<std::size_t>(1, cells.size())));
  workers = std::min<int>(workers, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream os;
  os << report_csv_header(header_fields) << "\n";
  for (const auto& row : rows) os << row << "\n";
  return os.str();
}

TuneResult run_tune(const RunConfig& config) {
  PreparedRun run;
  run.rank_tol = config.rank_tol;
  run.problem = make_problem(config.problem, config.contrast);
  const int d = run.problem.dim;
  const int G = run.problem.num_groups();
  run.covers = config.covers ? *config.covers : run.problem.covers;
  if (static_cast<int>(run.covers.size()) != G)
    throw ConfigError("covers: expected one ball per network group");

  const Index M0 =
      config.strategy.M0 > 0 ? config.strategy.M0 : run.problem.sampling.preprocessing_M0;
  const AllocationPlan plan0 = make_plan(config.allocation, M0, run.radii());

  std::vector<NeuronBank> banks0;
  for (int g = 0; g < G; ++g)
    banks0.push_back(generate_bank(run.covers[static_cast<std::size_t>(g)],
                                   plan0.counts[static_cast<std::size_t>(g)], config.seed, g));

  const double spacing =
      config.sampling.interior_spacing.value_or(run.problem.sampling.interior_spacing);
  run.interior = sample_interior(run.problem.partition, spacing);
  run.boundary = sample_boundary(
      run.problem.partition,
      config.sampling.boundary_counts.value_or(run.problem.sampling.boundary_counts));
  const auto icounts =
      config.sampling.interface_counts.value_or(run.problem.sampling.interface_counts);
  for (std::size_t g = 0; g < icounts.size(); ++g)
    run.interfaces.push_back(sample_interface(run.problem.partition.interfaces[g], icounts[g]));

  const ColumnMap map0 = grouped_map(run.problem, banks0);
  auto eta = [&](double gamma_anchor) {
    return run.posterior(
        linked_basis(banks0, plan0, gamma_anchor, d, run.problem.region_group), map0,
        config.weight_mode);
  };
  TuneResult result;
  auto [gopt, trace] = golden_section(eta, config.strategy.search_lo, config.strategy.search_hi,
                                      config.strategy.iterations);
  result.gamma_opt = gopt;
  result.eta_opt = trace.final_eta;
  result.trace = std::move(trace);
  result.M0 = M0;
  result.C = fit_constant(gopt, plan0.counts[0], run.covers[0].radius, d);
  return result;
}

json tune_json(const TuneResult& r) {
  json iters = json::array();
  for (const auto& e : r.trace.evaluations)
    iters.push_back({{"lo", e.lo}, {"hi", e.hi}, {"gamma", e.gamma}, {"eta", e.eta}});
  json brackets = json::array();
  for (const auto& [a, b] : r.trace.brackets) brackets.push_back({a, b});
  return {{"C", r.C},          {"gamma_opt", r.gamma_opt}, {"eta_opt", r.eta_opt},
          {"M0", r.M0},        {"evaluations", iters},     {"brackets", brackets},
          {"eta_calls", r.trace.evaluations.size()}};
}

std::string run_density(const DensityConfig& config) {
  if (config.tau < 0 || config.tau >= config.radius)
    throw ConfigError("density: need 0 <= tau < R");
  BallCover ball{config.center, config.radius};
  const NeuronBank bank = generate_bank(ball, config.M, config.seed, 0);
  const int d = ball.dim();

  std::ostringstream os;
  const char* axes[] = {"x", "y", "z"};
  for (int a = 0; a < d; ++a) os << axes[a] << ",";
  os << "density\n";
  os.precision(17);

  std::vector<Index> idx(static_cast<std::size_t>(d), 0);
  const Index n = config.grid;
  Vector x(d);
  for (;;) {
    for (int a = 0; a < d; ++a)
      x[a] = ball.center[a] - ball.radius +
             2.0 * ball.radius * double(idx[static_cast<std::size_t>(a)]) / double(n - 1);
    for (int a = 0; a < d; ++a) os << x[a] << ",";
    os << density(bank, x, config.tau) << "\n";
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[static_cast<std::size_t>(a)] < n) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
    if (a == d) break;
  }
  return os.str();
}

}  // namespace mtn
