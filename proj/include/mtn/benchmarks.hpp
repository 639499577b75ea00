#pragma once

#include <array>
#include <string>
#include <vector>

#include "mtn/assembly.hpp"
#include "mtn/geometry.hpp"
#include "mtn/types.hpp"

namespace mtn {

/// Piecewise closed-form solution: value, gradient and hessian of field f on
/// subdomain k. Hessians are needed to manufacture interior data.
struct ExactSolution {
  std::function<double(const Vector& x, int k, int f)> value;
  std::function<Vector(const Vector& x, int k, int f)> gradient;
  std::function<Matrix(const Vector& x, int k, int f)> hessian;
};

struct SamplingDefaults {
  double interior_spacing = 0.0;
  std::vector<std::array<Index, 2>> boundary_counts;   // per facet
  std::vector<std::array<Index, 2>> interface_counts;  // per interface
  Index preprocessing_M0 = 0;                          // default tuning size
};

/// One of the paper-style test problems: partition, operator rows, exact
/// solution and the sampling / cover defaults used by the experiments. All
/// data functions (f, g, h1, h2) are generated by applying the operators to
/// `exact`, so the exact solution is the single source of truth.
struct BenchmarkProblem {
  std::string id;
  int dim = 0;
  std::vector<std::string> field_names;
  DomainPartition partition;

  std::vector<OperatorRowSpec> interior_ops;  // one per scalar equation
  std::vector<OperatorRowSpec> boundary_ops;
  std::vector<OperatorRowSpec> jump_value_ops;
  std::vector<OperatorRowSpec> jump_flux_ops;

  ExactSolution exact;
  std::vector<double> contrast;
  std::vector<BallCover> covers;  // one per network group
  SamplingDefaults sampling;

  /// Subdomain -> network group. Normally the identity (one TransNet per
  /// subdomain); the single-network baseline maps every subdomain to group 0.
  std::vector<int> region_group;

  int fields() const { return static_cast<int>(field_names.size()); }
  int num_regions() const { return partition.num_regions(); }
  int num_groups() const {
    int g = 0;
    for (int v : region_group) g = std::max(g, v + 1);
    return g;
  }

  DataFn interior_data(int eq, int region) const;
  DataFn boundary_data(int eq) const;
  DataFn jump_value_data(int eq, int interface_index) const;
  DataFn jump_flux_data(int eq, int interface_index) const;
};

/// Known ids: interval1d, interval1d-single, poisson2d, circle2d, stokes2d,
/// multi2d, elasticity3d, shell3d. Empty contrast selects the problem's
/// default coefficients.
BenchmarkProblem make_problem(const std::string& id, std::vector<double> contrast = {});

std::vector<std::string> problem_ids();

/// Exact field values (N x fields) at labeled points.
Matrix exact_values(const BenchmarkProblem& problem, const Matrix& points,
                    const IntVector& labels);

/// Exact gradients per field (N x d).
std::vector<Matrix> exact_gradients(const BenchmarkProblem& problem, const Matrix& points,
                                    const IntVector& labels);

/// Applies one operator row to the exact solution at x (side k); used both to
/// manufacture data and as an independent check in tests.
double apply_to_exact(const OperatorRowSpec& spec, const ExactSolution& exact, const Vector& x,
                      const Vector& n, int k);

/// Discrete relative errors over a labeled test set.
struct ErrorMetrics {
  std::vector<double> rl2;    // per field
  std::vector<double> rlinf;  // per field
  double rl2_all = 0.0;       // fields stacked
  double rlinf_all = 0.0;
  double rl2_grad = 0.0;  // all fields and components stacked
  double rlinf_grad = 0.0;
};

ErrorMetrics error_metrics(const SolutionModel& model, const BenchmarkProblem& problem,
                           const LabeledPoints& test, bool gradients = true);

}  // namespace mtn
