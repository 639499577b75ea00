#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mtn/types.hpp"

namespace mtn {

/// Neuron counts per subdomain for the globally uniform distribution
/// M_k ~ M * R_k / sum(R_j), rounded by largest remainder.
struct AllocationPlan {
  std::vector<Index> counts;
  Index total = 0;
  std::vector<double> radii;

  int num_subdomains() const { return static_cast<int>(counts.size()); }
};

AllocationPlan allocate_neurons(Index M, const std::vector<double>& radii);

/// Equal split of M over K subdomains (ablation baseline), largest remainder.
AllocationPlan allocate_equal(Index M, const std::vector<double>& radii);

/// Golden-section search trace. `brackets` holds [a,b] before iteration 0 and
/// after each iteration; `evaluations` holds one entry per objective call with
/// the bracket that was current when the probe was issued.
struct SearchTrace {
  struct Eval {
    double lo, hi, gamma, eta;
  };
  std::vector<Eval> evaluations;
  std::vector<std::pair<double, double>> brackets;
  double final_gamma = 0.0;
  double final_eta = 0.0;
};

struct GoldenSectionError : NumericalError {
  GoldenSectionError(const std::string& what, SearchTrace trace)
      : NumericalError(what), trace(std::move(trace)) {}
  SearchTrace trace;
};

/// Derivative-free line search: two interior probes at b - w(b-a) and
/// a + w(b-a) with w = (sqrt(5)-1)/2, `iterations` refinement steps, final
/// pick is the probe with the smaller residual (ties keep the left probe).
/// The objective is evaluated exactly iterations + 2 times.
std::pair<double, SearchTrace> golden_section(const std::function<double(double)>& eta, double a,
                                              double b, int iterations);

/// Empirical constant from a tuned small network: C = gamma_opt * R / M0^(1/d).
double fit_constant(double gamma_opt, Index M0, double R, int d);

/// Shape prediction gamma = C * M^(1/d) / R.
double predict_shape(double C, Index M, double R, int d);

enum class ShapeStrategy { Optimized, EmpiricalFormula };

struct ShapePlan {
  std::vector<double> gammas;
  ShapeStrategy strategy = ShapeStrategy::Optimized;
  double C = std::numeric_limits<double>::quiet_NaN();  // set under EmpiricalFormula
  int anchor_index = 0;
  double anchor_gamma = 0.0;
};

/// Bridge all subdomain shapes through one anchor:
/// gamma_k = gamma_anchor * (R_a / R_k) * (M_k / M_a)^(1/d).
ShapePlan link_shapes(double gamma_anchor, int anchor_index, const AllocationPlan& plan, int d);

/// Golden-section over the linked univariate residual, expanded to all
/// subdomains via link_shapes.
std::pair<ShapePlan, SearchTrace> optimize_multinet_shape(
    const std::function<double(double)>& eta_linked, double a, double b, int iterations,
    const AllocationPlan& plan, int d, int anchor_index = 0);

}  // namespace mtn
