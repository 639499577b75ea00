#include "mtn/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mtn {

namespace {

AllocationPlan round_quotas(Index M, const std::vector<double>& radii,
                            const std::vector<double>& weights) {
  const int K = static_cast<int>(weights.size());
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);

  AllocationPlan plan;
  plan.total = M;
  plan.radii = radii;
  plan.counts.resize(K);

  std::vector<double> remainder(K);
  Index assigned = 0;
  for (int k = 0; k < K; ++k) {
    const double quota = double(M) * weights[k] / wsum;
    plan.counts[k] = static_cast<Index>(std::floor(quota));
    remainder[k] = quota - std::floor(quota);
    assigned += plan.counts[k];
  }
  // Largest remainder; ties broken by lower index.
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (Index s = 0; s < M - assigned; ++s) ++plan.counts[order[s % K]];

  // Every subdomain keeps at least one neuron.
  for (int k = 0; k < K; ++k) {
    while (plan.counts[k] < 1) {
      const int donor =
          static_cast<int>(std::max_element(plan.counts.begin(), plan.counts.end()) -
                           plan.counts.begin());
      if (plan.counts[donor] <= 1) throw ConfigError("allocate_neurons: infeasible allocation");
      --plan.counts[donor];
      ++plan.counts[k];
    }
  }
  return plan;
}

}  // namespace

AllocationPlan allocate_neurons(Index M, const std::vector<double>& radii) {
  const int K = static_cast<int>(radii.size());
  if (K < 1) throw ConfigError("allocate_neurons: no subdomains");
  if (M < K) {
    std::ostringstream os;
    os << "allocate_neurons: infeasible allocation, M=" << M << " < K=" << K;
    throw ConfigError(os.str());
  }
  for (double r : radii)
    if (r <= 0) throw ConfigError("allocate_neurons: radii must be positive");
  return round_quotas(M, radii, radii);
}

AllocationPlan allocate_equal(Index M, const std::vector<double>& radii) {
  const int K = static_cast<int>(radii.size());
  if (M < K) throw ConfigError("allocate_equal: infeasible allocation");
  return round_quotas(M, radii, std::vector<double>(radii.size(), 1.0));
}

std::pair<double, SearchTrace> golden_section(const std::function<double(double)>& eta, double a,
                                              double b, int iterations) {
  if (!(b > a) || a < 0) throw ConfigError("golden_section: need b > a >= 0");
  if (iterations < 1) throw ConfigError("golden_section: iterations must be >= 1");
  const double w = (std::sqrt(5.0) - 1.0) / 2.0;

  SearchTrace trace;
  auto probe = [&](double gamma) {
    const double value = eta(gamma);
    trace.evaluations.push_back({a, b, gamma, value});
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "golden_section: non-finite residual " << value << " at gamma=" << gamma;
      throw GoldenSectionError(os.str(), trace);
    }
    return value;
  };

  double g1 = b - w * (b - a);
  double g2 = a + w * (b - a);
  double r1 = probe(g1);
  double r2 = probe(g2);
  trace.brackets.emplace_back(a, b);

  for (int i = 0; i < iterations; ++i) {
    if (r1 <= r2) {
      b = g2;
      g2 = g1;
      r2 = r1;
      g1 = b - w * (b - a);
      r1 = probe(g1);
    } else {
      a = g1;
      g1 = g2;
      r1 = r2;
      g2 = a + w * (b - a);
      r2 = probe(g2);
    }
    trace.brackets.emplace_back(a, b);
  }

  trace.final_gamma = (r1 <= r2) ? g1 : g2;
  trace.final_eta = std::min(r1, r2);
  return {trace.final_gamma, trace};
}

double fit_constant(double gamma_opt, Index M0, double R, int d) {
  if (gamma_opt <= 0 || M0 < 1 || R <= 0 || d < 1)
    throw ConfigError("fit_constant: inputs must be positive");
  return gamma_opt * R / std::pow(double(M0), 1.0 / d);
}

double predict_shape(double C, Index M, double R, int d) {
  if (C <= 0 || M < 1 || R <= 0 || d < 1)
    throw ConfigError("predict_shape: inputs must be positive");
  return C * std::pow(double(M), 1.0 / d) / R;
}

ShapePlan link_shapes(double gamma_anchor, int anchor_index, const AllocationPlan& plan, int d) {
  const int K = plan.num_subdomains();
  if (anchor_index < 0 || anchor_index >= K)
    throw ConfigError("link_shapes: anchor index out of range");

  ShapePlan out;
  out.anchor_index = anchor_index;
  out.anchor_gamma = gamma_anchor;
  out.gammas.resize(K);
  const double Ra = plan.radii[anchor_index];
  const double Ma = double(plan.counts[anchor_index]);
  for (int k = 0; k < K; ++k)
    out.gammas[k] =
        gamma_anchor * (Ra / plan.radii[k]) * std::pow(double(plan.counts[k]) / Ma, 1.0 / d);
  return out;
}

std::pair<ShapePlan, SearchTrace> optimize_multinet_shape(
    const std::function<double(double)>& eta_linked, double a, double b, int iterations,
    const AllocationPlan& plan, int d, int anchor_index) {
  auto [gamma_opt, trace] = golden_section(eta_linked, a, b, iterations);
  ShapePlan out = link_shapes(gamma_opt, anchor_index, plan, d);
  out.strategy = ShapeStrategy::Optimized;
  return {out, trace};
}

}  // namespace mtn
