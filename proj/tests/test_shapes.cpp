#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtn/shapes.hpp"

using namespace mtn;

namespace {
const double kOmega = (std::sqrt(5.0) - 1.0) / 2.0;
}

TEST_CASE("allocation follows the radius proportion") {
  const AllocationPlan a = allocate_neurons(60000, {0.5, 1.0});
  CHECK(a.counts == std::vector<Index>{20000, 40000});

  const AllocationPlan b = allocate_neurons(1200, {1.0, 1.5});
  CHECK(b.counts == std::vector<Index>{480, 720});
}

TEST_CASE("largest-remainder rounding with index tie-break") {
  // quotas 10/3: floors (3,3,3), one seat left, remainders tie -> index 0.
  const AllocationPlan a = allocate_neurons(10, {1.0, 1.0, 1.0});
  CHECK(a.counts == std::vector<Index>{4, 3, 3});
}

TEST_CASE("allocation invariants") {
  const std::vector<double> radii{0.35, 0.75, 1.0, 1.6};
  for (Index M : {7, 100, 401, 999, 12345}) {
    const AllocationPlan plan = allocate_neurons(M, radii);
    Index sum = 0;
    double rsum = 0;
    for (double r : radii) rsum += r;
    for (std::size_t k = 0; k < radii.size(); ++k) {
      sum += plan.counts[k];
      const double quota = double(M) * radii[k] / rsum;
      CHECK(std::abs(double(plan.counts[k]) - quota) <= 1.0);
    }
    CHECK(sum == M);
  }
  CHECK_THROWS_AS(allocate_neurons(2, {1.0, 1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(allocate_neurons(10, {1.0, -1.0}), ConfigError);
}

TEST_CASE("equal allocation splits evenly regardless of radii") {
  const AllocationPlan plan = allocate_equal(1200, {1.0, 1.5});
  CHECK(plan.counts == std::vector<Index>{600, 600});
}

TEST_CASE("golden section on a parabola") {
  int calls = 0;
  auto eta = [&](double g) {
    ++calls;
    return (g - 2.0) * (g - 2.0);
  };
  const auto [gopt, trace] = golden_section(eta, 0.0, 5.0, 7);
  CHECK(std::abs(gopt - 2.0) <= 5.0 * std::pow(kOmega, 7));
  CHECK(calls == 9);  // Itr + 2
  CHECK(trace.evaluations.size() == 9);
  REQUIRE(trace.brackets.size() == 8);
  for (std::size_t i = 0; i < trace.brackets.size(); ++i) {
    const double len = trace.brackets[i].second - trace.brackets[i].first;
    CHECK(std::abs(len - 5.0 * std::pow(kOmega, double(i))) < 1e-12);
  }
  // the true minimizer stays inside the final bracket
  CHECK(trace.brackets.back().first <= 2.0);
  CHECK(trace.brackets.back().second >= 2.0);
}

TEST_CASE("golden section tie rule on a constant objective") {
  // All residuals equal: every comparison takes the <= branch, so the bracket
  // walks left and the final pick is the left probe. Hand-traced:
  // b_i = 5 w^i and gamma1_i = b_i (1 - w).
  const auto [gopt, trace] = golden_section([](double) { return 3.0; }, 0.0, 5.0, 7);
  const double expected = 5.0 * std::pow(kOmega, 7) * (1.0 - kOmega);
  CHECK(gopt == doctest::Approx(expected).epsilon(1e-12));
  CHECK(trace.brackets.back().first == 0.0);
}

TEST_CASE("golden section with a left-endpoint minimum") {
  const auto [gopt, trace] = golden_section([](double g) { return std::abs(g - 0.0); }, 0.0,
                                            5.0, 9);
  CHECK(trace.brackets.back().first == 0.0);  // bracket adjoins a
  CHECK(gopt <= trace.brackets.back().second);
  CHECK(gopt >= 0.0);
}

TEST_CASE("golden section aborts on a non-finite residual") {
  auto eta = [](double g) { return g > 2.0 ? std::nan("") : 1.0; };
  CHECK_THROWS_AS(golden_section(eta, 0.0, 5.0, 5), GoldenSectionError);
  try {
    golden_section(eta, 0.0, 5.0, 5);
  } catch (const GoldenSectionError& e) {
    CHECK(!e.trace.evaluations.empty());  // diagnostic trace attached
  }
}

TEST_CASE("fit_constant reproduces the reported constant") {
  // gamma_opt ~ 0.7993 at M0 = 200, R = 1.5 in 2D gives C ~ 8.4779e-2.
  const double C = fit_constant(0.7993, 200, 1.5, 2);
  CHECK(C == doctest::Approx(8.4779e-2).epsilon(1e-4));

  // fit followed by predict at the same size is the identity
  CHECK(predict_shape(C, 200, 1.5, 2) == doctest::Approx(0.7993).epsilon(1e-12));

  CHECK(fit_constant(0.33, 1, 1.0, 1) == doctest::Approx(0.33));
}

TEST_CASE("predict_shape evaluates the formula") {
  CHECK(predict_shape(8.4779e-2, 1000, 1.5, 2) == doctest::Approx(1.7874).epsilon(1e-4));
  // doubling M in 2D scales gamma by sqrt(2)
  const double g1 = predict_shape(0.07, 500, 1.0, 2);
  const double g2 = predict_shape(0.07, 1000, 1.0, 2);
  CHECK(g2 / g1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(predict_shape(4.4180e-2, 2000, 0.75, 3) == doctest::Approx(0.7421).epsilon(1e-4));
}

TEST_CASE("link_shapes bridges subdomains through the anchor") {
  {
    AllocationPlan plan;
    plan.counts = {300, 300};
    plan.radii = {1.0, 2.0};
    const ShapePlan sp = link_shapes(1.3, 0, plan, 2);
    CHECK(sp.gammas[1] == doctest::Approx(1.3 / 2.0));
  }
  {
    // globally uniform counts with radii (1, 4) in 2D: gamma2 = gamma1 / 2
    AllocationPlan plan;
    plan.counts = {200, 800};
    plan.radii = {1.0, 4.0};
    const ShapePlan sp = link_shapes(0.9, 0, plan, 2);
    CHECK(sp.gammas[1] == doctest::Approx(0.9 / 2.0));
  }
  {
    AllocationPlan plan;
    plan.counts = {77};
    plan.radii = {1.3};
    const ShapePlan sp = link_shapes(2.2, 0, plan, 3);
    CHECK(sp.gammas == std::vector<double>{2.2});
  }
}

TEST_CASE("empirical-formula plans share the constant exactly") {
  const double C = 7.3037e-2;
  AllocationPlan plan;
  plan.counts = {160, 240, 500};
  plan.radii = {1.0, 1.5, 2.25};
  for (int d : {1, 2, 3}) {
    std::vector<double> gammas;
    for (std::size_t k = 0; k < plan.counts.size(); ++k)
      gammas.push_back(predict_shape(C, plan.counts[k], plan.radii[k], d));
    for (std::size_t k = 0; k < gammas.size(); ++k)
      CHECK(gammas[k] * plan.radii[k] / std::pow(double(plan.counts[k]), 1.0 / d) ==
            doctest::Approx(C).epsilon(1e-15));
  }
}

TEST_CASE("optimize_multinet_shape expands the linked optimum") {
  AllocationPlan plan;
  plan.counts = {100, 400};
  plan.radii = {1.0, 2.0};
  auto eta = [](double g) { return (g - 1.5) * (g - 1.5) + 0.25; };
  const auto [sp, trace] = optimize_multinet_shape(eta, 0.0, 5.0, 12, plan, 2);
  CHECK(std::abs(sp.anchor_gamma - 1.5) < 0.02);
  CHECK(sp.gammas[0] == sp.anchor_gamma);
  CHECK(sp.gammas[1] ==
        doctest::Approx(sp.anchor_gamma * (1.0 / 2.0) * std::sqrt(4.0)).epsilon(1e-12));

  // constant linked residual degenerates to the tie rule
  const auto [sp2, trace2] =
      optimize_multinet_shape([](double) { return 1.0; }, 0.0, 5.0, 7, plan, 2);
  const double expected = 5.0 * std::pow(kOmega, 7) * (1.0 - kOmega);
  CHECK(sp2.anchor_gamma == doctest::Approx(expected).epsilon(1e-12));
}
