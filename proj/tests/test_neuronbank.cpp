#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "mtn/neuronbank.hpp"
#include "mtn/rng.hpp"

using namespace mtn;

namespace {

BallCover unit_ball(int d) {
  BallCover b;
  b.center = Vector::Zero(d);
  b.radius = 1.0;
  return b;
}

}  // namespace

TEST_CASE("bank generation: unit directions, offsets in [0, R], determinism") {
  BallCover ball = unit_ball(3);
  ball.radius = 2.5;
  const NeuronBank bank = generate_bank(ball, 500, 11, 2);
  CHECK(bank.size() == 500);
  for (Index m = 0; m < bank.size(); ++m) {
    CHECK(std::abs(bank.directions.col(m).norm() - 1.0) < 1e-12);
    CHECK(bank.offsets[m] >= 0.0);
    CHECK(bank.offsets[m] <= ball.radius);
  }
  const NeuronBank again = generate_bank(ball, 500, 11, 2);
  CHECK(bank.directions == again.directions);
  CHECK(bank.offsets == again.offsets);

  const NeuronBank other_stream = generate_bank(ball, 500, 11, 3);
  CHECK(bank.offsets != other_stream.offsets);
}

TEST_CASE("bank with one neuron") {
  const NeuronBank bank = generate_bank(unit_ball(2), 1, 0);
  CHECK(bank.size() == 1);
  CHECK(std::abs(bank.directions.col(0).norm() - 1.0) < 1e-12);
}

TEST_CASE("banks are nested: a smaller bank is a prefix of a larger one") {
  const NeuronBank small = generate_bank(unit_ball(2), 100, 5, 1);
  const NeuronBank big = generate_bank(unit_ball(2), 400, 5, 1);
  CHECK(big.directions.leftCols(100) == small.directions);
  CHECK(big.offsets.head(100) == small.offsets);
}

TEST_CASE("density at the ball center approximates tau / R") {
  // 30000 neurons, tau = 0.1: binomial five-sigma band around 0.1.
  const NeuronBank bank = generate_bank(unit_ball(2), 30000, 7);
  const double D = density(bank, Vector::Zero(2), 0.1);
  CHECK(std::abs(D - 0.1) < 0.01);

  BallCover scaled = unit_ball(2);
  scaled.radius = 2.0;
  const NeuronBank bank2 = generate_bank(scaled, 30000, 7);
  const double D2 = density(bank2, Vector::Zero(2), 0.1);
  CHECK(std::abs(D2 - 0.05) < 0.01);
}

TEST_CASE("density with tau -> 0 vanishes") {
  const NeuronBank bank = generate_bank(unit_ball(2), 2000, 3);
  Vector x(2);
  x << 0.31, -0.4;
  CHECK(density(bank, x, 0.0) == 0.0);
}

TEST_CASE("expected density equals tau / R over seeds, within four standard errors") {
  const double tau = 0.1;
  const int seeds = 20, probes = 50;
  std::vector<double> seed_means;
  for (int s = 0; s < seeds; ++s) {
    const NeuronBank bank = generate_bank(unit_ball(2), 10000, 100 + s);
    const rng::Stream ps = rng::Stream::root(999).sub(s);
    double mean = 0.0;
    for (int p = 0; p < probes; ++p) {
      // random probe with ||x|| <= R - tau
      const double ang = 2 * std::numbers::pi * ps.uniform(2 * p);
      const double rad = (1.0 - tau) * std::sqrt(ps.uniform(2 * p + 1));
      Vector x(2);
      x << rad * std::cos(ang), rad * std::sin(ang);
      mean += density(bank, x, tau);
    }
    seed_means.push_back(mean / probes);
  }
  double mean = 0, var = 0;
  for (double v : seed_means) mean += v;
  mean /= seeds;
  for (double v : seed_means) var += (v - mean) * (v - mean);
  var /= (seeds - 1);
  const double se = std::sqrt(var / seeds);
  CHECK(std::abs(mean - tau) <= 4 * se);
}

TEST_CASE("density is translation-equivariant for representable shifts") {
  // Dyadic shift and probes keep every arithmetic step exact, so the two
  // banks see bitwise-identical hyperplane distances.
  BallCover home = unit_ball(2);
  BallCover moved = unit_ball(2);
  moved.center << 0.5, -1.25;
  const NeuronBank a = generate_bank(home, 5000, 17);
  const NeuronBank b = generate_bank(moved, 5000, 17);
  for (double px : {0.25, -0.375, 0.5}) {
    Vector x(2), xs(2);
    x << px, 0.125;
    xs = x + moved.center;
    CHECK(density(a, x, 0.1) == density(b, xs, 0.1));
  }
}

TEST_CASE("basis at the hyperplane through the center") {
  // Single neuron a = e1, r = 0 evaluated at the center: tanh(0) = 0,
  // first derivative gamma, second derivative 0.
  NeuronBank bank;
  bank.ball = unit_ball(2);
  bank.directions = Matrix::Zero(2, 1);
  bank.directions(0, 0) = 1.0;
  bank.offsets = Vector::Zero(1);
  const Matrix pts = Matrix::Zero(2, 1);
  const BasisEvaluation eval = basis_eval(bank, 1.0, pts, 2);
  CHECK(eval.values(0, 0) == 1.0);  // constant column
  CHECK(eval.values(0, 1) == 0.0);
  CHECK(eval.gradients[0](0, 1) == doctest::Approx(1.0));
  CHECK(eval.gradients[1](0, 1) == 0.0);
  CHECK(eval.hessians[0](0, 1) == 0.0);
  CHECK(eval.gradients[0](0, 0) == 0.0);  // constant column has no derivatives
  CHECK(eval.hessians[3](0, 0) == 0.0);
}

TEST_CASE("first derivatives match central finite differences") {
  const NeuronBank bank = generate_bank(unit_ball(2), 40, 23);
  const double gamma = 1.7, h = 1e-5;
  const rng::Stream ps = rng::Stream::root(5).sub(0);
  for (int p = 0; p < 100; ++p) {
    Vector x(2);
    x << 2 * ps.uniform(2 * p) - 1, 2 * ps.uniform(2 * p + 1) - 1;
    const Matrix pt = x;
    const BasisEvaluation at = basis_eval(bank, gamma, pt, 1);
    for (int i = 0; i < 2; ++i) {
      Matrix pa = x, pb = x;
      pa(i, 0) -= h;
      pb(i, 0) += h;
      const BasisEvaluation fa = basis_eval(bank, gamma, pa, 0);
      const BasisEvaluation fb = basis_eval(bank, gamma, pb, 0);
      for (Index m = 1; m <= bank.size(); ++m) {
        const double fd = (fb.values(0, m) - fa.values(0, m)) / (2 * h);
        const double an = at.gradients[i](0, m);
        CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("laplacian identity: sum of second derivatives is -2 g^2 phi (1 - phi^2)") {
  const NeuronBank bank = generate_bank(unit_ball(3), 25, 31);
  const double gamma = 2.3;
  Matrix pts(3, 4);
  pts << 0.1, -0.4, 0.2, 0.9, 0.0, 0.3, -0.8, 0.1, 0.5, -0.2, 0.6, -0.3;
  const BasisEvaluation eval = basis_eval(bank, gamma, pts, 2);
  for (Index p = 0; p < pts.cols(); ++p)
    for (Index m = 1; m <= bank.size(); ++m) {
      double lap = 0;
      for (int i = 0; i < 3; ++i) lap += eval.hessians[i * 3 + i](p, m);
      const double phi = eval.values(p, m);
      CHECK(lap == doctest::Approx(-2 * gamma * gamma * phi * (1 - phi * phi)).epsilon(1e-10));
    }
}

TEST_CASE("hessians are symmetric") {
  const NeuronBank bank = generate_bank(unit_ball(3), 10, 41);
  Matrix pts(3, 2);
  pts << 0.2, -0.1, 0.4, 0.3, -0.5, 0.8;
  const BasisEvaluation eval = basis_eval(bank, 0.9, pts, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(eval.hessians[i * 3 + j] == eval.hessians[j * 3 + i]);
}

TEST_CASE("binary sidecar round-trips") {
  const NeuronBank bank = generate_bank(unit_ball(2), 64, 9, 4);
  const std::string path = "/tmp/mtn_bank_test.bin";
  write_bank(bank, path);
  const NeuronBank back = read_bank(path);
  CHECK(back.directions == bank.directions);
  CHECK(back.offsets == bank.offsets);
  CHECK(back.seed == bank.seed);
  CHECK(back.stream == bank.stream);
  CHECK(back.ball.center == bank.ball.center);
  CHECK(back.ball.radius == bank.ball.radius);
  std::remove(path.c_str());

  std::ostringstream os;
  write_bank_csv(bank, os);
  CHECK(os.str().rfind("a0,a1,r\n", 0) == 0);
}
