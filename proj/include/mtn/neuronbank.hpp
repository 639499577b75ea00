#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtn/geometry.hpp"
#include "mtn/types.hpp"

namespace mtn {

/// Activation record: one call yields sigma(s), sigma'(s), sigma''(s).
/// Kept as plain function pointers so alternatives can be swapped in without
/// touching assembly.
struct Activation {
  const char* name;
  void (*eval)(double s, double& v, double& dv, double& d2v);
};

const Activation& tanh_activation();

/// Pre-determined hidden-layer parameters of one subdomain network: unit
/// normals a_m (columns) and offsets r_m in [0, R], uniform with respect to
/// the covering ball.
struct NeuronBank {
  Matrix directions;  // d x M, unit columns
  Vector offsets;     // M
  BallCover ball;
  std::uint64_t seed = 0;
  int stream = 0;

  Index size() const { return offsets.size(); }
  int dim() const { return ball.dim(); }
};

/// Directions are normalized d-dimensional Gaussians (Box-Muller on the
/// counter stream), offsets i.i.d. uniform on [0, R]. Stream selects an
/// independent substream, one per subdomain index, so multi-subdomain runs
/// reproduce regardless of generation order. Banks are nested: the first M0
/// neurons of a size-M bank equal the size-M0 bank.
NeuronBank generate_bank(const BallCover& ball, Index M, std::uint64_t seed, int stream = 0);

/// Fraction of neurons whose partition hyperplane passes within tau of x.
double density(const NeuronBank& bank, const Vector& x, double tau);

/// Materialized basis values and derivatives at a set of points. Column 0 is
/// the constant basis (zero derivatives). Hessian slot (i, j) lives at
/// hessians[i * d + j].
struct BasisEvaluation {
  Matrix values;                  // N x (M+1)
  std::vector<Matrix> gradients;  // d matrices, N x (M+1)
  std::vector<Matrix> hessians;   // d*d matrices, N x (M+1); order-2 only
  int dim = 0;
  int order = 0;
};

BasisEvaluation basis_eval(const NeuronBank& bank, double gamma, const Matrix& points, int order,
                           const Activation& act = tanh_activation());

/// Binary sidecar (seed + parameters) and a CSV dump for debugging.
void write_bank(const NeuronBank& bank, const std::string& path);
NeuronBank read_bank(const std::string& path);
void write_bank_csv(const NeuronBank& bank, std::ostream& os);

}  // namespace mtn
