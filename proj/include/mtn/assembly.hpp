#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mtn/geometry.hpp"
#include "mtn/neuronbank.hpp"
#include "mtn/types.hpp"

namespace mtn {

/// Derivative multi-index, up to order 2.
struct Deriv {
  int order = 0;
  int i = 0;
  int j = 0;

  static Deriv value() { return {0, 0, 0}; }
  static Deriv dx(int i) { return {1, i, 0}; }
  static Deriv dxx(int i, int j) { return {2, i, j}; }
};

/// Per-point coefficient of one operator term. Receives the point, the unit
/// interface normal (zero vector for non-interface rows) and the subdomain
/// the term is being evaluated on.
using CoefficientFn = std::function<double(const Vector& x, const Vector& n, int k)>;

struct Term {
  CoefficientFn coef;
  int field = 0;
  Deriv deriv;
};

/// One scalar equation row written as a finite sum of terms.
struct OperatorRowSpec {
  std::vector<Term> terms;

  int max_order() const {
    int o = 0;
    for (const auto& t : terms) o = std::max(o, t.deriv.order);
    return o;
  }
};

/// Right-hand data of one scalar equation; n is the interface normal where
/// applicable, zero otherwise.
using DataFn = std::function<double(const Vector& x, const Vector& n)>;

enum class WeightMode { Ones, MatrixOnly, Augmented };

enum class BlockKind { Interior, Boundary, JumpValue, JumpFlux, Gauge };

struct BlockTag {
  BlockKind kind = BlockKind::Interior;
  int region = -1;                        // for Interior
  std::pair<int, int> interface{-1, -1};  // for jump blocks
};

/// The trial space: one bank + shape parameter per subdomain.
struct MultiNetBasis {
  std::vector<NeuronBank> banks;
  std::vector<double> gammas;
  const Activation* activation = &tanh_activation();

  int num_subdomains() const { return static_cast<int>(banks.size()); }
};

/// Stacked-unknown column layout: group-major, field-minor; the block of
/// (group, f) has M_g + 1 columns (constant basis first). Normally each
/// subdomain is its own group; a shared single-network baseline maps several
/// subdomains onto one group so they bind the same coefficients.
struct ColumnMap {
  std::vector<Index> widths;      // M_g + 1 per column group
  std::vector<int> region_group;  // subdomain -> group
  int fields = 1;

  static ColumnMap from_basis(const MultiNetBasis& basis, int fields);
  static ColumnMap grouped(const std::vector<Index>& bank_sizes,
                           const std::vector<int>& region_group, int fields);
  Index width(int k) const {
    return widths[static_cast<std::size_t>(region_group[static_cast<std::size_t>(k)])];
  }
  Index offset(int k, int f) const;
  Index total() const;
};

/// Rows of one loss term over one point cloud. Entries are stored as dense
/// pieces over the column ranges the block actually touches; jump blocks have
/// a +piece on side i and a -piece on side j.
struct EquationBlock {
  struct Piece {
    Index col0 = 0;
    Matrix m;
  };
  std::vector<Piece> pieces;
  Vector target;
  BlockTag tag;

  Index rows() const { return target.size(); }
  double max_abs(bool include_target) const;
};

/// Builds the rows of a group of scalar equations (one per spec) over a
/// cloud. Interior clouds bind their region's columns; boundary points bind
/// the subdomain whose closure contains them; interface clouds produce
/// +side-i / -side-j entries using the cloud normals.
EquationBlock build_block(const std::vector<OperatorRowSpec>& specs, const MultiNetBasis& basis,
                          const PointCloud& cloud, const std::vector<DataFn>& data,
                          const ColumnMap& map, const DomainPartition& partition);

double compute_weight(const EquationBlock& block, WeightMode mode);
std::vector<double> compute_weights(const std::vector<EquationBlock>& blocks, WeightMode mode);

struct AssembledSystem {
  Matrix F;
  Vector T;
  std::vector<double> weights;
  std::vector<std::pair<Index, Index>> block_rows;  // [begin, end) per block
  std::vector<BlockTag> tags;
  ColumnMap map;
  MultiNetBasis basis;
  const DomainPartition* partition = nullptr;

  Index rows() const { return F.rows(); }
  Index cols() const { return F.cols(); }
};

/// Stacks weight-scaled blocks into one dense system. Consumes the blocks
/// (each is freed right after it is written) to bound peak memory.
AssembledSystem assemble(std::vector<EquationBlock>&& blocks, const std::vector<double>& weights,
                         const ColumnMap& map, const MultiNetBasis& basis,
                         const DomainPartition& partition);

struct SolveOptions {
  /// Relative singular-value cutoff; negative means eps * max(rows, cols).
  double rank_tol = -1.0;
};

struct SolveInfo {
  Index rank = 0;
  double sigma_max = 0.0;
  double seconds = 0.0;
};

/// Piecewise network model: output-layer coefficients per (subdomain, field).
struct SolutionModel {
  std::vector<std::vector<Vector>> coef;  // [k][f], length M_k + 1
  MultiNetBasis basis;
  DomainPartition partition;
  int fields = 1;

  const Vector& coefficients(int k, int f) const { return coef[k][f]; }
};

/// Minimum-norm least-squares solution via a rank-revealing SVD
/// factorization; singular values below rank_tol * sigma_max are truncated.
/// Consumes the system's matrix storage.
SolutionModel solve(AssembledSystem&& system, const SolveOptions& options = {},
                    SolveInfo* info = nullptr);

/// Raw driver used by solve; F is overwritten.
Vector lstsq_minimum_norm(Matrix& F, const Vector& T, double rank_tol, SolveInfo* info);

/// Weighted squared residual ||F alpha - T||^2 computed by streaming over the
/// blocks, so the assembled matrix need not be kept alive.
double residual_norm2(const std::vector<EquationBlock>& blocks, const std::vector<double>& weights,
                      const Vector& alpha);

/// Field values at points; points are classified against the partition unless
/// labels are supplied. Result is N x fields.
Matrix evaluate(const SolutionModel& model, const Matrix& points);
Matrix evaluate(const SolutionModel& model, const Matrix& points, const IntVector& labels);

/// Gradients per field: result[f] is N x d.
std::vector<Matrix> evaluate_gradient(const SolutionModel& model, const Matrix& points,
                                      const IntVector& labels);

/// Little-endian binary dump of (F, T) plus the block index, for external
/// solver cross-checks. Layout documented in the README.
void dump_system(const AssembledSystem& system, const std::string& path);

}  // namespace mtn
