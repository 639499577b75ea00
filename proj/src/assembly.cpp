#include "mtn/assembly.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>

namespace mtn {

namespace {

constexpr Index kChunk = 2048;  // points per evaluation chunk

struct SideRows {
  // One piece per touched field, full chunk height.
  std::map<int, Matrix> per_field;
};

/// Operator rows of `spec` applied to subdomain k's basis at the chunk of
/// points X (d x n), normals N (d x n or empty), scaled by `sign`.
void accumulate_side(const OperatorRowSpec& spec, const MultiNetBasis& basis, int k,
                     const Matrix& X, const Matrix& N, double sign, SideRows& out) {
  const NeuronBank& bank = basis.banks[static_cast<std::size_t>(k)];
  const double gamma = basis.gammas[static_cast<std::size_t>(k)];
  const int d = bank.dim();
  const Index n = X.cols();
  const Index M = bank.size();
  const int order = spec.max_order();
  if (order > 2) throw ConfigError("build_block: derivatives above order 2 are not supported");

  Matrix S = ((X.colwise() - bank.ball.center).transpose() * bank.directions).rowwise() +
             bank.offsets.transpose();
  S *= gamma;

  Matrix V(n, M), D1, D2;
  if (order >= 1) D1.resize(n, M);
  if (order >= 2) D2.resize(n, M);
  const Activation& act = *basis.activation;
  for (Index m = 0; m < M; ++m)
    for (Index p = 0; p < n; ++p) {
      double v, dv, d2v;
      act.eval(S(p, m), v, dv, d2v);
      V(p, m) = v;
      if (order >= 1) D1(p, m) = dv;
      if (order >= 2) D2(p, m) = d2v;
    }

  Vector zero_normal = Vector::Zero(d);
  Vector coef(n);
  for (const Term& term : spec.terms) {
    for (Index p = 0; p < n; ++p) {
      const Vector x = X.col(p);
      coef[p] = sign * term.coef(x, N.size() ? Vector(N.col(p)) : zero_normal, k);
    }
    auto it = out.per_field.find(term.field);
    if (it == out.per_field.end())
      it = out.per_field.emplace(term.field, Matrix::Zero(n, M + 1)).first;
    Matrix& E = it->second;

    switch (term.deriv.order) {
      case 0:
        E.col(0) += coef;
        E.rightCols(M) += coef.asDiagonal() * V;
        break;
      case 1: {
        const auto scale = gamma * bank.directions.row(term.deriv.i).array();
        E.rightCols(M) += coef.asDiagonal() * (D1.array().rowwise() * scale).matrix();
        break;
      }
      case 2: {
        const auto scale = gamma * gamma *
                           (bank.directions.row(term.deriv.i).array() *
                            bank.directions.row(term.deriv.j).array());
        E.rightCols(M) += coef.asDiagonal() * (D2.array().rowwise() * scale).matrix();
        break;
      }
      default:
        throw ConfigError("build_block: bad derivative order");
    }
  }
}

}  // namespace

ColumnMap ColumnMap::from_basis(const MultiNetBasis& basis, int fields) {
  std::vector<Index> sizes;
  std::vector<int> identity;
  for (const auto& bank : basis.banks) {
    identity.push_back(static_cast<int>(sizes.size()));
    sizes.push_back(bank.size());
  }
  return grouped(sizes, identity, fields);
}

ColumnMap ColumnMap::grouped(const std::vector<Index>& bank_sizes,
                             const std::vector<int>& region_group, int fields) {
  ColumnMap map;
  map.fields = fields;
  map.region_group = region_group;
  for (Index m : bank_sizes) map.widths.push_back(m + 1);
  return map;
}

Index ColumnMap::offset(int k, int f) const {
  const int g = region_group[static_cast<std::size_t>(k)];
  Index off = 0;
  for (int q = 0; q < g; ++q) off += widths[static_cast<std::size_t>(q)] * fields;
  return off + f * widths[static_cast<std::size_t>(g)];
}

Index ColumnMap::total() const {
  Index t = 0;
  for (Index w : widths) t += w * fields;
  return t;
}

double EquationBlock::max_abs(bool include_target) const {
  double m = 0.0;
  for (const auto& piece : pieces)
    if (piece.m.size()) m = std::max(m, piece.m.cwiseAbs().maxCoeff());
  if (include_target && target.size()) m = std::max(m, target.cwiseAbs().maxCoeff());
  return m;
}

EquationBlock build_block(const std::vector<OperatorRowSpec>& specs, const MultiNetBasis& basis,
                          const PointCloud& cloud, const std::vector<DataFn>& data,
                          const ColumnMap& map, const DomainPartition& partition) {
  if (specs.size() != data.size())
    throw ConfigError("build_block: one data function required per equation spec");
  const Index n_pts = cloud.size();
  const int n_eq = static_cast<int>(specs.size());
  const int d = cloud.dim();

  EquationBlock block;
  block.target.resize(n_pts * n_eq);

  // Group points by the subdomain whose basis their rows bind.
  std::vector<std::vector<Index>> groups;
  std::vector<int> group_region;
  switch (cloud.role) {
    case Role::Interior: {
      groups.emplace_back(n_pts);
      std::iota(groups[0].begin(), groups[0].end(), Index{0});
      group_region.push_back(cloud.region);
      block.tag = {BlockKind::Interior, cloud.region, {-1, -1}};
      break;
    }
    case Role::Boundary: {
      std::map<int, std::vector<Index>> by_region;
      for (Index p = 0; p < n_pts; ++p)
        by_region[classify(partition, cloud.points.col(p))].push_back(p);
      for (auto& [k, idx] : by_region) {
        groups.push_back(std::move(idx));
        group_region.push_back(k);
      }
      block.tag = {BlockKind::Boundary, -1, {-1, -1}};
      break;
    }
    case Role::Interface: {
      groups.emplace_back(n_pts);
      std::iota(groups[0].begin(), groups[0].end(), Index{0});
      group_region.push_back(cloud.interface.first);
      const bool flux = std::any_of(specs.begin(), specs.end(),
                                    [](const auto& s) { return s.max_order() > 0; });
      block.tag = {flux ? BlockKind::JumpFlux : BlockKind::JumpValue, -1, cloud.interface};
      break;
    }
  }

  // Row layout: equation-major, then original point order within each group.
  std::map<std::pair<int, int>, Index> piece_index;  // (k, field) -> pieces slot
  auto piece_for = [&](int k, int f) -> Matrix& {
    auto key = std::make_pair(k, f);
    auto it = piece_index.find(key);
    if (it == piece_index.end()) {
      block.pieces.push_back({map.offset(k, f), Matrix::Zero(n_pts * n_eq, map.width(k))});
      it = piece_index.emplace(key, static_cast<Index>(block.pieces.size() - 1)).first;
    }
    return block.pieces[static_cast<std::size_t>(it->second)].m;
  };

  const bool is_jump = cloud.role == Role::Interface;
  const Vector zero_normal = Vector::Zero(d);

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& idx = groups[g];
    for (Index c0 = 0; c0 < static_cast<Index>(idx.size()); c0 += kChunk) {
      const Index nc = std::min(kChunk, static_cast<Index>(idx.size()) - c0);
      Matrix X(d, nc), N;
      if (is_jump) N.resize(d, nc);
      for (Index p = 0; p < nc; ++p) {
        X.col(p) = cloud.points.col(idx[static_cast<std::size_t>(c0 + p)]);
        if (is_jump) N.col(p) = cloud.normals.col(idx[static_cast<std::size_t>(c0 + p)]);
      }

      for (int e = 0; e < n_eq; ++e) {
        SideRows rows_i, rows_j;
        accumulate_side(specs[static_cast<std::size_t>(e)], basis, group_region[g], X, N, 1.0,
                        rows_i);
        if (is_jump)
          accumulate_side(specs[static_cast<std::size_t>(e)], basis, cloud.interface.second, X, N,
                          -1.0, rows_j);

        auto scatter = [&](int k, SideRows& rows) {
          for (auto& [f, E] : rows.per_field) {
            Matrix& piece = piece_for(k, f);
            for (Index p = 0; p < nc; ++p)
              piece.row(e * n_pts + idx[static_cast<std::size_t>(c0 + p)]) = E.row(p);
          }
        };
        scatter(group_region[g], rows_i);
        if (is_jump) scatter(cloud.interface.second, rows_j);

        for (Index p = 0; p < nc; ++p) {
          const Vector x = X.col(p);
          block.target[e * n_pts + idx[static_cast<std::size_t>(c0 + p)]] =
              data[static_cast<std::size_t>(e)](x, is_jump ? Vector(N.col(p)) : zero_normal);
        }
      }
    }
  }
  return block;
}

double compute_weight(const EquationBlock& block, WeightMode mode) {
  if (mode == WeightMode::Ones) return 1.0;
  const double m = block.max_abs(mode == WeightMode::Augmented);
  if (m == 0.0) throw NumericalError("compute_weight: all-zero block, weight undefined");
  return 1.0 / m;
}

std::vector<double> compute_weights(const std::vector<EquationBlock>& blocks, WeightMode mode) {
  if (blocks.empty()) throw ConfigError("compute_weights: no blocks");
  std::vector<double> w;
  w.reserve(blocks.size());
  for (const auto& b : blocks) w.push_back(compute_weight(b, mode));
  return w;
}

AssembledSystem assemble(std::vector<EquationBlock>&& blocks, const std::vector<double>& weights,
                         const ColumnMap& map, const MultiNetBasis& basis,
                         const DomainPartition& partition) {
  if (blocks.size() != weights.size())
    throw ConfigError("assemble: one weight required per block");
  const Index cols = map.total();
  Index rows = 0;
  for (const auto& b : blocks) {
    for (const auto& piece : b.pieces)
      if (piece.col0 + piece.m.cols() > cols)
        throw ConfigError("assemble: piece exceeds the column map");
    rows += b.rows();
  }

  AssembledSystem sys;
  sys.map = map;
  sys.basis = basis;
  sys.partition = &partition;
  sys.weights = weights;
  sys.F = Matrix::Zero(rows, cols);
  sys.T.resize(rows);

  Index at = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    EquationBlock& block = blocks[b];
    const Index n = block.rows();
    const double lambda = weights[b];
    // += so pieces mapped onto the same column group accumulate.
    for (auto& piece : block.pieces) {
      sys.F.block(at, piece.col0, n, piece.m.cols()) += lambda * piece.m;
      piece.m.resize(0, 0);
    }
    sys.T.segment(at, n) = lambda * block.target;
    sys.block_rows.emplace_back(at, at + n);
    sys.tags.push_back(block.tag);
    at += n;
  }
  blocks.clear();
  return sys;
}

SolutionModel solve(AssembledSystem&& system, const SolveOptions& options, SolveInfo* info) {
  if (system.rows() < 1) throw ConfigError("solve: empty system");
  if (!system.F.allFinite() || !system.T.allFinite())
    throw NumericalError("solve: non-finite entries in the assembled system");

  const double tol = options.rank_tol >= 0
                         ? options.rank_tol
                         : std::numeric_limits<double>::epsilon() *
                               double(std::max(system.rows(), system.cols()));

  const Vector alpha = lstsq_minimum_norm(system.F, system.T, tol, info);
  system.F.resize(0, 0);

  SolutionModel model;
  model.basis = std::move(system.basis);
  model.partition = *system.partition;
  model.fields = system.map.fields;
  const int K = model.basis.num_subdomains();
  model.coef.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    model.coef[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(model.fields));
    for (int f = 0; f < model.fields; ++f)
      model.coef[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] =
          alpha.segment(system.map.offset(k, f), system.map.width(k));
  }
  return model;
}

double residual_norm2(const std::vector<EquationBlock>& blocks, const std::vector<double>& weights,
                      const Vector& alpha) {
  double r2 = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    Vector r = -block.target;
    for (const auto& piece : block.pieces)
      r.noalias() += piece.m * alpha.segment(piece.col0, piece.m.cols());
    r2 += weights[b] * weights[b] * r.squaredNorm();
  }
  return r2;
}

namespace {

/// Basis values (and derivatives) of one subdomain contracted with
/// coefficients, chunked over points.
void eval_combination(const MultiNetBasis& basis, int k, const Matrix& X, const Vector& coef,
                      int order, Vector* value, Matrix* grad) {
  const NeuronBank& bank = basis.banks[static_cast<std::size_t>(k)];
  const double gamma = basis.gammas[static_cast<std::size_t>(k)];
  const int d = bank.dim();
  const Index n = X.cols();
  const Index M = bank.size();
  if (value) value->resize(n);
  if (grad) grad->setZero(n, d);

  for (Index c0 = 0; c0 < n; c0 += kChunk) {
    const Index nc = std::min(kChunk, n - c0);
    Matrix S = ((X.middleCols(c0, nc).colwise() - bank.ball.center).transpose() *
                bank.directions)
                   .rowwise() +
               bank.offsets.transpose();
    S *= gamma;
    Matrix V(nc, M), D1;
    if (order >= 1) D1.resize(nc, M);
    const Activation& act = *basis.activation;
    for (Index m = 0; m < M; ++m)
      for (Index p = 0; p < nc; ++p) {
        double v, dv, d2v;
        act.eval(S(p, m), v, dv, d2v);
        V(p, m) = v;
        if (order >= 1) D1(p, m) = dv;
      }
    if (value)
      value->segment(c0, nc) = V * coef.tail(M) + Vector::Constant(nc, coef[0]);
    if (grad)
      for (int i = 0; i < d; ++i)
        grad->col(i).segment(c0, nc) =
            gamma * (D1.array().rowwise() * bank.directions.row(i).array()).matrix() *
            coef.tail(M);
  }
}

IntVector classify_all(const SolutionModel& model, const Matrix& points) {
  IntVector labels(points.cols());
  for (Index p = 0; p < points.cols(); ++p)
    labels[p] = classify(model.partition, points.col(p));
  return labels;
}

}  // namespace

Matrix evaluate(const SolutionModel& model, const Matrix& points, const IntVector& labels) {
  const int K = model.basis.num_subdomains();
  Matrix out(points.cols(), model.fields);
  for (int k = 0; k < K; ++k) {
    std::vector<Index> idx;
    for (Index p = 0; p < points.cols(); ++p)
      if (labels[p] == k) idx.push_back(p);
    if (idx.empty()) continue;
    Matrix X(points.rows(), static_cast<Index>(idx.size()));
    for (std::size_t p = 0; p < idx.size(); ++p) X.col(static_cast<Index>(p)) = points.col(idx[p]);
    for (int f = 0; f < model.fields; ++f) {
      Vector v;
      eval_combination(model.basis, k, X, model.coefficients(k, f), 0, &v, nullptr);
      for (std::size_t p = 0; p < idx.size(); ++p) out(idx[p], f) = v[static_cast<Index>(p)];
    }
  }
  return out;
}

Matrix evaluate(const SolutionModel& model, const Matrix& points) {
  return evaluate(model, points, classify_all(model, points));
}

std::vector<Matrix> evaluate_gradient(const SolutionModel& model, const Matrix& points,
                                      const IntVector& labels) {
  const int K = model.basis.num_subdomains();
  const int d = static_cast<int>(points.rows());
  std::vector<Matrix> out(static_cast<std::size_t>(model.fields),
                          Matrix::Zero(points.cols(), d));
  for (int k = 0; k < K; ++k) {
    std::vector<Index> idx;
    for (Index p = 0; p < points.cols(); ++p)
      if (labels[p] == k) idx.push_back(p);
    if (idx.empty()) continue;
    Matrix X(points.rows(), static_cast<Index>(idx.size()));
    for (std::size_t p = 0; p < idx.size(); ++p) X.col(static_cast<Index>(p)) = points.col(idx[p]);
    for (int f = 0; f < model.fields; ++f) {
      Matrix g;
      eval_combination(model.basis, k, X, model.coefficients(k, f), 1, nullptr, &g);
      for (std::size_t p = 0; p < idx.size(); ++p)
        out[static_cast<std::size_t>(f)].row(idx[p]) = g.row(static_cast<Index>(p));
    }
  }
  return out;
}

void dump_system(const AssembledSystem& system, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("dump_system: cannot open " + path);
  auto put_u64 = [&](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
  auto put_i32 = [&](std::int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  os.write("MTNSYS01", 8);
  put_u64(static_cast<std::uint64_t>(system.rows()));
  put_u64(static_cast<std::uint64_t>(system.cols()));
  put_u64(static_cast<std::uint64_t>(system.tags.size()));
  for (std::size_t b = 0; b < system.tags.size(); ++b) {
    put_i32(static_cast<std::int32_t>(system.tags[b].kind));
    put_i32(system.tags[b].region);
    put_i32(system.tags[b].interface.first);
    put_i32(system.tags[b].interface.second);
    put_u64(static_cast<std::uint64_t>(system.block_rows[b].first));
    put_u64(static_cast<std::uint64_t>(system.block_rows[b].second));
  }
  os.write(reinterpret_cast<const char*>(system.F.data()),
           std::streamsize(sizeof(double)) * system.F.size());
  os.write(reinterpret_cast<const char*>(system.T.data()),
           std::streamsize(sizeof(double)) * system.T.size());
}

}  // namespace mtn
