#include "mtn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mtn/rng.hpp"

namespace mtn {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> grid_1d(double lo, double hi, Index n, GridRule rule) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    switch (rule) {
      case GridRule::Endpoints:
        t[i] = (n == 1) ? lo : lo + (hi - lo) * double(i) / double(n - 1);
        break;
      case GridRule::Periodic:
        t[i] = lo + (hi - lo) * double(i) / double(n);
        break;
      case GridRule::Midpoints:
        t[i] = lo + (hi - lo) * (double(i) + 0.5) / double(n);
        break;
    }
  }
  return t;
}

Index grid_count(const Box& box, double spacing, int axis) {
  const double extent = box.max()[axis] - box.min()[axis];
  return static_cast<Index>(std::floor(extent / spacing)) + 1;
}

}  // namespace

PointCloud sample_interior(const LevelSetRegion& region, double spacing, int region_index) {
  if (spacing <= 0) throw GeometryError("sample_interior: spacing must be positive");
  const int d = region.dim();
  const Vector lo = region.bounding_box.min();

  std::vector<Index> n(d);
  Index total = 1;
  for (int a = 0; a < d; ++a) {
    n[a] = grid_count(region.bounding_box, spacing, a);
    total *= n[a];
  }

  Matrix pts(d, total);
  Index kept = 0;
  Vector x(d);
  std::vector<Index> idx(d, 0);
  for (Index flat = 0; flat < total; ++flat) {
    for (int a = 0; a < d; ++a) x[a] = lo[a] + spacing * double(idx[a]);
    if (region.signed_membership(x) < 0.0) pts.col(kept++) = x;
    // odometer increment
    for (int a = 0; a < d; ++a) {
      if (++idx[a] < n[a]) break;
      idx[a] = 0;
    }
  }

  PointCloud cloud;
  cloud.points = pts.leftCols(kept).eval();
  cloud.role = Role::Interior;
  cloud.region = region_index;
  cloud.spacing = spacing;
  return cloud;
}

std::vector<PointCloud> sample_interior(const DomainPartition& partition, double spacing) {
  if (spacing <= 0) throw GeometryError("sample_interior: spacing must be positive");
  const int d = partition.dim;
  const int K = partition.num_regions();
  const Vector lo = partition.bounding_box.min();

  std::vector<Index> n(d);
  Index total = 1;
  for (int a = 0; a < d; ++a) {
    n[a] = grid_count(partition.bounding_box, spacing, a);
    total *= n[a];
  }

  std::vector<std::vector<Index>> per_region(K);
  std::vector<Vector> nodes;
  nodes.reserve(static_cast<std::size_t>(total));
  Vector x(d);
  std::vector<Index> idx(d, 0);
  for (Index flat = 0; flat < total; ++flat) {
    for (int a = 0; a < d; ++a) x[a] = lo[a] + spacing * double(idx[a]);
    for (int k = 0; k < K; ++k) {
      if (partition.regions[k].signed_membership(x) < 0.0) {
        per_region[k].push_back(static_cast<Index>(nodes.size()));
        nodes.push_back(x);
        break;  // strict interiors are disjoint
      }
    }
    for (int a = 0; a < d; ++a) {
      if (++idx[a] < n[a]) break;
      idx[a] = 0;
    }
  }

  std::vector<PointCloud> clouds(K);
  for (int k = 0; k < K; ++k) {
    PointCloud& c = clouds[k];
    c.points.resize(d, static_cast<Index>(per_region[k].size()));
    for (Index i = 0; i < c.points.cols(); ++i) c.points.col(i) = nodes[per_region[k][i]];
    c.role = Role::Interior;
    c.region = k;
    c.spacing = spacing;
  }
  return clouds;
}

PointCloud sample_boundary(const DomainPartition& partition,
                           const std::vector<std::array<Index, 2>>& counts_per_facet) {
  if (counts_per_facet.size() != partition.outer_boundary.size())
    throw GeometryError("sample_boundary: one count entry required per facet");
  const int d = partition.dim;

  Index total = 0;
  for (std::size_t f = 0; f < partition.outer_boundary.size(); ++f) {
    const auto& facet = partition.outer_boundary[f];
    Index n = 1;
    for (int p = 0; p < facet.param_dim; ++p) {
      if (counts_per_facet[f][p] < 1) throw GeometryError("sample_boundary: zero count rejected");
      n *= counts_per_facet[f][p];
    }
    total += n;
  }

  PointCloud cloud;
  cloud.points.resize(d, total);
  cloud.role = Role::Boundary;

  Index at = 0;
  Vector x(d);
  for (std::size_t f = 0; f < partition.outer_boundary.size(); ++f) {
    const auto& facet = partition.outer_boundary[f];
    if (facet.param_dim == 0) {
      Vector t(0);
      facet.chart(t, x);
      cloud.points.col(at++) = x;
      continue;
    }
    const auto t0 = grid_1d(facet.param_range[0].first, facet.param_range[0].second,
                            counts_per_facet[f][0], facet.rule[0]);
    if (facet.param_dim == 1) {
      Vector t(1);
      for (double a : t0) {
        t[0] = a;
        facet.chart(t, x);
        cloud.points.col(at++) = x;
      }
    } else {
      const auto t1 = grid_1d(facet.param_range[1].first, facet.param_range[1].second,
                              counts_per_facet[f][1], facet.rule[1]);
      Vector t(2);
      for (double a : t0)
        for (double b : t1) {
          t[0] = a;
          t[1] = b;
          facet.chart(t, x);
          cloud.points.col(at++) = x;
        }
    }
  }
  return cloud;
}

PointCloud sample_interface(const InterfaceSpec& spec, const std::array<Index, 2>& counts) {
  PointCloud cloud;
  cloud.role = Role::Interface;
  cloud.interface = spec.orientation;

  Vector x, n;
  if (spec.param_dim == 0) {
    Vector t(0);
    spec.chart(t, x, n);
    cloud.points.resize(x.size(), 1);
    cloud.normals.resize(x.size(), 1);
    cloud.points.col(0) = x;
    cloud.normals.col(0) = n;
    return cloud;
  }

  for (int p = 0; p < spec.param_dim; ++p)
    if (counts[p] < 1) throw GeometryError("sample_interface: counts must be >= 1");

  const auto t0 = grid_1d(spec.param_range[0].first, spec.param_range[0].second, counts[0],
                          spec.rule[0]);
  std::vector<double> t1{0.0};
  if (spec.param_dim == 2)
    t1 = grid_1d(spec.param_range[1].first, spec.param_range[1].second, counts[1], spec.rule[1]);

  const Index total = static_cast<Index>(t0.size() * t1.size());
  Vector t(spec.param_dim);
  Index at = 0;
  for (double a : t0)
    for (double b : t1) {
      t[0] = a;
      if (spec.param_dim == 2) t[1] = b;
      spec.chart(t, x, n);
      if (at == 0) {
        cloud.points.resize(x.size(), total);
        cloud.normals.resize(x.size(), total);
      }
      cloud.points.col(at) = x;
      cloud.normals.col(at) = n;
      ++at;
    }
  return cloud;
}

int try_classify(const DomainPartition& partition, const Vector& x) {
  // Points within the tolerance band of an interface go to the region of
  // lower index; scanning in ascending order implements that tie-break.
  constexpr double kEdgeTol = 1e-12;
  const int K = partition.num_regions();
  for (int k = 0; k < K; ++k)
    if (partition.regions[k].signed_membership(x) <= kEdgeTol) return k;
  return -1;
}

int classify(const DomainPartition& partition, const Vector& x) {
  const int k = try_classify(partition, x);
  if (k < 0) {
    std::ostringstream os;
    os << "classify: point (" << x.transpose() << ") is outside every region";
    throw GeometryError(os.str());
  }
  return k;
}

LabeledPoints latin_hypercube_test_points(const DomainPartition& partition, Index n,
                                          std::uint64_t seed) {
  if (n < 1) throw GeometryError("latin_hypercube_test_points: n must be >= 1");
  const int d = partition.dim;
  const Vector lo = partition.bounding_box.min();
  const Vector hi = partition.bounding_box.max();

  LabeledPoints out;
  out.points.resize(d, n);
  out.region.resize(n);

  const rng::Stream root = rng::Stream::root(seed).sub(0x1457);  // LHS stream
  Index kept = 0;
  constexpr int kMaxRounds = 4096;
  int round = 0;
  for (; round < kMaxRounds && kept < n; ++round) {
    // One stratified round: per dimension an independent permutation of the
    // n strata plus a jitter inside each stratum.
    std::vector<std::vector<Index>> perm(d, std::vector<Index>(n));
    for (int a = 0; a < d; ++a) {
      auto& p = perm[a];
      for (Index i = 0; i < n; ++i) p[i] = i;
      rng::Counter shuffle{root.sub(2 * round * d + a)};
      for (Index i = n - 1; i > 0; --i)
        std::swap(p[i], p[shuffle.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    Vector x(d);
    for (Index i = 0; i < n && kept < n; ++i) {
      for (int a = 0; a < d; ++a) {
        const rng::Stream js = root.sub((2 * round + 1) * d + a);
        const double u = js.uniform(static_cast<std::uint64_t>(i));
        x[a] = lo[a] + (hi[a] - lo[a]) * (double(perm[a][i]) + u) / double(n);
      }
      const int k = try_classify(partition, x);
      if (k >= 0) {
        out.points.col(kept) = x;
        out.region[kept] = k;
        ++kept;
      }
    }
    if (round >= 16 && kept == 0)
      throw GeometryError("latin_hypercube_test_points: domain fraction of the box too small");
  }
  if (kept < n)
    throw GeometryError("latin_hypercube_test_points: rejection budget exhausted");
  return out;
}

void write_csv(const PointCloud& cloud, std::ostream& os) {
  const int d = cloud.dim();
  const char* axes[] = {"x", "y", "z"};
  for (int a = 0; a < d; ++a) os << axes[a] << ",";
  os << "role,k";
  if (cloud.role == Role::Interface)
    for (int a = 0; a < d; ++a) os << ",n" << axes[a];
  os << "\n";
  os.precision(17);
  for (Index i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < d; ++a) os << cloud.points(a, i) << ",";
    switch (cloud.role) {
      case Role::Interior:
        os << "interior," << cloud.region;
        break;
      case Role::Boundary:
        os << "boundary,-1";
        break;
      case Role::Interface:
        os << "interface_" << cloud.interface.first << "_" << cloud.interface.second << ","
           << cloud.interface.first;
        for (int a = 0; a < d; ++a) os << "," << cloud.normals(a, i);
        break;
    }
    os << "\n";
  }
}

void write_csv(const PointCloud& cloud, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("write_csv: cannot open " + path);
  write_csv(cloud, os);
}

Box make_box(const Vector& lo, const Vector& hi) {
  Box b(lo.size());
  b.min() = lo;
  b.max() = hi;
  return b;
}

LevelSetRegion make_box_region(const Vector& lo, const Vector& hi) {
  LevelSetRegion r;
  r.bounding_box = make_box(lo, hi);
  r.signed_membership = [lo, hi](const Vector& x) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index a = 0; a < x.size(); ++a)
      m = std::max(m, std::max(lo[a] - x[a], x[a] - hi[a]));
    return m;
  };
  return r;
}

LevelSetRegion make_interval_region(double lo, double hi) {
  Vector l(1), h(1);
  l[0] = lo;
  h[0] = hi;
  return make_box_region(l, h);
}

std::vector<BoundaryFacet> box_boundary_2d(const Vector& lo, const Vector& hi) {
  std::vector<BoundaryFacet> facets(4);
  auto edge = [&](int f, Vector a, Vector b) {
    facets[f].param_dim = 1;
    facets[f].param_range[0] = {0.0, 1.0};
    facets[f].rule[0] = GridRule::Endpoints;
    facets[f].chart = [a, b](const Vector& t, Vector& x) { x = a + t[0] * (b - a); };
  };
  Vector bl = lo, br = lo, tr = hi, tl = hi;
  br[0] = hi[0];
  tl[0] = lo[0];
  edge(0, bl, br);
  edge(1, br, tr);
  edge(2, tr, tl);
  edge(3, tl, bl);
  return facets;
}

std::vector<BoundaryFacet> box_boundary_3d(const Vector& lo, const Vector& hi) {
  std::vector<BoundaryFacet> facets;
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      BoundaryFacet f;
      f.param_dim = 2;
      f.param_range[0] = {0.0, 1.0};
      f.param_range[1] = {0.0, 1.0};
      f.rule = {GridRule::Endpoints, GridRule::Endpoints};
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const double plane = side ? hi[axis] : lo[axis];
      f.chart = [=](const Vector& t, Vector& x) {
        x.resize(3);
        x[axis] = plane;
        x[u] = lo[u] + t[0] * (hi[u] - lo[u]);
        x[v] = lo[v] + t[1] * (hi[v] - lo[v]);
      };
      facets.push_back(std::move(f));
    }
  return facets;
}

BoundaryFacet sphere_facet(const Vector& center, double r) {
  BoundaryFacet f;
  f.param_dim = 2;
  f.param_range[0] = {0.0, 2.0 * kPi};  // azimuth
  f.param_range[1] = {0.0, kPi};        // inclination
  f.rule = {GridRule::Periodic, GridRule::Midpoints};
  f.chart = [center, r](const Vector& t, Vector& x) {
    const double st = std::sin(t[1]), ct = std::cos(t[1]);
    x.resize(3);
    x[0] = center[0] + r * st * std::cos(t[0]);
    x[1] = center[1] + r * st * std::sin(t[0]);
    x[2] = center[2] + r * ct;
  };
  return f;
}

InterfaceSpec circle_interface(const Vector& center, double r, int inner, int outer) {
  InterfaceSpec s;
  s.param_dim = 1;
  s.param_range[0] = {0.0, 2.0 * kPi};
  s.rule[0] = GridRule::Periodic;
  s.orientation = {inner, outer};
  s.chart = [center, r](const Vector& t, Vector& x, Vector& n) {
    n.resize(2);
    n[0] = std::cos(t[0]);
    n[1] = std::sin(t[0]);
    x = center + r * n;
  };
  return s;
}

}  // namespace mtn
