#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "mtn/types.hpp"

namespace mtn {

/// Ball that slightly over-covers a subdomain; hidden-layer neurons are
/// generated uniformly with respect to it.
struct BallCover {
  Vector center;
  double radius = 0.0;

  int dim() const { return static_cast<int>(center.size()); }
};

/// Signed membership: negative strictly inside, zero on the region's boundary
/// (outer boundary or interfaces), positive outside.
using MembershipFn = std::function<double(const Vector&)>;

struct LevelSetRegion {
  MembershipFn signed_membership;
  Box bounding_box;

  int dim() const { return static_cast<int>(bounding_box.min().size()); }
};

/// How a 1D parameter direction is discretized into n samples.
enum class GridRule {
  Endpoints,  // lo + (hi-lo)*i/(n-1); both ends included (n == 1 gives lo)
  Periodic,   // lo + (hi-lo)*i/n; wraps, no duplicate seam point
  Midpoints,  // lo + (hi-lo)*(i+0.5)/n; avoids degenerate chart points (poles)
};

/// Parametrized interface patch between two subdomains. The chart returns a
/// point and the unit normal oriented from regions[first] into regions[second].
struct InterfaceSpec {
  int param_dim = 1;  // 0: single point (1D), 1: curve, 2: surface
  std::array<std::pair<double, double>, 2> param_range{{{0.0, 0.0}, {0.0, 0.0}}};
  std::array<GridRule, 2> rule{GridRule::Periodic, GridRule::Midpoints};
  std::function<void(const Vector& t, Vector& x, Vector& n)> chart;
  std::pair<int, int> orientation{0, 1};
};

/// Parametrized facet of the outer boundary (edge in 2D, face/sphere in 3D).
struct BoundaryFacet {
  int param_dim = 1;  // 0: single point (1D endpoints)
  std::array<std::pair<double, double>, 2> param_range{{{0.0, 0.0}, {0.0, 0.0}}};
  std::array<GridRule, 2> rule{GridRule::Endpoints, GridRule::Endpoints};
  std::function<void(const Vector& t, Vector& x)> chart;
};

struct DomainPartition {
  int dim = 0;
  std::vector<LevelSetRegion> regions;
  std::vector<InterfaceSpec> interfaces;
  std::vector<BoundaryFacet> outer_boundary;
  Box bounding_box;  // covers the closure of the whole domain

  int num_regions() const { return static_cast<int>(regions.size()); }
};

enum class Role { Interior, Boundary, Interface };

/// A sampled point set. Points are columns (d x N). Normals are present
/// exactly when role == Interface.
struct PointCloud {
  Matrix points;
  Role role = Role::Interior;
  int region = -1;                        // owning subdomain for Interior
  std::pair<int, int> interface{-1, -1};  // (i, j) for Interface
  Matrix normals;
  double spacing = 0.0;  // nominal inter-point distance, informational

  Index size() const { return points.cols(); }
  int dim() const { return static_cast<int>(points.rows()); }
};

/// Uniform axis-aligned grid of pitch `spacing`, anchored at the region's
/// bounding-box min corner, restricted to signed_membership < 0.
PointCloud sample_interior(const LevelSetRegion& region, double spacing, int region_index = 0);

/// Partition-wide interior sampling on one shared grid anchored at the global
/// bounding-box min corner; each strictly-interior node goes to its region.
/// Returns one cloud per region (possibly empty).
std::vector<PointCloud> sample_interior(const DomainPartition& partition, double spacing);

/// Per-facet parametric sampling of the outer boundary; counts[f] samples per
/// parameter direction of facet f (surfaces take counts per direction).
PointCloud sample_boundary(const DomainPartition& partition,
                           const std::vector<std::array<Index, 2>>& counts_per_facet);

/// Uniform parametric grid over one interface; normals come from the chart.
PointCloud sample_interface(const InterfaceSpec& spec, const std::array<Index, 2>& counts);

struct LabeledPoints {
  Matrix points;     // d x n
  IntVector region;  // subdomain index per point
};

/// Latin hypercube samples in the partition's bounding box; out-of-domain
/// draws are rejected and fresh stratified rounds are generated until n
/// in-domain points exist. Bit-reproducible for a fixed seed.
LabeledPoints latin_hypercube_test_points(const DomainPartition& partition, Index n,
                                          std::uint64_t seed);

/// Subdomain index of a point in the closure of the domain. Points on an
/// interface go to the region of lower index. Throws GeometryError outside.
int classify(const DomainPartition& partition, const Vector& x);

/// classify that reports failure instead of throwing (-1 if outside).
int try_classify(const DomainPartition& partition, const Vector& x);

/// CSV serialization: x[,y[,z]],role,k[,nx,ny,nz].
void write_csv(const PointCloud& cloud, std::ostream& os);
void write_csv(const PointCloud& cloud, const std::string& path);

// -- Building blocks used by the benchmark definitions --------------------

/// Axis-aligned box region [lo, hi].
LevelSetRegion make_box_region(const Vector& lo, const Vector& hi);

/// Interval region (1D convenience).
LevelSetRegion make_interval_region(double lo, double hi);

Box make_box(const Vector& lo, const Vector& hi);

/// Four edges of the rectangle [lo, hi] in 2D, order: bottom, right, top, left.
std::vector<BoundaryFacet> box_boundary_2d(const Vector& lo, const Vector& hi);

/// Six faces of the box [lo, hi] in 3D, order: x=lo, x=hi, y=lo, y=hi, z=lo, z=hi.
std::vector<BoundaryFacet> box_boundary_3d(const Vector& lo, const Vector& hi);

/// Sphere facet ‖x - c‖ = r parametrized by (azimuth, inclination).
BoundaryFacet sphere_facet(const Vector& center, double r);

/// Circle interface ‖x - c‖ = r, normal pointing outward (from inside region
/// `inner` into `outer`).
InterfaceSpec circle_interface(const Vector& center, double r, int inner, int outer);

}  // namespace mtn
