#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "mtn/benchmarks.hpp"
#include "mtn/geometry.hpp"

using namespace mtn;

namespace {

constexpr double kPi = std::numbers::pi;

Vector vec2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

}  // namespace

TEST_CASE("interior grid of the square matches the hand count") {
  // [0,2]^2 at pitch 2/50 has 49^2 strictly interior nodes.
  const auto region = make_box_region(vec2(0, 0), vec2(2, 2));
  const PointCloud cloud = sample_interior(region, 2.0 / 50.0);
  CHECK(cloud.size() == 49 * 49);
  for (Index i = 0; i < cloud.size(); ++i)
    CHECK(region.signed_membership(cloud.points.col(i)) < 0.0);
}

TEST_CASE("degenerate region yields an empty cloud") {
  LevelSetRegion empty;
  empty.bounding_box = make_box(vec2(0, 0), vec2(1, 1));
  empty.signed_membership = [](const Vector&) { return 1.0; };
  CHECK(sample_interior(empty, 0.25).size() == 0);
}

TEST_CASE("disk sampling count equals a brute-force grid scan") {
  LevelSetRegion disk;
  disk.bounding_box = make_box(vec2(-1, -1), vec2(1, 1));
  disk.signed_membership = [](const Vector& x) { return x.squaredNorm() - 1.0; };
  const double h = 0.5;
  const PointCloud cloud = sample_interior(disk, h);

  Index expected = 0;  // independent enumeration
  for (int i = 0;; ++i) {
    const double x = -1.0 + h * i;
    if (x > 1.0) break;
    for (int j = 0;; ++j) {
      const double y = -1.0 + h * j;
      if (y > 1.0) break;
      if (x * x + y * y < 1.0) ++expected;
    }
  }
  CHECK(cloud.size() == expected);
  CHECK(expected == 9);
}

TEST_CASE("boundary counts: square, cube, single point on a circle") {
  {
    DomainPartition part;
    part.dim = 2;
    part.outer_boundary = box_boundary_2d(vec2(0, 0), vec2(2, 2));
    part.bounding_box = make_box(vec2(0, 0), vec2(2, 2));
    const PointCloud b = sample_boundary(part, {{51, 1}, {51, 1}, {51, 1}, {51, 1}});
    CHECK(b.size() == 204);
    CHECK(b.role == Role::Boundary);
  }
  {
    DomainPartition part;
    part.dim = 3;
    Vector lo = Vector::Zero(3), hi = Vector::Ones(3);
    part.outer_boundary = box_boundary_3d(lo, hi);
    const PointCloud b = sample_boundary(part, std::vector<std::array<Index, 2>>(6, {31, 31}));
    CHECK(b.size() == 31 * 31 * 6);
  }
  {
    DomainPartition part;
    part.dim = 2;
    BoundaryFacet circle;
    circle.param_dim = 1;
    circle.param_range[0] = {0.0, 2 * kPi};
    circle.rule[0] = GridRule::Periodic;
    circle.chart = [](const Vector& t, Vector& x) {
      x = vec2(std::cos(t[0]), std::sin(t[0]));
    };
    part.outer_boundary = {circle};
    const PointCloud b = sample_boundary(part, {{1, 1}});
    CHECK(b.size() == 1);
    CHECK(b.points(0, 0) == doctest::Approx(1.0));  // parametrization start
    CHECK(b.points(1, 0) == doctest::Approx(0.0));
  }
  {
    DomainPartition part;
    part.dim = 2;
    part.outer_boundary = box_boundary_2d(vec2(0, 0), vec2(2, 2));
    CHECK_THROWS_AS(sample_boundary(part, {{0, 1}, {51, 1}, {51, 1}, {51, 1}}), GeometryError);
  }
}

TEST_CASE("circle interface sampling: equiangular points with outward normals") {
  const InterfaceSpec spec = circle_interface(vec2(1, 1), std::sqrt(0.5), 0, 1);
  const PointCloud cloud = sample_interface(spec, {120, 1});
  CHECK(cloud.size() == 120);
  CHECK(cloud.role == Role::Interface);
  CHECK(cloud.normals.cols() == 120);
  for (Index i = 0; i < cloud.size(); ++i) {
    const Vector x = cloud.points.col(i), n = cloud.normals.col(i);
    CHECK(std::abs((x - vec2(1, 1)).norm() - std::sqrt(0.5)) < 1e-12);
    CHECK(std::abs(n.norm() - 1.0) < 1e-12);
    CHECK(n.dot(x - vec2(1, 1)) > 0.0);  // outward
  }
  const Vector x0 = cloud.points.col(0) - vec2(1, 1);
  const Vector x1 = cloud.points.col(1) - vec2(1, 1);
  const double gap = std::atan2(x1[1], x1[0]) - std::atan2(x0[1], x0[0]);
  CHECK(gap == doctest::Approx(2 * kPi / 120).epsilon(1e-12));
}

TEST_CASE("ellipsoid interface grid count") {
  const BenchmarkProblem p6 = make_problem("elasticity3d");
  const PointCloud cloud = sample_interface(p6.partition.interfaces[0], {60, 30});
  CHECK(cloud.size() == 1800);
  std::set<std::pair<double, double>> distinct;
  for (Index i = 0; i < cloud.size(); ++i)
    distinct.insert({cloud.points(0, i), cloud.points(1, i)});
  CHECK(distinct.size() == 1800);  // midpoint rule avoids pole duplicates
}

TEST_CASE("flower interface radius at the four axis angles") {
  // r(theta) = 0.5 - 0.1 cos(5 theta) evaluated directly:
  // theta = 0, pi/2, pi, 3pi/2 -> 0.4, 0.5, 0.6, 0.5.
  const BenchmarkProblem p5 = make_problem("multi2d");
  const InterfaceSpec& flower = p5.partition.interfaces[1];
  const PointCloud cloud = sample_interface(flower, {4, 1});
  REQUIRE(cloud.size() == 4);
  const double expected[] = {0.4, 0.5, 0.6, 0.5};
  for (Index i = 0; i < 4; ++i)
    CHECK(cloud.points.col(i).norm() == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("interface points sit on the owning level sets and normals are unit") {
  for (const char* id : {"circle2d", "multi2d", "elasticity3d", "shell3d"}) {
    const BenchmarkProblem p = make_problem(id);
    for (std::size_t g = 0; g < p.partition.interfaces.size(); ++g) {
      const auto& spec = p.partition.interfaces[g];
      const PointCloud cloud =
          sample_interface(spec, {spec.param_dim == 2 ? Index{12} : Index{40}, 7});
      const auto [i, j] = spec.orientation;
      for (Index q = 0; q < cloud.size(); ++q) {
        const Vector x = cloud.points.col(q);
        CHECK(std::abs(p.partition.regions[i].signed_membership(x)) < 1e-10);
        CHECK(std::abs(p.partition.regions[j].signed_membership(x)) < 1e-10);
        CHECK(std::abs(cloud.normals.col(q).norm() - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("interface normals are orthogonal to finite-difference tangents") {
  for (const char* id : {"circle2d", "multi2d", "elasticity3d", "shell3d"}) {
    const BenchmarkProblem p = make_problem(id);
    for (const auto& spec : p.partition.interfaces) {
      if (spec.param_dim == 0) continue;
      const double h = 1e-6;
      for (double t0 : {0.37, 1.93, 4.11}) {
        Vector t(spec.param_dim);
        t[0] = t0;
        if (spec.param_dim == 2) t[1] = 1.1;
        for (int pdir = 0; pdir < spec.param_dim; ++pdir) {
          Vector ta = t, tb = t, xa, xb, n, x, dummy;
          ta[pdir] -= h;
          tb[pdir] += h;
          spec.chart(ta, xa, dummy);
          spec.chart(tb, xb, dummy);
          spec.chart(t, x, n);
          const Vector tangent = (xb - xa) / (2 * h);
          CHECK(std::abs(n.dot(tangent)) / tangent.norm() < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("normals point from region i into region j") {
  for (const char* id : {"circle2d", "multi2d", "elasticity3d", "shell3d"}) {
    const BenchmarkProblem p = make_problem(id);
    for (const auto& spec : p.partition.interfaces) {
      const PointCloud cloud = sample_interface(spec, {9, 5});
      const auto [i, j] = spec.orientation;
      const double eps = 1e-6;
      for (Index q = 0; q < cloud.size(); ++q) {
        const Vector x = cloud.points.col(q), n = cloud.normals.col(q);
        CHECK(p.partition.regions[i].signed_membership(x - eps * n) < 0.0);
        CHECK(p.partition.regions[j].signed_membership(x + eps * n) < 0.0);
      }
    }
  }
}

TEST_CASE("classify: circle2d examples and tie-break") {
  const BenchmarkProblem p3 = make_problem("circle2d");
  CHECK(classify(p3.partition, vec2(1, 1)) == 0);  // center of the disk
  CHECK(classify(p3.partition, vec2(0, 0)) == 1);  // corner, far outside
  const double r = std::sqrt(0.5);
  CHECK(classify(p3.partition, vec2(1 + r, 1)) == 0);  // exactly on the circle
  CHECK_THROWS_AS(classify(p3.partition, vec2(5, 5)), GeometryError);
}

TEST_CASE("classify of interior samples returns the owning region") {
  const BenchmarkProblem p5 = make_problem("multi2d");
  const auto clouds = sample_interior(p5.partition, 0.11);
  for (int k = 0; k < p5.num_regions(); ++k)
    for (Index i = 0; i < clouds[k].size(); ++i)
      CHECK(classify(p5.partition, clouds[k].points.col(i)) == k);
}

TEST_CASE("partition-level interior sampling splits the global grid exactly") {
  const BenchmarkProblem p3 = make_problem("circle2d");
  const auto clouds = sample_interior(p3.partition, 2.0 / 50.0);
  CHECK(clouds[0].size() + clouds[1].size() == 49 * 49);
}

TEST_CASE("latin hypercube: quartile strata in 1D") {
  DomainPartition part;
  part.dim = 1;
  part.regions = {make_interval_region(0.0, 1.0)};
  part.bounding_box = part.regions[0].bounding_box;
  const LabeledPoints pts = latin_hypercube_test_points(part, 4, 7);
  std::set<int> strata;
  for (Index i = 0; i < 4; ++i)
    strata.insert(static_cast<int>(pts.points(0, i) * 4));  // quartile index
  CHECK(strata.size() == 4);
}

TEST_CASE("latin hypercube is bit-reproducible and respects membership") {
  const BenchmarkProblem p7 = make_problem("shell3d");
  const LabeledPoints a = latin_hypercube_test_points(p7.partition, 500, 42);
  const LabeledPoints b = latin_hypercube_test_points(p7.partition, 500, 42);
  CHECK(a.points == b.points);
  CHECK(a.region == b.region);
  for (Index i = 0; i < a.points.cols(); ++i) {
    const double r2 = a.points.col(i).squaredNorm();
    CHECK(r2 >= 0.151 * 0.151 - 1e-9);
    CHECK(r2 <= 0.911 * 0.911 + 1e-9);
    CHECK(a.region[i] == classify(p7.partition, a.points.col(i)));
  }
  const LabeledPoints c = latin_hypercube_test_points(p7.partition, 500, 43);
  CHECK(a.points != c.points);
}

TEST_CASE("latin hypercube rejects a vanishing domain") {
  DomainPartition part;
  part.dim = 2;
  LevelSetRegion tiny;
  tiny.bounding_box = make_box(vec2(0, 0), vec2(1, 1));
  tiny.signed_membership = [](const Vector& x) {
    return (x - vec2(0.5, 0.5)).norm() - 1e-5;
  };
  part.regions = {tiny};
  part.bounding_box = tiny.bounding_box;
  CHECK_THROWS_AS(latin_hypercube_test_points(part, 1000, 1), GeometryError);
}

TEST_CASE("csv serialization carries roles, regions and normals") {
  const BenchmarkProblem p3 = make_problem("circle2d");
  const PointCloud gamma = sample_interface(p3.partition.interfaces[0], {4, 1});
  std::ostringstream os;
  write_csv(gamma, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x,y,role,k,nx,ny");
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(line.find("interface_0_1") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 4);

  const auto interior = sample_interior(p3.partition, 0.5);
  std::ostringstream os2;
  write_csv(interior[1], os2);
  CHECK(os2.str().find("interior,1") != std::string::npos);
}

TEST_CASE("shell interior sampling hits the stated count band") {
  // Interior budget is about 12000; the configured spacing must land within
  // +-5%.
  const BenchmarkProblem p7 = make_problem("shell3d");
  const auto clouds = sample_interior(p7.partition, p7.sampling.interior_spacing);
  const Index total = clouds[0].size() + clouds[1].size();
  CHECK(total >= 11400);
  CHECK(total <= 12600);
}
