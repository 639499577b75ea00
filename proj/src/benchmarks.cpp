#include "mtn/benchmarks.hpp"

#include <cmath>
#include <numbers>

namespace mtn {

namespace {

constexpr double kPi = std::numbers::pi;

double sq(double v) { return v * v; }

// ---- generic helpers -----------------------------------------------------

CoefficientFn constant_coef(double c) {
  return [c](const Vector&, const Vector&, int) { return c; };
}

/// Picks c[k] for the subdomain a term is evaluated on.
CoefficientFn piecewise_coef(std::vector<double> c) {
  return [c = std::move(c)](const Vector&, const Vector&, int k) {
    return c[static_cast<std::size_t>(k)];
  };
}

CoefficientFn normal_component(std::vector<double> c, int axis) {
  return [c = std::move(c), axis](const Vector&, const Vector& n, int k) {
    return c[static_cast<std::size_t>(k)] * n[axis];
  };
}

/// -div(beta grad u) for piecewise-constant beta.
OperatorRowSpec diffusion_op(const std::vector<double>& beta, int d) {
  OperatorRowSpec op;
  for (int i = 0; i < d; ++i) {
    std::vector<double> neg(beta.size());
    for (std::size_t k = 0; k < beta.size(); ++k) neg[k] = -beta[k];
    op.terms.push_back({piecewise_coef(neg), 0, Deriv::dxx(i, i)});
  }
  return op;
}

/// [beta grad u . n] for piecewise-constant beta.
OperatorRowSpec diffusion_flux_op(const std::vector<double>& beta, int d) {
  OperatorRowSpec op;
  for (int i = 0; i < d; ++i) op.terms.push_back({normal_component(beta, i), 0, Deriv::dx(i)});
  return op;
}

OperatorRowSpec dirichlet_op(int field = 0) {
  OperatorRowSpec op;
  op.terms.push_back({constant_coef(1.0), field, Deriv::value()});
  return op;
}

OperatorRowSpec jump_value_op(int field = 0) { return dirichlet_op(field); }

// One separable factor: value and first two derivatives at s.
struct Fac {
  double v, d1, d2;
};
using FacFn = Fac (*)(double);

/// Exact solution built as a product A(x)B(y)C(z) of 1D factors.
struct Sep3 {
  FacFn fx, fy, fz;

  double value(const Vector& p) const { return fx(p[0]).v * fy(p[1]).v * fz(p[2]).v; }
  Vector gradient(const Vector& p) const {
    const Fac a = fx(p[0]), b = fy(p[1]), c = fz(p[2]);
    Vector g(3);
    g << a.d1 * b.v * c.v, a.v * b.d1 * c.v, a.v * b.v * c.d1;
    return g;
  }
  Matrix hessian(const Vector& p) const {
    const Fac a = fx(p[0]), b = fy(p[1]), c = fz(p[2]);
    Matrix h(3, 3);
    h << a.d2 * b.v * c.v, a.d1 * b.d1 * c.v, a.d1 * b.v * c.d1,  //
        a.d1 * b.d1 * c.v, a.v * b.d2 * c.v, a.v * b.d1 * c.d1,   //
        a.d1 * b.v * c.d1, a.v * b.d1 * c.d1, a.v * b.v * c.d2;
    return h;
  }
};

Fac fac_sin2pi(double s) {
  return {std::sin(2 * kPi * s), 2 * kPi * std::cos(2 * kPi * s),
          -4 * kPi * kPi * std::sin(2 * kPi * s)};
}
Fac fac_cos2pi(double s) {
  return {std::cos(2 * kPi * s), -2 * kPi * std::sin(2 * kPi * s),
          -4 * kPi * kPi * std::cos(2 * kPi * s)};
}
Fac fac_cos_s2(double s) {  // cos(s^2)
  const double c = std::cos(s * s), n = std::sin(s * s);
  return {c, -2 * s * n, -2 * n - 4 * s * s * c};
}
Fac fac_sin_s2(double s) {  // sin(s^2)
  const double c = std::cos(s * s), n = std::sin(s * s);
  return {n, 2 * s * c, 2 * c - 4 * s * s * n};
}
Fac fac_exp_neg_s2(double s) {
  const double e = std::exp(-s * s);
  return {e, -2 * s * e, (4 * s * s - 2) * e};
}
Fac fac_exp_s2(double s) {
  const double e = std::exp(s * s);
  return {e, 2 * s * e, (4 * s * s + 2) * e};
}
Fac fac_neg(Fac f) { return {-f.v, -f.d1, -f.d2}; }
Fac fac_sin2(double s) { return {std::sin(2 * s), 2 * std::cos(2 * s), -4 * std::sin(2 * s)}; }
Fac fac_cos2(double s) { return {std::cos(2 * s), -2 * std::sin(2 * s), -4 * std::cos(2 * s)}; }
Fac fac_exp(double s) {
  const double e = std::exp(s);
  return {e, e, e};
}

// ---- problem builders ----------------------------------------------------

BenchmarkProblem interval1d(std::vector<double> contrast, bool single_net) {
  if (contrast.empty()) contrast = {1.0, 10.0};
  if (contrast.size() != 2) throw ConfigError("interval1d: contrast is (beta1, beta2)");
  const double xi = 0.25;

  BenchmarkProblem p;
  p.id = single_net ? "interval1d-single" : "interval1d";
  p.dim = 1;
  p.field_names = {"u"};
  p.contrast = contrast;

  auto point_facet = [](double at) {
    BoundaryFacet f;
    f.param_dim = 0;
    f.chart = [at](const Vector&, Vector& x) {
      x.resize(1);
      x[0] = at;
    };
    return f;
  };

  p.partition.dim = 1;
  Vector lo(1), hi(1);
  lo << 0.0;
  hi << 1.0;
  p.partition.bounding_box = make_box(lo, hi);
  p.partition.outer_boundary = {point_facet(0.0), point_facet(1.0)};

  p.partition.regions = {make_interval_region(0.0, xi), make_interval_region(xi, 1.0)};
  InterfaceSpec gamma;
  gamma.param_dim = 0;
  gamma.orientation = {0, 1};
  gamma.chart = [xi](const Vector&, Vector& x, Vector& n) {
    x.resize(1);
    n.resize(1);
    x[0] = xi;
    n[0] = 1.0;
  };
  p.partition.interfaces = {gamma};
  p.interior_ops = {diffusion_op(contrast, 1)};
  p.jump_value_ops = {jump_value_op()};
  p.jump_flux_ops = {diffusion_flux_op(contrast, 1)};
  p.boundary_ops = {dirichlet_op()};

  p.exact.value = [](const Vector& x, int k, int) {
    return k == 0 ? std::sin(2 * kPi * x[0]) : std::cos(2 * kPi * x[0]);
  };
  p.exact.gradient = [](const Vector& x, int k, int) {
    Vector g(1);
    g[0] = k == 0 ? 2 * kPi * std::cos(2 * kPi * x[0]) : -2 * kPi * std::sin(2 * kPi * x[0]);
    return g;
  };
  p.exact.hessian = [](const Vector& x, int k, int) {
    Matrix h(1, 1);
    h(0, 0) =
        -4 * kPi * kPi * (k == 0 ? std::sin(2 * kPi * x[0]) : std::cos(2 * kPi * x[0]));
    return h;
  };

  if (single_net) {
    // Same equations, one shared network over both subdomains.
    p.region_group = {0, 0};
    Vector c(1);
    c << 0.5;
    p.covers = {{c, 0.55}};
  } else {
    Vector c1(1), c2(1);
    c1 << xi / 2;
    c2 << (xi + 1.0) / 2;
    p.covers = {{c1, 0.135}, {c2, 0.40}};
  }

  p.sampling.interior_spacing = 1.0 / 101.0;
  p.sampling.boundary_counts = {{1, 1}, {1, 1}};
  p.sampling.interface_counts = {{1, 1}};
  p.sampling.preprocessing_M0 = 10;
  return p;
}

BenchmarkProblem poisson2d(std::vector<double> contrast) {
  if (!contrast.empty()) throw ConfigError("poisson2d has no contrast parameters");
  BenchmarkProblem p;
  p.id = "poisson2d";
  p.dim = 2;
  p.field_names = {"u"};

  Vector lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << 2.0, 2.0;
  p.partition.dim = 2;
  p.partition.regions = {make_box_region(lo, hi)};
  p.partition.outer_boundary = box_boundary_2d(lo, hi);
  p.partition.bounding_box = make_box(lo, hi);

  OperatorRowSpec laplace;  // Delta u = f
  laplace.terms.push_back({constant_coef(1.0), 0, Deriv::dxx(0, 0)});
  laplace.terms.push_back({constant_coef(1.0), 0, Deriv::dxx(1, 1)});
  p.interior_ops = {laplace};
  p.boundary_ops = {dirichlet_op()};

  p.exact.value = [](const Vector& x, int, int) { return std::sin(x[0]) * std::sin(x[1]); };
  p.exact.gradient = [](const Vector& x, int, int) {
    Vector g(2);
    g << std::cos(x[0]) * std::sin(x[1]), std::sin(x[0]) * std::cos(x[1]);
    return g;
  };
  p.exact.hessian = [](const Vector& x, int, int) {
    Matrix h(2, 2);
    const double ss = std::sin(x[0]) * std::sin(x[1]), cc = std::cos(x[0]) * std::cos(x[1]);
    h << -ss, cc, cc, -ss;
    return h;
  };

  Vector c(2);
  c << 1.0, 1.0;
  p.covers = {{c, 1.5}};  // translated and covering
  p.sampling.interior_spacing = 2.0 / 50.0;
  p.sampling.boundary_counts = {{51, 1}, {51, 1}, {51, 1}, {51, 1}};
  p.sampling.preprocessing_M0 = 200;
  return p;
}

BenchmarkProblem circle2d(std::vector<double> contrast) {
  if (contrast.empty()) contrast = {1.0, 10.0};
  if (contrast.size() != 2) throw ConfigError("circle2d: contrast is (beta1, beta2)");
  BenchmarkProblem p;
  p.id = "circle2d";
  p.dim = 2;
  p.field_names = {"u"};
  p.contrast = contrast;

  const double r2 = 0.5;  // interface radius squared
  Vector c(2), lo(2), hi(2);
  c << 1.0, 1.0;
  lo << 0.0, 0.0;
  hi << 2.0, 2.0;

  LevelSetRegion inside;
  inside.signed_membership = [c, r2](const Vector& x) { return (x - c).squaredNorm() - r2; };
  const double r = std::sqrt(r2);
  Vector ilo = c.array() - r, ihi = c.array() + r;
  inside.bounding_box = make_box(ilo, ihi);

  LevelSetRegion outside = make_box_region(lo, hi);
  auto box_m = outside.signed_membership;
  outside.signed_membership = [c, r2, box_m](const Vector& x) {
    return std::max(box_m(x), r2 - (x - c).squaredNorm());
  };

  p.partition.dim = 2;
  p.partition.regions = {inside, outside};
  p.partition.interfaces = {circle_interface(c, r, 0, 1)};
  p.partition.outer_boundary = box_boundary_2d(lo, hi);
  p.partition.bounding_box = make_box(lo, hi);

  p.interior_ops = {diffusion_op(contrast, 2)};
  p.boundary_ops = {dirichlet_op()};
  p.jump_value_ops = {jump_value_op()};
  p.jump_flux_ops = {diffusion_flux_op(contrast, 2)};

  p.exact.value = [](const Vector& x, int k, int) {
    return k == 0 ? std::sin(x[0]) * std::sin(x[1]) : std::cos(x[0]) * std::cos(x[1]);
  };
  p.exact.gradient = [](const Vector& x, int k, int) {
    Vector g(2);
    if (k == 0)
      g << std::cos(x[0]) * std::sin(x[1]), std::sin(x[0]) * std::cos(x[1]);
    else
      g << -std::sin(x[0]) * std::cos(x[1]), -std::cos(x[0]) * std::sin(x[1]);
    return g;
  };
  p.exact.hessian = [](const Vector& x, int k, int) {
    Matrix h(2, 2);
    if (k == 0) {
      const double ss = std::sin(x[0]) * std::sin(x[1]), cc = std::cos(x[0]) * std::cos(x[1]);
      h << -ss, cc, cc, -ss;
    } else {
      const double cc = std::cos(x[0]) * std::cos(x[1]), ss = std::sin(x[0]) * std::sin(x[1]);
      h << -cc, ss, ss, -cc;
    }
    return h;
  };

  p.covers = {{c, 1.0}, {c, 1.5}};
  p.sampling.interior_spacing = 2.0 / 50.0;
  p.sampling.boundary_counts = {{51, 1}, {51, 1}, {51, 1}, {51, 1}};
  p.sampling.interface_counts = {{120, 1}};
  p.sampling.preprocessing_M0 = 400;
  return p;
}

BenchmarkProblem stokes2d(std::vector<double> contrast) {
  if (contrast.empty()) contrast = {1.0, 10.0};
  if (contrast.size() != 2) throw ConfigError("stokes2d: contrast is (mu1, mu2)");
  BenchmarkProblem p;
  p.id = "stokes2d";
  p.dim = 2;
  p.field_names = {"u", "v", "p"};
  p.contrast = contrast;
  const std::vector<double> mu = contrast;

  Vector c = Vector::Zero(2), lo(2), hi(2);
  lo << -2.0, -2.0;
  hi << 2.0, 2.0;

  LevelSetRegion inside;
  inside.signed_membership = [](const Vector& x) { return x.squaredNorm() - 1.0; };
  Vector ilo(2), ihi(2);
  ilo << -1.0, -1.0;
  ihi << 1.0, 1.0;
  inside.bounding_box = make_box(ilo, ihi);
  LevelSetRegion outside = make_box_region(lo, hi);
  auto box_m = outside.signed_membership;
  outside.signed_membership = [box_m](const Vector& x) {
    return std::max(box_m(x), 1.0 - x.squaredNorm());
  };

  p.partition.dim = 2;
  p.partition.regions = {inside, outside};
  p.partition.interfaces = {circle_interface(c, 1.0, 0, 1)};
  p.partition.outer_boundary = box_boundary_2d(lo, hi);
  p.partition.bounding_box = make_box(lo, hi);

  enum { U = 0, V = 1, P = 2 };
  std::vector<double> neg_mu{-mu[0], -mu[1]};

  OperatorRowSpec mom_x;  // -mu Lap u + dp/dx
  mom_x.terms.push_back({piecewise_coef(neg_mu), U, Deriv::dxx(0, 0)});
  mom_x.terms.push_back({piecewise_coef(neg_mu), U, Deriv::dxx(1, 1)});
  mom_x.terms.push_back({constant_coef(1.0), P, Deriv::dx(0)});
  OperatorRowSpec mom_y;
  mom_y.terms.push_back({piecewise_coef(neg_mu), V, Deriv::dxx(0, 0)});
  mom_y.terms.push_back({piecewise_coef(neg_mu), V, Deriv::dxx(1, 1)});
  mom_y.terms.push_back({constant_coef(1.0), P, Deriv::dx(1)});
  OperatorRowSpec divergence;
  divergence.terms.push_back({constant_coef(1.0), U, Deriv::dx(0)});
  divergence.terms.push_back({constant_coef(1.0), V, Deriv::dx(1)});
  p.interior_ops = {mom_x, mom_y, divergence};

  p.boundary_ops = {dirichlet_op(U), dirichlet_op(V)};
  p.jump_value_ops = {jump_value_op(U), jump_value_op(V)};

  // [sigma(u, p) n], sigma = -p I + mu (grad u + grad u^T)
  auto mu_n = [mu](int axis) { return normal_component(mu, axis); };
  auto two_mu_n = [mu](int axis) {
    return normal_component({2 * mu[0], 2 * mu[1]}, axis);
  };
  OperatorRowSpec stress_x;
  stress_x.terms.push_back(
      {[](const Vector&, const Vector& n, int) { return -n[0]; }, P, Deriv::value()});
  stress_x.terms.push_back({two_mu_n(0), U, Deriv::dx(0)});
  stress_x.terms.push_back({mu_n(1), U, Deriv::dx(1)});
  stress_x.terms.push_back({mu_n(1), V, Deriv::dx(0)});
  OperatorRowSpec stress_y;
  stress_y.terms.push_back(
      {[](const Vector&, const Vector& n, int) { return -n[1]; }, P, Deriv::value()});
  stress_y.terms.push_back({two_mu_n(1), V, Deriv::dx(1)});
  stress_y.terms.push_back({mu_n(0), V, Deriv::dx(0)});
  stress_y.terms.push_back({mu_n(0), U, Deriv::dx(1)});
  p.jump_flux_ops = {stress_x, stress_y};

  p.exact.value = [](const Vector& x, int k, int f) {
    const double X = x[0], Y = x[1];
    if (f == U)
      return k == 0 ? Y * (X * X + Y * Y) / 4 : Y / std::sqrt(X * X + Y * Y) - 0.75 * Y;
    if (f == V)
      return k == 0 ? -X * Y * Y / 4 : -X / std::sqrt(X * X + Y * Y) + X * (3 + X * X) / 4;
    return k == 0 ? 5.0 : (-0.75 * X * X * X + 0.375 * X) * Y;
  };
  p.exact.gradient = [](const Vector& x, int k, int f) {
    const double X = x[0], Y = x[1];
    Vector g(2);
    if (k == 0) {
      if (f == U)
        g << X * Y / 2, (X * X + 3 * Y * Y) / 4;
      else if (f == V)
        g << -Y * Y / 4, -X * Y / 2;
      else
        g << 0, 0;
      return g;
    }
    const double rho = std::sqrt(X * X + Y * Y), r3 = rho * rho * rho;
    if (f == U)
      g << -X * Y / r3, X * X / r3 - 0.75;
    else if (f == V)
      g << -Y * Y / r3 + (3 + 3 * X * X) / 4, X * Y / r3;
    else
      g << (-2.25 * X * X + 0.375) * Y, -0.75 * X * X * X + 0.375 * X;
    return g;
  };
  p.exact.hessian = [](const Vector& x, int k, int f) {
    const double X = x[0], Y = x[1];
    Matrix h(2, 2);
    if (k == 0) {
      if (f == U)
        h << Y / 2, X / 2, X / 2, 3 * Y / 2;
      else if (f == V)
        h << 0, -Y / 2, -Y / 2, -X / 2;
      else
        h.setZero();
      return h;
    }
    const double rho2 = X * X + Y * Y, r5 = std::pow(rho2, 2.5);
    if (f == U)
      h << Y * (2 * X * X - Y * Y) / r5, X * (2 * Y * Y - X * X) / r5,  //
          X * (2 * Y * Y - X * X) / r5, -3 * X * X * Y / r5;
    else if (f == V)
      h << 3 * X * Y * Y / r5 + 1.5 * X, Y * (Y * Y - 2 * X * X) / r5,  //
          Y * (Y * Y - 2 * X * X) / r5, X * (X * X - 2 * Y * Y) / r5;
    else
      h << -4.5 * X * Y, -2.25 * X * X + 0.375, -2.25 * X * X + 0.375, 0;
    return h;
  };

  p.covers = {{c, 1.25}, {c, 3.0}};
  p.sampling.interior_spacing = 4.0 / 150.0;
  p.sampling.boundary_counts = {{301, 1}, {301, 1}, {301, 1}, {301, 1}};
  p.sampling.interface_counts = {{1000, 1}};
  p.sampling.preprocessing_M0 = 1000;
  return p;
}

BenchmarkProblem multi2d(std::vector<double> contrast) {
  if (contrast.empty()) contrast = {1.0, 10.0, 100.0, 1000.0};
  if (contrast.size() != 4) throw ConfigError("multi2d: contrast is (beta1..beta4)");
  BenchmarkProblem p;
  p.id = "multi2d";
  p.dim = 2;
  p.field_names = {"u"};
  p.contrast = contrast;

  auto flower_r = [](double th) { return 0.5 - 0.1 * std::cos(5 * th); };
  auto flower_m = [flower_r](const Vector& x) {
    return x.norm() - flower_r(std::atan2(x[1], x[0]));
  };

  Vector lo(2), hi(2);
  lo << -1.0, -1.0;
  hi << 1.0, 1.0;
  auto ring_box = [](double r) {
    Vector l(2), h(2);
    l << -r, -r;
    h << r, r;
    return make_box(l, h);
  };

  LevelSetRegion r0;
  r0.signed_membership = [](const Vector& x) { return x.norm() - 0.2; };
  r0.bounding_box = ring_box(0.2);
  LevelSetRegion r1;
  r1.signed_membership = [flower_m](const Vector& x) {
    return std::max(0.2 - x.norm(), flower_m(x));
  };
  r1.bounding_box = ring_box(0.6);
  LevelSetRegion r2;
  r2.signed_membership = [flower_m](const Vector& x) {
    return std::max(-flower_m(x), x.norm() - 0.8);
  };
  r2.bounding_box = ring_box(0.8);
  LevelSetRegion r3 = make_box_region(lo, hi);
  auto box_m = r3.signed_membership;
  r3.signed_membership = [box_m](const Vector& x) {
    return std::max(box_m(x), 0.8 - x.norm());
  };

  InterfaceSpec flower;
  flower.param_dim = 1;
  flower.param_range[0] = {0.0, 2.0 * kPi};
  flower.rule[0] = GridRule::Periodic;
  flower.orientation = {1, 2};
  flower.chart = [flower_r](const Vector& t, Vector& x, Vector& n) {
    const double th = t[0], r = flower_r(th), dr = 0.5 * std::sin(5 * th);
    const double ct = std::cos(th), st = std::sin(th);
    x.resize(2);
    n.resize(2);
    x << r * ct, r * st;
    n << dr * st + r * ct, -dr * ct + r * st;  // outward rotation of the tangent
    n /= n.norm();
  };

  Vector origin = Vector::Zero(2);
  p.partition.dim = 2;
  p.partition.regions = {r0, r1, r2, r3};
  p.partition.interfaces = {circle_interface(origin, 0.2, 0, 1), flower,
                            circle_interface(origin, 0.8, 2, 3)};
  p.partition.outer_boundary = box_boundary_2d(lo, hi);
  p.partition.bounding_box = make_box(lo, hi);

  p.interior_ops = {diffusion_op(contrast, 2)};
  p.boundary_ops = {dirichlet_op()};
  p.jump_value_ops = {jump_value_op()};
  p.jump_flux_ops = {diffusion_flux_op(contrast, 2)};

  p.exact.value = [](const Vector& x, int k, int) {
    switch (k) {
      case 0: return std::cos(x[1]) + 1.8;
      case 1: return std::exp(x[0]) + 1.3;
      case 2: return std::sin(x[0]) + 0.5;
      default: return -x[0] + std::log(x[1] + 2.0);
    }
  };
  p.exact.gradient = [](const Vector& x, int k, int) {
    Vector g(2);
    switch (k) {
      case 0: g << 0.0, -std::sin(x[1]); break;
      case 1: g << std::exp(x[0]), 0.0; break;
      case 2: g << std::cos(x[0]), 0.0; break;
      default: g << -1.0, 1.0 / (x[1] + 2.0); break;
    }
    return g;
  };
  p.exact.hessian = [](const Vector& x, int k, int) {
    Matrix h = Matrix::Zero(2, 2);
    switch (k) {
      case 0: h(1, 1) = -std::cos(x[1]); break;
      case 1: h(0, 0) = std::exp(x[0]); break;
      case 2: h(0, 0) = -std::sin(x[0]); break;
      default: h(1, 1) = -1.0 / sq(x[1] + 2.0); break;
    }
    return h;
  };

  p.covers = {{origin, 0.35}, {origin, 0.75}, {origin, 1.0}, {origin, 1.6}};
  p.sampling.interior_spacing = 2.0 / 56.0;  // ~3000 interior points
  p.sampling.boundary_counts = {{125, 1}, {125, 1}, {125, 1}, {125, 1}};
  p.sampling.interface_counts = {{500, 1}, {500, 1}, {500, 1}};
  p.sampling.preprocessing_M0 = 400;
  return p;
}

BenchmarkProblem elasticity3d(std::vector<double> contrast) {
  if (contrast.empty()) contrast = {1.0, 10.0, 1.0, 10.0};
  if (contrast.size() != 4)
    throw ConfigError("elasticity3d: contrast is (lambda1, lambda2, mu1, mu2)");
  BenchmarkProblem p;
  p.id = "elasticity3d";
  p.dim = 3;
  p.field_names = {"u", "v", "w"};
  p.contrast = contrast;
  const std::vector<double> lam{contrast[0], contrast[1]};
  const std::vector<double> mu{contrast[2], contrast[3]};

  const double a = 0.15, b = 0.2, cc = 0.25;
  Vector ctr(3), lo(3), hi(3);
  ctr << 0.5, 0.5, 0.5;
  lo << 0.0, 0.0, 0.0;
  hi << 1.0, 1.0, 1.0;

  auto ellipsoid = [ctr, a, b, cc](const Vector& x) {
    return sq((x[0] - ctr[0]) / a) + sq((x[1] - ctr[1]) / b) + sq((x[2] - ctr[2]) / cc) - 1.0;
  };
  LevelSetRegion inside;
  inside.signed_membership = ellipsoid;
  Vector ilo(3), ihi(3);
  ilo << 0.5 - a, 0.5 - b, 0.5 - cc;
  ihi << 0.5 + a, 0.5 + b, 0.5 + cc;
  inside.bounding_box = make_box(ilo, ihi);
  LevelSetRegion outside = make_box_region(lo, hi);
  auto box_m = outside.signed_membership;
  outside.signed_membership = [box_m, ellipsoid](const Vector& x) {
    return std::max(box_m(x), -ellipsoid(x));
  };

  InterfaceSpec gamma;
  gamma.param_dim = 2;
  gamma.param_range[0] = {0.0, 2.0 * kPi};
  gamma.param_range[1] = {0.0, kPi};
  gamma.rule = {GridRule::Periodic, GridRule::Midpoints};
  gamma.orientation = {0, 1};
  gamma.chart = [ctr, a, b, cc](const Vector& t, Vector& x, Vector& n) {
    const double sp = std::sin(t[1]), cp = std::cos(t[1]);
    x.resize(3);
    n.resize(3);
    x << ctr[0] + a * sp * std::cos(t[0]), ctr[1] + b * sp * std::sin(t[0]), ctr[2] + cc * cp;
    n << (x[0] - ctr[0]) / (a * a), (x[1] - ctr[1]) / (b * b), (x[2] - ctr[2]) / (cc * cc);
    n /= n.norm();
  };

  p.partition.dim = 3;
  p.partition.regions = {inside, outside};
  p.partition.interfaces = {gamma};
  p.partition.outer_boundary = box_boundary_3d(lo, hi);
  p.partition.bounding_box = make_box(lo, hi);

  // -div sigma(u), sigma = lambda (div u) I + 2 mu eps(u); constant per side:
  // -(lambda + mu) grad(div u) - mu Lap u.
  auto lam_mu = [&](double s) {  // s * (lambda_k + mu_k)
    return piecewise_coef({s * (lam[0] + mu[0]), s * (lam[1] + mu[1])});
  };
  auto lam2mu = [&](double s) {
    return piecewise_coef({s * (lam[0] + 2 * mu[0]), s * (lam[1] + 2 * mu[1])});
  };
  auto mu_c = [&](double s) { return piecewise_coef({s * mu[0], s * mu[1]}); };

  p.interior_ops.resize(3);
  for (int e = 0; e < 3; ++e) {
    OperatorRowSpec& op = p.interior_ops[static_cast<std::size_t>(e)];
    for (int i = 0; i < 3; ++i)
      op.terms.push_back({i == e ? lam2mu(-1.0) : mu_c(-1.0), e, Deriv::dxx(i, i)});
    for (int f = 0; f < 3; ++f)
      if (f != e) op.terms.push_back({lam_mu(-1.0), f, Deriv::dxx(e, f)});
  }

  p.boundary_ops = {dirichlet_op(0), dirichlet_op(1), dirichlet_op(2)};
  p.jump_value_ops = {jump_value_op(0), jump_value_op(1), jump_value_op(2)};

  // [sigma(u) n]_e = (lambda div u) n_e + mu (d_e u_f + d_f u_e) n_f
  auto coef_n = [](std::vector<double> c, int axis) { return normal_component(std::move(c), axis); };
  p.jump_flux_ops.resize(3);
  for (int e = 0; e < 3; ++e) {
    OperatorRowSpec& op = p.jump_flux_ops[static_cast<std::size_t>(e)];
    for (int f = 0; f < 3; ++f)
      op.terms.push_back({coef_n({lam[0], lam[1]}, e), f, Deriv::dx(f)});
    for (int f = 0; f < 3; ++f) {
      op.terms.push_back({coef_n({mu[0], mu[1]}, f), e, Deriv::dx(f)});
      op.terms.push_back({coef_n({mu[0], mu[1]}, f), f, Deriv::dx(e)});
    }
  }

  auto sep = [](int k, int f) -> Sep3 {
    if (f == 0) {
      if (k == 0) return {[](double s) { return fac_neg(fac_cos_s2(s)); }, fac_exp_neg_s2, fac_sin2pi};
      return {[](double s) { return fac_neg(fac_sin_s2(s)); }, fac_exp_s2, fac_cos2pi};
    }
    if (f == 1) {
      if (k == 0) return {fac_exp_neg_s2, [](double s) { return fac_neg(fac_cos_s2(s)); }, fac_sin2pi};
      return {fac_exp_s2, [](double s) { return fac_neg(fac_sin_s2(s)); }, fac_cos2pi};
    }
    if (k == 0) return {fac_sin2pi, fac_cos_s2, fac_exp_neg_s2};
    return {fac_cos2pi, fac_sin_s2, fac_exp_s2};
  };
  p.exact.value = [sep](const Vector& x, int k, int f) { return sep(k, f).value(x); };
  p.exact.gradient = [sep](const Vector& x, int k, int f) { return sep(k, f).gradient(x); };
  p.exact.hessian = [sep](const Vector& x, int k, int f) { return sep(k, f).hessian(x); };

  p.covers = {{ctr, 0.35}, {ctr, 1.0}};
  p.sampling.interior_spacing = 1.0 / 30.0;  // 29^3 interior grid
  p.sampling.boundary_counts.assign(6, {31, 31});
  p.sampling.interface_counts = {{60, 30}};
  p.sampling.preprocessing_M0 = 500;
  return p;
}

BenchmarkProblem shell3d(std::vector<double> contrast) {
  const bool varying = contrast.empty();  // default: spatially varying beta1
  if (!varying && contrast.size() != 2)
    throw ConfigError("shell3d: contrast is (beta1, beta2) or empty for the varying case");
  BenchmarkProblem p;
  p.id = "shell3d";
  p.dim = 3;
  p.field_names = {"u"};
  p.contrast = contrast;

  const double rin = 0.151, rout = 0.911, r0 = 0.483;
  const std::array<double, 3> amp{0.1, -0.1, 0.15};
  const std::array<double, 3> nk{3.0, 4.0, 7.0};
  const std::array<double, 3> tk{0.5, 1.8, 0.0};

  auto bump = [=](double theta) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += amp[i] * std::cos(nk[i] * (theta - tk[i]));
    return s;
  };
  auto dbump = [=](double theta) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s -= amp[i] * nk[i] * std::sin(nk[i] * (theta - tk[i]));
    return s;
  };
  // Signed radial level set of the convoluted interface.
  auto psi = [=](const Vector& x) {
    const double rho2 = x.squaredNorm(), rho = std::sqrt(rho2);
    if (rho == 0.0) return -r0;
    const double s2 = (x[0] * x[0] + x[1] * x[1]) / rho2;  // sin^2(inclination)
    return rho - r0 * (1.0 + s2 * s2 * bump(std::atan2(x[1], x[0])));
  };

  LevelSetRegion inside;  // between the inner sphere and the interface
  inside.signed_membership = [=](const Vector& x) {
    return std::max(rin - x.norm(), psi(x));
  };
  const double rmax_if = r0 * 1.35;
  Vector blo = Vector::Constant(3, -rmax_if), bhi = Vector::Constant(3, rmax_if);
  inside.bounding_box = make_box(blo, bhi);

  LevelSetRegion outside;
  outside.signed_membership = [=](const Vector& x) {
    return std::max(x.norm() - rout, -psi(x));
  };
  Vector olo = Vector::Constant(3, -rout), ohi = Vector::Constant(3, rout);
  outside.bounding_box = make_box(olo, ohi);

  InterfaceSpec gamma;
  gamma.param_dim = 2;
  gamma.param_range[0] = {0.0, 2.0 * kPi};
  gamma.param_range[1] = {0.0, kPi};
  gamma.rule = {GridRule::Periodic, GridRule::Midpoints};
  gamma.orientation = {0, 1};
  gamma.chart = [=](const Vector& t, Vector& x, Vector& n) {
    const double th = t[0], ph = t[1];
    const double sp = std::sin(ph), cp = std::cos(ph);
    const double s4 = sp * sp * sp * sp;
    const double r = r0 * (1.0 + s4 * bump(th));
    const double rth = r0 * s4 * dbump(th);
    const double rph = r0 * 4.0 * sp * sp * sp * cp * bump(th);
    Vector shat(3), dth(3), dph(3);
    shat << sp * std::cos(th), sp * std::sin(th), cp;
    dth << -sp * std::sin(th), sp * std::cos(th), 0.0;
    dph << cp * std::cos(th), cp * std::sin(th), -sp;
    x = r * shat;
    const Vector a = rth * shat + r * dth;
    const Vector b = rph * shat + r * dph;
    n.resize(3);
    n << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
    if (n.dot(shat) < 0) n = -n;  // outward: from the inner region into the outer
    n /= n.norm();
  };

  p.partition.dim = 3;
  p.partition.regions = {inside, outside};
  p.partition.interfaces = {gamma};
  p.partition.outer_boundary = {sphere_facet(Vector::Zero(3), rin),
                                sphere_facet(Vector::Zero(3), rout)};
  p.partition.bounding_box = make_box(olo, ohi);

  // Diffusion coefficient: varying inside / 1 outside, or piecewise constant.
  std::function<double(const Vector&, int)> beta;
  std::function<Vector(const Vector&, int)> grad_beta;
  if (varying) {
    beta = [](const Vector& x, int k) {
      if (k != 0) return 1.0;
      return 10.0 * (1.0 + 0.2 * std::cos(2 * kPi * (x[0] + x[1])) *
                               std::sin(2 * kPi * (x[0] - x[1])) * std::cos(x[2]));
    };
    grad_beta = [](const Vector& x, int k) {
      Vector g = Vector::Zero(3);
      if (k != 0) return g;
      const double cz = std::cos(x[2]);
      g << 4 * kPi * std::cos(4 * kPi * x[0]) * cz, -4 * kPi * std::cos(4 * kPi * x[1]) * cz,
          -2 * std::cos(2 * kPi * (x[0] + x[1])) * std::sin(2 * kPi * (x[0] - x[1])) *
              std::sin(x[2]);
      return g;
    };
  } else {
    const std::vector<double> b = contrast;
    beta = [b](const Vector&, int k) { return b[static_cast<std::size_t>(k)]; };
    grad_beta = [](const Vector&, int) { return Vector::Zero(3); };
  }

  OperatorRowSpec interior;  // -div(beta grad u) = -beta Lap u - grad beta . grad u
  for (int i = 0; i < 3; ++i) {
    interior.terms.push_back(
        {[beta](const Vector& x, const Vector&, int k) { return -beta(x, k); }, 0,
         Deriv::dxx(i, i)});
    interior.terms.push_back(
        {[grad_beta, i](const Vector& x, const Vector&, int k) { return -grad_beta(x, k)[i]; },
         0, Deriv::dx(i)});
  }
  p.interior_ops = {interior};
  p.boundary_ops = {dirichlet_op()};
  p.jump_value_ops = {jump_value_op()};
  OperatorRowSpec flux;  // [beta grad u . n]
  for (int i = 0; i < 3; ++i)
    flux.terms.push_back(
        {[beta, i](const Vector& x, const Vector& n, int k) { return beta(x, k) * n[i]; }, 0,
         Deriv::dx(i)});
  p.jump_flux_ops = {flux};

  // Exact: sin(2x) cos(2y) e^z inside; T5((y-x)/3) log(x+y+3) cos(z) outside.
  const Sep3 in{fac_sin2, fac_cos2, fac_exp};
  auto t5 = [](double s, double& v, double& d1, double& d2) {
    v = 16 * std::pow(s, 5) - 20 * std::pow(s, 3) + 5 * s;
    d1 = 80 * std::pow(s, 4) - 60 * s * s + 5;
    d2 = 320 * std::pow(s, 3) - 120 * s;
  };
  struct Outside {
    double v, gx, gy, gz, hxx, hxy, hxz, hyy, hyz, hzz;
  };
  auto outside_eval = [t5](const Vector& x) {
    Outside o;
    const double s = (x[1] - x[0]) / 3.0, t = x[0] + x[1] + 3.0;
    double T, T1, T2;
    t5(s, T, T1, T2);
    const double L = std::log(t), Li = 1.0 / t, Li2 = Li * Li;
    const double cz = std::cos(x[2]), sz = std::sin(x[2]);
    o.v = T * L * cz;
    o.gx = (-T1 / 3 * L + T * Li) * cz;
    o.gy = (T1 / 3 * L + T * Li) * cz;
    o.gz = -T * L * sz;
    o.hxx = (T2 / 9 * L - 2.0 / 3 * T1 * Li - T * Li2) * cz;
    o.hyy = (T2 / 9 * L + 2.0 / 3 * T1 * Li - T * Li2) * cz;
    o.hxy = (-T2 / 9 * L - T * Li2) * cz;
    o.hxz = -(-T1 / 3 * L + T * Li) * sz;
    o.hyz = -(T1 / 3 * L + T * Li) * sz;
    o.hzz = -T * L * cz;
    return o;
  };

  p.exact.value = [in, outside_eval](const Vector& x, int k, int) {
    return k == 0 ? in.value(x) : outside_eval(x).v;
  };
  p.exact.gradient = [in, outside_eval](const Vector& x, int k, int) {
    if (k == 0) return in.gradient(x);
    const Outside o = outside_eval(x);
    Vector g(3);
    g << o.gx, o.gy, o.gz;
    return g;
  };
  p.exact.hessian = [in, outside_eval](const Vector& x, int k, int) {
    if (k == 0) return in.hessian(x);
    const Outside o = outside_eval(x);
    Matrix h(3, 3);
    h << o.hxx, o.hxy, o.hxz, o.hxy, o.hyy, o.hyz, o.hxz, o.hyz, o.hzz;
    return h;
  };

  p.covers = {{Vector::Zero(3), 0.75}, {Vector::Zero(3), 1.0}};
  p.sampling.interior_spacing = 0.064;  // ~12000 interior points
  p.sampling.boundary_counts = {{20, 10}, {60, 30}};  // 200 inner + 1800 outer
  p.sampling.interface_counts = {{50, 15}};           // ~750
  p.sampling.preprocessing_M0 = 250;
  return p;
}

}  // namespace

BenchmarkProblem make_problem(const std::string& id, std::vector<double> contrast) {
  BenchmarkProblem p = [&] {
    if (id == "interval1d") return interval1d(std::move(contrast), false);
    if (id == "interval1d-single") return interval1d(std::move(contrast), true);
    if (id == "poisson2d") return poisson2d(std::move(contrast));
    if (id == "circle2d") return circle2d(std::move(contrast));
    if (id == "stokes2d") return stokes2d(std::move(contrast));
    if (id == "multi2d") return multi2d(std::move(contrast));
    if (id == "elasticity3d") return elasticity3d(std::move(contrast));
    if (id == "shell3d") return shell3d(std::move(contrast));
    throw ConfigError("make_problem: unknown id '" + id + "'");
  }();
  if (p.region_group.empty())
    for (int k = 0; k < p.num_regions(); ++k) p.region_group.push_back(k);
  return p;
}

std::vector<std::string> problem_ids() {
  return {"interval1d", "interval1d-single", "poisson2d", "circle2d",
          "stokes2d",   "multi2d",           "elasticity3d", "shell3d"};
}

double apply_to_exact(const OperatorRowSpec& spec, const ExactSolution& exact, const Vector& x,
                      const Vector& n, int k) {
  double out = 0.0;
  for (const Term& term : spec.terms) {
    const double c = term.coef(x, n, k);
    if (c == 0.0) continue;
    switch (term.deriv.order) {
      case 0:
        out += c * exact.value(x, k, term.field);
        break;
      case 1:
        out += c * exact.gradient(x, k, term.field)[term.deriv.i];
        break;
      default:
        out += c * exact.hessian(x, k, term.field)(term.deriv.i, term.deriv.j);
        break;
    }
  }
  return out;
}

DataFn BenchmarkProblem::interior_data(int eq, int region) const {
  const OperatorRowSpec& op = interior_ops[static_cast<std::size_t>(eq)];
  const ExactSolution& ex = exact;
  return [&op, &ex, region](const Vector& x, const Vector& n) {
    return apply_to_exact(op, ex, x, n, region);
  };
}

DataFn BenchmarkProblem::boundary_data(int eq) const {
  const OperatorRowSpec& op = boundary_ops[static_cast<std::size_t>(eq)];
  const ExactSolution& ex = exact;
  const DomainPartition& part = partition;
  return [&op, &ex, &part](const Vector& x, const Vector& n) {
    return apply_to_exact(op, ex, x, n, classify(part, x));
  };
}

DataFn BenchmarkProblem::jump_value_data(int eq, int interface_index) const {
  const OperatorRowSpec& op = jump_value_ops[static_cast<std::size_t>(eq)];
  const ExactSolution& ex = exact;
  const auto [i, j] = partition.interfaces[static_cast<std::size_t>(interface_index)].orientation;
  return [&op, &ex, i = i, j = j](const Vector& x, const Vector& n) {
    return apply_to_exact(op, ex, x, n, i) - apply_to_exact(op, ex, x, n, j);
  };
}

DataFn BenchmarkProblem::jump_flux_data(int eq, int interface_index) const {
  const OperatorRowSpec& op = jump_flux_ops[static_cast<std::size_t>(eq)];
  const ExactSolution& ex = exact;
  const auto [i, j] = partition.interfaces[static_cast<std::size_t>(interface_index)].orientation;
  return [&op, &ex, i = i, j = j](const Vector& x, const Vector& n) {
    return apply_to_exact(op, ex, x, n, i) - apply_to_exact(op, ex, x, n, j);
  };
}

Matrix exact_values(const BenchmarkProblem& problem, const Matrix& points,
                    const IntVector& labels) {
  Matrix out(points.cols(), problem.fields());
  for (Index p = 0; p < points.cols(); ++p)
    for (int f = 0; f < problem.fields(); ++f)
      out(p, f) = problem.exact.value(points.col(p), labels[p], f);
  return out;
}

std::vector<Matrix> exact_gradients(const BenchmarkProblem& problem, const Matrix& points,
                                    const IntVector& labels) {
  std::vector<Matrix> out(static_cast<std::size_t>(problem.fields()),
                          Matrix(points.cols(), points.rows()));
  for (Index p = 0; p < points.cols(); ++p)
    for (int f = 0; f < problem.fields(); ++f)
      out[static_cast<std::size_t>(f)].row(p) =
          problem.exact.gradient(points.col(p), labels[p], f).transpose();
  return out;
}

ErrorMetrics error_metrics(const SolutionModel& model, const BenchmarkProblem& problem,
                           const LabeledPoints& test, bool gradients) {
  const Matrix got = evaluate(model, test.points, test.region);
  const Matrix want = exact_values(problem, test.points, test.region);

  ErrorMetrics m;
  const int F = problem.fields();
  m.rl2.resize(static_cast<std::size_t>(F));
  m.rlinf.resize(static_cast<std::size_t>(F));
  for (int f = 0; f < F; ++f) {
    const double den2 = want.col(f).norm();
    const double deninf = want.col(f).cwiseAbs().maxCoeff();
    if (den2 == 0.0 || deninf == 0.0)
      throw NumericalError("error_metrics: zero-norm exact solution, metric undefined");
    m.rl2[static_cast<std::size_t>(f)] = (got.col(f) - want.col(f)).norm() / den2;
    m.rlinf[static_cast<std::size_t>(f)] =
        (got.col(f) - want.col(f)).cwiseAbs().maxCoeff() / deninf;
  }
  m.rl2_all = (got - want).norm() / want.norm();
  m.rlinf_all = (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff();

  if (gradients) {
    const auto got_g = evaluate_gradient(model, test.points, test.region);
    const auto want_g = exact_gradients(problem, test.points, test.region);
    double num2 = 0, den2 = 0, numi = 0, deni = 0;
    for (int f = 0; f < F; ++f) {
      num2 += (got_g[static_cast<std::size_t>(f)] - want_g[static_cast<std::size_t>(f)])
                  .squaredNorm();
      den2 += want_g[static_cast<std::size_t>(f)].squaredNorm();
      numi = std::max(numi, (got_g[static_cast<std::size_t>(f)] -
                             want_g[static_cast<std::size_t>(f)])
                                .cwiseAbs()
                                .maxCoeff());
      deni = std::max(deni, want_g[static_cast<std::size_t>(f)].cwiseAbs().maxCoeff());
    }
    m.rl2_grad = std::sqrt(num2 / den2);
    m.rlinf_grad = numi / deni;
  }
  return m;
}

}  // namespace mtn
