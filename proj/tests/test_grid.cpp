#include <cmath>

#include "core/grid.hpp"
#include "doctest.h"

using namespace mfg;

namespace {

Grid unit_grid_2d(int n) {
  GridSpec s;
  s.dim = 2;
  s.nx = {n, n, 1};
  return build_grid(s);
}

// Least-squares slope of log2(err) against refinement level (h halving).
double fitted_order(const std::vector<double>& errs) {
  const int n = static_cast<int>(errs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = -static_cast<double>(i);  // log2 h up to a constant
    const double y = std::log2(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_SUITE_BEGIN("grid");

TEST_CASE("indexing round trip and spacing") {
  GridSpec s;
  s.dim = 3;
  s.lo = {0.0, -1.0, 2.0};
  s.hi = {1.0, 1.0, 3.0};
  s.nx = {4, 7, 5};
  Grid g = build_grid(s);
  CHECK(g.n_space == 4 * 7 * 5);
  CHECK(g.h[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(g.h[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
  CHECK(g.h[2] == doctest::Approx(0.25).epsilon(1e-15));
  for (std::int64_t k = 0; k < g.n_space; ++k) CHECK(g.index(g.unindex(k)) == k);
  // last axis is fastest
  CHECK(g.index({0, 0, 1}) == 1);
  CHECK(g.index({0, 1, 0}) == 5);
  CHECK(g.index({1, 0, 0}) == 35);
}

TEST_CASE("build rejects bad specs") {
  GridSpec s;
  s.dim = 2;
  s.nx = {3, 8, 1};
  CHECK_THROWS_AS(build_grid(s), Error);
  s.nx = {8, 8, 1};
  s.hi[0] = s.lo[0];
  CHECK_THROWS_AS(build_grid(s), Error);
}

TEST_CASE("trapezoid quadrature closed forms") {
  // composite trapezoid of x^2 on [0,1] with h = 0.1 is exactly 1/3 + h^2/6
  GridSpec s;
  s.dim = 1;
  s.nx = {11, 1, 1};
  Grid g = build_grid(s);
  ScalarField f = sample(g, [](const std::array<double, 3>& x) { return x[0] * x[0]; });
  CHECK(integrate(f) == doctest::Approx(0.335).epsilon(1e-15));

  // exact for linears: boundary integral of x1 over the unit square is 2
  Grid q = unit_grid_2d(11);
  ScalarField lin = sample(q, [](const std::array<double, 3>& x) { return x[0]; });
  CHECK(integrate_boundary(lin) == doctest::Approx(2.0).epsilon(1e-14));

  // plain volume
  GridSpec sv;
  sv.dim = 2;
  sv.hi = {2.0, 3.0, 1.0};
  sv.nx = {6, 9, 1};
  Grid gv = build_grid(sv);
  CHECK(integrate(make_scalar(gv, 1.0)) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("space-time quadrature") {
  GridSpec s;
  s.dim = 1;
  s.nx = {5, 1, 1};
  s.nt = 4;
  s.horizon = 2.0;
  Grid g = build_grid(s);
  SpaceTimeField f = sample(g, [](const std::array<double, 3>&, double t) { return t; });
  CHECK(integrate(f) == doctest::Approx(2.0).epsilon(1e-14));  // |Omega| * T^2/2

  double surf = integrate_boundary_time(
      g, [&](int, std::int64_t, int j) { return g.time(j); });
  CHECK(surf == doctest::Approx(2.0 * 2.0).epsilon(1e-14));  // two endpoints, T^2/2 each
}

TEST_CASE("one-sided boundary stencils are exact on low-degree polynomials") {
  GridSpec s;
  s.dim = 1;
  s.nx = {11, 1, 1};
  Grid g = build_grid(s);
  ScalarField quad =
      sample(g, [](const std::array<double, 3>& x) { return x[0] * x[0] + 2.0 * x[0]; });
  ScalarField dq = gradient_component(quad, 0);
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    const double x = g.coord(0, static_cast<int>(k));
    CHECK(dq.data[k] == doctest::Approx(2.0 * x + 2.0).epsilon(1e-12));
  }
  ScalarField cub = sample(g, [](const std::array<double, 3>& x) {
    return x[0] * x[0] * x[0];
  });
  ScalarField lc = laplacian(cub);
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    const double x = g.coord(0, static_cast<int>(k));
    CHECK(lc.data[k] == doctest::Approx(6.0 * x).epsilon(1e-10));
  }
}

TEST_CASE("gradient and laplacian converge at second order") {
  auto fn = [](const std::array<double, 3>& x) {
    return std::sin(M_PI * x[0]) * std::exp(x[1]);
  };
  auto dfndx = [](const std::array<double, 3>& x) {
    return M_PI * std::cos(M_PI * x[0]) * std::exp(x[1]);
  };
  auto lap_fn = [](const std::array<double, 3>& x) {
    return (1.0 - M_PI * M_PI) * std::sin(M_PI * x[0]) * std::exp(x[1]);
  };
  // divergence gets its own analytic vector field
  auto div_fn = [](const std::array<double, 3>& x) {
    return M_PI * std::cos(M_PI * x[0]) * std::exp(x[1]) - x[0] * std::sin(x[0] * x[1]);
  };
  std::vector<double> eg, el, ed;
  for (int n : {9, 17, 33}) {
    Grid g = unit_grid_2d(n);
    ScalarField f = sample(g, fn);
    ScalarField gx = gradient_component(f, 0);
    ScalarField lf = laplacian(f);
    VectorField w = make_vector(g);
    for (std::int64_t k = 0; k < g.n_space; ++k) {
      const auto x = g.node(g.unindex(k));
      w.comp[0][k] = std::sin(M_PI * x[0]) * std::exp(x[1]);
      w.comp[1][k] = std::cos(x[0] * x[1]);
    }
    ScalarField dv = divergence(w);
    double e1 = 0, e2 = 0, e3 = 0;
    for (std::int64_t k = 0; k < g.n_space; ++k) {
      const auto x = g.node(g.unindex(k));
      e1 = std::max(e1, std::abs(gx.data[k] - dfndx(x)));
      e2 = std::max(e2, std::abs(lf.data[k] - lap_fn(x)));
      e3 = std::max(e3, std::abs(dv.data[k] - div_fn(x)));
    }
    eg.push_back(e1);
    el.push_back(e2);
    ed.push_back(e3);
  }
  CHECK(fitted_order(eg) > 1.8);
  CHECK(fitted_order(el) > 1.7);
  CHECK(fitted_order(ed) > 1.7);
  CHECK(fitted_order(eg) < 2.6);
}

TEST_CASE("boundary traces of a linear field") {
  Grid g = unit_grid_2d(9);
  ScalarField f = sample(g, [](const std::array<double, 3>& x) {
    return 2.0 + 3.0 * x[0] - x[1];
  });
  BoundaryTrace t = restrict_to_boundary(f);
  // outward normal derivatives per face: x1-low -3, x1-high +3, x2-low +1, x2-high -1
  const double expect[4] = {-3.0, 3.0, 1.0, -1.0};
  for (int fc = 0; fc < 4; ++fc)
    for (std::int64_t fi = 0; fi < face_node_count(g, fc); ++fi) {
      CHECK(t.nder(fc, fi, 0) == doctest::Approx(expect[fc]).epsilon(1e-12));
      const auto mi = face_node_multi(g, fc, fi);
      const auto x = g.node(mi);
      CHECK(t.val(fc, fi, 0) ==
            doctest::Approx(2.0 + 3.0 * x[0] - x[1]).epsilon(1e-13));
    }
}

TEST_CASE("face bookkeeping") {
  GridSpec s;
  s.dim = 3;
  s.nx = {4, 5, 6};
  Grid g = build_grid(s);
  CHECK(face_node_count(g, 0) == 30);
  CHECK(face_node_count(g, 2) == 24);
  CHECK(face_node_count(g, 4) == 20);
  std::int64_t inner = 0;
  for (std::int64_t fi = 0; fi < face_node_count(g, 0); ++fi)
    if (face_node_tangentially_interior(g, 0, fi)) ++inner;
  CHECK(inner == 3 * 4);
  // face nodes sit on the right coordinate plane
  for (std::int64_t fi = 0; fi < face_node_count(g, 1); ++fi)
    CHECK(face_node_multi(g, 1, fi)[0] == 3);
}

TEST_CASE("refinement doubles cells") {
  GridSpec s;
  s.dim = 2;
  s.nx = {9, 17, 1};
  s.nt = 4;
  s.horizon = 1.0;
  GridSpec r = refine(s);
  CHECK(r.nx[0] == 17);
  CHECK(r.nx[1] == 33);
  CHECK(r.nt == 8);
  Grid g0 = build_grid(s), g1 = build_grid(r);
  CHECK(g1.h[0] == doctest::Approx(0.5 * g0.h[0]).epsilon(1e-15));
}

TEST_SUITE_END();
