#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/cauchy.hpp"
#include "core/field_io.hpp"
#include "doctest.h"

using namespace mfg;

namespace {

constexpr double kPi = 3.14159265358979323846;

Grid square(int n, int nt, double horizon) {
  GridSpec s;
  s.dim = 2;
  s.lo = {0.0, 0.0, 0.0};
  s.hi = {1.0, 1.0, 0.0};
  s.nx = {n, n, 1};
  s.nt = nt;
  s.horizon = horizon;
  return build_grid(s);
}

Grid rect(int n0, int n1, int nt, double horizon) {
  GridSpec s;
  s.dim = 2;
  s.lo = {0.0, 0.0, 0.0};
  s.hi = {1.0, 1.5, 0.0};
  s.nx = {n0, n1, 1};
  s.nt = nt;
  s.horizon = horizon;
  return build_grid(s);
}

// Modified Bessel function I0 by its power series; converges to machine
// precision for the small arguments used here.
double bessel_i0(double a) {
  double term = 1.0, acc = 1.0;
  const double q = 0.25 * a * a;
  for (int j = 1; j < 40; ++j) {
    term *= q / (static_cast<double>(j) * j);
    acc += term;
    if (term < 1e-18 * acc) break;
  }
  return acc;
}

double outward_sign(int f) { return face_side(f) == 0 ? -1.0 : 1.0; }

}  // namespace

TEST_SUITE("cauchy") {

// ---- extraction ----

TEST_CASE("constant runs measure flat values and zero fluxes") {
  const Grid g = square(9, 4, 1.0);
  // Dyadic constants make every one sided stencil cancel without rounding,
  // so these records can be pinned bitwise.
  const SpaceTimeField v = make_spacetime(g, 0.75);
  const SpaceTimeField m = make_spacetime(g, 0.5);
  const MFGCoefficients co = constant_coefficients(g, 1.25, 0.75);

  const MeasurementC1 c1 = extract_c1(v, m, co);
  for (int f = 0; f < 4; ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (int j = 0; j < g.levels; ++j)
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        CHECK(c1.v.val(f, fi, j) == 0.75);
        CHECK(c1.v.nder(f, fi, j) == 0.0);
        CHECK(c1.m.val(f, fi, j) == 0.5);
        CHECK(c1.m.nder(f, fi, j) == 0.0);
        CHECK(c1.hamiltonian_flux[f][static_cast<std::size_t>(j * nf + fi)] == 0.0);
      }
  }
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    CHECK(c1.v_start[k] == 0.75);
    CHECK(c1.v_end[k] == 0.75);
    CHECK(c1.m_start[k] == 0.5);
    CHECK(c1.m_end[k] == 0.5);
  }
  CHECK(energy_integral_from_boundary(c1, co) == 0.0);

  // Generic constants pick up one rounding step in the stencil weights; the
  // derivative streams sit at the floor eps/h instead of exact zero.
  const MeasurementC1 cg =
      extract_c1(make_spacetime(g, 0.7), make_spacetime(g, 0.4), co);
  for (int f = 0; f < 4; ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (int j = 0; j < g.levels; ++j)
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        CHECK(std::abs(cg.v.nder(f, fi, j)) < 1e-14);
        CHECK(std::abs(cg.m.nder(f, fi, j)) < 1e-14);
      }
  }

  const MeasurementC2 c2 = extract_c2(make_scalar(build_grid(GridSpec{2,
      {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, {9, 9, 1}, 0, 0.0}), 2.5));
  for (int f = 0; f < 4; ++f)
    for (double x : c2.flux_diff[f]) CHECK(x == 0.0);
  for (int f = 0; f < 4; ++f)
    for (double x : c2.m.normal_deriv[f]) CHECK(x == 0.0);
}

TEST_CASE("manufactured lateral traces converge at second order") {
  auto vf = [](const std::array<double, 3>& x, double t) {
    return std::sin(1.1 * x[0] + 0.4) * std::cos(0.7 * x[1] - 0.2) * (1.0 + 0.5 * t);
  };
  auto mf = [](const std::array<double, 3>& x, double t) {
    return std::exp(0.3 * x[0] - 0.2 * x[1]) * (1.0 + 0.1 * t);
  };
  auto sf = [](const std::array<double, 3>& x, double t) {
    return 1.0 + 0.2 * x[0] * x[1] + 0.05 * t;
  };
  auto kf = [](const std::array<double, 3>& x, double t) {
    return 0.9 + 0.1 * x[1] + 0.02 * t;
  };
  // Space gradients of v and of the product sigma*m, worked out by hand.
  auto dv = [&](int a, const std::array<double, 3>& x, double t) {
    if (a == 0) return 1.1 * std::cos(1.1 * x[0] + 0.4) * std::cos(0.7 * x[1] - 0.2) * (1.0 + 0.5 * t);
    return -0.7 * std::sin(1.1 * x[0] + 0.4) * std::sin(0.7 * x[1] - 0.2) * (1.0 + 0.5 * t);
  };
  auto dsm = [&](int a, const std::array<double, 3>& x, double t) {
    const double m = mf(x, t);
    if (a == 0) return m * (0.2 * x[1] + 0.3 * sf(x, t));
    return m * (0.2 * x[0] - 0.2 * sf(x, t));
  };

  struct Errs {
    double ev, em, eh;
  };
  auto run = [&](int n0, int n1) {
    const Grid g = rect(n0, n1, 3, 0.6);
    const SpaceTimeField v = sample(g, vf);
    const SpaceTimeField m = sample(g, mf);
    const MFGCoefficients co = make_coefficients(g, sf, kf);
    const MeasurementC1 c1 = extract_c1(v, m, co);
    Errs e{0.0, 0.0, 0.0};
    for (int f = 0; f < 4; ++f) {
      const int a = face_axis(f);
      const std::int64_t nf = face_node_count(g, f);
      for (int j = 0; j < g.levels; ++j) {
        const double t = g.time(j);
        for (std::int64_t fi = 0; fi < nf; ++fi) {
          const auto mi = face_node_multi(g, f, fi);
          const auto x = g.node(mi);
          const std::int64_t k = g.index(mi);
          // values are plain copies of the field at the wall
          CHECK(c1.v.val(f, fi, j) == v.at(j, k));
          CHECK(c1.m.val(f, fi, j) == m.at(j, k));
          const double sgn = outward_sign(f);
          e.ev = std::max(e.ev, std::abs(c1.v.nder(f, fi, j) - sgn * dv(a, x, t)));
          e.em = std::max(e.em, std::abs(c1.m.nder(f, fi, j) - sgn * dsm(a, x, t)));
          const double hf = c1.hamiltonian_flux[f][static_cast<std::size_t>(j * nf + fi)];
          e.eh = std::max(e.eh, std::abs(hf - kf(x, t) * sgn * dv(a, x, t)));
        }
      }
    }
    return e;
  };

  const Errs coarse = run(9, 13);
  const Errs fine = run(17, 25);
  CHECK(coarse.ev > 1e-6);
  CHECK(coarse.em > 1e-6);
  CHECK(coarse.eh > 1e-6);
  CHECK(fine.ev <= 0.35 * coarse.ev);
  CHECK(fine.em <= 0.35 * coarse.em);
  CHECK(fine.eh <= 0.35 * coarse.eh);
}

TEST_CASE("stationary cauchy pairs expose the raw two point flux") {
  GridSpec s{2, {0.0, 0.0, 0.0}, {1.0, 1.5, 0.0}, {11, 9, 1}, 0, 0.0};
  const Grid g = build_grid(s);

  const ScalarField m = sample(g, [](const std::array<double, 3>& x) {
    return std::exp(0.3 * x[0] - 0.2 * x[1]) + 0.1 * std::sin(2.0 * x[0] * x[1]);
  });
  const MeasurementC2 c2 = extract_c2(m);
  for (int f = 0; f < 4; ++f) {
    const int a = face_axis(f);
    const std::int64_t nf = face_node_count(g, f);
    REQUIRE(static_cast<std::int64_t>(c2.flux_diff[f].size()) == nf);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      auto mi = face_node_multi(g, f, fi);
      auto inner = mi;
      inner[a] = face_side(f) == 0 ? 1 : g.nx(a) - 2;
      const double expect = (m.data[g.index(mi)] - m.data[g.index(inner)]) / g.h[a];
      CHECK(c2.flux_diff[f][static_cast<std::size_t>(fi)] == expect);
    }
  }

  // On an affine density both the three point derivative and the two point
  // quotient reproduce the slope to rounding.
  const ScalarField lin = sample(g, [](const std::array<double, 3>& x) {
    return 2.0 + 0.3 * x[0] - 0.2 * x[1];
  });
  const MeasurementC2 cl = extract_c2(lin);
  const std::array<double, 2> slope{0.3, -0.2};
  for (int f = 0; f < 4; ++f) {
    const int a = face_axis(f);
    const double want = outward_sign(f) * slope[static_cast<std::size_t>(a)];
    for (std::int64_t fi = 0; fi < face_node_count(g, f); ++fi) {
      CHECK(cl.m.nder(f, fi, 0) == doctest::Approx(want).epsilon(1e-11));
      CHECK(cl.flux_diff[f][static_cast<std::size_t>(fi)] ==
            doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("interior edits away from the boundary never reach the records") {
  const Grid g = square(11, 4, 1.0);
  auto vf = [](const std::array<double, 3>& x, double t) {
    return std::sin(x[0] + 0.3) * std::cos(x[1]) + 0.2 * t;
  };
  auto mf = [](const std::array<double, 3>& x, double t) {
    return std::exp(0.2 * x[0] + 0.1 * x[1]) * (1.0 + 0.05 * t);
  };
  const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
  const SpaceTimeField v = sample(g, vf);
  const SpaceTimeField m = sample(g, mf);

  SpaceTimeField v2 = v;
  SpaceTimeField m2 = m;
  // bump three node layers in from every wall, at interior times only
  for (int j = 1; j < g.levels - 1; ++j)
    for (int i0 = 3; i0 <= 7; ++i0)
      for (int i1 = 3; i1 <= 7; ++i1) {
        v2.at(j, g.index({i0, i1, 0})) += 5.0;
        m2.at(j, g.index({i0, i1, 0})) += 3.0;
      }

  const MeasurementC1 a = extract_c1(v, m, co);
  const MeasurementC1 b = extract_c1(v2, m2, co);
  for (int f = 0; f < 4; ++f) {
    CHECK(a.v.value[f] == b.v.value[f]);
    CHECK(a.v.normal_deriv[f] == b.v.normal_deriv[f]);
    CHECK(a.m.value[f] == b.m.value[f]);
    CHECK(a.m.normal_deriv[f] == b.m.normal_deriv[f]);
    CHECK(a.hamiltonian_flux[f] == b.hamiltonian_flux[f]);
  }
  CHECK(a.v_start.data == b.v_start.data);
  CHECK(a.v_end.data == b.v_end.data);
  CHECK(a.m_start.data == b.m_start.data);
  CHECK(a.m_end.data == b.m_end.data);

  // Same story for stationary records, phrased through the equivalence.
  const ScalarField ms = slice(m, 0);
  ScalarField ms2 = ms;
  for (int i0 = 3; i0 <= 7; ++i0)
    for (int i1 = 3; i1 <= 7; ++i1) ms2[g.index({i0, i1, 0})] += 3.0;
  const MeasurementC2 ca = extract_c2(ms);
  const MeasurementC2 cb = extract_c2(ms2);
  CHECK(c2_identical(ca, ca));
  CHECK(c2_identical(ca, cb));
  CHECK(c2_identical(cb, ca));

  // A bump one layer in lands inside the derivative stencils and must show.
  ScalarField ms3 = ms;
  ms3[g.index({1, 5, 0})] += 1.0;
  CHECK(!c2_identical(ca, extract_c2(ms3)));
}

// ---- energy bookkeeping ----

TEST_CASE("boundary bookkeeping reproduces the interior energy integral") {
  // Static pair: m = exp(-v) makes the transport side exact for any v, and
  // the running cost F = -lap v + |grad v|^2/2 closes the value side. The
  // whole energy integral collapses to a wall term with the closed form
  // 0.4 pi T I0(0.3), which pins both evaluation routes independently.
  auto vfun = [](const std::array<double, 3>& x) {
    return 0.3 * std::cos(kPi * x[0]) + 0.2 * std::sin(kPi * x[1]);
  };
  auto grad2 = [](const std::array<double, 3>& x) {
    const double g0 = -0.3 * kPi * std::sin(kPi * x[0]);
    const double g1 = 0.2 * kPi * std::cos(kPi * x[1]);
    return g0 * g0 + g1 * g1;
  };
  const double T = 0.8;
  const double exact = 0.4 * kPi * T * bessel_i0(0.3);

  struct Vals {
    double boundary, volume;
  };
  auto run = [&](int n) {
    const Grid g = square(n, 3, T);
    const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
    const SpaceTimeField v =
        sample(g, [&](const std::array<double, 3>& x, double) { return vfun(x); });
    const SpaceTimeField m = sample(
        g, [&](const std::array<double, 3>& x, double) { return std::exp(-vfun(x)); });
    const MeasurementC1 c1 = extract_c1(v, m, co);
    // Independent route: volume quadrature of the analytic running integrand
    // (F + |grad v|^2/2) m = (pi^2 v + |grad v|^2) exp(-v).
    const SpaceTimeField run_cost =
        sample(g, [&](const std::array<double, 3>& x, double) {
          return (kPi * kPi * vfun(x) + grad2(x)) * std::exp(-vfun(x));
        });
    return Vals{energy_integral_from_boundary(c1, co), integrate(run_cost)};
  };

  const Vals c = run(9);
  const Vals f = run(17);
  const double ebc = std::abs(c.boundary - exact);
  const double ebf = std::abs(f.boundary - exact);
  const double evc = std::abs(c.volume - exact);
  const double evf = std::abs(f.volume - exact);
  CHECK(ebc > 1e-7);
  CHECK(evc > 1e-7);
  CHECK(ebf <= 0.35 * ebc);
  CHECK(evf <= 0.35 * evc);
  // the headline identity: boundary route against volume route
  const double dc = std::abs(c.boundary - c.volume);
  const double df = std::abs(f.boundary - f.volume);
  CHECK(dc > 1e-8);
  CHECK(df <= 0.45 * dc);

  // Doubling the density data doubles the functional exactly; every term in
  // the bookkeeping is linear in the measured m streams.
  const Grid g = square(9, 3, T);
  const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
  const SpaceTimeField v =
      sample(g, [&](const std::array<double, 3>& x, double) { return vfun(x); });
  const SpaceTimeField m = sample(
      g, [&](const std::array<double, 3>& x, double) { return std::exp(-vfun(x)); });
  MeasurementC1 c1 = extract_c1(v, m, co);
  const double base = energy_integral_from_boundary(c1, co);
  for (int fc = 0; fc < 4; ++fc) {
    for (double& x : c1.m.value[fc]) x *= 2.0;
    for (double& x : c1.m.normal_deriv[fc]) x *= 2.0;
  }
  for (double& x : c1.m_start.data) x *= 2.0;
  for (double& x : c1.m_end.data) x *= 2.0;
  CHECK(energy_integral_from_boundary(c1, co) == 2.0 * base);
}

TEST_CASE("zero running cost reads as zero from the boundary") {
  // v constant and m a decaying heat mode solve the coupled system with
  // F identically zero, so the boundary bookkeeping should report nothing
  // but its own discretization error.
  const double T = 0.05;
  auto run = [&](int n, int nt) {
    const Grid g = square(n, nt, T);
    const MFGCoefficients co = constant_coefficients(g, 1.0, 0.9);
    const SpaceTimeField v = make_spacetime(g, 0.7);
    // The phase keeps the two x0 walls inequivalent; an unshifted mode sees
    // its stencil errors cancel wall against wall.
    const SpaceTimeField m = sample(g, [](const std::array<double, 3>& x, double t) {
      return 1.0 + 0.4 * std::exp(-kPi * kPi * t) * std::cos(kPi * x[0] + 0.3);
    });
    return energy_integral_from_boundary(extract_c1(v, m, co), co);
  };
  const double coarse = run(9, 4);
  const double fine = run(17, 16);
  CHECK(std::abs(coarse) > 1e-7);
  CHECK(std::abs(coarse) < 1e-2);
  CHECK(std::abs(fine) <= 0.4 * std::abs(coarse));
}

TEST_CASE("power law coefficients return intact from boundary data") {
  const double T = 1.0;

  SUBCASE("closed form inversion is exact") {
    const Grid g = square(9, 5, T);
    const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
    // alpha = 0.7, k = 2, census c = 0.5: the value function decays linearly
    // at rate alpha c^k and the density never moves.
    const SpaceTimeField v = sample(
        g, [](const std::array<double, 3>&, double t) { return 0.175 * (1.0 - t); });
    const SpaceTimeField m = make_spacetime(g, 0.5);
    const MeasurementC1 c1 = extract_c1(v, m, co);
    const double alpha = recover_power_coefficient(c1, co, 2, 0.5);
    CHECK(std::abs(alpha - 0.7) <= 1e-12);

    // k = 0 reads the same story as a constant running cost F = alpha.
    const SpaceTimeField v0 = sample(
        g, [](const std::array<double, 3>&, double t) { return 0.7 * (1.0 - t); });
    const MeasurementC1 c1k0 = extract_c1(v0, m, co);
    CHECK(std::abs(recover_power_coefficient(c1k0, co, 0, 0.5) - 0.7) <= 1e-12);
  }

  SUBCASE("zero coefficient recovers as zero") {
    const Grid g = square(9, 5, T);
    const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
    const SpaceTimeField v = make_spacetime(g, 0.0);
    const SpaceTimeField m = make_spacetime(g, 0.5);
    const MeasurementC1 c1 = extract_c1(v, m, co);
    CHECK(recover_power_coefficient(c1, co, 2, 0.5) == 0.0);
  }

  SUBCASE("degenerate census levels and powers are rejected") {
    const Grid g = square(9, 5, T);
    const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
    const MeasurementC1 c1 =
        extract_c1(make_spacetime(g, 0.0), make_spacetime(g, 0.5), co);
    for (double c : {0.0, -0.5}) {
      try {
        recover_power_coefficient(c1, co, 2, c);
        FAIL("census level should have been rejected");
      } catch (const Error& e) {
        CHECK(e.code == errc::invalid_argument);
      }
    }
    try {
      recover_power_coefficient(c1, co, -1, 0.5);
      FAIL("negative power should have been rejected");
    } catch (const Error& e) {
      CHECK(e.code == errc::invalid_argument);
    }
  }

  SUBCASE("spatially varying diffusion recovers at second order") {
    // sigma harmonic keeps the uniform census exact while its quartic profile
    // feeds a genuine h^2 error into the one sided flux stencil. (A cubic
    // would not do: its constant third derivative makes the stencil errors on
    // opposite walls cancel in the surface integral.)
    auto run = [&](int n) {
      const Grid g = square(n, 5, T);
      const MFGCoefficients co = make_coefficients(
          g,
          [](const std::array<double, 3>& x, double) {
            const double x2 = x[0] * x[0], y2 = x[1] * x[1];
            return 1.0 + 0.01 * (x2 * x2 - 6.0 * x2 * y2 + y2 * y2);
          },
          [](const std::array<double, 3>&, double) { return 1.0; });
      const SpaceTimeField v = sample(
          g, [](const std::array<double, 3>&, double t) { return 0.175 * (1.0 - t); });
      const SpaceTimeField m = make_spacetime(g, 0.5);
      const MeasurementC1 c1 = extract_c1(v, m, co);
      return std::abs(recover_power_coefficient(c1, co, 2, 0.5) - 0.7);
    };
    const double coarse = run(9);
    const double fine = run(17);
    CHECK(coarse > 1e-9);
    CHECK(fine <= 0.35 * coarse);
    CHECK(fine >= 0.15 * coarse);  // clean h^2, not accidental cancellation
  }
}

// ---- noise knob ----

TEST_CASE("trace noise is deterministic, sized, and optional") {
  const Grid g = rect(13, 13, 6, 0.5);
  const MFGCoefficients co = constant_coefficients(g, 1.1, 0.9);
  const SpaceTimeField v = sample(g, [](const std::array<double, 3>& x, double t) {
    return std::sin(x[0]) * std::cos(x[1]) + 0.1 * t;
  });
  const SpaceTimeField m = sample(g, [](const std::array<double, 3>& x, double t) {
    return std::exp(0.2 * x[0] - 0.1 * x[1]) + 0.05 * t;
  });
  const MeasurementC1 clean = extract_c1(v, m, co);

  MeasurementC1 a = clean;
  MeasurementC1 b = clean;
  add_trace_noise(a, 1e-3, 20250815);
  add_trace_noise(b, 1e-3, 20250815);
  for (int f = 0; f < 4; ++f) {
    CHECK(a.v.value[f] == b.v.value[f]);
    CHECK(a.v.normal_deriv[f] == b.v.normal_deriv[f]);
    CHECK(a.m.value[f] == b.m.value[f]);
    CHECK(a.m.normal_deriv[f] == b.m.normal_deriv[f]);
    CHECK(a.hamiltonian_flux[f] == b.hamiltonian_flux[f]);
  }
  // census slices are interior data, not traces; they stay clean
  CHECK(a.v_start.data == clean.v_start.data);
  CHECK(a.m_end.data == clean.m_end.data);

  MeasurementC1 c = clean;
  add_trace_noise(c, 1e-3, 20250816);
  bool differs = false;
  for (int f = 0; f < 4 && !differs; ++f)
    differs = a.v.value[f] != c.v.value[f] || a.m.normal_deriv[f] != c.m.normal_deriv[f];
  CHECK(differs);

  MeasurementC1 z = clean;
  add_trace_noise(z, 0.0, 20250815);
  for (int f = 0; f < 4; ++f) {
    CHECK(z.v.value[f] == clean.v.value[f]);
    CHECK(z.m.normal_deriv[f] == clean.m.normal_deriv[f]);
    CHECK(z.hamiltonian_flux[f] == clean.hamiltonian_flux[f]);
  }

  // Pool every perturbation and check its empirical size.
  std::vector<double> d;
  auto pool = [&](const std::vector<double>& noisy, const std::vector<double>& ref) {
    for (std::size_t i = 0; i < ref.size(); ++i) d.push_back(noisy[i] - ref[i]);
  };
  for (int f = 0; f < 4; ++f) {
    pool(a.v.value[f], clean.v.value[f]);
    pool(a.v.normal_deriv[f], clean.v.normal_deriv[f]);
    pool(a.m.value[f], clean.m.value[f]);
    pool(a.m.normal_deriv[f], clean.m.normal_deriv[f]);
    pool(a.hamiltonian_flux[f], clean.hamiltonian_flux[f]);
  }
  REQUIRE(d.size() > 1500);
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= static_cast<double>(d.size() - 1);
  const double sd = std::sqrt(var);
  CHECK(std::abs(mean) < 1.2e-4);
  CHECK(sd > 0.8e-3);
  CHECK(sd < 1.2e-3);

  // stationary and linearized records run through the same knob
  const MeasurementC2 c2 = extract_c2(slice(m, 0));
  MeasurementC2 n2 = c2;
  MeasurementC2 n2b = c2;
  add_trace_noise(n2, 1e-3, 7);
  add_trace_noise(n2b, 1e-3, 7);
  CHECK(!c2_identical(n2, c2));
  CHECK(c2_identical(n2, n2b));
  CHECK(n2.flux_diff[0] != c2.flux_diff[0]);

  MeasurementC3 c3 = extract_c3(v, m, "probe", 1);
  MeasurementC3 c3b = extract_c3(v, m, "probe", 1);
  add_trace_noise(c3, 1e-3, 9);
  add_trace_noise(c3b, 1e-3, 9);
  CHECK(c3.v.value[1] == c3b.v.value[1]);
  CHECK(c3.v.value[1] != extract_c3(v, m, "probe", 1).v.value[1]);
}

// ---- archives ----

TEST_CASE("archives round trip through disk byte for byte") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "mfg_cauchy_archive_test";
  fs::remove_all(root);
  fs::create_directories(root);

  GridSpec spec{2, {0.0, 0.0, 0.0}, {1.0, 1.5, 0.0}, {7, 5, 1}, 4, 0.7};
  const Grid gt = build_grid(spec);
  GridSpec sspec = spec;
  sspec.nt = 0;
  sspec.horizon = 0.0;
  const Grid gs = build_grid(sspec);

  auto scal = [&](double a, double b) {
    return sample(gs, [=](const std::array<double, 3>& x) {
      return std::exp(a * x[0] + b * x[1]) + 0.2 * std::sin(x[0] * x[1] + a);
    });
  };
  CauchyArchive arc;
  arc.grid = spec;
  arc.sigma_expr = "1 + 0.1*x0";
  arc.kappa_expr = "1";
  arc.noise = 1e-4;
  arc.seed = 42;
  arc.generator_hash = content_hash("opaque cost model fingerprint");
  arc.baseline = StationaryRecord{"baseline", {0.0, 0.0, 0.0}, 0.0, 0, extract_c2(scal(-0.4, 0.2)), {}};
  StationaryRecord pk{"probe+k", {2.0 * kPi, -4.0 * kPi / 3.0, 0.0}, 4.0, 1,
                      extract_c2(scal(0.3, -0.1)), extract_c2(scal(-0.2, 0.5))};
  StationaryRecord mk{"probe-k", {-2.0 * kPi, 4.0 * kPi / 3.0, 0.0}, 4.0, 1,
                      extract_c2(scal(0.3, 0.1)), extract_c2(scal(0.2, -0.5))};
  arc.stationary = {pk, mk};

  const MFGCoefficients co = constant_coefficients(gt, 1.0, 1.0);
  const SpaceTimeField v = sample(gt, [](const std::array<double, 3>& x, double t) {
    return std::sin(x[0] + 0.2) * std::cos(x[1]) * (1.0 + t);
  });
  const SpaceTimeField m = sample(gt, [](const std::array<double, 3>& x, double t) {
    return std::exp(0.1 * x[0] + 0.2 * x[1]) + 0.3 * t;
  });
  arc.timedep.push_back(TimeDependentRecord{"e1", 1, "", "", extract_c3(v, m, "e1", 1)});
  arc.timedep.push_back(
      TimeDependentRecord{"e1*e2", 2, "e1", "e2", extract_c3(m, v, "e1*e2", 2)});
  MeasurementC1 c1 = extract_c1(v, m, co);
  add_trace_noise(c1, 1e-4, 42);
  arc.c1 = c1;

  const std::string dir1 = (root / "a").string();
  write_archive(dir1, arc);
  const CauchyArchive back = read_archive(dir1);

  auto same_spec = [](const GridSpec& x, const GridSpec& y) {
    bool ok = x.dim == y.dim && x.nt == y.nt && x.horizon == y.horizon;
    for (int a = 0; a < 3; ++a)
      ok = ok && x.lo[a] == y.lo[a] && x.hi[a] == y.hi[a] && x.nx[a] == y.nx[a];
    return ok;
  };
  auto same_trace = [](const BoundaryTrace& x, const BoundaryTrace& y) {
    bool ok = x.levels == y.levels;
    for (int f = 0; f < 6; ++f)
      ok = ok && x.value[f] == y.value[f] && x.normal_deriv[f] == y.normal_deriv[f];
    return ok;
  };
  auto same_rec = [&](const StationaryRecord& x, const StationaryRecord& y) {
    bool ok = x.tag == y.tag && x.R == y.R && x.member == y.member &&
              x.k == y.k && x.im.has_value() == y.im.has_value();
    ok = ok && c2_identical(x.re, y.re);
    if (ok && x.im) ok = c2_identical(*x.im, *y.im);
    return ok;
  };

  CHECK(same_spec(back.grid, arc.grid));
  CHECK(back.sigma_expr == arc.sigma_expr);
  CHECK(back.kappa_expr == arc.kappa_expr);
  CHECK(back.noise == arc.noise);
  CHECK(back.seed == arc.seed);
  CHECK(back.generator_hash == arc.generator_hash);
  CHECK(same_rec(back.baseline, arc.baseline));
  REQUIRE(back.stationary.size() == 2);
  CHECK(same_rec(back.stationary[0], arc.stationary[0]));
  CHECK(same_rec(back.stationary[1], arc.stationary[1]));
  REQUIRE(back.timedep.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.timedep[i].tag == arc.timedep[i].tag);
    CHECK(back.timedep[i].order == arc.timedep[i].order);
    CHECK(back.timedep[i].parent_a == arc.timedep[i].parent_a);
    CHECK(back.timedep[i].parent_b == arc.timedep[i].parent_b);
    CHECK(same_trace(back.timedep[i].rec.v, arc.timedep[i].rec.v));
    CHECK(same_trace(back.timedep[i].rec.m, arc.timedep[i].rec.m));
  }
  REQUIRE(back.c1.has_value());
  CHECK(same_trace(back.c1->v, arc.c1->v));
  CHECK(same_trace(back.c1->m, arc.c1->m));
  for (int f = 0; f < 4; ++f)
    CHECK(back.c1->hamiltonian_flux[f] == arc.c1->hamiltonian_flux[f]);
  CHECK(back.c1->v_start.data == arc.c1->v_start.data);
  CHECK(back.c1->m_start.data == arc.c1->m_start.data);
  CHECK(back.c1->v_end.data == arc.c1->v_end.data);
  CHECK(back.c1->m_end.data == arc.c1->m_end.data);
  CHECK(same_spec(back.c1->grid.spec, gt.spec));

  // Writing the read back archive reproduces every file byte for byte.
  const std::string dir2 = (root / "b").string();
  write_archive(dir2, back);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir1)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  REQUIRE(!names.empty());
  for (const std::string& n : names) {
    CAPTURE(n);
    REQUIRE(fs::exists(fs::path(dir2) / n));
    CHECK(read_file_bytes((fs::path(dir1) / n).string()) ==
          read_file_bytes((fs::path(dir2) / n).string()));
  }
  std::size_t count2 = 0;
  for (const auto& e : fs::directory_iterator(dir2)) {
    (void)e;
    ++count2;
  }
  CHECK(count2 == names.size());

  SUBCASE("missing directories and files fail as io errors") {
    try {
      read_archive((root / "nope").string());
      FAIL("missing archive should not read");
    } catch (const Error& e) {
      CHECK(e.code == errc::io_failure);
    }
    const std::string dir3 = (root / "c").string();
    write_archive(dir3, arc);
    bool removed = false;
    for (const auto& e : fs::directory_iterator(dir3))
      if (e.path().extension() == ".csv") {
        fs::remove(e.path());
        removed = true;
        break;
      }
    REQUIRE(removed);
    try {
      read_archive(dir3);
      FAIL("archive with a missing stream should not read");
    } catch (const Error& e) {
      CHECK(e.code == errc::io_failure);
    }
  }

  SUBCASE("a malformed manifest is a configuration error") {
    const std::string dir4 = (root / "d").string();
    write_archive(dir4, arc);
    std::ofstream bad(fs::path(dir4) / "manifest.json", std::ios::trunc);
    bad << "{ not json";
    bad.close();
    try {
      read_archive(dir4);
      FAIL("malformed manifest should not parse");
    } catch (const Error& e) {
      CHECK(e.code == errc::config_error);
    }
  }

  fs::remove_all(root);
}

TEST_CASE("shape mismatches are rejected") {
  const Grid g = square(9, 4, 1.0);
  const Grid g2 = square(11, 4, 1.0);
  const MFGCoefficients co = constant_coefficients(g, 1.0, 1.0);
  try {
    extract_c1(make_spacetime(g, 1.0), make_spacetime(g2, 1.0), co);
    FAIL("mismatched grids should have been rejected");
  } catch (const Error& e) {
    CHECK(e.code == errc::incompatible_data);
  }

  // records of a stationary run carry no time extent to integrate over
  GridSpec s{2, {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, {9, 9, 1}, 0, 0.0};
  const Grid gstat = build_grid(s);
  const MFGCoefficients cs = constant_coefficients(gstat, 1.0, 1.0);
  const MeasurementC1 c1 =
      extract_c1(make_spacetime(gstat, 1.0), make_spacetime(gstat, 1.0), cs);
  try {
    energy_integral_from_boundary(c1, cs);
    FAIL("a record without time levels has no energy integral");
  } catch (const Error& e) {
    CHECK(e.code == errc::invalid_argument);
  }

  // two stationary records on different grids are never identical
  const Grid gbig =
      build_grid(GridSpec{2, {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, {11, 11, 1}, 0, 0.0});
  CHECK(!c2_identical(extract_c2(make_scalar(gstat, 1.0)),
                      extract_c2(make_scalar(gbig, 1.0))));
}

}  // TEST_SUITE
