#include <cmath>
#include <complex>
#include <cstdio>
#include <random>

#include "core/cauchy.hpp"
#include "core/cgo.hpp"
#include "core/forward.hpp"
#include "core/grid.hpp"
#include "core/inverse.hpp"
#include "core/linearize.hpp"

using namespace mfg;

static Grid cube(int n, double hi = 1.0) {
  GridSpec s;
  s.dim = 3;
  s.nx = {n, n, n};
  s.nt = 1;
  s.horizon = 1.0;
  s.lo = {0.0, 0.0, 0.0};
  s.hi = {hi, hi, hi};
  return build_grid(s);
}

static Cplx cdot(const CplxVec& xi, const std::array<double, 3>& x, int dim) {
  Cplx s = 0.0;
  for (int a = 0; a < dim; ++a) s += xi[a] * x[a];
  return s;
}

struct ProbeRecord {
  StationaryRecord rec;
  std::vector<Cplx> field;
  XiPair pair;
};

static ProbeRecord make_probe_record(const StationarySolution& base, const ScalarField& F1,
                                     const std::array<double, 3>& k, double R, int member) {
  const Grid& g = base.m0.grid;
  ProbeRecord out;
  out.pair = discrete_isotropic_pair(k, R, g);
  const CplxVec& xi = member == 2 ? out.pair.xi2 : out.pair.xi1;
  const ScalarReducedEquation eq = reduce_to_scalar(base, F1, 1);
  const std::vector<Cplx> ones(static_cast<std::size_t>(g.n_space), Cplx(1.0, 0.0));
  const std::vector<Cplx> mu = solve_scalar_conjugated(eq, xi, ones);
  out.field.resize(static_cast<std::size_t>(g.n_space));
  ScalarField re = make_scalar(g), im = make_scalar(g);
  for (std::int64_t j = 0; j < g.n_space; ++j) {
    const Cplx m =
        std::exp(cdot(xi, g.node(g.unindex(j)), g.dim())) * mu[static_cast<std::size_t>(j)];
    out.field[static_cast<std::size_t>(j)] = m;
    re[j] = m.real();
    im[j] = m.imag();
  }
  out.rec.k = k;
  out.rec.R = R;
  out.rec.member = member;
  out.rec.re = extract_c2(re);
  out.rec.im = extract_c2(im);
  return out;
}

static Cplx volume_sum(const StationarySolution& base, const ScalarField& F1,
                       const std::vector<Cplx>& m1, const CgoFunction& u) {
  const Grid& g = base.m0.grid;
  double cell = 1.0;
  for (int a = 0; a < g.dim(); ++a) cell *= g.h[a];
  Cplx s = 0.0;
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    if (g.on_boundary(g.unindex(k))) continue;
    s += cell * F1[k] * base.m0[k] * m1[static_cast<std::size_t>(k)] *
         u.values[static_cast<std::size_t>(k)];
  }
  return s;
}

// Five-point outward one-sided derivative of a complex field at a face node.
static Cplx nder5(const Grid& g, const std::vector<Cplx>& m, int f, std::int64_t fi) {
  const int a = face_axis(f);
  const auto st = [&] {
    std::array<std::int64_t, 3> s{0, 0, 0};
    s[g.dim() - 1] = 1;
    for (int ax = g.dim() - 2; ax >= 0; --ax) s[ax] = s[ax + 1] * g.nx(ax + 1);
    return s;
  }();
  const std::int64_t k = g.index(face_node_multi(g, f, fi));
  const std::int64_t in = face_side(f) == 0 ? st[a] : -st[a];
  return (25.0 * m[k] - 48.0 * m[k + in] + 36.0 * m[k + 2 * in] - 16.0 * m[k + 3 * in] +
          3.0 * m[k + 4 * in]) /
         (12.0 * g.h[a]);
}

static void run(const char* label, const StationarySolution& base, const ScalarField& F1,
                const std::array<double, 3>& k3, double R = 2.0) {
  const Grid& g = base.m0.grid;
  const ScalarField zero = make_scalar(g, 0.0);
  const ProbeRecord truth = make_probe_record(base, F1, k3, R, 1);
  const ProbeRecord ref = make_probe_record(base, zero, k3, R, 1);
  const MeasurementC2 dre = c2_difference(truth.rec.re, ref.rec.re);
  const MeasurementC2 dim = c2_difference(*truth.rec.im, *ref.rec.im);

  std::vector<Cplx> diff(static_cast<std::size_t>(g.n_space));
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = truth.field[j] - ref.field[j];

  const ScalarReducedEquation adj = reduce_to_scalar(base, zero, -1);
  const CgoFunction u = build_cgo(adj, truth.pair.xi2);

  const Cplx p_flux = boundary_pairing_flux(dre, u, base) +
                      Cplx(0.0, 1.0) * boundary_pairing_flux(dim, u, base);
  const Cplx p_trace =
      boundary_pairing(dre, u) + Cplx(0.0, 1.0) * boundary_pairing(dim, u);
  const Cplx v_truth = volume_sum(base, F1, truth.field, u);

  // Trace-style quadrature with a fifth-order outward derivative of the
  // interior difference field, bypassing the archived three-point streams.
  Cplx p_trace5 = 0.0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const std::int64_t k = g.index(face_node_multi(g, f, fi));
      p_trace5 += face_node_weight(g, f, fi) * u.values[static_cast<std::size_t>(k)] *
                  nder5(g, diff, f, fi);
    }
  }

  std::printf("%-30s |v|=%.3e  res=%.1e  flux=%.3e  trace3=%.3e  trace5=%.3e\n", label,
              std::abs(v_truth), u.residual, std::abs(p_flux - v_truth),
              std::abs(p_trace - v_truth), std::abs(p_trace5 - v_truth));
}

int main() {
  for (double R : {1.0, 2.0}) {
    for (int n : {9, 17, 33}) {
      const Grid g = cube(n);
      const StationarySolution base = build_stationary_baseline(g);
      const ScalarField F1 = sample(g, [](const std::array<double, 3>& x) {
        return 0.8 * std::cos(2.0 * M_PI * x[0]) +
               0.5 * std::sin(2.0 * M_PI * x[1]) * std::cos(2.0 * M_PI * x[2]);
      });
      char label[64];
      std::snprintf(label, sizeof label, "flat  n=%2d R=%g", n, R);
      run(label, base, F1, {2.0 * M_PI, 0.0, 0.0}, R);
    }
    for (int n : {9, 17, 33}) {
      const Grid g = cube(n);
      ScalarField w = sample(g, [](const std::array<double, 3>& x) {
        return 1.3 + 0.2 * x[0] - 0.1 * x[1] + 0.15 * (x[0] * x[0] - x[2] * x[2]) +
               0.1 * x[0] * x[1];
      });
      ScalarField v0 = make_scalar(g);
      for (std::int64_t k = 0; k < g.n_space; ++k) v0[k] = -2.0 * std::log(w[k]);
      const StationarySolution base = build_stationary_baseline(g, v0);
      const ScalarField F1 = sample(g, [](const std::array<double, 3>& x) {
        return 0.7 * std::cos(2.0 * M_PI * x[0]) + 0.4 * std::sin(2.0 * M_PI * x[1]);
      });
      char label[64];
      std::snprintf(label, sizeof label, "curved n=%2d R=%g", n, R);
      run(label, base, F1, {0.0, 2.0 * M_PI, 0.0}, R);
    }
  }
  return 0;
}
