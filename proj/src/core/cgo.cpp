#include "core/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

namespace mfg {

Cplx self_dot(const CplxVec& xi) {
  return xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
}

double norm2(const CplxVec& xi) {
  return std::norm(xi[0]) + std::norm(xi[1]) + std::norm(xi[2]);
}

XiPair make_xi_pair(const std::array<double, 3>& k, double R) {
  const double kn = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
  require(kn > 0.0, errc::invalid_argument, "make_xi_pair: k must be nonzero");
  require(R >= 0.25, errc::invalid_argument, "make_xi_pair: R must be at least 1/4");

  // Deterministic frame of the plane normal to k. Starting from the canonical
  // axis least aligned with k keeps u equal to that axis whenever k has a zero
  // component, so Re xi lands on a coordinate axis for the frequencies the
  // reconstruction sweeps.
  const std::array<double, 3> kh{k[0] / kn, k[1] / kn, k[2] / kn};
  int e = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(kh[a]) < std::abs(kh[e])) e = a;
  std::array<double, 3> u{-kh[e] * kh[0], -kh[e] * kh[1], -kh[e] * kh[2]};
  u[e] += 1.0;
  const double un = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  for (int a = 0; a < 3; ++a) u[a] /= un;
  const std::array<double, 3> w{kh[1] * u[2] - kh[2] * u[1],
                                kh[2] * u[0] - kh[0] * u[2],
                                kh[0] * u[1] - kh[1] * u[0]};

  // a = |k|(u+w)/sqrt(2), b = |k|(u-w)/sqrt(2); flipping k swaps a and b,
  // which is what turns the pair into its conjugate bitwise.
  const double s = kn / std::sqrt(2.0);
  std::array<double, 3> av{}, bv{};
  for (int a = 0; a < 3; ++a) {
    av[a] = s * (u[a] + w[a]);
    bv[a] = s * (u[a] - w[a]);
  }

  const double A = std::sqrt(R * R + 0.0625);
  const double B = std::sqrt(R * R - 0.0625);
  const Cplx alpha(A, B), beta(A, -B);

  XiPair pair;
  pair.k = k;
  pair.R = R;
  for (int a = 0; a < 3; ++a) {
    // grouping matters: the shared term t makes xi1 + xi2 = ik cancel exactly
    const Cplx t = alpha * av[a] + beta * bv[a];
    pair.xi1[a] = Cplx(0.0, 0.5 * k[a]) + t;
    pair.xi2[a] = Cplx(0.0, 0.5 * k[a]) - t;
  }
  return pair;
}

Cplx discrete_symbol(const CplxVec& xi, const Grid& g) {
  // 2(cosh z - 1) written as 4 sinh^2(z/2) so near-kernel probes do not lose
  // digits to cancellation
  Cplx s = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const Cplx sh = std::sinh(0.5 * xi[a] * g.h[a]);
    s += 4.0 * sh * sh / (g.h[a] * g.h[a]);
  }
  return s;
}

namespace {

// natural size of the symbol's summands, the yardstick for "s_h is zero"
double symbol_scale(const CplxVec& xi, const Grid& g) {
  double s = 0.0;
  for (int a = 0; a < g.dim(); ++a)
    s += 2.0 * (std::cosh(std::abs(xi[a].real()) * g.h[a]) + 1.0) / (g.h[a] * g.h[a]);
  return s;
}

}  // namespace

XiPair discrete_isotropic_pair(const std::array<double, 3>& k, double R, const Grid& g) {
  require(g.dim() == 3, errc::invalid_argument,
          "discrete_isotropic_pair: needs a three-dimensional grid");
  XiPair pair = make_xi_pair(k, R);

  // Shared offset zeta with xi = ik/2 +- zeta; correcting zeta instead of the
  // members separately preserves the exact pair sum.
  std::array<Cplx, 3> zeta;
  for (int a = 0; a < 3; ++a) zeta[a] = pair.xi1[a] - Cplx(0.0, 0.5 * k[a]);

  const auto assemble = [&](const std::array<Cplx, 3>& z, CplxVec& x1, CplxVec& x2) {
    for (int a = 0; a < 3; ++a) {
      x1[a] = Cplx(0.0, 0.5 * k[a]) + z[a];
      x2[a] = Cplx(0.0, 0.5 * k[a]) - z[a];
    }
  };

  CplxVec x1, x2;
  assemble(zeta, x1, x2);
  Eigen::Vector2cd F(discrete_symbol(x1, g), discrete_symbol(x2, g));

  // Gauss-Newton on the underdetermined system (2 complex equations, 3
  // unknowns): minimum-norm step, Armijo backtracking. The target sits a
  // few h^2 |xi|^4 away from the start, so this settles in a handful of steps.
  const double tol = 1e-14;
  int it = 0;
  while (!(std::abs(F(0)) <= tol * symbol_scale(x1, g) &&
           std::abs(F(1)) <= tol * symbol_scale(x2, g))) {
    if (it >= 60)
      fail(errc::max_iterations, "discrete_isotropic_pair: symbol correction stalled");

    Eigen::Matrix<Cplx, 2, 3> J;
    for (int a = 0; a < 3; ++a) {
      J(0, a) = 2.0 * std::sinh(x1[a] * g.h[a]) / g.h[a];
      J(1, a) = -2.0 * std::sinh(x2[a] * g.h[a]) / g.h[a];
    }
    const Eigen::Matrix2cd JJ = J * J.adjoint();
    const Eigen::Vector2cd y = JJ.fullPivLu().solve(F);
    const Eigen::Matrix<Cplx, 3, 1> step = -(J.adjoint() * y);

    const double f0 = F.norm();
    bool accepted = false;
    double t = 1.0;
    for (int ls = 0; ls < 26; ++ls, t *= 0.5) {
      std::array<Cplx, 3> zn;
      for (int a = 0; a < 3; ++a) zn[a] = zeta[a] + t * step(a);
      CplxVec y1, y2;
      assemble(zn, y1, y2);
      const Eigen::Vector2cd Fn(discrete_symbol(y1, g), discrete_symbol(y2, g));
      if (Fn.norm() <= (1.0 - 1e-4 * t) * f0) {
        zeta = zn;
        x1 = y1;
        x2 = y2;
        F = Fn;
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted)
      fail(errc::max_iterations, "discrete_isotropic_pair: line search failed");
  }

  pair.xi1 = x1;
  pair.xi2 = x2;
  pair.iterations = it;
  pair.symbol_defect = std::max(std::abs(discrete_symbol(x1, g)) / symbol_scale(x1, g),
                                std::abs(discrete_symbol(x2, g)) / symbol_scale(x2, g));
  return pair;
}

ScalarField conjugation_potential(const ScalarReducedEquation& eq) {
  check_same_grid(eq.q.grid, eq.v0.grid, "conjugation_potential");
  const Grid& g = eq.v0.grid;
  const VectorField gv = gradient(eq.v0);
  const ScalarField lap = laplacian(eq.v0);

  ScalarField H = make_scalar(g);
  const double half_sign = 0.5 * eq.drift_sign;
  for (std::int64_t idx = 0; idx < g.n_space; ++idx) {
    double g2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) g2 += gv.comp[a][idx] * gv.comp[a][idx];
    H[idx] = eq.q[idx] - 0.25 * g2 - half_sign * lap[idx];
  }
  return H;
}

// ------------------------------------------------------------- remainder solve

namespace {

// FFTW's planner mutates shared state; executions are safe to run concurrently
// on distinct plans.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftBuffer {
  Cplx* p = nullptr;
  explicit FftBuffer(std::int64_t n) {
    p = static_cast<Cplx*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n)));
    require(p != nullptr, errc::internal, "solve_remainder: transform buffer allocation failed");
  }
  ~FftBuffer() { fftw_free(p); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
};

struct FftPlans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  FftPlans(int rank, const int* n, Cplx* buf) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto* c = reinterpret_cast<fftw_complex*>(buf);
    fwd = fftw_plan_dft(rank, n, c, c, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft(rank, n, c, c, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
};

}  // namespace

RemainderSolution solve_remainder(const ScalarField& H, const CplxVec& xi,
                                  const RemainderOptions& opt) {
  const Grid& g = H.grid;
  const int d = g.dim();

  std::array<int, 3> N{1, 1, 1};
  std::int64_t NT = 1;
  for (int a = 0; a < d; ++a) {
    N[a] = 2 * (g.nx(a) - 1);
    NT *= N[a];
  }
  const double NTd = static_cast<double>(NT);

  // potential extended to the doubled torus by even reflection
  std::vector<double> Ht(NT);
  {
    std::array<int, 3> t{0, 0, 0};
    for (std::int64_t f = 0; f < NT; ++f) {
      std::array<int, 3> src{0, 0, 0};
      for (int a = 0; a < d; ++a)
        src[a] = t[a] <= g.nx(a) - 1 ? t[a] : 2 * (g.nx(a) - 1) - t[a];
      Ht[f] = H[g.index(src)];
      for (int a = d - 1; a >= 0; --a) {
        if (++t[a] < N[a]) break;
        t[a] = 0;
      }
    }
  }

  // Frequencies carry a half-mode shift along one axis, so no lattice mode can
  // sit on the zero circle of sigma(mu) = -|mu|^2 + 2i xi.mu. The axis is
  // chosen by measuring the floor min |sigma| each candidate actually achieves.
  const auto axis_table = [&](int a, bool shifted) {
    std::vector<Cplx> val(N[a]);
    const double len = g.spec.hi[a] - g.spec.lo[a];
    for (int t = 0; t < N[a]; ++t) {
      const int mt = t <= N[a] / 2 ? t : t - N[a];
      const double mu = M_PI * (mt + (shifted ? 0.5 : 0.0)) / len;
      val[t] = Cplx(-mu * mu, 0.0) + 2.0 * Cplx(0.0, 1.0) * (xi[a] * mu);
    }
    return val;
  };

  std::array<std::vector<Cplx>, 3> tab;
  for (int a = 0; a < d; ++a) tab[a] = axis_table(a, false);

  int best_axis = -1;
  double best_floor = -1.0;
  for (int c = 0; c < d; ++c) {
    const std::vector<Cplx> shifted = axis_table(c, true);
    double floor_c = std::numeric_limits<double>::infinity();
    std::array<int, 3> t{0, 0, 0};
    for (std::int64_t f = 0; f < NT; ++f) {
      Cplx sig = 0.0;
      for (int a = 0; a < d; ++a) sig += (a == c) ? shifted[t[a]] : tab[a][t[a]];
      floor_c = std::min(floor_c, std::abs(sig));
      for (int a = d - 1; a >= 0; --a) {
        if (++t[a] < N[a]) break;
        t[a] = 0;
      }
    }
    if (floor_c > best_floor) {
      best_floor = floor_c;
      best_axis = c;
    }
  }
  require(best_floor > 1e-10 * std::max(1.0, norm2(xi)), errc::invalid_argument,
          "solve_remainder: every shift axis leaves a near-resonant lattice mode");

  // spectral multipliers on the chosen lattice
  tab[best_axis] = axis_table(best_axis, true);
  std::vector<Cplx> step(NT), lsym(NT);
  {
    std::array<int, 3> t{0, 0, 0};
    for (std::int64_t f = 0; f < NT; ++f) {
      Cplx sig = 0.0;
      for (int a = 0; a < d; ++a) sig += tab[a][t[a]];
      step[f] = -1.0 / (sig * NTd);  // iteration: -L^{-1}, DFT normalization folded in
      lsym[f] = sig / NTd;           // defect check: forward application of L
      for (int a = d - 1; a >= 0; --a) {
        if (++t[a] < N[a]) break;
        t[a] = 0;
      }
    }
  }

  // the half shift is one modulation: analysis demodulates, synthesis restores
  std::vector<Cplx> ph1m(N[best_axis]), ph1p(N[best_axis]);
  for (int t = 0; t < N[best_axis]; ++t) {
    ph1m[t] = std::polar(1.0, -M_PI * t / N[best_axis]);
    ph1p[t] = std::polar(1.0, M_PI * t / N[best_axis]);
  }
  std::vector<Cplx> phm(NT), php(NT);
  {
    std::array<int, 3> t{0, 0, 0};
    for (std::int64_t f = 0; f < NT; ++f) {
      phm[f] = ph1m[t[best_axis]];
      php[f] = ph1p[t[best_axis]];
      for (int a = d - 1; a >= 0; --a) {
        if (++t[a] < N[a]) break;
        t[a] = 0;
      }
    }
  }

  FftBuffer buf(NT);
  FftPlans plans(d, N.data(), buf.p);

  // fixed point omega <- -L^{-1}( H (1 + omega) )
  std::vector<Cplx> omega(NT, Cplx(0.0, 0.0));
  int iters = 0;
  bool converged = false;
  double prev_delta = std::numeric_limits<double>::infinity();
  int grew = 0;
  while (iters < opt.max_iterations) {
    for (std::int64_t f = 0; f < NT; ++f) buf.p[f] = phm[f] * (Ht[f] * (1.0 + omega[f]));
    fftw_execute(plans.fwd);
    for (std::int64_t f = 0; f < NT; ++f) buf.p[f] *= step[f];
    fftw_execute(plans.bwd);

    double delta = 0.0, sup_new = 0.0;
    for (std::int64_t f = 0; f < NT; ++f) {
      const Cplx cand = php[f] * buf.p[f];
      delta = std::max(delta, std::abs(cand - omega[f]));
      sup_new = std::max(sup_new, std::abs(cand));
      omega[f] = cand;
    }
    ++iters;

    if (!std::isfinite(delta) || sup_new > 1e12)
      fail(errc::non_contraction, "solve_remainder: iterates blow up");
    if (delta <= opt.tol * (1.0 + sup_new)) {
      converged = true;
      break;
    }
    if (delta > prev_delta) {
      if (++grew >= 3)
        fail(errc::non_contraction,
             "solve_remainder: updates keep growing, probe too weak for this potential");
    } else {
      grew = 0;
    }
    prev_delta = delta;
  }
  if (!converged)
    fail(errc::max_iterations, "solve_remainder: fixed point did not settle");

  // closing defect of the converged iterate, by one more spectral round trip
  for (std::int64_t f = 0; f < NT; ++f) buf.p[f] = phm[f] * omega[f];
  fftw_execute(plans.fwd);
  for (std::int64_t f = 0; f < NT; ++f) buf.p[f] *= lsym[f];
  fftw_execute(plans.bwd);
  double defect = 0.0, forcing_sup = 0.0;
  for (std::int64_t f = 0; f < NT; ++f) {
    const Cplx forcing = Ht[f] * (1.0 + omega[f]);
    defect = std::max(defect, std::abs(php[f] * buf.p[f] + forcing));
    forcing_sup = std::max(forcing_sup, std::abs(forcing));
  }

  RemainderSolution out;
  out.box = g;
  out.omega.resize(g.n_space);
  double l2 = 0.0;
  for (std::int64_t idx = 0; idx < g.n_space; ++idx) {
    const auto mi = g.unindex(idx);
    std::int64_t f = 0;
    for (int a = 0; a < d; ++a) f = f * N[a] + mi[a];
    out.omega[idx] = omega[f];
    l2 += g.node_weight(mi) * std::norm(omega[f]);
    out.sup_box = std::max(out.sup_box, std::abs(omega[f]));
  }
  out.l2_box = std::sqrt(l2);
  out.residual = defect / (1.0 + forcing_sup);
  out.symbol_floor = best_floor;
  out.shift_axis = best_axis;
  out.iterations = iters;
  return out;
}

RemainderSolution solve_remainder(const ScalarReducedEquation& eq, const CplxVec& xi,
                                  const RemainderOptions& opt) {
  return solve_remainder(conjugation_potential(eq), xi, opt);
}

// ------------------------------------------------------------------- assembly

CgoFunction build_cgo(const ScalarReducedEquation& eq, const CplxVec& xi,
                      const RemainderOptions& opt) {
  const Grid& g = eq.v0.grid;
  const int d = g.dim();

  // the linear phase peaks at a box corner; refuse exponents that overflow
  double peak = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double re = 0.0;
    for (int a = 0; a < d; ++a)
      re += xi[a].real() * ((corner >> a & 1) ? g.spec.hi[a] : g.spec.lo[a]);
    peak = std::max(peak, std::abs(re));
  }
  require(peak + 0.5 * sup_norm(eq.v0) <= opt.exp_cap, errc::invalid_argument,
          "build_cgo: probe exponent exceeds the overflow budget");

  const RemainderSolution sol = solve_remainder(eq, xi, opt);

  CgoFunction out;
  out.grid = g;
  out.xi = xi;
  out.drift_sign = eq.drift_sign;
  out.remainder_l2 = sol.l2_box;
  out.iterations = sol.iterations;
  out.values.resize(g.n_space);

  const double s = static_cast<double>(eq.drift_sign);
  std::vector<double> mag(g.n_space);
  for (std::int64_t idx = 0; idx < g.n_space; ++idx) {
    const auto x = g.node(g.unindex(idx));
    Cplx dot = 0.0;
    for (int a = 0; a < d; ++a) dot += xi[a] * x[a];
    const Cplx expo = dot - 0.5 * s * eq.v0[idx];
    out.values[idx] = std::exp(expo) * (1.0 + sol.omega[idx]);
    mag[idx] = std::exp(expo.real());
  }

  // finite-difference defect of the reduced equation on interior stencils,
  // weighed against the local exponential size and the probe strength
  ScalarField ur = make_scalar(g), ui = make_scalar(g);
  for (std::int64_t idx = 0; idx < g.n_space; ++idx) {
    ur[idx] = out.values[idx].real();
    ui[idx] = out.values[idx].imag();
  }
  const ScalarField lr = laplacian(ur), li = laplacian(ui);
  const VectorField gur = gradient(ur), gui = gradient(ui), gv0 = gradient(eq.v0);
  double worst = 0.0;
  for (std::int64_t idx = 0; idx < g.n_space; ++idx) {
    const auto mi = g.unindex(idx);
    if (g.on_boundary(mi)) continue;
    Cplx adv = 0.0;
    for (int a = 0; a < d; ++a)
      adv += gv0.comp[a][idx] * Cplx(gur.comp[a][idx], gui.comp[a][idx]);
    const Cplx defect =
        Cplx(lr[idx], li[idx]) + s * adv + eq.q[idx] * Cplx(ur[idx], ui[idx]);
    worst = std::max(worst, std::abs(defect) / (mag[idx] * (1.0 + norm2(xi))));
  }
  out.residual = worst;
  return out;
}

DecayReport verify_decay(const ScalarReducedEquation& eq, const std::array<double, 3>& k,
                         const std::vector<double>& R_list, const RemainderOptions& opt) {
  require(!R_list.empty(), errc::invalid_argument, "verify_decay: empty R list");
  require(eq.v0.grid.dim() == 3, errc::invalid_argument,
          "verify_decay: probe frames need a three-dimensional box");
  const ScalarField H = conjugation_potential(eq);

  DecayReport rep;
  for (double R : R_list) {
    const XiPair pair = make_xi_pair(k, R);
    const RemainderSolution sol = solve_remainder(H, pair.xi1, opt);
    DecayRow row;
    row.R = R;
    row.xi_norm = std::sqrt(norm2(pair.xi1));
    row.omega_l2 = sol.l2_box;
    row.residual = sol.residual;
    row.iterations = sol.iterations;
    rep.rows.push_back(row);
  }

  for (const auto& r : rep.rows) rep.degenerate = rep.degenerate || r.omega_l2 <= 0.0;
  if (!rep.degenerate && rep.rows.size() >= 2) {
    const int n = static_cast<int>(rep.rows.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : rep.rows) {
      const double lx = std::log(r.xi_norm), ly = std::log(r.omega_l2);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

}  // namespace mfg
