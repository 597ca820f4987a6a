#pragma once

#include <array>
#include <complex>

#include "core/linearize.hpp"

namespace mfg {

// Complex geometric optics machinery for the reduced scalar equation
//   Lap m + s grad v0 . grad m + q m = 0.
// Probes are complex frequencies xi with xi.xi = 0; solutions take the form
//   m = e^{xi.x - s v0/2} (1 + omega(x; xi))
// and the remainder omega shrinks like 1/|xi|, which is what turns boundary
// pairings of two such solutions into Fourier samples of the unknown.

using Cplx = std::complex<double>;
using CplxVec = std::array<Cplx, 3>;

Cplx self_dot(const CplxVec& xi);  // sum xi_a^2, no conjugation
double norm2(const CplxVec& xi);   // sum |xi_a|^2

// A probe pair sharing a target frequency k: xi1 + xi2 = i k holds bitwise,
// each member satisfies xi.xi = 0 and |xi|^2 = (1/4 + 4 R^2)|k|^2.
struct XiPair {
  CplxVec xi1{};
  CplxVec xi2{};
  std::array<double, 3> k{0.0, 0.0, 0.0};
  double R = 0.0;
  double symbol_defect = 0.0;  // max relative grid symbol left on the members
  int iterations = 0;          // correction steps spent (0 for the closed form)
};

// Closed-form pair built from a deterministic orthogonal frame {u, w} of the
// plane normal to k: u comes from the canonical axis with the smallest |k.e|
// projected off k, w = k_hat x u, a = |k|(u+w)/sqrt(2), b = |k|(u-w)/sqrt(2).
// With A = sqrt(R^2 + 1/16), B = sqrt(R^2 - 1/16):
//   xi1 = (i/2) k + (A + iB) a + (A - iB) b,   xi2 = i k - xi1.
// Re xi1 is then parallel to u, a coordinate axis whenever k has a vanishing
// component; that alignment is what keeps the spectral solver well away from
// resonance. Requires k != 0 and R >= 1/4 so the radicals stay real.
XiPair make_xi_pair(const std::array<double, 3>& k, double R);

// Discrete Laplacian symbol: Lap_h e^{xi.x} = s_h(xi) e^{xi.x} on interior
// stencils, s_h(xi) = sum_a 2(cosh(xi_a h_a) - 1)/h_a^2.
Cplx discrete_symbol(const CplxVec& xi, const Grid& g);

// Nudges the closed-form pair so s_h vanishes for both members on this grid
// (Gauss-Newton on the shared offset zeta, xi = ik/2 +- zeta, so xi1 + xi2
// stays ik bitwise). The sampled exponentials then sit in the kernel of the
// grid Laplacian up to rounding, which boundary pairings rely on.
XiPair discrete_isotropic_pair(const std::array<double, 3>& k, double R, const Grid& g);

// Zeroth-order coefficient after the Liouville substitution m = e^{-s v0/2} w:
//   Lap w + H w = 0,  H = q - |grad v0|^2/4 - (s/2) Lap v0.
// Both drift signs of the reduction produce the same H (for s = -1 the q of
// the adjoint equation drops the Lap v0 term, and the conjugation restores it).
ScalarField conjugation_potential(const ScalarReducedEquation& eq);

struct RemainderOptions {
  double tol = 1e-11;       // fixed-point update tolerance, relative to sup|omega|
  int max_iterations = 200;
  double exp_cap = 600.0;   // largest |Re xi . x| build_cgo may exponentiate
};

struct RemainderSolution {
  Grid box;                 // the grid H lives on
  std::vector<Cplx> omega;  // box node values of the remainder
  double l2_box = 0.0;      // trapezoid L2 norm of |omega| over the box
  double sup_box = 0.0;
  double residual = 0.0;    // sup |L omega + H(1+omega)| / (1 + sup|H(1+omega)|)
  double symbol_floor = 0.0;  // min |sigma| over the shifted lattice actually used
  int shift_axis = 0;         // axis carrying the half-mode shift
  int iterations = 0;
};

// Solves Lap omega + 2 xi . grad omega + H (1 + omega) = 0 with H extended to
// a torus of doubled side by even reflection. The constant-coefficient part is
// inverted through its Fourier symbol sigma(mu) = -|mu|^2 + 2i xi.mu on a
// half-mode-shifted lattice (the shift axis is chosen to maximize the measured
// min |sigma|), so no lattice mode resonates and the inverse shrinks like
// 1/|xi|; the fixed point omega <- -L^{-1}(H (1 + omega)) then contracts once
// |xi| beats sup|H|. Throws errc::invalid_argument when every shift axis
// leaves a near-resonant mode, errc::non_contraction when updates grow, and
// errc::max_iterations when the budget runs out.
RemainderSolution solve_remainder(const ScalarField& H, const CplxVec& xi,
                                  const RemainderOptions& opt = {});
RemainderSolution solve_remainder(const ScalarReducedEquation& eq, const CplxVec& xi,
                                  const RemainderOptions& opt = {});

struct CgoFunction {
  Grid grid;
  std::vector<Cplx> values;  // e^{xi.x - s v0/2} (1 + omega) at box nodes
  CplxVec xi{};
  int drift_sign = 1;
  double remainder_l2 = 0.0;
  double residual = 0.0;  // interior FD defect of the reduced equation, divided
                          // by the local exponential magnitude and (1 + |xi|^2)
  int iterations = 0;
};

// Assembles the full growing solution for the reduced equation. Guards the
// exponent against overflow (|Re xi . x| <= opt.exp_cap over the box corners).
CgoFunction build_cgo(const ScalarReducedEquation& eq, const CplxVec& xi,
                      const RemainderOptions& opt = {});

struct DecayRow {
  double R = 0.0;
  double xi_norm = 0.0;   // |xi| of the first pair member
  double omega_l2 = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct DecayReport {
  std::vector<DecayRow> rows;
  double slope = 0.0;      // least-squares slope of log omega_l2 vs log xi_norm
  bool degenerate = false; // every norm vanished (H = 0), slope left at 0
};

// Solves the remainder for the first member of make_xi_pair(k, R) at each R
// and fits the decay rate; the theorem this reproduces puts the slope at -1.
DecayReport verify_decay(const ScalarReducedEquation& eq, const std::array<double, 3>& k,
                         const std::vector<double>& R_list,
                         const RemainderOptions& opt = {});

}  // namespace mfg
