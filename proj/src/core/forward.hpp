#pragma once

#include <optional>

#include "core/grid.hpp"

namespace mfg {

// Coupled system on the box Q = Omega x (0,T):
//   backward:  -dv/dt - sigma Lap v + (kappa/2) |grad v|^2 = F(x,t,m)
//   forward:    dm/dt - Lap(sigma m) - div(kappa m grad v) = 0
//   v(x,T) = G(x, m(x,T)),  m(x,0) given,  Dirichlet data on the lateral sides.
// Both marches are backward-Euler in their own time direction with implicit
// diffusion; the Hamiltonian square is handled by a per-step lagged fixed
// point. Spatial accuracy is second order, time accuracy first order.

struct MFGCoefficients {
  SpaceTimeField sigma;
  SpaceTimeField kappa;
  bool time_static = true;  // true when every slab repeats level 0
};

MFGCoefficients constant_coefficients(const Grid& g, double sigma, double kappa);
MFGCoefficients make_coefficients(const Grid& g, const SpaceTimeFn& sigma,
                                  const SpaceTimeFn& kappa);

// Local coupling costs as truncated Taylor data around a reference density:
//   F(x,t,z) = sum_{k>=1} Fk[k-1](x,t) (z - m_ref(x))^k / k!
//   G(x,z)   = sum_{k>=1} Gk[k-1](x)   (z - m_ref(x))^k / k!
// Zeroth coefficients do not exist in this representation, so both couplings
// vanish identically at the reference density.
struct CostModel {
  ScalarField m_ref;
  std::vector<SpaceTimeField> Fk;
  std::vector<ScalarField> Gk;

  int order() const { return static_cast<int>(std::max(Fk.size(), Gk.size())); }
  double F(int level, std::int64_t node, double z) const;
  double G(std::int64_t node, double z) const;
};

CostModel make_cost_model(const Grid& g, ScalarField m_ref, std::vector<SpaceTimeField> Fk,
                          std::vector<ScalarField> Gk);

// F(.,.,m) over the whole cylinder and the induced terminal value G(., m(T)).
ScalarField cost_F_level(const CostModel& c, int level, const double* m_level,
                         const Grid& g);
ScalarField terminal_value(const CostModel& c, const ScalarField& m_T);

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  double damping = 0.5;       // Picard relaxation on the density
  double blow_up = 1e8;       // sup-norm guard on both fields
  int inner_max = 80;         // per-step fixed point for the Hamiltonian term
  double inner_tol = 1e-12;   // relative to the local value scale
};

struct StationarySolution {
  ScalarField v0;
  ScalarField m0;
  double lambda = 0.0;
};

struct TimeDependentSolution {
  SpaceTimeField v;
  SpaceTimeField m;
  int iterations = 0;
  double residual = 0.0;        // cross-substitution defect after convergence
  bool positivity_alarm = false;
  double min_density = 0.0;
};

// One backward sweep for v given the density path. v_data supplies lateral
// Dirichlet values; the terminal slice is G(., m(T)).
SpaceTimeField solve_hjb_backward(const MFGCoefficients& co, const CostModel& cost,
                                  const SpaceTimeField& m, const BoundaryTrace& v_data,
                                  const SolverOptions& opt = {});

// One forward sweep for m given the value path, from initial density m_init.
SpaceTimeField solve_fpk_forward(const MFGCoefficients& co, const SpaceTimeField& v,
                                 const ScalarField& m_init, const BoundaryTrace& m_data,
                                 const SolverOptions& opt = {});

// Damped Picard alternation of the two sweeps. Throws errc::max_iterations or
// errc::blow_up; a negative density only raises the alarm flag.
TimeDependentSolution solve_mfg_timedep(const MFGCoefficients& co, const CostModel& cost,
                                        const ScalarField& m_init,
                                        const BoundaryTrace& v_data,
                                        const BoundaryTrace& m_data,
                                        const SolverOptions& opt = {});

// Stationary pair for the unit-coefficient system
//   -Lap v + |grad v|^2/2 + lambda = F(x,m),  -Lap m - div(m grad v) = 0.
// Without a seed this is the flat pair (v = 0, m = 1/|Omega|, lambda = 0);
// with a seed v0 it is the Gibbs pair m0 = exp(-v0)/int exp(-v0), lambda = 0.
StationarySolution build_stationary_baseline(const Grid& g,
                                             const std::optional<ScalarField>& v0_seed = {});

struct StationaryResidual {
  double hjb_sup = 0.0;     // interior sup of -Lap v0 + |grad v0|^2/2 + lambda - F(x,m0)
  double fpk_sup = 0.0;     // interior sup of -Lap m0 - div(m0 grad v0)
  double mass_defect = 0.0; // |1 - int m0|
  double lambda_shift = 0.0;  // constant that would minimize the HJB residual
};

StationaryResidual verify_stationary_residual(const StationarySolution& s,
                                              const CostModel& cost);

// Lateral compatibility of linearization data (g for v, h for m) against the
// base pair: corner conditions at t = T (values and the backward equation) and
// t = 0 (zero initial trace and the forward equation). Returns the worst
// violation scaled by the data magnitude; callers reject above tolerance.
double compatibility_defect(const StationarySolution& base, const MFGCoefficients& co,
                            const SpaceTimeField& F1, const ScalarField& G1,
                            const SpaceTimeField& g_data, const SpaceTimeField& h_data);

}  // namespace mfg
