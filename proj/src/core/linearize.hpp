#pragma once

#include "core/forward.hpp"

namespace mfg {

// Expansion systems around a stable pair (v0, m0) under boundary perturbations
// eps*(g, h) of the lateral data. First order:
//   -dv1/dt - sigma Lap v1 + kappa grad v0 . grad v1 = F1 m1
//    dm1/dt - Lap(sigma m1) - div(kappa m0 grad v1) - div(kappa m1 grad v0) = 0
//   v1(T) = G1 m1(T),  m1(0) = 0,  lateral Dirichlet data (g, h).
// Second order, for two first-order solutions (va, ma), (vb, mb): same left
// sides with the extra known sources
//   v:  kappa grad va . grad vb  moved right with  F1 m2 + F2 ma mb,
//   m:  div(kappa [ma grad vb + mb grad va]) on the right,
//   v2(T) = G1 m2(T) + G2 ma(T) mb(T),  zero lateral data, m2(0) = 0.

struct PerturbationInput {
  SpaceTimeField g;         // value-data perturbation on the cylinder
  SpaceTimeField h;         // density-data perturbation
  std::vector<double> eps;  // amplitudes probed by expansion studies
};

struct LinearizedSolution {
  SpaceTimeField v;
  SpaceTimeField m;
  int order = 1;
  int iterations = 0;
  double residual = 0.0;  // sup defect of the assembled space-time rows
};

LinearizedSolution solve_first_order(const StationarySolution& base,
                                     const MFGCoefficients& co, const SpaceTimeField& F1,
                                     const ScalarField& G1, const BoundaryTrace& g_data,
                                     const BoundaryTrace& h_data,
                                     const SolverOptions& opt = {});

// Identical rows assembled as one sparse space-time system and solved
// directly; the cross-route check for the sweeping solver above.
LinearizedSolution solve_first_order_monolithic(const StationarySolution& base,
                                                const MFGCoefficients& co,
                                                const SpaceTimeField& F1,
                                                const ScalarField& G1,
                                                const BoundaryTrace& g_data,
                                                const BoundaryTrace& h_data);

LinearizedSolution solve_second_order(const StationarySolution& base,
                                      const MFGCoefficients& co, const SpaceTimeField& F1,
                                      const SpaceTimeField& F2, const ScalarField& G1,
                                      const ScalarField& G2, const LinearizedSolution& a,
                                      const LinearizedSolution& b,
                                      const SolverOptions& opt = {});

// Difference of two first-order solutions that share lateral data: zero
// Dirichlet traces, zero initial density, an interior source on the value
// rows, and an extra known field added to the terminal condition. Solved
// monolithically; this is the workhorse behind the trace fits.
LinearizedSolution solve_difference_system(const StationarySolution& base,
                                           const MFGCoefficients& co, const SpaceTimeField& F1,
                                           const ScalarField& G1, const SpaceTimeField& v_source,
                                           const ScalarField& terminal_extra);

// Stationary expansion pair on a space-only grid (unit coefficients):
//   -Lap v1 + grad v0 . grad v1 = F1 m1
//   -Lap m1 - div(m0 grad v1) - div(m1 grad v0) = 0, Dirichlet data.
struct StationaryLinearized {
  ScalarField v;
  ScalarField m;
};

StationaryLinearized solve_first_order_stationary(const StationarySolution& base,
                                                  const ScalarField& F1,
                                                  const BoundaryTrace& v_data,
                                                  const BoundaryTrace& m_data);

// Around a Gibbs pair the density perturbation closes on itself:
//   Lap m + s grad v0 . grad m + q m = 0.
// s = +1 is the equation the density row satisfies, q = Lap v0 - F1 m0;
// s = -1 is its formal adjoint, the family probing fields are built for,
// and there q = -F1 m0 (the Lap v0 term moves into the drift on transposing).
struct ScalarReducedEquation {
  ScalarField q;
  ScalarField v0;
  int drift_sign = 1;
};

ScalarReducedEquation reduce_to_scalar(const StationarySolution& base,
                                       const ScalarField& F1, int drift_sign = 1);

ScalarField solve_scalar_reduced(const ScalarReducedEquation& eq,
                                 const BoundaryTrace& m_data);

// Remainder study: r1(eps) = |S(eps) - base - eps A|, and with the curvature
// term r2(eps) = |S(eps) - base - eps A - eps^2/2 B|. Log-log slopes sit near
// 2 and 3 exactly when A and B are the first and second derivatives.
struct FrechetReport {
  std::vector<double> eps;
  std::vector<double> remainder_first;
  std::vector<double> remainder_second;
  double slope_first = 0.0;
  double slope_second = 0.0;
};

FrechetReport frechet_check(const StationarySolution& base, const MFGCoefficients& co,
                            const CostModel& cost, const PerturbationInput& pert,
                            const SolverOptions& opt = {});

}  // namespace mfg
