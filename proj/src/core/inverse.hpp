#pragma once

// Reconstruction side of the laboratory. Everything here consumes boundary
// measurement archives plus whatever coefficients are declared known, and
// never touches the hidden cost model: the stationary pair is rebuilt from
// one density trace, interior Fourier data of the first-order source come
// out of probe pairings, the terminal coupling and the bilinear level are
// least-squares fits of lateral traces, and a unique-continuation residual
// check quantifies how strongly homogeneous data pin the difference to zero.

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "core/cauchy.hpp"
#include "core/cgo.hpp"
#include "core/forward.hpp"
#include "core/linearize.hpp"

namespace mfg {

// ---- stationary pair from one boundary density ----

struct StationaryRecoveryOptions {
  // Relative tolerance on the overdetermined Neumann stream; above it the
  // Cauchy pair is declared inconsistent.
  double misfit_tol = 0.05;
};

struct StationaryRecovery {
  StationarySolution base;
  double neumann_misfit = 0.0;  // relative sup gap of the unused Neumann data
};

// Solves for the square root of the density as a harmonic function with the
// measured Dirichlet data, squares and normalizes, and fixes the potential
// gauge as v0 = -log m0. The Neumann stream is not consumed by the solve; its
// misfit against the recovered field is the compatibility check.
StationaryRecovery recover_stationary_state(const MeasurementC2& baseline,
                                            const StationaryRecoveryOptions& opt = {});
StationaryRecovery recover_stationary_state(const CauchyArchive& archive,
                                            const StationaryRecoveryOptions& opt = {});

// ---- conjugated scalar solves ----

// Dirichlet solve of the reduced scalar equation written in the variables
// mu = e^{-xi.x} m. Off-diagonal stencil entries pick up factors e^{±xi_a h_a}
// and stay bounded, so the exponential growth of the probe never meets the
// factorization; the caller assembles m = e^{xi.x} mu pointwise afterwards.
// mu_boundary supplies boundary nodes (interior entries are ignored).
std::vector<Cplx> solve_scalar_conjugated(const ScalarReducedEquation& eq, const CplxVec& xi,
                                          const std::vector<Cplx>& mu_boundary);

// ---- boundary pairings ----

// Entry-wise difference of two records sharing a grid: traces and flux
// streams subtract, so records of the same experiment cancel exactly.
MeasurementC2 c2_difference(const MeasurementC2& a, const MeasurementC2& b);

// Surface quadrature of u times the measured normal-derivative difference;
// second-order accurate against the interior source sum.
Cplx boundary_pairing(const MeasurementC2& diff, const CgoFunction& u);

// Two-point flux route: telescopes the interior summation by parts exactly,
// so against a probe in the adjoint stencil kernel it reproduces the interior
// source sum to rounding. Needs the base for the drift weights on the faces.
Cplx boundary_pairing_flux(const MeasurementC2& diff, const CgoFunction& u,
                           const StationarySolution& base);

// ---- interior Fourier data from probe records ----

struct FourierSample {
  std::array<double, 3> k{0.0, 0.0, 0.0};
  double R = 0.0;
  Cplx value{0.0, 0.0};
  double residual = 0.0;  // probe remainder defect carried along for audit
};

struct FourierSamples {
  std::vector<FourierSample> rows;
  double conj_defect = 0.0;  // worst relative asymmetry between k and -k rows
};

struct SampleOptions {
  RemainderOptions remainder{};
  double conj_tol = 1e-6;  // enforced when the archive declares zero noise
};

// For every stationary record: rebuild the probe pair from (k, R, member),
// re-solve the reference model with the archived Dirichlet data in conjugated
// variables, and pair the flux difference against the complementary probe.
// Rows are produced in archive order and independent of the worker count.
FourierSamples recover_fourier_samples(const CauchyArchive& archive,
                                       const StationarySolution& base,
                                       const SampleOptions& opt = {});

// Least-squares synthesis of the sampled spectrum in the cosine/sine basis of
// the probed frequencies (largest R per frequency), divided by the recovered
// density. Rejects densities below the positivity floor.
ScalarField invert_fourier(const FourierSamples& samples, const StationarySolution& base);

// ---- trace fits for the terminal coupling and the bilinear level ----

struct RecoveryOptions {
  int coarsen_space = 4;  // recovery mesh stride per spatial axis
  int coarsen_time = 4;   // recovery mesh stride in time (bilinear level only)
  double tikhonov = 1e-6;            // ridge weight relative to sigma_max
  double floor = 1e-6;               // positivity floor relative to the field maximum
  double degenerate_fraction = 0.5;  // masked fraction above which data are rejected
  SolverOptions solver{};            // forward tolerances for the reference solves
  RecoveryOptions() { solver.tol = 1e-10; solver.max_iterations = 400; }
};

struct FitDiagnostics {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  int effective_rank = 0;
  double tikhonov = 0.0;        // absolute ridge weight actually used
  double residual = 0.0;        // Euclidean misfit of the fitted traces
  double data_norm = 0.0;       // Euclidean size of the trace misfit data
  double masked_fraction = 0.0; // basis nodes suppressed by the positivity floor
};

struct TerminalRecovery {
  ScalarField G;
  FitDiagnostics fit;
};

// Fits, per first-order record, the unknown terminal datum of the difference
// against the reference model (terminal coupling zero) on a coarse nodal
// basis, then combines the fitted data across records as a ridge ratio
// against the implied terminal densities. The running source must be known.
TerminalRecovery recover_terminal_linear(const CauchyArchive& archive, const SpaceTimeField& F1,
                                         const RecoveryOptions& opt = {});

struct HigherOrderRecovery {
  SpaceTimeField F;
  ScalarField G;
  FitDiagnostics fit;
};

// Bilinear level: rebuilds the parent experiments from their archived traces
// with the known first-order pair, forms the measured-minus-reference trace
// misfit per record pair, and fits the unknown source and terminal coupling
// jointly through the difference system, the unknowns multiplying the known
// parent products. Nodes whose products never clear the positivity floor are
// masked; data whose products degenerate almost everywhere are rejected.
HigherOrderRecovery recover_higher_order(const CauchyArchive& archive, int order,
                                         const SpaceTimeField& F1, const ScalarField& G1,
                                         const RecoveryOptions& opt = {});

// ---- unique continuation residual check ----

struct UcpOptions {
  double tol = 1e-9;           // target interior sup of the iterate
  int max_iterations = 50000;
  std::uint64_t seed = 0x5eedULL;
  double seed_amplitude = 1.0;  // sup size of the random start; zero starts at zero
};

struct UcpReport {
  double interior_sup = 0.0;  // largest entry of the final iterate
  double residual = 0.0;      // Euclidean equation residual of the final iterate
  int iterations = 0;
};

// Stacks the linearized system with zero Cauchy data on every face (Dirichlet
// and Neumann rows together), equilibrates the rows, and runs conjugate
// gradients on the normal equations from a seeded random start. The iterate
// collapsing to zero is the quantitative discrete continuation statement.
UcpReport ucp_residual_check(const StationarySolution& base, const MFGCoefficients& co,
                             const SpaceTimeField& F1, const ScalarField& G1,
                             const UcpOptions& opt = {});

// Equation residual of a candidate difference in the same equilibrated rows,
// for negative controls: interior bumps satisfy every trace row yet light up
// the equation rows.
double ucp_equation_residual(const StationarySolution& base, const MFGCoefficients& co,
                             const SpaceTimeField& F1, const ScalarField& G1,
                             const SpaceTimeField& v, const SpaceTimeField& m);

}  // namespace mfg
