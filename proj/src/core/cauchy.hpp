#pragma once

// Passive boundary measurements. Three record shapes cover what an observer
// sees of a run: the full space-time record C1 (interior census at the two
// end times plus lateral traces), the stationary Cauchy pair C2 (density
// trace and its normal derivative per probing solution), and the lateral
// trace pack C3 of a linearized experiment. On top of C1 sits the energy
// bookkeeping identity that converts boundary data into the interior
// integral of the running cost, and its power-law corollary.
//
// Archives bundle a measurement campaign into one directory (CSV streams
// plus a JSON manifest). The generating cost model never enters an archive;
// only an opaque content hash of it is recorded, so reconstruction code can
// be audited against the right campaign without being able to peek.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/forward.hpp"

namespace mfg {

// Everything measurable about one time-dependent run. The lateral traces
// carry values and outward derivatives level by level; hamiltonian_flux is
// the momentum flux kappa dv/dnu, stored face by face with the same
// (level * face_node_count + face_index) layout the traces use.
struct MeasurementC1 {
  Grid grid;
  ScalarField v_start, m_start;  // interior census at t = 0
  ScalarField v_end, m_end;      // interior census at t = T
  BoundaryTrace v;               // v and dv/dnu
  BoundaryTrace m;               // m and d(sigma m)/dnu
  std::array<std::vector<double>, 6> hamiltonian_flux;
};

// Cauchy pair of one stationary probing solution. flux_diff keeps the raw
// two-point difference quotient (boundary minus first interior node, over h)
// alongside the second-order normal derivative; discrete Green identities
// telescope exactly against the two-point form.
struct MeasurementC2 {
  Grid grid;
  BoundaryTrace m;
  std::array<std::vector<double>, 6> flux_diff;
};

// Lateral traces of one linearized perturbation experiment, tagged by the
// input that drove it.
struct MeasurementC3 {
  Grid grid;
  std::string tag;
  int order = 1;
  BoundaryTrace v;
  BoundaryTrace m;
};

MeasurementC1 extract_c1(const SpaceTimeField& v, const SpaceTimeField& m,
                         const MFGCoefficients& co);
MeasurementC2 extract_c2(const ScalarField& m);
MeasurementC3 extract_c3(const SpaceTimeField& v, const SpaceTimeField& m,
                         const std::string& tag, int order = 1);

// True when every stream of the two records agrees bitwise (grids included).
bool c2_identical(const MeasurementC2& a, const MeasurementC2& b);

// Evaluates, from measured data only,
//   int_O v(0)m(0) - int_O v(T)m(T)
//     - int_S sigma m dv/dnu + int_S v d(sigma m)/dnu + int_S v m (kappa dv/dnu)
// which for any solution pair of the coupled system equals the interior
// integral int_Q (F + (kappa/2)|grad v|^2) m. Runs whose value function is
// spatially uniform have no kinetic term, so the result is int_Q F m.
double energy_integral_from_boundary(const MeasurementC1& c1,
                                     const MFGCoefficients& co);

// Under a pure power cost F = alpha m^k observed at a uniform census m = c,
// the boundary integral above equals alpha c^(k+1) T |Omega|. Inverts that
// relation. Requires c > 0 and k >= 0.
double recover_power_coefficient(const MeasurementC1& c1,
                                 const MFGCoefficients& co, int k, double c);

// Additive Gaussian perturbation of every measured stream (trace values,
// derivatives, fluxes). Interior census slices stay clean. Deterministic in
// the seed; stddev zero leaves the record untouched.
void add_trace_noise(MeasurementC1& c1, double stddev, std::uint64_t seed);
void add_trace_noise(MeasurementC2& c2, double stddev, std::uint64_t seed);
void add_trace_noise(MeasurementC3& c3, double stddev, std::uint64_t seed);

// ---- measurement archives ----

// One stationary probing record. Complex probing data is stored as separate
// real and imaginary sweeps; plain real records (the unprobed baseline)
// leave `im` empty. k, R, and member identify which probe drove the
// Dirichlet data, so reconstruction can rebuild the matching reference
// solve without any access to the generator.
struct StationaryRecord {
  std::string tag;
  std::array<double, 3> k{0.0, 0.0, 0.0};
  double R = 0.0;
  int member = 0;
  MeasurementC2 re;
  std::optional<MeasurementC2> im;
};

struct TimeDependentRecord {
  std::string tag;
  int order = 1;
  std::string parent_a, parent_b;  // driving experiments of an order-2 record
  MeasurementC3 rec;
};

// A full campaign: grid, public coefficient descriptions, the noise knob
// actually applied, and the records. generator_hash is an opaque fingerprint
// of the hidden cost model, recorded for audit only.
struct CauchyArchive {
  GridSpec grid;
  std::string sigma_expr, kappa_expr;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string generator_hash;
  StationaryRecord baseline;
  std::vector<StationaryRecord> stationary;
  std::vector<TimeDependentRecord> timedep;
  std::optional<MeasurementC1> c1;
};

// Writes one directory: manifest.json plus one CSV per trace stream (and
// binary field files for the C1 census slices). The manifest lands last so
// its presence marks a complete archive. Numeric text is written with
// round-trip precision; rewriting an archive reproduces it byte for byte.
void write_archive(const std::string& dir, const CauchyArchive& a);
CauchyArchive read_archive(const std::string& dir);

}  // namespace mfg
