#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/errors.hpp"

namespace mfg {

/// Uniform tensor grid on a box, vertex-centered, boundary nodes included.
/// nx[a] counts nodes along axis a (>= 4 so one-sided second-order stencils fit);
/// nt counts time intervals (0 for stationary data, then one time level is carried).
struct GridSpec {
  int dim = 1;
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  std::array<int, 3> nx{0, 0, 0};
  int nt = 0;
  double horizon = 0.0;
};

struct Grid {
  GridSpec spec;
  std::array<double, 3> h{1.0, 1.0, 1.0};
  std::int64_t n_space = 0;
  int levels = 1;  // time levels stored by space-time fields (nt + 1, or 1 if nt == 0)
  double dt = 0.0;

  int dim() const { return spec.dim; }
  int nx(int a) const { return spec.nx[a]; }

  // Row-major linear index, last spatial axis fastest.
  std::int64_t index(const std::array<int, 3>& i) const {
    std::int64_t k = 0;
    for (int a = 0; a < spec.dim; ++a) k = k * spec.nx[a] + i[a];
    return k;
  }
  std::array<int, 3> unindex(std::int64_t k) const {
    std::array<int, 3> i{0, 0, 0};
    for (int a = spec.dim - 1; a >= 0; --a) {
      i[a] = static_cast<int>(k % spec.nx[a]);
      k /= spec.nx[a];
    }
    return i;
  }

  double coord(int a, int i) const { return spec.lo[a] + h[a] * i; }
  std::array<double, 3> node(const std::array<int, 3>& i) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < spec.dim; ++a) x[a] = coord(a, i[a]);
    return x;
  }
  double time(int j) const { return dt * j; }

  bool on_boundary(const std::array<int, 3>& i) const {
    for (int a = 0; a < spec.dim; ++a)
      if (i[a] == 0 || i[a] == spec.nx[a] - 1) return true;
    return false;
  }

  double volume() const {
    double v = 1.0;
    for (int a = 0; a < spec.dim; ++a) v *= spec.hi[a] - spec.lo[a];
    return v;
  }

  // Trapezoid quadrature weights.
  double axis_weight(int a, int i) const {
    return (i == 0 || i == spec.nx[a] - 1) ? 0.5 * h[a] : h[a];
  }
  double node_weight(const std::array<int, 3>& i) const {
    double w = 1.0;
    for (int a = 0; a < spec.dim; ++a) w *= axis_weight(a, i[a]);
    return w;
  }
  double time_weight(int j) const {
    if (levels < 2) return 1.0;
    return (j == 0 || j == levels - 1) ? 0.5 * dt : dt;
  }
};

/// Validates the spec and precomputes spacings. Throws errc::invalid_argument.
Grid build_grid(const GridSpec& spec);

/// Refined spec: each spatial cell split in two (nodes 2n-1); nt scaled by nt_factor.
GridSpec refine(const GridSpec& spec, int nt_factor = 2);

// ---- fields ----

struct ScalarField {
  Grid grid;
  std::vector<double> data;  // n_space values, grid ordering
  double& operator[](std::int64_t k) { return data[k]; }
  double operator[](std::int64_t k) const { return data[k]; }
};

struct SpaceTimeField {
  Grid grid;
  std::vector<double> data;  // levels * n_space, time-major slabs
  double* slab(int j) { return data.data() + static_cast<std::int64_t>(j) * grid.n_space; }
  const double* slab(int j) const {
    return data.data() + static_cast<std::int64_t>(j) * grid.n_space;
  }
  double& at(int j, std::int64_t k) { return data[static_cast<std::int64_t>(j) * grid.n_space + k]; }
  double at(int j, std::int64_t k) const {
    return data[static_cast<std::int64_t>(j) * grid.n_space + k];
  }
};

struct VectorField {
  Grid grid;
  std::array<std::vector<double>, 3> comp;  // comp[a] has n_space entries, a < dim
};

ScalarField make_scalar(const Grid& g, double value = 0.0);
SpaceTimeField make_spacetime(const Grid& g, double value = 0.0);
VectorField make_vector(const Grid& g);

using SpatialFn = std::function<double(const std::array<double, 3>&)>;
using SpaceTimeFn = std::function<double(const std::array<double, 3>&, double)>;

ScalarField sample(const Grid& g, const SpatialFn& f);
SpaceTimeField sample(const Grid& g, const SpaceTimeFn& f);

ScalarField slice(const SpaceTimeField& f, int level);
void set_slice(SpaceTimeField& f, int level, const ScalarField& s);

// ---- boundary ----

// Face id: 2*axis + side, side 0 = low end, side 1 = high end. Face nodes run
// row-major over the tangential axes (increasing axis order, last fastest) and
// include edges and corners; traces on adjacent faces share those nodes.
inline int face_axis(int f) { return f / 2; }
inline int face_side(int f) { return f % 2; }

std::int64_t face_node_count(const Grid& g, int f);
std::array<int, 3> face_node_multi(const Grid& g, int f, std::int64_t fi);
// Tangential trapezoid weight (1.0 in 1D where a face is a single point).
double face_node_weight(const Grid& g, int f, std::int64_t fi);
// True when every tangential index is strictly interior.
bool face_node_tangentially_interior(const Grid& g, int f, std::int64_t fi);

/// Boundary values and outward-normal derivatives per face, per time level.
/// levels == 1 for traces of spatial fields.
struct BoundaryTrace {
  Grid grid;
  int levels = 1;
  std::array<std::vector<double>, 6> value;
  std::array<std::vector<double>, 6> normal_deriv;

  double& val(int f, std::int64_t fi, int j) {
    return value[f][static_cast<std::int64_t>(j) * face_node_count(grid, f) + fi];
  }
  double val(int f, std::int64_t fi, int j) const {
    return value[f][static_cast<std::int64_t>(j) * face_node_count(grid, f) + fi];
  }
  double& nder(int f, std::int64_t fi, int j) {
    return normal_deriv[f][static_cast<std::int64_t>(j) * face_node_count(grid, f) + fi];
  }
  double nder(int f, std::int64_t fi, int j) const {
    return normal_deriv[f][static_cast<std::int64_t>(j) * face_node_count(grid, f) + fi];
  }
};

BoundaryTrace make_boundary_trace(const Grid& g, int levels);

// ---- differential operators, second order ----
// Centered stencils inside, one-sided three/four point stencils on the boundary,
// so every node carries a second-order value.

ScalarField gradient_component(const ScalarField& f, int axis);
VectorField gradient(const ScalarField& f);
ScalarField laplacian(const ScalarField& f);
ScalarField divergence(const VectorField& f);

/// Values plus three-point outward normal derivatives on every face.
BoundaryTrace restrict_to_boundary(const ScalarField& f);
BoundaryTrace restrict_to_boundary(const SpaceTimeField& f);

// ---- quadrature ----

double integrate(const ScalarField& f);           // over the box
double integrate(const SpaceTimeField& f);        // over box x (0, horizon)
double integrate_boundary(const ScalarField& f);  // over the box surface

// Boundary integral of per-node data supplied by a callback (spatial, one level).
double integrate_boundary(const Grid& g,
                          const std::function<double(int f, std::int64_t fi)>& fn);
// Same over surface x (0, horizon) with trapezoid time weights.
double integrate_boundary_time(
    const Grid& g, const std::function<double(int f, std::int64_t fi, int j)>& fn);

// ---- norms and comparisons ----

double sup_norm(const ScalarField& f);
double sup_norm(const SpaceTimeField& f);
double l2_norm(const ScalarField& f);       // continuous L2 via trapezoid weights
double l2_norm(const SpaceTimeField& f);    // L2 over box x (0, T)
double sup_diff(const ScalarField& a, const ScalarField& b);
double sup_diff(const SpaceTimeField& a, const SpaceTimeField& b);

void check_same_grid(const Grid& a, const Grid& b, const char* where);

}  // namespace mfg
