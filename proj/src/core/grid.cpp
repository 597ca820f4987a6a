#include "core/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace mfg {

namespace {

std::array<std::int64_t, 3> strides(const Grid& g) {
  std::array<std::int64_t, 3> s{0, 0, 0};
  s[g.dim() - 1] = 1;
  for (int a = g.dim() - 2; a >= 0; --a) s[a] = s[a + 1] * g.nx(a + 1);
  return s;
}

// Odometer increment over the spatial multi-index, last axis fastest.
inline void advance(const Grid& g, std::array<int, 3>& i) {
  for (int a = g.dim() - 1; a >= 0; --a) {
    if (++i[a] < g.nx(a)) return;
    i[a] = 0;
  }
}

}  // namespace

Grid build_grid(const GridSpec& spec) {
  require(spec.dim >= 1 && spec.dim <= 3, errc::invalid_argument,
          "grid dim must be 1, 2 or 3");
  Grid g;
  g.spec = spec;
  g.n_space = 1;
  for (int a = 0; a < spec.dim; ++a) {
    require(spec.nx[a] >= 4, errc::invalid_argument,
            "need at least 4 nodes per axis for the boundary stencils");
    require(spec.hi[a] > spec.lo[a], errc::invalid_argument,
            "grid extents must satisfy lo < hi");
    g.h[a] = (spec.hi[a] - spec.lo[a]) / (spec.nx[a] - 1);
    g.n_space *= spec.nx[a];
  }
  for (int a = spec.dim; a < 3; ++a) {
    g.spec.nx[a] = 1;
    g.spec.lo[a] = 0.0;
    g.spec.hi[a] = 1.0;
    g.h[a] = 1.0;
  }
  require(spec.nt >= 0, errc::invalid_argument, "nt must be nonnegative");
  if (spec.nt > 0) {
    require(spec.horizon > 0.0, errc::invalid_argument,
            "positive horizon required when nt > 0");
    g.levels = spec.nt + 1;
    g.dt = spec.horizon / spec.nt;
  } else {
    g.levels = 1;
    g.dt = 0.0;
  }
  return g;
}

GridSpec refine(const GridSpec& spec, int nt_factor) {
  GridSpec r = spec;
  for (int a = 0; a < spec.dim; ++a) r.nx[a] = 2 * (spec.nx[a] - 1) + 1;
  if (spec.nt > 0) r.nt = spec.nt * nt_factor;
  return r;
}

ScalarField make_scalar(const Grid& g, double value) {
  ScalarField f;
  f.grid = g;
  f.data.assign(static_cast<std::size_t>(g.n_space), value);
  return f;
}

SpaceTimeField make_spacetime(const Grid& g, double value) {
  SpaceTimeField f;
  f.grid = g;
  f.data.assign(static_cast<std::size_t>(g.n_space) * g.levels, value);
  return f;
}

VectorField make_vector(const Grid& g) {
  VectorField f;
  f.grid = g;
  for (int a = 0; a < g.dim(); ++a)
    f.comp[a].assign(static_cast<std::size_t>(g.n_space), 0.0);
  return f;
}

ScalarField sample(const Grid& g, const SpatialFn& fn) {
  ScalarField f = make_scalar(g);
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
    f.data[k] = fn(g.node(i));
  return f;
}

SpaceTimeField sample(const Grid& g, const SpaceTimeFn& fn) {
  SpaceTimeField f = make_spacetime(g);
  for (int j = 0; j < g.levels; ++j) {
    const double t = g.time(j);
    double* s = f.slab(j);
    std::array<int, 3> i{0, 0, 0};
    for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i)) s[k] = fn(g.node(i), t);
  }
  return f;
}

ScalarField slice(const SpaceTimeField& f, int level) {
  require(level >= 0 && level < f.grid.levels, errc::invalid_argument,
          "slice level out of range");
  ScalarField s = make_scalar(f.grid);
  std::copy(f.slab(level), f.slab(level) + f.grid.n_space, s.data.begin());
  return s;
}

void set_slice(SpaceTimeField& f, int level, const ScalarField& s) {
  check_same_grid(f.grid, s.grid, "set_slice");
  std::copy(s.data.begin(), s.data.end(), f.data.begin() + static_cast<std::int64_t>(level) * f.grid.n_space);
}

std::int64_t face_node_count(const Grid& g, int f) {
  std::int64_t n = 1;
  for (int a = 0; a < g.dim(); ++a)
    if (a != face_axis(f)) n *= g.nx(a);
  return n;
}

std::array<int, 3> face_node_multi(const Grid& g, int f, std::int64_t fi) {
  const int ax = face_axis(f);
  std::array<int, 3> i{0, 0, 0};
  for (int a = g.dim() - 1; a >= 0; --a) {
    if (a == ax) continue;
    i[a] = static_cast<int>(fi % g.nx(a));
    fi /= g.nx(a);
  }
  i[ax] = face_side(f) == 0 ? 0 : g.nx(ax) - 1;
  return i;
}

double face_node_weight(const Grid& g, int f, std::int64_t fi) {
  const std::array<int, 3> i = face_node_multi(g, f, fi);
  double w = 1.0;
  for (int a = 0; a < g.dim(); ++a)
    if (a != face_axis(f)) w *= g.axis_weight(a, i[a]);
  return w;
}

bool face_node_tangentially_interior(const Grid& g, int f, std::int64_t fi) {
  const std::array<int, 3> i = face_node_multi(g, f, fi);
  for (int a = 0; a < g.dim(); ++a) {
    if (a == face_axis(f)) continue;
    if (i[a] == 0 || i[a] == g.nx(a) - 1) return false;
  }
  return true;
}

BoundaryTrace make_boundary_trace(const Grid& g, int levels) {
  BoundaryTrace t;
  t.grid = g;
  t.levels = levels;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::size_t n = static_cast<std::size_t>(face_node_count(g, f)) * levels;
    t.value[f].assign(n, 0.0);
    t.normal_deriv[f].assign(n, 0.0);
  }
  return t;
}

ScalarField gradient_component(const ScalarField& f, int axis) {
  const Grid& g = f.grid;
  require(axis >= 0 && axis < g.dim(), errc::invalid_argument, "gradient axis out of range");
  ScalarField out = make_scalar(g);
  const std::int64_t s = strides(g)[axis];
  const double h = g.h[axis];
  const int n = g.nx(axis);
  const double* v = f.data.data();
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i)) {
    const int ia = i[axis];
    if (ia > 0 && ia < n - 1)
      out.data[k] = (v[k + s] - v[k - s]) / (2.0 * h);
    else if (ia == 0)
      out.data[k] = (-3.0 * v[k] + 4.0 * v[k + s] - v[k + 2 * s]) / (2.0 * h);
    else
      out.data[k] = (3.0 * v[k] - 4.0 * v[k - s] + v[k - 2 * s]) / (2.0 * h);
  }
  return out;
}

VectorField gradient(const ScalarField& f) {
  VectorField out = make_vector(f.grid);
  for (int a = 0; a < f.grid.dim(); ++a) out.comp[a] = gradient_component(f, a).data;
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  const Grid& g = f.grid;
  ScalarField out = make_scalar(g);
  const auto st = strides(g);
  const double* v = f.data.data();
  for (int a = 0; a < g.dim(); ++a) {
    const std::int64_t s = st[a];
    const double h2 = g.h[a] * g.h[a];
    const int n = g.nx(a);
    std::array<int, 3> i{0, 0, 0};
    for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i)) {
      const int ia = i[a];
      double d2;
      if (ia > 0 && ia < n - 1)
        d2 = v[k - s] - 2.0 * v[k] + v[k + s];
      else if (ia == 0)
        d2 = 2.0 * v[k] - 5.0 * v[k + s] + 4.0 * v[k + 2 * s] - v[k + 3 * s];
      else
        d2 = 2.0 * v[k] - 5.0 * v[k - s] + 4.0 * v[k - 2 * s] - v[k - 3 * s];
      out.data[k] += d2 / h2;
    }
  }
  return out;
}

ScalarField divergence(const VectorField& f) {
  const Grid& g = f.grid;
  ScalarField out = make_scalar(g);
  ScalarField tmp;
  tmp.grid = g;
  for (int a = 0; a < g.dim(); ++a) {
    tmp.data = f.comp[a];
    ScalarField d = gradient_component(tmp, a);
    for (std::int64_t k = 0; k < g.n_space; ++k) out.data[k] += d.data[k];
  }
  return out;
}

namespace {

// Shared by the scalar and space-time trace extractors.
void trace_level(const Grid& g, const double* v, BoundaryTrace& t, int j) {
  const auto st = strides(g);
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const int ax = face_axis(f);
    const std::int64_t s = st[ax];
    const double h = g.h[ax];
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const std::int64_t k = g.index(face_node_multi(g, f, fi));
      t.val(f, fi, j) = v[k];
      // Outward three-point derivative; the interior lies at +s on low faces.
      if (face_side(f) == 0)
        t.nder(f, fi, j) = -(-3.0 * v[k] + 4.0 * v[k + s] - v[k + 2 * s]) / (2.0 * h);
      else
        t.nder(f, fi, j) = (3.0 * v[k] - 4.0 * v[k - s] + v[k - 2 * s]) / (2.0 * h);
    }
  }
}

}  // namespace

BoundaryTrace restrict_to_boundary(const ScalarField& f) {
  BoundaryTrace t = make_boundary_trace(f.grid, 1);
  trace_level(f.grid, f.data.data(), t, 0);
  return t;
}

BoundaryTrace restrict_to_boundary(const SpaceTimeField& f) {
  BoundaryTrace t = make_boundary_trace(f.grid, f.grid.levels);
  for (int j = 0; j < f.grid.levels; ++j) trace_level(f.grid, f.slab(j), t, j);
  return t;
}

double integrate(const ScalarField& f) {
  const Grid& g = f.grid;
  double acc = 0.0;
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
    acc += g.node_weight(i) * f.data[k];
  return acc;
}

double integrate(const SpaceTimeField& f) {
  const Grid& g = f.grid;
  double acc = 0.0;
  for (int j = 0; j < g.levels; ++j) {
    const double* v = f.slab(j);
    double lvl = 0.0;
    std::array<int, 3> i{0, 0, 0};
    for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
      lvl += g.node_weight(i) * v[k];
    acc += g.time_weight(j) * lvl;
  }
  return acc;
}

double integrate_boundary(const Grid& g,
                          const std::function<double(int, std::int64_t)>& fn) {
  double acc = 0.0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) acc += face_node_weight(g, f, fi) * fn(f, fi);
  }
  return acc;
}

double integrate_boundary(const ScalarField& f) {
  const Grid& g = f.grid;
  return integrate_boundary(
      g, [&](int fc, std::int64_t fi) { return f.data[g.index(face_node_multi(g, fc, fi))]; });
}

double integrate_boundary_time(
    const Grid& g, const std::function<double(int, std::int64_t, int)>& fn) {
  double acc = 0.0;
  for (int j = 0; j < g.levels; ++j)
    acc += g.time_weight(j) *
           integrate_boundary(g, [&](int f, std::int64_t fi) { return fn(f, fi, j); });
  return acc;
}

double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.data) m = std::max(m, std::abs(v));
  return m;
}

double sup_norm(const SpaceTimeField& f) {
  double m = 0.0;
  for (double v : f.data) m = std::max(m, std::abs(v));
  return m;
}

double l2_norm(const ScalarField& f) {
  const Grid& g = f.grid;
  double acc = 0.0;
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
    acc += g.node_weight(i) * f.data[k] * f.data[k];
  return std::sqrt(acc);
}

double l2_norm(const SpaceTimeField& f) {
  const Grid& g = f.grid;
  double acc = 0.0;
  for (int j = 0; j < g.levels; ++j) {
    const double* v = f.slab(j);
    double lvl = 0.0;
    std::array<int, 3> i{0, 0, 0};
    for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
      lvl += g.node_weight(i) * v[k] * v[k];
    acc += g.time_weight(j) * lvl;
  }
  return std::sqrt(acc);
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a.grid, b.grid, "sup_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k)
    m = std::max(m, std::abs(a.data[k] - b.data[k]));
  return m;
}

double sup_diff(const SpaceTimeField& a, const SpaceTimeField& b) {
  check_same_grid(a.grid, b.grid, "sup_diff");
  require(a.data.size() == b.data.size(), errc::incompatible_data, "level count mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k)
    m = std::max(m, std::abs(a.data[k] - b.data[k]));
  return m;
}

void check_same_grid(const Grid& a, const Grid& b, const char* where) {
  bool same = a.spec.dim == b.spec.dim && a.spec.nt == b.spec.nt &&
              a.spec.horizon == b.spec.horizon;
  for (int ax = 0; ax < 3 && same; ++ax)
    same = a.spec.nx[ax] == b.spec.nx[ax] && a.spec.lo[ax] == b.spec.lo[ax] &&
           a.spec.hi[ax] == b.spec.hi[ax];
  if (!same) fail(errc::incompatible_data, std::string("grid mismatch in ") + where);
}

}  // namespace mfg
