#include "core/inverse.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/expr.hpp"
#include "core/parallel.hpp"
#include "core/schemes.hpp"

namespace mfg {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<Cplx>;

std::array<std::int64_t, 3> strides(const Grid& g) {
  std::array<std::int64_t, 3> s{0, 0, 0};
  s[g.dim() - 1] = 1;
  for (int a = g.dim() - 2; a >= 0; --a) s[a] = s[a + 1] * g.nx(a + 1);
  return s;
}

std::vector<double> take(const SpaceTimeField& f, int j) {
  return std::vector<double>(f.slab(j), f.slab(j) + f.grid.n_space);
}

std::array<std::vector<double>, 3> drift_field(const Grid& g, const std::vector<double>& kappa,
                                               const VectorField& grad_v0) {
  std::array<std::vector<double>, 3> b;
  for (int a = 0; a < g.dim(); ++a) {
    b[a].resize(static_cast<std::size_t>(g.n_space));
    for (std::int64_t k = 0; k < g.n_space; ++k) b[a][k] = kappa[k] * grad_v0.comp[a][k];
  }
  return b;
}

std::array<const std::vector<double>*, 3> pointers(const std::array<std::vector<double>, 3>& b) {
  return {&b[0], &b[1], &b[2]};
}

Cplx cdot(const CplxVec& xi, const std::array<double, 3>& x, int dim) {
  Cplx s = 0.0;
  for (int a = 0; a < dim; ++a) s += xi[a] * x[a];
  return s;
}

MFGCoefficients coefficients_from_archive(const CauchyArchive& a, const Grid& g) {
  const Expr se = Expr::parse(a.sigma_expr);
  const Expr ke = Expr::parse(a.kappa_expr);
  const double T = g.spec.horizon;
  return make_coefficients(
      g, [&](const std::array<double, 3>& x, double t) { return se.eval(x, t, T); },
      [&](const std::array<double, 3>& x, double t) { return ke.eval(x, t, T); });
}

// ---- ridge least squares shared by the trace fits ----

struct RidgeSolver {
  Eigen::MatrixXd U, V;
  Eigen::VectorXd s;
  double lambda = 0.0;

  Eigen::VectorXd apply(const Eigen::VectorXd& b) const {
    Eigen::VectorXd c = U.transpose() * b;
    for (Eigen::Index i = 0; i < c.size(); ++i)
      c[i] = s[i] > 0.0 ? c[i] * s[i] / (s[i] * s[i] + lambda * lambda) : 0.0;
    return V * c;
  }
};

RidgeSolver make_ridge(const Eigen::MatrixXd& A, double relative_weight) {
  RidgeSolver r;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  r.U = svd.matrixU();
  r.V = svd.matrixV();
  r.s = svd.singularValues();
  r.lambda = r.s.size() > 0 ? relative_weight * r.s[0] : 0.0;
  return r;
}

void fill_spectrum(const RidgeSolver& r, FitDiagnostics& fit) {
  fit.sigma_max = r.s.size() > 0 ? r.s[0] : 0.0;
  fit.sigma_min = r.s.size() > 0 ? r.s[r.s.size() - 1] : 0.0;
  fit.tikhonov = r.lambda;
  fit.effective_rank = 0;
  for (Eigen::Index i = 0; i < r.s.size(); ++i)
    if (r.s[i] > 1e-10 * fit.sigma_max) ++fit.effective_rank;
}

// ---- coarse recovery meshes ----

struct CoarseSpace {
  std::array<int, 3> cn{1, 1, 1};
  int stride = 1;
  int dim = 1;
  std::int64_t count() const {
    std::int64_t c = 1;
    for (int a = 0; a < dim; ++a) c *= cn[a];
    return c;
  }
};

CoarseSpace make_coarse_space(const Grid& g, int stride) {
  require(stride >= 1, errc::invalid_argument, "recovery mesh: stride must be positive");
  CoarseSpace c;
  c.stride = stride;
  c.dim = g.dim();
  for (int a = 0; a < g.dim(); ++a) {
    require((g.nx(a) - 1) % stride == 0, errc::invalid_argument,
            "recovery mesh: stride must divide the cell count");
    c.cn[a] = (g.nx(a) - 1) / stride + 1;
  }
  return c;
}

// Multilinear prolongation of coarse nodal values; exact on fields the coarse
// mesh can represent.
ScalarField prolong_space(const Grid& g, const CoarseSpace& c, const double* w) {
  ScalarField out = make_scalar(g);
  const int corners = 1 << g.dim();
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    const auto mi = g.unindex(k);
    double acc = 0.0;
    for (int msk = 0; msk < corners; ++msk) {
      double wt = 1.0;
      std::int64_t ci = 0;
      bool used = true;
      for (int a = 0; a < g.dim(); ++a) {
        const int ic = mi[a] / c.stride;
        const double fr = static_cast<double>(mi[a] - ic * c.stride) / c.stride;
        const int up = (msk >> a) & 1;
        const double wa = up ? fr : 1.0 - fr;
        if (wa == 0.0) {
          used = false;
          break;
        }
        wt *= wa;
        ci = ci * c.cn[a] + ic + up;
      }
      if (used) acc += wt * w[ci];
    }
    out[k] = acc;
  }
  return out;
}

// Time-major coarse layout: level block of spatial coarse values per coarse
// time node, linear in time between them.
SpaceTimeField prolong_spacetime(const Grid& g, const CoarseSpace& cs, int tstride,
                                 int coarse_levels, const double* w) {
  std::vector<ScalarField> slabs;
  slabs.reserve(static_cast<std::size_t>(coarse_levels));
  for (int jc = 0; jc < coarse_levels; ++jc)
    slabs.push_back(prolong_space(g, cs, w + static_cast<std::int64_t>(jc) * cs.count()));
  SpaceTimeField out = make_spacetime(g);
  for (int j = 0; j < g.levels; ++j) {
    const int jc = j / tstride;
    const double fr = static_cast<double>(j - jc * tstride) / tstride;
    for (std::int64_t k = 0; k < g.n_space; ++k) {
      double v = (1.0 - fr) * slabs[static_cast<std::size_t>(jc)][k];
      if (fr > 0.0) v += fr * slabs[static_cast<std::size_t>(jc) + 1][k];
      out.at(j, k) = v;
    }
  }
  return out;
}

// ---- trace stacking shared by the fits ----

std::int64_t stacked_rows(const Grid& g) {
  std::int64_t s = 0;
  for (int f = 0; f < 2 * g.dim(); ++f) s += face_node_count(g, f) * g.levels;
  return 2 * s;
}

void stack_traces(const BoundaryTrace& v, const BoundaryTrace& m, double sign,
                  Eigen::Ref<Eigen::VectorXd> dst) {
  const Grid& g = v.grid;
  std::int64_t at = 0;
  for (const BoundaryTrace* t : {&v, &m})
    for (int f = 0; f < 2 * g.dim(); ++f)
      for (double val : t->normal_deriv[f]) dst[at++] += sign * val;
}

Eigen::VectorXd stack_solution(const LinearizedSolution& sol) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(stacked_rows(sol.v.grid));
  stack_traces(restrict_to_boundary(sol.v), restrict_to_boundary(sol.m), 1.0, out);
  return out;
}

const TimeDependentRecord* find_record(const CauchyArchive& a, const std::string& tag,
                                       int order) {
  for (const TimeDependentRecord& r : a.timedep)
    if (r.order == order && r.tag == tag) return &r;
  return nullptr;
}

void check_record_traces(const MeasurementC3& rec, const Grid& g, const char* where) {
  check_same_grid(rec.v.grid, g, where);
  check_same_grid(rec.m.grid, g, where);
  require(rec.v.levels == g.levels && rec.m.levels == g.levels, errc::incompatible_data,
          "record trace levels do not match the archive grid");
}

}  // namespace

// ---------------------------------------------------------- stationary state

StationaryRecovery recover_stationary_state(const MeasurementC2& baseline,
                                            const StationaryRecoveryOptions& opt) {
  const Grid& g = baseline.grid;
  require(g.n_space > 0, errc::invalid_argument, "stationary recovery: empty grid");

  // Dirichlet data for the square root of the measured density.
  BoundaryTrace wdata = make_boundary_trace(g, 1);
  double value_scale = 0.0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    require(baseline.m.value[f].size() >= static_cast<std::size_t>(nf),
            errc::incompatible_data, "stationary recovery: truncated trace stream");
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const double v = baseline.m.val(f, fi, 0);
      require(v > 0.0, errc::incompatible_data,
              "stationary recovery: density trace must be positive");
      wdata.val(f, fi, 0) = std::sqrt(v);
      value_scale = std::max(value_scale, v);
    }
  }

  ScalarReducedEquation eq;
  eq.q = make_scalar(g, 0.0);
  eq.v0 = make_scalar(g, 0.0);
  eq.drift_sign = 1;
  const ScalarField w = solve_scalar_reduced(eq, wdata);
  for (std::int64_t k = 0; k < g.n_space; ++k)
    require(w[k] > 0.0, errc::incompatible_data,
            "stationary recovery: harmonic square root lost positivity");

  // The unused Neumann stream is the consistency check: compare it with the
  // derivative the recovered field implies, on the scale of the data.
  ScalarField w2 = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) w2[k] = w[k] * w[k];
  const BoundaryTrace tb = restrict_to_boundary(w2);
  double gap = 0.0, deriv_scale = value_scale;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const double d_meas = baseline.m.nder(f, fi, 0);
      const double d_have = tb.nder(f, fi, 0);
      gap = std::max(gap, std::abs(d_meas - d_have));
      deriv_scale = std::max({deriv_scale, std::abs(d_meas), std::abs(d_have)});
    }
  }

  StationaryRecovery out;
  out.neumann_misfit = deriv_scale > 0.0 ? gap / deriv_scale : 0.0;
  require(out.neumann_misfit <= opt.misfit_tol, errc::incompatible_data,
          "stationary recovery: inconsistent Cauchy pair (Neumann misfit above tolerance)");

  const double z = integrate(w2);
  require(z > 0.0, errc::incompatible_data, "stationary recovery: degenerate density mass");
  out.base.m0 = make_scalar(g);
  out.base.v0 = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    out.base.m0[k] = w2[k] / z;
    out.base.v0[k] = -std::log(out.base.m0[k]);
  }
  out.base.lambda = 0.0;
  return out;
}

StationaryRecovery recover_stationary_state(const CauchyArchive& archive,
                                            const StationaryRecoveryOptions& opt) {
  const Grid g = build_grid(archive.grid);
  check_same_grid(g, archive.baseline.re.grid, "archive baseline record");
  return recover_stationary_state(archive.baseline.re, opt);
}

// --------------------------------------------------------- conjugated solves

std::vector<Cplx> solve_scalar_conjugated(const ScalarReducedEquation& eq, const CplxVec& xi,
                                          const std::vector<Cplx>& mu_boundary) {
  const Grid& g = eq.q.grid;
  check_same_grid(g, eq.v0.grid, "conjugated scalar solve");
  require(mu_boundary.size() == static_cast<std::size_t>(g.n_space), errc::invalid_argument,
          "conjugated scalar solve: boundary data size mismatch");
  require(eq.drift_sign == 1 || eq.drift_sign == -1, errc::invalid_argument,
          "conjugated scalar solve: drift sign must be +1 or -1");

  // Off-diagonal factors e^{±xi_a h_a}; the guard keeps them representable.
  std::array<Cplx, 3> up{}, dn{};
  for (int a = 0; a < g.dim(); ++a) {
    require(std::abs(xi[a].real()) * g.h[a] <= 600.0, errc::invalid_argument,
            "conjugated scalar solve: stencil factor overflow");
    up[a] = std::exp(xi[a] * g.h[a]);
    dn[a] = std::exp(-xi[a] * g.h[a]);
  }

  const double s = static_cast<double>(eq.drift_sign);
  const VectorField gv = gradient(eq.v0);
  const auto st = strides(g);
  std::vector<Eigen::Triplet<Cplx>> trip;
  trip.reserve(static_cast<std::size_t>(g.n_space) * (2 * g.dim() + 1));
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(g.n_space);
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    if (g.on_boundary(g.unindex(k))) {
      trip.emplace_back(k, k, Cplx(1.0, 0.0));
      rhs[k] = mu_boundary[static_cast<std::size_t>(k)];
      continue;
    }
    Cplx diag = eq.q[k];
    for (int a = 0; a < g.dim(); ++a) {
      const double w2 = 1.0 / (g.h[a] * g.h[a]);
      const double dr = s * gv.comp[a][static_cast<std::size_t>(k)] / (2.0 * g.h[a]);
      diag -= 2.0 * w2;
      trip.emplace_back(k, k + st[a], (w2 + dr) * up[a]);
      trip.emplace_back(k, k - st[a], (w2 - dr) * dn[a]);
    }
    trip.emplace_back(k, k, diag);
  }

  SpMatC A(g.n_space, g.n_space);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SpMatC> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  require(lu.info() == Eigen::Success, errc::internal,
          "conjugated scalar solve: factorization failed");
  const Eigen::VectorXcd x = lu.solve(rhs);
  return std::vector<Cplx>(x.data(), x.data() + g.n_space);
}

// ------------------------------------------------------------------ pairings

MeasurementC2 c2_difference(const MeasurementC2& a, const MeasurementC2& b) {
  check_same_grid(a.grid, b.grid, "record difference");
  MeasurementC2 out = a;
  for (int f = 0; f < 2 * a.grid.dim(); ++f) {
    require(a.m.value[f].size() == b.m.value[f].size() &&
                a.flux_diff[f].size() == b.flux_diff[f].size(),
            errc::incompatible_data, "record difference: stream lengths differ");
    for (std::size_t i = 0; i < out.m.value[f].size(); ++i) {
      out.m.value[f][i] -= b.m.value[f][i];
      out.m.normal_deriv[f][i] -= b.m.normal_deriv[f][i];
    }
    for (std::size_t i = 0; i < out.flux_diff[f].size(); ++i)
      out.flux_diff[f][i] -= b.flux_diff[f][i];
  }
  return out;
}

Cplx boundary_pairing(const MeasurementC2& diff, const CgoFunction& u) {
  const Grid& g = diff.grid;
  check_same_grid(g, u.grid, "boundary pairing");
  // With the Dirichlet difference vanishing on the faces, the Green identity
  // leaves a single surface term: the probe against the Neumann difference.
  Cplx acc = 0.0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const std::int64_t k = g.index(face_node_multi(g, f, fi));
      acc += face_node_weight(g, f, fi) * u.values[static_cast<std::size_t>(k)] *
             diff.m.nder(f, fi, 0);
    }
  }
  return acc;
}

Cplx boundary_pairing_flux(const MeasurementC2& diff, const CgoFunction& u,
                           const StationarySolution& base) {
  const Grid& g = diff.grid;
  check_same_grid(g, u.grid, "boundary flux pairing");
  check_same_grid(g, base.m0.grid, "boundary flux pairing");
  // Exact summation by parts: the interior difference solves the reference
  // stencil, so everything collapses onto the first interior layer, which the
  // two-point flux stream encodes as -h * flux. The one-in node couples back
  // to the face through 1/h^2 from the second difference and -+ g_a/(2h) from
  // the adjoint drift, whence the (1 -+ g_a h/2) weights below.
  const VectorField gv = gradient(base.v0);
  Cplx acc = 0.0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const int a = face_axis(f);
    const double nu = face_side(f) == 1 ? 1.0 : -1.0;
    double tang = 1.0;
    for (int c = 0; c < g.dim(); ++c)
      if (c != a) tang *= g.h[c];
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      if (!face_node_tangentially_interior(g, f, fi)) continue;
      const std::int64_t kb = g.index(face_node_multi(g, f, fi));
      const double weight = 1.0 - nu * gv.comp[a][static_cast<std::size_t>(kb)] * g.h[a] / 2.0;
      acc += tang * diff.flux_diff[f][static_cast<std::size_t>(fi)] *
             u.values[static_cast<std::size_t>(kb)] * weight;
    }
  }
  return acc;
}

// ----------------------------------------------------------- fourier samples

FourierSamples recover_fourier_samples(const CauchyArchive& archive,
                                       const StationarySolution& base,
                                       const SampleOptions& opt) {
  const Grid g = build_grid(archive.grid);
  check_same_grid(g, base.m0.grid, "fourier samples");
  require(!archive.stationary.empty(), errc::incompatible_data,
          "fourier samples: archive holds no stationary probe records");

  const ScalarField zero = make_scalar(g, 0.0);
  const ScalarReducedEquation eq_ref = reduce_to_scalar(base, zero, 1);
  const ScalarReducedEquation eq_adj = reduce_to_scalar(base, zero, -1);
  const VectorField gv0 = gradient(base.v0);

  FourierSamples out;
  out.rows.resize(archive.stationary.size());

  parallel_for(static_cast<std::int64_t>(archive.stationary.size()), [&](std::int64_t r) {
    const StationaryRecord& rec = archive.stationary[static_cast<std::size_t>(r)];
    check_same_grid(rec.re.grid, g, "stationary record");
    if (rec.im) check_same_grid(rec.im->grid, g, "stationary record");
    const XiPair pair = discrete_isotropic_pair(rec.k, rec.R, g);
    const CplxVec& xi_d = rec.member == 2 ? pair.xi2 : pair.xi1;
    const CplxVec& xi_p = rec.member == 2 ? pair.xi1 : pair.xi2;

    // Reference solve with the archived Dirichlet data, conjugated so the
    // probe magnitude never enters the factorization.
    std::vector<Cplx> mu_b(static_cast<std::size_t>(g.n_space), Cplx(0.0, 0.0));
    for (int f = 0; f < 2 * g.dim(); ++f) {
      const std::int64_t nf = face_node_count(g, f);
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        const auto mi = face_node_multi(g, f, fi);
        const std::int64_t kb = g.index(mi);
        const Cplx val(rec.re.m.val(f, fi, 0), rec.im ? rec.im->m.val(f, fi, 0) : 0.0);
        mu_b[static_cast<std::size_t>(kb)] = val * std::exp(-cdot(xi_d, g.node(mi), g.dim()));
      }
    }
    const std::vector<Cplx> mu2 = solve_scalar_conjugated(eq_ref, xi_d, mu_b);
    const CgoFunction u = build_cgo(eq_adj, xi_p, opt.remainder);

    // Flux pairing in conjugated variables: per face node the archived flux
    // gives the one-in value of the measured record, the reference one comes
    // from mu2, and the boundary phase recombines with the complementary
    // probe into a bounded e^{ik.x} factor.
    Cplx acc = 0.0;
    for (int f = 0; f < 2 * g.dim(); ++f) {
      const int a = face_axis(f);
      const double nu = face_side(f) == 1 ? 1.0 : -1.0;
      const double h = g.h[a];
      double tang = 1.0;
      for (int c = 0; c < g.dim(); ++c)
        if (c != a) tang *= g.h[c];
      const Cplx eshift = std::exp(-nu * xi_d[a] * h);
      const std::int64_t nf = face_node_count(g, f);
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        if (!face_node_tangentially_interior(g, f, fi)) continue;
        const auto bm = face_node_multi(g, f, fi);
        const std::int64_t kb = g.index(bm);
        auto im = bm;
        im[a] = face_side(f) == 0 ? 1 : g.nx(a) - 2;
        const std::int64_t ki = g.index(im);

        const Cplx val(rec.re.m.val(f, fi, 0), rec.im ? rec.im->m.val(f, fi, 0) : 0.0);
        const Cplx fd1(rec.re.flux_diff[f][static_cast<std::size_t>(fi)],
                       rec.im ? rec.im->flux_diff[f][static_cast<std::size_t>(fi)] : 0.0);
        const Cplx m_in = val - h * fd1;
        const Cplx mu1_b = val * std::exp(-cdot(xi_d, g.node(bm), g.dim()));
        const Cplx mu1_in = m_in * std::exp(-cdot(xi_d, g.node(im), g.dim()));
        const Cplx dmu_b = mu1_b - mu2[static_cast<std::size_t>(kb)];
        const Cplx dmu_in = mu1_in - mu2[static_cast<std::size_t>(ki)];
        const Cplx dfd = (dmu_b - eshift * dmu_in) / h;

        const double weight = 1.0 - nu * gv0.comp[a][static_cast<std::size_t>(kb)] * h / 2.0;
        acc += tang * dfd * std::exp(cdot(xi_d, g.node(bm), g.dim())) *
               u.values[static_cast<std::size_t>(kb)] * weight;
      }
    }

    FourierSample& row = out.rows[static_cast<std::size_t>(r)];
    row.k = rec.k;
    row.R = rec.R;
    row.value = acc;
    row.residual = u.residual;
  });

  // Real sources force conjugate symmetry across mirrored probes.
  double maxmag = 0.0;
  for (const FourierSample& row : out.rows) maxmag = std::max(maxmag, std::abs(row.value));
  double defect = 0.0;
  const auto& recs = archive.stationary;
  for (std::size_t i = 0; i < out.rows.size(); ++i)
    for (std::size_t j = i + 1; j < out.rows.size(); ++j) {
      if (recs[i].member != recs[j].member) continue;
      if (std::abs(recs[i].R - recs[j].R) > 1e-12 * (1.0 + std::abs(recs[i].R))) continue;
      bool mirrored = true;
      for (int a = 0; a < 3; ++a)
        if (std::abs(recs[i].k[a] + recs[j].k[a]) > 1e-9 * (1.0 + std::abs(recs[i].k[a])))
          mirrored = false;
      if (!mirrored) continue;
      defect = std::max(defect, std::abs(out.rows[i].value - std::conj(out.rows[j].value)));
    }
  out.conj_defect = defect / std::max(1.0, maxmag);
  if (archive.noise == 0.0)
    require(out.conj_defect <= opt.conj_tol, errc::property_failed,
            "fourier samples: conjugate symmetry violated on a noiseless archive");
  return out;
}

// ---------------------------------------------------------- fourier synthesis

ScalarField invert_fourier(const FourierSamples& samples, const StationarySolution& base) {
  const Grid& g = base.m0.grid;
  require(!samples.rows.empty(), errc::incompatible_data,
          "fourier synthesis: no samples to invert");

  double m_max = 0.0;
  for (std::int64_t k = 0; k < g.n_space; ++k) m_max = std::max(m_max, base.m0[k]);
  require(m_max > 0.0, errc::invalid_argument, "fourier synthesis: degenerate base density");
  for (std::int64_t k = 0; k < g.n_space; ++k)
    require(base.m0[k] >= 1e-6 * m_max, errc::invalid_argument,
            "fourier synthesis: base density below the positivity floor");

  // Keep the best-resolved row per probed frequency.
  struct Row {
    std::array<double, 3> k;
    double R;
    Cplx value;
  };
  const auto same_k = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    for (int c = 0; c < 3; ++c)
      if (std::abs(a[c] - b[c]) > 1e-9 * (1.0 + std::abs(a[c]))) return false;
    return true;
  };
  std::vector<Row> best;
  for (const FourierSample& s : samples.rows) {
    double mag = 0.0;
    for (int c = 0; c < 3; ++c) mag += s.k[c] * s.k[c];
    if (mag <= 0.0) continue;  // the constant mode is not probeable
    bool found = false;
    for (Row& r : best)
      if (same_k(r.k, s.k)) {
        found = true;
        if (s.R > r.R) {
          r.R = s.R;
          r.value = s.value;
        }
      }
    if (!found) best.push_back({s.k, s.R, s.value});
  }
  require(!best.empty(), errc::incompatible_data, "fourier synthesis: no usable frequencies");

  // Canonical frequency of each mirror pair: first nonzero component positive.
  const auto canon = [](std::array<double, 3> k) {
    for (int c = 0; c < 3; ++c) {
      if (k[c] > 0.0) break;
      if (k[c] < 0.0) {
        for (int a = 0; a < 3; ++a) k[a] = -k[a];
        break;
      }
    }
    return k;
  };
  std::vector<std::array<double, 3>> modes;
  for (const Row& r : best) {
    const auto ck = canon(r.k);
    bool found = false;
    for (const auto& m : modes)
      if (same_k(m, ck)) found = true;
    if (!found) modes.push_back(ck);
  }

  // Least squares against the discrete model: each sample is the interior sum
  // of the synthesized field times its probe wave.
  const std::int64_t M = static_cast<std::int64_t>(modes.size());
  Eigen::MatrixXd A(2 * static_cast<std::int64_t>(best.size()), 2 * M);
  Eigen::VectorXd b(2 * static_cast<std::int64_t>(best.size()));
  double cell = 1.0;
  for (int a = 0; a < g.dim(); ++a) cell *= g.h[a];
  for (std::size_t j = 0; j < best.size(); ++j) {
    for (std::int64_t l = 0; l < M; ++l) {
      Cplx sc = 0.0, ss = 0.0;
      for (std::int64_t k = 0; k < g.n_space; ++k) {
        const auto mi = g.unindex(k);
        if (g.on_boundary(mi)) continue;
        const auto x = g.node(mi);
        double pb = 0.0, pm = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
          pb += best[j].k[a] * x[a];
          pm += modes[static_cast<std::size_t>(l)][a] * x[a];
        }
        const Cplx wave = cell * std::exp(Cplx(0.0, pb));
        sc += wave * std::cos(pm);
        ss += wave * std::sin(pm);
      }
      A(2 * static_cast<std::int64_t>(j), 2 * l) = sc.real();
      A(2 * static_cast<std::int64_t>(j), 2 * l + 1) = ss.real();
      A(2 * static_cast<std::int64_t>(j) + 1, 2 * l) = sc.imag();
      A(2 * static_cast<std::int64_t>(j) + 1, 2 * l + 1) = ss.imag();
    }
    b[2 * static_cast<std::int64_t>(j)] = best[j].value.real();
    b[2 * static_cast<std::int64_t>(j) + 1] = best[j].value.imag();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  const Eigen::VectorXd coef = svd.solve(b);

  ScalarField out = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    const auto x = g.node(g.unindex(k));
    double q = 0.0;
    for (std::int64_t l = 0; l < M; ++l) {
      double pm = 0.0;
      for (int a = 0; a < g.dim(); ++a) pm += modes[static_cast<std::size_t>(l)][a] * x[a];
      q += coef[2 * l] * std::cos(pm) + coef[2 * l + 1] * std::sin(pm);
    }
    out[k] = q / base.m0[k];
  }
  return out;
}

// ------------------------------------------------------ terminal coupling fit

TerminalRecovery recover_terminal_linear(const CauchyArchive& archive, const SpaceTimeField& F1,
                                         const RecoveryOptions& opt) {
  const Grid g = build_grid(archive.grid);
  require(g.levels >= 2, errc::invalid_argument,
          "terminal recovery: archive must be time dependent");
  check_same_grid(g, F1.grid, "terminal recovery");

  const StationarySolution base = recover_stationary_state(archive).base;
  const MFGCoefficients co = coefficients_from_archive(archive, g);

  std::vector<const TimeDependentRecord*> recs;
  for (const TimeDependentRecord& r : archive.timedep)
    if (r.order == 1) recs.push_back(&r);
  require(!recs.empty(), errc::incompatible_data,
          "terminal recovery: archive holds no first-order records");
  for (const TimeDependentRecord* r : recs) check_record_traces(r->rec, g, "terminal recovery");

  const CoarseSpace cs = make_coarse_space(g, opt.coarsen_space);
  const std::int64_t M = cs.count();
  const std::int64_t rows = stacked_rows(g);
  const ScalarField zeroG = make_scalar(g, 0.0);
  const SpaceTimeField zsrc = make_spacetime(g, 0.0);

  // Columns depend only on the coarse terminal hats, never on the records.
  Eigen::MatrixXd A(rows, M);
  parallel_for(M, [&](std::int64_t c) {
    std::vector<double> unit(static_cast<std::size_t>(M), 0.0);
    unit[static_cast<std::size_t>(c)] = 1.0;
    const ScalarField hat = prolong_space(g, cs, unit.data());
    A.col(c) = stack_solution(solve_difference_system(base, co, F1, zeroG, zsrc, hat));
  });
  const RidgeSolver ridge = make_ridge(A, opt.tikhonov);

  // First pass: fit the terminal datum e = G m(T) of each record on the hats,
  // then rebuild the terminal density it implies (reference plus tilt).
  const std::size_t R = recs.size();
  std::vector<Eigen::VectorXd> bs(R);
  std::vector<ScalarField> mT_ref(R, make_scalar(g));
  std::vector<ScalarField> mT(R, make_scalar(g));
  for (std::size_t r = 0; r < R; ++r) {
    const LinearizedSolution ref =
        solve_first_order_monolithic(base, co, F1, zeroG, recs[r]->rec.v, recs[r]->rec.m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    stack_traces(recs[r]->rec.v, recs[r]->rec.m, 1.0, b);
    stack_traces(restrict_to_boundary(ref.v), restrict_to_boundary(ref.m), -1.0, b);
    const Eigen::VectorXd x = ridge.apply(b);
    const ScalarField ehat = prolong_space(g, cs, x.data());
    const LinearizedSolution tilt = solve_difference_system(base, co, F1, zeroG, zsrc, ehat);
    mT_ref[r] = slice(ref.m, g.levels - 1);
    const ScalarField mT_tilt = slice(tilt.m, g.levels - 1);
    for (std::int64_t k = 0; k < g.n_space; ++k) mT[r][k] = mT_ref[r][k] + mT_tilt[k];
    bs[r] = std::move(b);
  }

  // The product G m(T) carries a one-cell collar along the lateral boundary
  // (imposed density data against the interior feedback equilibrium) that the
  // hats cannot follow, while G itself is smooth. Re-parameterize on G: fold
  // the rebuilt densities into record-dependent columns, fit one coefficient
  // set across all records, refresh the densities, and fit once more.
  TerminalRecovery out;
  Eigen::MatrixXd A2(static_cast<std::int64_t>(R) * rows, M);
  Eigen::VectorXd b2(static_cast<std::int64_t>(R) * rows);
  for (std::size_t r = 0; r < R; ++r)
    b2.segment(static_cast<std::int64_t>(r) * rows, rows) = bs[r];
  ScalarField G = make_scalar(g, 0.0);
  for (int round = 0; round < 2; ++round) {
    parallel_for(static_cast<std::int64_t>(R) * M, [&](std::int64_t t) {
      const std::int64_t c = t % M;
      const std::size_t r = static_cast<std::size_t>(t / M);
      std::vector<double> unit(static_cast<std::size_t>(M), 0.0);
      unit[static_cast<std::size_t>(c)] = 1.0;
      ScalarField src = prolong_space(g, cs, unit.data());
      for (std::int64_t k = 0; k < g.n_space; ++k) src[k] *= mT[r][k];
      A2.col(c).segment(static_cast<std::int64_t>(r) * rows, rows) =
          stack_solution(solve_difference_system(base, co, F1, zeroG, zsrc, src));
    });
    const RidgeSolver ridge2 = make_ridge(A2, opt.tikhonov);
    const Eigen::VectorXd x2 = ridge2.apply(b2);
    G = prolong_space(g, cs, x2.data());
    fill_spectrum(ridge2, out.fit);
    out.fit.residual = (A2 * x2 - b2).norm();
    if (round + 1 == 2) break;
    for (std::size_t r = 0; r < R; ++r) {
      ScalarField estar = make_scalar(g);
      for (std::int64_t k = 0; k < g.n_space; ++k) estar[k] = G[k] * mT[r][k];
      const ScalarField upd =
          slice(solve_difference_system(base, co, F1, zeroG, zsrc, estar).m, g.levels - 1);
      for (std::int64_t k = 0; k < g.n_space; ++k) mT[r][k] = mT_ref[r][k] + upd[k];
    }
  }

  ScalarField den = make_scalar(g, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    for (std::int64_t k = 0; k < g.n_space; ++k) den[k] += mT[r][k] * mT[r][k];
  double den_max = 0.0;
  for (std::int64_t k = 0; k < g.n_space; ++k) den_max = std::max(den_max, den[k]);
  require(den_max > 0.0, errc::incompatible_data,
          "terminal recovery: terminal densities vanish identically");
  const double thr = opt.floor * opt.floor * den_max;

  out.G = make_scalar(g);
  std::int64_t masked = 0;
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    if (den[k] <= thr) {
      out.G[k] = 0.0;
      ++masked;
    } else {
      out.G[k] = G[k];
    }
  }
  out.fit.data_norm = b2.norm();
  out.fit.masked_fraction = static_cast<double>(masked) / static_cast<double>(g.n_space);
  require(out.fit.masked_fraction <= opt.degenerate_fraction, errc::incompatible_data,
          "terminal recovery: terminal density degenerate over most of the box");
  return out;
}

// ------------------------------------------------------- second-order recovery

HigherOrderRecovery recover_higher_order(const CauchyArchive& archive, int order,
                                         const SpaceTimeField& F1, const ScalarField& G1,
                                         const RecoveryOptions& opt) {
  require(order == 2, errc::invalid_argument,
          "higher-order recovery: only the bilinear level is implemented");
  const Grid g = build_grid(archive.grid);
  require(g.levels >= 2, errc::invalid_argument,
          "higher-order recovery: archive must be time dependent");
  check_same_grid(g, F1.grid, "higher-order recovery");
  check_same_grid(g, G1.grid, "higher-order recovery");

  const StationarySolution base = recover_stationary_state(archive).base;
  const MFGCoefficients co = coefficients_from_archive(archive, g);

  std::vector<const TimeDependentRecord*> recs;
  for (const TimeDependentRecord& r : archive.timedep)
    if (r.order == 2) recs.push_back(&r);
  require(!recs.empty(), errc::incompatible_data,
          "higher-order recovery: archive holds no records of the requested order");

  // Parents rebuilt once from their archived traces with the known pair.
  std::map<std::string, LinearizedSolution> parents;
  for (const TimeDependentRecord* r : recs) {
    check_record_traces(r->rec, g, "higher-order recovery");
    for (const std::string& tag : {r->parent_a, r->parent_b}) {
      if (parents.count(tag)) continue;
      const TimeDependentRecord* p = find_record(archive, tag, 1);
      require(p != nullptr, errc::incompatible_data,
              "higher-order recovery: parent record missing from the archive");
      check_record_traces(p->rec, g, "higher-order recovery");
      parents.emplace(tag, solve_first_order_monolithic(base, co, F1, G1, p->rec.v, p->rec.m));
    }
  }

  const CoarseSpace cs = make_coarse_space(g, opt.coarsen_space);
  require(opt.coarsen_time >= 1 && g.spec.nt % opt.coarsen_time == 0, errc::invalid_argument,
          "higher-order recovery: time stride must divide the level count");
  const int cl = g.spec.nt / opt.coarsen_time + 1;
  const std::int64_t Ms = cs.count();
  const std::int64_t Mf = static_cast<std::int64_t>(cl) * Ms;
  const std::int64_t Mg = Ms;
  const std::int64_t rows = stacked_rows(g);
  const std::int64_t nrec = static_cast<std::int64_t>(recs.size());

  // Products of the parent perturbations; the unknowns multiply these.
  std::vector<SpaceTimeField> prod;
  std::vector<ScalarField> prodT;
  double prod_sup = 0.0, prodT_sup = 0.0;
  for (const TimeDependentRecord* r : recs) {
    const LinearizedSolution& a = parents.at(r->parent_a);
    const LinearizedSolution& b = parents.at(r->parent_b);
    SpaceTimeField p = make_spacetime(g);
    for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = a.m.data[i] * b.m.data[i];
    ScalarField pT = slice(p, g.levels - 1);
    for (std::int64_t k = 0; k < g.n_space; ++k)
      prodT_sup = std::max(prodT_sup, std::abs(pT[k]));
    prod_sup = std::max(prod_sup, sup_norm(p));
    prod.push_back(std::move(p));
    prodT.push_back(std::move(pT));
  }
  require(prod_sup > 0.0 && prodT_sup > 0.0, errc::incompatible_data,
          "higher-order recovery: perturbation products vanish identically");

  // Reference solves with both unknowns set to zero.
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows * nrec);
  const SpaceTimeField zF2 = make_spacetime(g, 0.0);
  const ScalarField zG2 = make_scalar(g, 0.0);
  for (std::int64_t r = 0; r < nrec; ++r) {
    const LinearizedSolution& pa = parents.at(recs[static_cast<std::size_t>(r)]->parent_a);
    const LinearizedSolution& pb = parents.at(recs[static_cast<std::size_t>(r)]->parent_b);
    const LinearizedSolution ref =
        solve_second_order(base, co, F1, zF2, G1, zG2, pa, pb, opt.solver);
    stack_traces(recs[static_cast<std::size_t>(r)]->rec.v, recs[static_cast<std::size_t>(r)]->rec.m,
                 1.0, b.segment(r * rows, rows));
    stack_traces(restrict_to_boundary(ref.v), restrict_to_boundary(ref.m), -1.0,
                 b.segment(r * rows, rows));
  }

  // Joint columns: running-source hats scaled by the products, then terminal
  // hats scaled by the terminal products.
  Eigen::MatrixXd A(rows * nrec, Mf + Mg);
  parallel_for(Mf + Mg, [&](std::int64_t c) {
    if (c < Mf) {
      std::vector<double> unit(static_cast<std::size_t>(Mf), 0.0);
      unit[static_cast<std::size_t>(c)] = 1.0;
      const SpaceTimeField hat = prolong_spacetime(g, cs, opt.coarsen_time, cl, unit.data());
      for (std::int64_t r = 0; r < nrec; ++r) {
        SpaceTimeField src = hat;
        for (std::size_t i = 0; i < src.data.size(); ++i)
          src.data[i] *= prod[static_cast<std::size_t>(r)].data[i];
        A.col(c).segment(r * rows, rows) =
            stack_solution(solve_difference_system(base, co, F1, G1, src, zG2));
      }
    } else {
      std::vector<double> unit(static_cast<std::size_t>(Mg), 0.0);
      unit[static_cast<std::size_t>(c - Mf)] = 1.0;
      const ScalarField hat = prolong_space(g, cs, unit.data());
      for (std::int64_t r = 0; r < nrec; ++r) {
        ScalarField term = hat;
        for (std::int64_t k = 0; k < g.n_space; ++k)
          term[k] *= prodT[static_cast<std::size_t>(r)][k];
        A.col(c).segment(r * rows, rows) =
            stack_solution(solve_difference_system(base, co, F1, G1, zF2, term));
      }
    }
  });

  const RidgeSolver ridge = make_ridge(A, opt.tikhonov);
  Eigen::VectorXd x = ridge.apply(b);

  // Mask basis nodes whose products never clear the floor: the fit cannot see
  // them, so report them as suppressed instead of returning ridge noise.
  std::int64_t masked = 0;
  {
    std::vector<double> unit;
    for (std::int64_t c = 0; c < Mf; ++c) {
      unit.assign(static_cast<std::size_t>(Mf), 0.0);
      unit[static_cast<std::size_t>(c)] = 1.0;
      const SpaceTimeField hat = prolong_spacetime(g, cs, opt.coarsen_time, cl, unit.data());
      double seen = 0.0;
      for (std::int64_t r = 0; r < nrec; ++r)
        for (std::size_t i = 0; i < hat.data.size(); ++i)
          if (hat.data[i] > 1e-12)
            seen = std::max(seen, std::abs(prod[static_cast<std::size_t>(r)].data[i]));
      if (seen < opt.floor * prod_sup) {
        x[c] = 0.0;
        ++masked;
      }
    }
    for (std::int64_t c = 0; c < Mg; ++c) {
      unit.assign(static_cast<std::size_t>(Mg), 0.0);
      unit[static_cast<std::size_t>(c)] = 1.0;
      const ScalarField hat = prolong_space(g, cs, unit.data());
      double seen = 0.0;
      for (std::int64_t r = 0; r < nrec; ++r)
        for (std::int64_t k = 0; k < g.n_space; ++k)
          if (hat[k] > 1e-12)
            seen = std::max(seen, std::abs(prodT[static_cast<std::size_t>(r)][k]));
      if (seen < opt.floor * prodT_sup) {
        x[Mf + c] = 0.0;
        ++masked;
      }
    }
  }

  HigherOrderRecovery out;
  out.F = prolong_spacetime(g, cs, opt.coarsen_time, cl, x.data());
  out.G = prolong_space(g, cs, x.data() + Mf);
  fill_spectrum(ridge, out.fit);
  out.fit.residual = (A * x - b).norm();
  out.fit.data_norm = b.norm();
  out.fit.masked_fraction = static_cast<double>(masked) / static_cast<double>(Mf + Mg);
  require(out.fit.masked_fraction <= opt.degenerate_fraction, errc::incompatible_data,
          "higher-order recovery: perturbation products degenerate over most of the basis");
  return out;
}

// ------------------------------------------------------- unique continuation

namespace {

// Rows of the linearized system with homogeneous Cauchy data everywhere: the
// square monolithic block (Dirichlet identities included with zero data) plus
// outward three-point Neumann rows on every face node, all scaled to unit
// row norm so the residual weighs equations evenly.
SpMat build_ucp_rows(const StationarySolution& base, const MFGCoefficients& co,
                     const SpaceTimeField& F1, const ScalarField& G1) {
  const Grid& g = F1.grid;
  check_same_grid(g, base.m0.grid, "continuation check");
  check_same_grid(g, G1.grid, "continuation check");
  check_same_grid(g, co.sigma.grid, "continuation check");
  require(g.levels >= 2, errc::invalid_argument, "continuation check needs a time grid");
  for (int a = 0; a < g.dim(); ++a)
    require(g.nx(a) >= 4, errc::invalid_argument,
            "continuation check needs at least four nodes per axis");

  const int L = g.levels;
  const std::int64_t n = g.n_space;
  const std::int64_t N = static_cast<std::int64_t>(L) * n;
  const VectorField grad_v0 = gradient(base.v0);
  const auto st = strides(g);

  Triplets T, sc;
  const auto shift = [&](std::int64_t ro, std::int64_t co_) {
    for (const auto& t : sc) T.emplace_back(ro + t.row(), co_ + t.col(), t.value());
    sc.clear();
  };

  for (int j = 0; j < L; ++j) {
    const auto sigma = take(co.sigma, j);
    const auto kappa = take(co.kappa, j);
    const std::int64_t rv = static_cast<std::int64_t>(j) * n;
    const std::int64_t rm = N + rv;

    if (j < L - 1) {
      add_interior_identity(sc, g, 1.0 / g.dt);
      add_scaled_laplacian(sc, g, sigma, -1.0);
      const auto bdrift = drift_field(g, kappa, grad_v0);
      add_advection(sc, g, pointers(bdrift), 1.0);
      add_boundary_identity(sc, g);
      shift(rv, rv);
      for (std::int64_t k = 0; k < n; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        T.emplace_back(rv + k, rv + n + k, -1.0 / g.dt);
        T.emplace_back(rv + k, rm + k, -F1.at(j, k));
      }
    } else {
      add_interior_identity(sc, g, 1.0);
      add_boundary_identity(sc, g);
      shift(rv, rv);
      for (std::int64_t k = 0; k < n; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        T.emplace_back(rv + k, rm + k, -G1[k]);
      }
    }

    if (j == 0) {
      for (std::int64_t k = 0; k < n; ++k) T.emplace_back(rm + k, rm + k, 1.0);
    } else {
      add_interior_identity(sc, g, 1.0 / g.dt);
      add_laplacian_of_product(sc, g, sigma, -1.0);
      add_drift_on_density(sc, g, kappa, base.v0.data, -1.0);
      add_boundary_identity(sc, g);
      shift(rm, rm);
      add_drift_on_potential(sc, g, kappa, base.m0.data, -1.0);
      shift(rm, rv);
      for (std::int64_t k = 0; k < n; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        T.emplace_back(rm + k, rm - n + k, -1.0 / g.dt);
      }
    }
  }

  // Zero Neumann rows: value field at every level, density from level one on.
  std::int64_t row = 2 * N;
  for (int blk = 0; blk < 2; ++blk) {
    for (int j = blk == 0 ? 0 : 1; j < L; ++j) {
      const std::int64_t off = static_cast<std::int64_t>(blk) * N +
                               static_cast<std::int64_t>(j) * n;
      for (int f = 0; f < 2 * g.dim(); ++f) {
        const int a = face_axis(f);
        const std::int64_t s = st[a];
        const double c = 1.0 / (2.0 * g.h[a]);
        const std::int64_t nf = face_node_count(g, f);
        for (std::int64_t fi = 0; fi < nf; ++fi) {
          const std::int64_t k = g.index(face_node_multi(g, f, fi));
          const std::int64_t in = face_side(f) == 0 ? s : -s;
          T.emplace_back(row, off + k, 3.0 * c);
          T.emplace_back(row, off + k + in, -4.0 * c);
          T.emplace_back(row, off + k + 2 * in, 1.0 * c);
          ++row;
        }
      }
    }
  }

  SpMat A(row, 2 * N);
  A.setFromTriplets(T.begin(), T.end());

  Eigen::VectorXd norms = Eigen::VectorXd::Zero(row);
  for (int oc = 0; oc < A.outerSize(); ++oc)
    for (SpMat::InnerIterator it(A, oc); it; ++it) norms[it.row()] += it.value() * it.value();
  norms = norms.cwiseSqrt();
  for (int oc = 0; oc < A.outerSize(); ++oc)
    for (SpMat::InnerIterator it(A, oc); it; ++it) it.valueRef() /= norms[it.row()];
  return A;
}

}  // namespace

UcpReport ucp_residual_check(const StationarySolution& base, const MFGCoefficients& co,
                             const SpaceTimeField& F1, const ScalarField& G1,
                             const UcpOptions& opt) {
  const SpMat A = build_ucp_rows(base, co, F1, G1);
  const SpMat AT = A.transpose();
  const std::int64_t cols = A.cols();

  UcpReport rep;
  if (opt.seed_amplitude == 0.0) return rep;

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd x(cols);
  for (std::int64_t i = 0; i < cols; ++i) x[i] = dist(rng);
  x *= opt.seed_amplitude / x.lpNorm<Eigen::Infinity>();

  // Conjugate gradients on the normal equations with zero data: the minimizer
  // is the zero field, and driving the iterate there is the quantitative
  // continuation statement.
  Eigen::VectorXd r = -(A * x);
  Eigen::VectorXd s = AT * r;
  Eigen::VectorXd p = s;
  double gamma = s.squaredNorm();
  const double gamma0 = gamma;
  int it = 0;
  while (it < opt.max_iterations && gamma > 0.0) {
    const Eigen::VectorXd q = A * p;
    const double qq = q.squaredNorm();
    if (qq <= 0.0) break;
    const double alpha = gamma / qq;
    x += alpha * p;
    r -= alpha * q;
    s = AT * r;
    const double gnew = s.squaredNorm();
    p = s + (gnew / gamma) * p;
    gamma = gnew;
    ++it;
    if (it % 16 == 0 && x.lpNorm<Eigen::Infinity>() <= 0.5 * opt.tol) break;
    if (gamma <= 1e-32 * gamma0) break;
  }

  rep.interior_sup = x.lpNorm<Eigen::Infinity>();
  rep.residual = (A * x).norm();
  rep.iterations = it;
  return rep;
}

double ucp_equation_residual(const StationarySolution& base, const MFGCoefficients& co,
                             const SpaceTimeField& F1, const ScalarField& G1,
                             const SpaceTimeField& v, const SpaceTimeField& m) {
  const Grid& g = F1.grid;
  check_same_grid(g, v.grid, "continuation residual");
  check_same_grid(g, m.grid, "continuation residual");
  const SpMat A = build_ucp_rows(base, co, F1, G1);
  const std::int64_t N = static_cast<std::int64_t>(g.levels) * g.n_space;
  Eigen::VectorXd x(2 * N);
  for (int j = 0; j < g.levels; ++j)
    for (std::int64_t k = 0; k < g.n_space; ++k) {
      x[static_cast<std::int64_t>(j) * g.n_space + k] = v.at(j, k);
      x[N + static_cast<std::int64_t>(j) * g.n_space + k] = m.at(j, k);
    }
  return (A * x).norm();
}

}  // namespace mfg
