#include "core/forward.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "core/schemes.hpp"

namespace mfg {

namespace {

std::array<std::int64_t, 3> strides(const Grid& g) {
  std::array<std::int64_t, 3> s{0, 0, 0};
  s[g.dim() - 1] = 1;
  for (int a = g.dim() - 2; a >= 0; --a) s[a] = s[a + 1] * g.nx(a + 1);
  return s;
}

inline void advance(const Grid& g, std::array<int, 3>& i) {
  for (int a = g.dim() - 1; a >= 0; --a) {
    if (++i[a] < g.nx(a)) return;
    i[a] = 0;
  }
}

bool slabs_static(const SpaceTimeField& f) {
  for (int j = 1; j < f.grid.levels; ++j)
    for (std::int64_t k = 0; k < f.grid.n_space; ++k)
      if (f.slab(j)[k] != f.slab(0)[k]) return false;
  return true;
}

// |grad u|^2 at interior nodes, centered; boundary entries left at zero.
std::vector<double> grad_sq_interior(const Grid& g, const double* u) {
  std::vector<double> out(static_cast<std::size_t>(g.n_space), 0.0);
  const auto st = strides(g);
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i)) {
    if (g.on_boundary(i)) continue;
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double d = (u[k + st[a]] - u[k - st[a]]) / (2.0 * g.h[a]);
      acc += d * d;
    }
    out[k] = acc;
  }
  return out;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

struct Factorized {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> A;
  bool ready = false;

  void factor(const Grid& g, Triplets& tri, const char* where) {
    A.resize(g.n_space, g.n_space);
    A.setFromTriplets(tri.begin(), tri.end());
    lu.analyzePattern(A);
    lu.factorize(A);
    require(lu.info() == Eigen::Success, errc::internal,
            std::string("factorization failed in ") + where);
    ready = true;
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b, const char* where) {
    Eigen::VectorXd x = lu.solve(b);
    require(lu.info() == Eigen::Success, errc::internal,
            std::string("solve failed in ") + where);
    return x;
  }
};

}  // namespace

MFGCoefficients constant_coefficients(const Grid& g, double sigma, double kappa) {
  require(sigma > 0.0, errc::invalid_argument, "sigma must be positive");
  MFGCoefficients co;
  co.sigma = make_spacetime(g, sigma);
  co.kappa = make_spacetime(g, kappa);
  co.time_static = true;
  return co;
}

MFGCoefficients make_coefficients(const Grid& g, const SpaceTimeFn& sigma,
                                  const SpaceTimeFn& kappa) {
  MFGCoefficients co;
  co.sigma = sample(g, sigma);
  co.kappa = sample(g, kappa);
  for (double s : co.sigma.data)
    require(s > 0.0, errc::invalid_argument, "sigma must be positive everywhere");
  co.time_static = slabs_static(co.sigma) && slabs_static(co.kappa);
  return co;
}

double CostModel::F(int level, std::int64_t node, double z) const {
  const double d = z - m_ref.data[node];
  double p = 1.0, acc = 0.0;
  for (std::size_t k = 0; k < Fk.size(); ++k) {
    p *= d;
    acc += Fk[k].at(level, node) * p / factorial(static_cast<int>(k) + 1);
  }
  return acc;
}

double CostModel::G(std::int64_t node, double z) const {
  const double d = z - m_ref.data[node];
  double p = 1.0, acc = 0.0;
  for (std::size_t k = 0; k < Gk.size(); ++k) {
    p *= d;
    acc += Gk[k].data[node] * p / factorial(static_cast<int>(k) + 1);
  }
  return acc;
}

CostModel make_cost_model(const Grid& g, ScalarField m_ref, std::vector<SpaceTimeField> Fk,
                          std::vector<ScalarField> Gk) {
  check_same_grid(g, m_ref.grid, "make_cost_model");
  for (const auto& f : Fk) check_same_grid(g, f.grid, "make_cost_model F coefficient");
  for (const auto& f : Gk) check_same_grid(g, f.grid, "make_cost_model G coefficient");
  CostModel c;
  c.m_ref = std::move(m_ref);
  c.Fk = std::move(Fk);
  c.Gk = std::move(Gk);
  return c;
}

ScalarField cost_F_level(const CostModel& c, int level, const double* m_level,
                         const Grid& g) {
  ScalarField out = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) out.data[k] = c.F(level, k, m_level[k]);
  return out;
}

ScalarField terminal_value(const CostModel& c, const ScalarField& m_T) {
  ScalarField out = make_scalar(m_T.grid);
  for (std::int64_t k = 0; k < m_T.grid.n_space; ++k) out.data[k] = c.G(k, m_T.data[k]);
  return out;
}

SpaceTimeField solve_hjb_backward(const MFGCoefficients& co, const CostModel& cost,
                                  const SpaceTimeField& m, const BoundaryTrace& v_data,
                                  const SolverOptions& opt) {
  const Grid& g = m.grid;
  check_same_grid(g, co.sigma.grid, "solve_hjb_backward");
  require(g.levels >= 2, errc::invalid_argument, "need a time grid (nt >= 1)");
  require(v_data.levels == g.levels, errc::incompatible_data,
          "v boundary data must cover every time level");

  SpaceTimeField v = make_spacetime(g);
  const int L = g.levels;
  const double idt = 1.0 / g.dt;

  // Terminal slice from the terminal coupling, lateral data winning on edges.
  {
    ScalarField vT = terminal_value(cost, slice(m, L - 1));
    double* s = v.slab(L - 1);
    std::copy(vT.data.begin(), vT.data.end(), s);
    for (int f = 0; f < 2 * g.dim(); ++f)
      for (std::int64_t fi = 0; fi < face_node_count(g, f); ++fi)
        s[g.index(face_node_multi(g, f, fi))] = v_data.val(f, fi, L - 1);
  }

  Factorized cache;
  for (int j = L - 2; j >= 0; --j) {
    if (!cache.ready || !co.time_static) {
      Triplets tri;
      add_interior_identity(tri, g, idt);
      std::vector<double> sig(co.sigma.slab(j), co.sigma.slab(j) + g.n_space);
      add_scaled_laplacian(tri, g, sig, -1.0);
      add_boundary_identity(tri, g);
      cache.factor(g, tri, "solve_hjb_backward");
    }

    const ScalarField Fj = cost_F_level(cost, j, m.slab(j), g);
    const double* kap = co.kappa.slab(j);

    // Lagged Hamiltonian fixed point, seeded with the later slice.
    std::vector<double> cur(v.slab(j + 1), v.slab(j + 1) + g.n_space);
    Eigen::VectorXd rhs(g.n_space);
    for (int it = 0; it < opt.inner_max; ++it) {
      // current iterate with the level's own boundary values, for the gradient
      std::vector<double> work = cur;
      for (int f = 0; f < 2 * g.dim(); ++f)
        for (std::int64_t fi = 0; fi < face_node_count(g, f); ++fi)
          work[g.index(face_node_multi(g, f, fi))] = v_data.val(f, fi, j);
      const std::vector<double> gsq = grad_sq_interior(g, work.data());

      std::array<int, 3> mi{0, 0, 0};
      for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, mi))
        rhs[k] = g.on_boundary(mi)
                     ? 0.0
                     : idt * v.at(j + 1, k) + Fj.data[k] - 0.5 * kap[k] * gsq[k];
      apply_dirichlet_rhs(g, v_data, j, rhs);

      Eigen::VectorXd x = cache.solve(rhs, "solve_hjb_backward");
      double delta = 0.0, scale = 1.0;
      for (std::int64_t k = 0; k < g.n_space; ++k) {
        delta = std::max(delta, std::abs(x[k] - cur[k]));
        scale = std::max(scale, std::abs(x[k]));
        cur[k] = x[k];
      }
      if (delta <= opt.inner_tol * scale) break;
      require(it + 1 < opt.inner_max, errc::max_iterations,
              "per-step Hamiltonian fixed point did not converge");
    }
    std::copy(cur.begin(), cur.end(), v.slab(j));
  }
  return v;
}

SpaceTimeField solve_fpk_forward(const MFGCoefficients& co, const SpaceTimeField& v,
                                 const ScalarField& m_init, const BoundaryTrace& m_data,
                                 const SolverOptions& opt) {
  (void)opt;
  const Grid& g = v.grid;
  check_same_grid(g, co.sigma.grid, "solve_fpk_forward");
  check_same_grid(g, m_init.grid, "solve_fpk_forward");
  require(g.levels >= 2, errc::invalid_argument, "need a time grid (nt >= 1)");
  require(m_data.levels == g.levels, errc::incompatible_data,
          "m boundary data must cover every time level");

  SpaceTimeField m = make_spacetime(g);
  std::copy(m_init.data.begin(), m_init.data.end(), m.slab(0));

  const double idt = 1.0 / g.dt;
  Eigen::VectorXd rhs(g.n_space);
  for (int j = 1; j < g.levels; ++j) {
    Triplets tri;
    add_interior_identity(tri, g, idt);
    std::vector<double> sig(co.sigma.slab(j), co.sigma.slab(j) + g.n_space);
    std::vector<double> kap(co.kappa.slab(j), co.kappa.slab(j) + g.n_space);
    std::vector<double> vj(v.slab(j), v.slab(j) + g.n_space);
    add_laplacian_of_product(tri, g, sig, -1.0);
    add_drift_on_density(tri, g, kap, vj, -1.0);
    add_boundary_identity(tri, g);
    Eigen::SparseMatrix<double> A(g.n_space, g.n_space);
    A.setFromTriplets(tri.begin(), tri.end());

    std::array<int, 3> mi{0, 0, 0};
    for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, mi))
      rhs[k] = g.on_boundary(mi) ? 0.0 : idt * m.at(j - 1, k);
    apply_dirichlet_rhs(g, m_data, j, rhs);

    Eigen::VectorXd x = solve_sparse(A, rhs, "solve_fpk_forward");
    std::copy(x.data(), x.data() + g.n_space, m.slab(j));
  }
  return m;
}

TimeDependentSolution solve_mfg_timedep(const MFGCoefficients& co, const CostModel& cost,
                                        const ScalarField& m_init,
                                        const BoundaryTrace& v_data,
                                        const BoundaryTrace& m_data,
                                        const SolverOptions& opt) {
  const Grid& g = co.sigma.grid;
  check_same_grid(g, m_init.grid, "solve_mfg_timedep");

  SpaceTimeField m_cur = make_spacetime(g);
  for (int j = 0; j < g.levels; ++j)
    std::copy(m_init.data.begin(), m_init.data.end(), m_cur.slab(j));

  SpaceTimeField v_prev;
  bool have_v = false;
  TimeDependentSolution sol;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    SpaceTimeField v_new = solve_hjb_backward(co, cost, m_cur, v_data, opt);
    SpaceTimeField m_new = solve_fpk_forward(co, v_new, m_init, m_data, opt);

    const double nv = sup_norm(v_new), nm = sup_norm(m_new);
    if (nv > opt.blow_up || nm > opt.blow_up)
      fail(errc::blow_up, "field norm exceeded the blow-up bound after sweep " +
                              std::to_string(it));

    double delta = sup_diff(m_new, m_cur);
    if (have_v) delta += sup_diff(v_new, v_prev);

    const double th = opt.damping;
    for (std::size_t k = 0; k < m_cur.data.size(); ++k)
      m_cur.data[k] = th * m_new.data[k] + (1.0 - th) * m_cur.data[k];
    v_prev = std::move(v_new);
    have_v = true;
    sol.iterations = it;

    if (delta <= opt.tol) {
      // Consistent reported pair: one more exact sweep through both equations.
      sol.v = solve_hjb_backward(co, cost, m_cur, v_data, opt);
      sol.m = solve_fpk_forward(co, sol.v, m_init, m_data, opt);
      sol.residual = sup_diff(sol.m, m_cur);
      double mn = sol.m.data[0];
      for (double x : sol.m.data) mn = std::min(mn, x);
      sol.min_density = mn;
      sol.positivity_alarm = mn < -1e-10 * (1.0 + sup_norm(sol.m));
      return sol;
    }
  }
  fail(errc::max_iterations, "coupled sweep did not reach tolerance " +
                                 std::to_string(opt.tol) + " in " +
                                 std::to_string(opt.max_iterations) + " iterations");
}

StationarySolution build_stationary_baseline(const Grid& g,
                                             const std::optional<ScalarField>& v0_seed) {
  StationarySolution s;
  s.lambda = 0.0;
  if (!v0_seed) {
    s.v0 = make_scalar(g, 0.0);
    s.m0 = make_scalar(g, 1.0 / g.volume());
    return s;
  }
  check_same_grid(g, v0_seed->grid, "build_stationary_baseline");
  s.v0 = *v0_seed;
  s.m0 = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) s.m0.data[k] = std::exp(-s.v0.data[k]);
  const double z = integrate(s.m0);
  require(z > 0.0, errc::invalid_argument, "degenerate Gibbs normalization");
  for (double& x : s.m0.data) x /= z;
  return s;
}

StationaryResidual verify_stationary_residual(const StationarySolution& s,
                                              const CostModel& cost) {
  const Grid& g = s.v0.grid;
  StationaryResidual r;
  const std::vector<double> ones(static_cast<std::size_t>(g.n_space), 1.0);
  const std::vector<double> lap_v = laplacian_of_product_values(g, ones, s.v0.data);
  const std::vector<double> lap_m = laplacian_of_product_values(g, ones, s.m0.data);
  const std::vector<double> gsq = grad_sq_interior(g, s.v0.data.data());
  const std::vector<double> drift = drift_divergence_values(g, ones, s.m0.data, s.v0.data);

  double acc = 0.0;
  std::int64_t n_int = 0;
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i)) {
    if (g.on_boundary(i)) continue;
    const double hjb = -lap_v[k] + 0.5 * gsq[k] + s.lambda - cost.F(0, k, s.m0.data[k]);
    const double fpk = -lap_m[k] - drift[k];
    r.hjb_sup = std::max(r.hjb_sup, std::abs(hjb));
    r.fpk_sup = std::max(r.fpk_sup, std::abs(fpk));
    acc += hjb;
    ++n_int;
  }
  r.lambda_shift = n_int > 0 ? -acc / n_int : 0.0;
  r.mass_defect = std::abs(1.0 - integrate(s.m0));
  return r;
}

double compatibility_defect(const StationarySolution& base, const MFGCoefficients& co,
                            const SpaceTimeField& F1, const ScalarField& G1,
                            const SpaceTimeField& g_data, const SpaceTimeField& h_data) {
  const Grid& g = g_data.grid;
  check_same_grid(g, h_data.grid, "compatibility_defect");
  require(g.levels >= 3, errc::invalid_argument, "need nt >= 2 for corner conditions");
  const int L = g.levels;
  const double dt = g.dt;

  const ScalarField gT = slice(g_data, L - 1);
  const ScalarField h0 = slice(h_data, 0);
  const ScalarField hT = slice(h_data, L - 1);

  // Spatial operator values at the two corners.
  const ScalarField lap_gT = laplacian(gT);
  const VectorField grad_gT = gradient(gT);
  const VectorField grad_v0 = gradient(base.v0);

  ScalarField sig_h0 = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k)
    sig_h0.data[k] = co.sigma.at(0, k) * h0.data[k];
  const ScalarField lap_sig_h0 = laplacian(sig_h0);

  // div(kappa m0 grad g) and div(kappa h grad v0) at t = 0.
  const ScalarField g0 = slice(g_data, 0);
  const VectorField grad_g0 = gradient(g0);
  VectorField flux1 = make_vector(g), flux2 = make_vector(g);
  for (int a = 0; a < g.dim(); ++a)
    for (std::int64_t k = 0; k < g.n_space; ++k) {
      flux1.comp[a][k] = co.kappa.at(0, k) * base.m0.data[k] * grad_g0.comp[a][k];
      flux2.comp[a][k] = co.kappa.at(0, k) * h0.data[k] * grad_v0.comp[a][k];
    }
  const ScalarField div1 = divergence(flux1);
  const ScalarField div2 = divergence(flux2);

  double scale = 1.0 + sup_norm(g_data) + sup_norm(h_data);
  double worst = 0.0;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    for (std::int64_t fi = 0; fi < face_node_count(g, f); ++fi) {
      const std::int64_t k = g.index(face_node_multi(g, f, fi));
      // (i) terminal value match of the two data families
      worst = std::max(worst, std::abs(gT.data[k] - G1.data[k] * hT.data[k]));
      // (ii) backward equation for g at the terminal corner
      const double dgdt =
          (3.0 * g_data.at(L - 1, k) - 4.0 * g_data.at(L - 2, k) + g_data.at(L - 3, k)) /
          (2.0 * dt);
      double adv = 0.0;
      for (int a = 0; a < g.dim(); ++a) adv += grad_v0.comp[a][k] * grad_gT.comp[a][k];
      worst = std::max(worst, std::abs(-dgdt - co.sigma.at(L - 1, k) * lap_gT.data[k] +
                                       co.kappa.at(L - 1, k) * adv -
                                       F1.at(L - 1, k) * hT.data[k]));
      // (iii) zero initial density trace
      worst = std::max(worst, std::abs(h0.data[k]));
      // (iv) forward equation for h at the initial corner
      const double dhdt =
          (-3.0 * h_data.at(0, k) + 4.0 * h_data.at(1, k) - h_data.at(2, k)) / (2.0 * dt);
      worst = std::max(worst, std::abs(dhdt - lap_sig_h0.data[k] - div1.data[k] -
                                       div2.data[k]));
    }
  }
  return worst / scale;
}

}  // namespace mfg
