#include "core/linearize.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <memory>

#include "core/schemes.hpp"

namespace mfg {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Factor = Eigen::SparseLU<SpMat>;

std::array<std::int64_t, 3> strides(const Grid& g) {
  std::array<std::int64_t, 3> s{0, 0, 0};
  s[g.dim() - 1] = 1;
  for (int a = g.dim() - 2; a >= 0; --a) s[a] = s[a + 1] * g.nx(a + 1);
  return s;
}

std::vector<double> take(const SpaceTimeField& f, int j) {
  return std::vector<double>(f.slab(j), f.slab(j) + f.grid.n_space);
}

// Nodal advection components kappa * grad(v0); only interior entries matter.
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

std::vector<double> advection_values(const Grid& g, const std::array<std::vector<double>, 3>& b,
                                     const std::vector<double>& u) {
  std::vector<double> out(static_cast<std::size_t>(g.n_space), 0.0);
  const auto st = strides(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) {
    if (g.on_boundary(g.unindex(k))) continue;
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::int64_t o = st[a];
      acc += b[a][k] * (u[k + o] - u[k - o]) / (2.0 * g.h[a]);
    }
    out[k] = acc;
  }
  return out;
}

// Known interior sources of one expansion level. Order one carries zeros;
// order two is filled from a pair of first-order solutions.
struct ExpansionSources {
  std::vector<std::vector<double>> rhs_v;  // per level, used for j < levels-1
  std::vector<std::vector<double>> rhs_m;  // per level, used for j >= 1
  std::vector<double> terminal;            // interior addition to the terminal row
};

ExpansionSources zero_sources(const Grid& g) {
  ExpansionSources s;
  s.rhs_v.assign(g.levels, std::vector<double>(static_cast<std::size_t>(g.n_space), 0.0));
  s.rhs_m = s.rhs_v;
  s.terminal.assign(static_cast<std::size_t>(g.n_space), 0.0);
  return s;
}

// Bilinear sources for the curvature level. Every expression is written
// symmetrically in (a, b) so swapping the inputs reproduces the same bits.
ExpansionSources second_order_sources(const MFGCoefficients& co, const SpaceTimeField& F2,
                                      const ScalarField& G2, const LinearizedSolution& a,
                                      const LinearizedSolution& b) {
  const Grid& g = a.v.grid;
  auto src = zero_sources(g);
  for (int j = 0; j < g.levels; ++j) {
    const auto kappa = take(co.kappa, j);
    ScalarField va{g, take(a.v, j)}, vb{g, take(b.v, j)};
    const auto ga = gradient(va), gb = gradient(vb);
    if (j < g.levels - 1) {
      for (std::int64_t k = 0; k < g.n_space; ++k) {
        double s = 0.0;
        for (int d = 0; d < g.dim(); ++d) s += ga.comp[d][k] * gb.comp[d][k];
        src.rhs_v[j][k] = -kappa[k] * s + F2.at(j, k) * (a.m.at(j, k) * b.m.at(j, k));
      }
    }
    if (j >= 1) {
      const auto d1 = drift_divergence_values(g, kappa, take(a.m, j), vb.data);
      const auto d2 = drift_divergence_values(g, kappa, take(b.m, j), va.data);
      for (std::int64_t k = 0; k < g.n_space; ++k) src.rhs_m[j][k] = d1[k] + d2[k];
    }
  }
  const int T = g.levels - 1;
  for (std::int64_t k = 0; k < g.n_space; ++k)
    src.terminal[k] = G2[k] * (a.m.at(T, k) * b.m.at(T, k));
  return src;
}

SpMat value_matrix(const Grid& g, const std::vector<double>& sigma,
                   const std::array<std::vector<double>, 3>& b) {
  Triplets t;
  add_interior_identity(t, g, 1.0 / g.dt);
  add_scaled_laplacian(t, g, sigma, -1.0);
  add_advection(t, g, pointers(b), 1.0);
  add_boundary_identity(t, g);
  SpMat A(g.n_space, g.n_space);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

SpMat density_matrix(const Grid& g, const std::vector<double>& sigma,
                     const std::vector<double>& kappa, const std::vector<double>& v0) {
  Triplets t;
  add_interior_identity(t, g, 1.0 / g.dt);
  add_laplacian_of_product(t, g, sigma, -1.0);
  add_drift_on_density(t, g, kappa, v0, -1.0);
  add_boundary_identity(t, g);
  SpMat A(g.n_space, g.n_space);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

std::unique_ptr<Factor> factorize(const SpMat& A, const char* where) {
  auto lu = std::make_unique<Factor>();
  lu->analyzePattern(A);
  lu->factorize(A);
  require(lu->info() == Eigen::Success, errc::internal,
          std::string("sparse factorization failed in ") + where);
  return lu;
}

void write_boundary(SpaceTimeField& f, int level, const BoundaryTrace& data) {
  const Grid& g = f.grid;
  const int j = data.levels == 1 ? 0 : level;
  for (int fc = 0; fc < 2 * g.dim(); ++fc) {
    const std::int64_t nf = face_node_count(g, fc);
    for (std::int64_t fi = 0; fi < nf; ++fi)
      f.at(level, g.index(face_node_multi(g, fc, fi))) = data.val(fc, fi, j);
  }
}

// Sup defect over every discrete row of the expansion system, evaluated with
// the shared stencil routines so both solution routes face the same judge.
double expansion_defect(const StationarySolution& base, const MFGCoefficients& co,
                        const SpaceTimeField& F1, const ScalarField& G1,
                        const BoundaryTrace& g_data, const BoundaryTrace& h_data,
                        const ExpansionSources& src, const SpaceTimeField& v,
                        const SpaceTimeField& m) {
  const Grid& g = v.grid;
  const int L = g.levels;
  const auto grad_v0 = gradient(base.v0);
  const std::vector<double> ones(static_cast<std::size_t>(g.n_space), 1.0);
  double worst = 0.0;
  const auto bump = [&worst](double r) { worst = std::max(worst, std::abs(r)); };

  for (int j = 0; j < L; ++j) {
    const auto sigma = take(co.sigma, j);
    const auto kappa = take(co.kappa, j);
    const auto vj = take(v, j);
    if (j < L - 1) {
      const auto lap = laplacian_of_product_values(g, ones, vj);
      const auto adv = advection_values(g, drift_field(g, kappa, grad_v0), vj);
      for (std::int64_t k = 0; k < g.n_space; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        bump(-(v.at(j + 1, k) - v.at(j, k)) / g.dt - sigma[k] * lap[k] + adv[k] -
             F1.at(j, k) * m.at(j, k) - src.rhs_v[j][k]);
      }
    } else {
      for (std::int64_t k = 0; k < g.n_space; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        bump(v.at(j, k) - G1[k] * m.at(j, k) - src.terminal[k]);
      }
    }
    if (j == 0) {
      for (std::int64_t k = 0; k < g.n_space; ++k) bump(m.at(0, k));
    } else {
      const auto mj = take(m, j);
      const auto lap = laplacian_of_product_values(g, sigma, mj);
      const auto d1 = drift_divergence_values(g, kappa, base.m0.data, vj);
      const auto d2 = drift_divergence_values(g, kappa, mj, base.v0.data);
      for (std::int64_t k = 0; k < g.n_space; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        bump((m.at(j, k) - m.at(j - 1, k)) / g.dt - lap[k] - d1[k] - d2[k] - src.rhs_m[j][k]);
      }
    }
    // boundary rows carry the traces (the initial density row wins at j = 0)
    const int jg = g_data.levels == 1 ? 0 : j;
    const int jh = h_data.levels == 1 ? 0 : j;
    for (int fc = 0; fc < 2 * g.dim(); ++fc) {
      const std::int64_t nf = face_node_count(g, fc);
      for (std::int64_t fi = 0; fi < nf; ++fi) {
        const std::int64_t k = g.index(face_node_multi(g, fc, fi));
        bump(v.at(j, k) - g_data.val(fc, fi, jg));
        if (j > 0) bump(m.at(j, k) - h_data.val(fc, fi, jh));
      }
    }
  }
  return worst;
}

void check_expansion_inputs(const StationarySolution& base, const MFGCoefficients& co,
                            const SpaceTimeField& F1, const ScalarField& G1) {
  const Grid& g = F1.grid;
  check_same_grid(g, base.v0.grid, "linearized solve");
  check_same_grid(g, co.sigma.grid, "linearized solve");
  check_same_grid(g, G1.grid, "linearized solve");
  require(g.levels >= 2, errc::invalid_argument,
          "linearized time-dependent solve needs nt >= 1");
}

LinearizedSolution sweep_expansion(const StationarySolution& base, const MFGCoefficients& co,
                                   const SpaceTimeField& F1, const ScalarField& G1,
                                   const BoundaryTrace& g_data, const BoundaryTrace& h_data,
                                   const ExpansionSources& src, const SolverOptions& opt,
                                   int order) {
  check_expansion_inputs(base, co, F1, G1);
  const Grid& g = F1.grid;
  const int L = g.levels;
  const std::int64_t n = g.n_space;
  const auto grad_v0 = gradient(base.v0);

  const int nfac = co.time_static ? 1 : L;
  std::vector<std::unique_ptr<Factor>> lu_v(nfac), lu_m(nfac);
  for (int j = 0; j < nfac; ++j) {
    const auto sigma = take(co.sigma, j);
    const auto kappa = take(co.kappa, j);
    lu_v[j] = factorize(value_matrix(g, sigma, drift_field(g, kappa, grad_v0)),
                        "linearized value step");
    lu_m[j] = factorize(density_matrix(g, sigma, kappa, base.v0.data),
                        "linearized density step");
  }
  const auto lu_at = [&](std::vector<std::unique_ptr<Factor>>& lus, int j) -> Factor& {
    return *lus[co.time_static ? 0 : j];
  };

  const auto value_sweep = [&](const SpaceTimeField& m) {
    SpaceTimeField v = make_spacetime(g);
    for (std::int64_t k = 0; k < n; ++k)
      v.at(L - 1, k) = G1[k] * m.at(L - 1, k) + src.terminal[k];
    write_boundary(v, L - 1, g_data);
    Eigen::VectorXd rhs(n);
    for (int j = L - 2; j >= 0; --j) {
      for (std::int64_t k = 0; k < n; ++k)
        rhs[k] = v.at(j + 1, k) / g.dt + F1.at(j, k) * m.at(j, k) + src.rhs_v[j][k];
      apply_dirichlet_rhs(g, g_data, j, rhs);
      const Eigen::VectorXd x = lu_at(lu_v, j).solve(rhs);
      for (std::int64_t k = 0; k < n; ++k) v.at(j, k) = x[k];
    }
    return v;
  };

  const auto density_sweep = [&](const SpaceTimeField& v) {
    SpaceTimeField m = make_spacetime(g);  // level 0 stays zero
    Eigen::VectorXd rhs(n);
    for (int j = 1; j < L; ++j) {
      const auto kappa = take(co.kappa, j);
      const auto dd = drift_divergence_values(g, kappa, base.m0.data, take(v, j));
      for (std::int64_t k = 0; k < n; ++k)
        rhs[k] = m.at(j - 1, k) / g.dt + dd[k] + src.rhs_m[j][k];
      apply_dirichlet_rhs(g, h_data, j, rhs);
      const Eigen::VectorXd x = lu_at(lu_m, j).solve(rhs);
      for (std::int64_t k = 0; k < n; ++k) m.at(j, k) = x[k];
    }
    return m;
  };

  SpaceTimeField m_path = make_spacetime(g);
  int used = 0;
  bool converged = false;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    used = it;
    const auto v = value_sweep(m_path);
    auto m_new = density_sweep(v);
    const double delta = sup_diff(m_new, m_path);
    require(sup_norm(m_new) <= opt.blow_up && sup_norm(v) <= opt.blow_up, errc::blow_up,
            "linearized alternation blew up");
    if (delta <= opt.tol * (1.0 + sup_norm(m_new))) {
      m_path = std::move(m_new);
      converged = true;
      break;
    }
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m_path.data.size()); ++i)
      m_path.data[i] += opt.damping * (m_new.data[i] - m_path.data[i]);
  }
  require(converged, errc::max_iterations, "linearized alternation did not converge");

  // one consistent pair so the density rows hold to factorization accuracy
  LinearizedSolution out;
  out.v = value_sweep(m_path);
  out.m = density_sweep(out.v);
  out.order = order;
  out.iterations = used;
  out.residual = expansion_defect(base, co, F1, G1, g_data, h_data, src, out.v, out.m);
  return out;
}

LinearizedSolution monolithic_expansion(const StationarySolution& base,
                                        const MFGCoefficients& co, const SpaceTimeField& F1,
                                        const ScalarField& G1, const BoundaryTrace& g_data,
                                        const BoundaryTrace& h_data,
                                        const ExpansionSources& src, int order) {
  check_expansion_inputs(base, co, F1, G1);
  const Grid& g = F1.grid;
  const int L = g.levels;
  const std::int64_t n = g.n_space;
  const std::int64_t N = static_cast<std::int64_t>(L) * n;
  const auto grad_v0 = gradient(base.v0);

  Triplets T, sc;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * N);
  const auto shift = [&](std::int64_t ro, std::int64_t co_) {
    for (const auto& t : sc) T.emplace_back(ro + t.row(), co_ + t.col(), t.value());
    sc.clear();
  };
  const auto boundary_rhs = [&](std::int64_t off, const BoundaryTrace& data, int level) {
    const int j = data.levels == 1 ? 0 : level;
    for (int fc = 0; fc < 2 * g.dim(); ++fc) {
      const std::int64_t nf = face_node_count(g, fc);
      for (std::int64_t fi = 0; fi < nf; ++fi)
        rhs[off + g.index(face_node_multi(g, fc, fi))] = data.val(fc, fi, j);
    }
  };

  for (int j = 0; j < L; ++j) {
    const auto sigma = take(co.sigma, j);
    const auto kappa = take(co.kappa, j);
    const std::int64_t rv = static_cast<std::int64_t>(j) * n;
    const std::int64_t rm = N + rv;

    if (j < L - 1) {
      add_interior_identity(sc, g, 1.0 / g.dt);
      add_scaled_laplacian(sc, g, sigma, -1.0);
      const auto b = drift_field(g, kappa, grad_v0);
      add_advection(sc, g, pointers(b), 1.0);
      add_boundary_identity(sc, g);
      shift(rv, rv);
      for (std::int64_t k = 0; k < n; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        T.emplace_back(rv + k, rv + n + k, -1.0 / g.dt);
        T.emplace_back(rv + k, rm + k, -F1.at(j, k));
        rhs[rv + k] = src.rhs_v[j][k];
      }
    } else {
      add_interior_identity(sc, g, 1.0);
      add_boundary_identity(sc, g);
      shift(rv, rv);
      for (std::int64_t k = 0; k < n; ++k) {
        if (g.on_boundary(g.unindex(k))) continue;
        T.emplace_back(rv + k, rm + k, -G1[k]);
        rhs[rv + k] = src.terminal[k];
      }
    }
    boundary_rhs(rv, g_data, j);

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
        rhs[rm + k] = src.rhs_m[j][k];
      }
      boundary_rhs(rm, h_data, j);
    }
  }

  SpMat A(2 * N, 2 * N);
  A.setFromTriplets(T.begin(), T.end());
  const Eigen::VectorXd x = solve_sparse(A, rhs, "monolithic linearized solve");

  LinearizedSolution out;
  out.v = make_spacetime(g);
  out.m = make_spacetime(g);
  for (int j = 0; j < L; ++j)
    for (std::int64_t k = 0; k < n; ++k) {
      out.v.at(j, k) = x[static_cast<std::int64_t>(j) * n + k];
      out.m.at(j, k) = x[N + static_cast<std::int64_t>(j) * n + k];
    }
  out.order = order;
  out.iterations = 1;
  out.residual = expansion_defect(base, co, F1, G1, g_data, h_data, src, out.v, out.m);
  return out;
}

double fit_loglog_slope(const std::vector<double>& eps, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(eps.size());
  for (int i = 0; i < n; ++i) {
    const double x = std::log(eps[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

LinearizedSolution solve_first_order(const StationarySolution& base, const MFGCoefficients& co,
                                     const SpaceTimeField& F1, const ScalarField& G1,
                                     const BoundaryTrace& g_data, const BoundaryTrace& h_data,
                                     const SolverOptions& opt) {
  return sweep_expansion(base, co, F1, G1, g_data, h_data, zero_sources(F1.grid), opt, 1);
}

LinearizedSolution solve_first_order_monolithic(const StationarySolution& base,
                                                const MFGCoefficients& co,
                                                const SpaceTimeField& F1, const ScalarField& G1,
                                                const BoundaryTrace& g_data,
                                                const BoundaryTrace& h_data) {
  return monolithic_expansion(base, co, F1, G1, g_data, h_data, zero_sources(F1.grid), 1);
}

LinearizedSolution solve_second_order(const StationarySolution& base, const MFGCoefficients& co,
                                      const SpaceTimeField& F1, const SpaceTimeField& F2,
                                      const ScalarField& G1, const ScalarField& G2,
                                      const LinearizedSolution& a, const LinearizedSolution& b,
                                      const SolverOptions& opt) {
  check_same_grid(F1.grid, a.v.grid, "second order sources");
  check_same_grid(F1.grid, b.v.grid, "second order sources");
  check_same_grid(F1.grid, F2.grid, "second order sources");
  const Grid& g = F1.grid;
  const auto zg = make_boundary_trace(g, g.levels);
  return sweep_expansion(base, co, F1, G1, zg, zg, second_order_sources(co, F2, G2, a, b), opt,
                         2);
}

LinearizedSolution solve_difference_system(const StationarySolution& base,
                                           const MFGCoefficients& co, const SpaceTimeField& F1,
                                           const ScalarField& G1, const SpaceTimeField& v_source,
                                           const ScalarField& terminal_extra) {
  check_same_grid(F1.grid, v_source.grid, "difference system");
  check_same_grid(F1.grid, terminal_extra.grid, "difference system");
  const Grid& g = F1.grid;
  auto src = zero_sources(g);
  for (int j = 0; j + 1 < g.levels; ++j)
    for (std::int64_t k = 0; k < g.n_space; ++k)
      src.rhs_v[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = v_source.at(j, k);
  for (std::int64_t k = 0; k < g.n_space; ++k)
    src.terminal[static_cast<std::size_t>(k)] = terminal_extra[k];
  const auto zg = make_boundary_trace(g, g.levels);
  return monolithic_expansion(base, co, F1, G1, zg, zg, src, 1);
}

StationaryLinearized solve_first_order_stationary(const StationarySolution& base,
                                                  const ScalarField& F1,
                                                  const BoundaryTrace& v_data,
                                                  const BoundaryTrace& m_data) {
  const Grid& g = base.m0.grid;
  check_same_grid(g, F1.grid, "stationary linearized solve");
  const std::int64_t n = g.n_space;
  const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
  const auto grad_v0 = gradient(base.v0);

  Triplets T, sc;
  const auto shift = [&](std::int64_t ro, std::int64_t co_) {
    for (const auto& t : sc) T.emplace_back(ro + t.row(), co_ + t.col(), t.value());
    sc.clear();
  };

  add_scaled_laplacian(sc, g, ones, -1.0);
  add_advection(sc, g, {&grad_v0.comp[0], &grad_v0.comp[1], &grad_v0.comp[2]}, 1.0);
  add_boundary_identity(sc, g);
  shift(0, 0);
  add_laplacian_of_product(sc, g, ones, -1.0);
  add_drift_on_density(sc, g, ones, base.v0.data, -1.0);
  add_boundary_identity(sc, g);
  shift(n, n);
  add_drift_on_potential(sc, g, ones, base.m0.data, -1.0);
  shift(n, 0);
  for (std::int64_t k = 0; k < n; ++k) {
    if (g.on_boundary(g.unindex(k))) continue;
    T.emplace_back(k, n + k, -F1[k]);
  }

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
  for (int fc = 0; fc < 2 * g.dim(); ++fc) {
    const std::int64_t nf = face_node_count(g, fc);
    for (std::int64_t fi = 0; fi < nf; ++fi) {
      const std::int64_t k = g.index(face_node_multi(g, fc, fi));
      rhs[k] = v_data.val(fc, fi, 0);
      rhs[n + k] = m_data.val(fc, fi, 0);
    }
  }

  SpMat A(2 * n, 2 * n);
  A.setFromTriplets(T.begin(), T.end());
  const Eigen::VectorXd x = solve_sparse(A, rhs, "stationary linearized solve");

  StationaryLinearized out;
  out.v = make_scalar(g);
  out.m = make_scalar(g);
  for (std::int64_t k = 0; k < n; ++k) {
    out.v[k] = x[k];
    out.m[k] = x[n + k];
  }
  return out;
}

ScalarReducedEquation reduce_to_scalar(const StationarySolution& base, const ScalarField& F1,
                                       int drift_sign) {
  check_same_grid(base.m0.grid, F1.grid, "scalar reduction");
  require(drift_sign == 1 || drift_sign == -1, errc::invalid_argument,
          "drift sign must be +1 or -1");
  ScalarReducedEquation eq;
  if (drift_sign == 1) {
    eq.q = laplacian(base.v0);
  } else {
    // adjoint variant: the Lap(v0) term integrates away against the drift
    eq.q = make_scalar(base.v0.grid, 0.0);
  }
  for (std::int64_t k = 0; k < base.m0.grid.n_space; ++k) eq.q[k] -= F1[k] * base.m0[k];
  eq.v0 = base.v0;
  eq.drift_sign = drift_sign;
  return eq;
}

ScalarField solve_scalar_reduced(const ScalarReducedEquation& eq, const BoundaryTrace& m_data) {
  const Grid& g = eq.q.grid;
  const std::vector<double> ones(static_cast<std::size_t>(g.n_space), 1.0);
  const auto grad_v0 = gradient(eq.v0);

  Triplets t;
  add_scaled_laplacian(t, g, ones, 1.0);
  add_advection(t, g, {&grad_v0.comp[0], &grad_v0.comp[1], &grad_v0.comp[2]},
                static_cast<double>(eq.drift_sign));
  add_interior_scaled_identity(t, g, eq.q.data, 1.0);
  add_boundary_identity(t, g);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(g.n_space);
  apply_dirichlet_rhs(g, m_data, 0, rhs);

  SpMat A(g.n_space, g.n_space);
  A.setFromTriplets(t.begin(), t.end());
  const Eigen::VectorXd x = solve_sparse(A, rhs, "scalar reduced solve");

  ScalarField out = make_scalar(g);
  for (std::int64_t k = 0; k < g.n_space; ++k) out[k] = x[k];
  return out;
}

FrechetReport frechet_check(const StationarySolution& base, const MFGCoefficients& co,
                            const CostModel& cost, const PerturbationInput& pert,
                            const SolverOptions& opt) {
  const Grid& g = pert.g.grid;
  check_same_grid(g, base.m0.grid, "expansion remainder study");
  check_same_grid(g, pert.h.grid, "expansion remainder study");
  require(pert.eps.size() >= 2, errc::invalid_argument,
          "remainder study needs at least two amplitudes");

  const std::int64_t n = g.n_space;
  const auto replicate = [&](const ScalarField& s) {
    SpaceTimeField f = make_spacetime(g);
    for (int j = 0; j < g.levels; ++j)
      for (std::int64_t k = 0; k < n; ++k) f.at(j, k) = s[k];
    return f;
  };
  const auto shifted = [&](const SpaceTimeField& b, const SpaceTimeField& d, double eps) {
    SpaceTimeField f = b;
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] += eps * d.data[i];
    return f;
  };

  const SpaceTimeField v_base = replicate(base.v0);
  const SpaceTimeField m_base = replicate(base.m0);
  const auto S0 = solve_mfg_timedep(co, cost, base.m0, restrict_to_boundary(v_base),
                                    restrict_to_boundary(m_base), opt);

  const SpaceTimeField F1 = cost.Fk.empty() ? make_spacetime(g) : cost.Fk[0];
  const SpaceTimeField F2 = cost.Fk.size() < 2 ? make_spacetime(g) : cost.Fk[1];
  const ScalarField G1 = cost.Gk.empty() ? make_scalar(g) : cost.Gk[0];
  const ScalarField G2 = cost.Gk.size() < 2 ? make_scalar(g) : cost.Gk[1];

  const auto A = solve_first_order(base, co, F1, G1, restrict_to_boundary(pert.g),
                                   restrict_to_boundary(pert.h), opt);
  const auto B = solve_second_order(base, co, F1, F2, G1, G2, A, A, opt);

  FrechetReport rep;
  rep.eps = pert.eps;
  for (const double eps : pert.eps) {
    const auto S = solve_mfg_timedep(co, cost, base.m0,
                                     restrict_to_boundary(shifted(v_base, pert.g, eps)),
                                     restrict_to_boundary(shifted(m_base, pert.h, eps)), opt);
    double r1 = 0.0, r2 = 0.0;
    for (std::size_t i = 0; i < S.v.data.size(); ++i) {
      const double dv = S.v.data[i] - S0.v.data[i] - eps * A.v.data[i];
      const double dm = S.m.data[i] - S0.m.data[i] - eps * A.m.data[i];
      r1 = std::max({r1, std::abs(dv), std::abs(dm)});
      const double half = 0.5 * eps * eps;
      r2 = std::max({r2, std::abs(dv - half * B.v.data[i]), std::abs(dm - half * B.m.data[i])});
    }
    rep.remainder_first.push_back(r1);
    rep.remainder_second.push_back(r2);
  }
  rep.slope_first = fit_loglog_slope(rep.eps, rep.remainder_first);
  rep.slope_second = fit_loglog_slope(rep.eps, rep.remainder_second);
  return rep;
}

}  // namespace mfg
