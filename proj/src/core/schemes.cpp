#include "core/schemes.hpp"

#include <Eigen/SparseLU>

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

template <class Body>
void for_interior(const Grid& g, Body&& body) {
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
    if (!g.on_boundary(i)) body(k, i);
}

}  // namespace

void add_laplacian_of_product(Triplets& out, const Grid& g, const std::vector<double>& a,
                              double s) {
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    for (int ax = 0; ax < g.dim(); ++ax) {
      const double w = s / (g.h[ax] * g.h[ax]);
      const std::int64_t o = st[ax];
      out.emplace_back(k, k - o, w * a[k - o]);
      out.emplace_back(k, k, -2.0 * w * a[k]);
      out.emplace_back(k, k + o, w * a[k + o]);
    }
  });
}

void add_scaled_laplacian(Triplets& out, const Grid& g, const std::vector<double>& c,
                          double s) {
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    for (int ax = 0; ax < g.dim(); ++ax) {
      const double w = s * c[k] / (g.h[ax] * g.h[ax]);
      const std::int64_t o = st[ax];
      out.emplace_back(k, k - o, w);
      out.emplace_back(k, k, -2.0 * w);
      out.emplace_back(k, k + o, w);
    }
  });
}

void add_weighted_laplacian(Triplets& out, const Grid& g, const std::vector<double>& w,
                            double s) {
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    for (int ax = 0; ax < g.dim(); ++ax) {
      const double c = s / (g.h[ax] * g.h[ax]);
      const std::int64_t o = st[ax];
      const double wp = 0.5 * (w[k] + w[k + o]);
      const double wm = 0.5 * (w[k] + w[k - o]);
      out.emplace_back(k, k + o, c * wp);
      out.emplace_back(k, k, -c * (wp + wm));
      out.emplace_back(k, k - o, c * wm);
    }
  });
}

void add_drift_on_density(Triplets& out, const Grid& g, const std::vector<double>& kappa,
                          const std::vector<double>& p, double s) {
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    for (int ax = 0; ax < g.dim(); ++ax) {
      const std::int64_t o = st[ax];
      const double h = g.h[ax];
      // face coefficients c = kappa_face * dp/dn_face
      const double cp = 0.5 * (kappa[k] + kappa[k + o]) * (p[k + o] - p[k]) / h;
      const double cm = 0.5 * (kappa[k] + kappa[k - o]) * (p[k] - p[k - o]) / h;
      const double w = s / h;
      // flux difference (cp*(u_k+u_{k+o}) - cm*(u_{k-o}+u_k))/2h
      out.emplace_back(k, k + o, w * 0.5 * cp);
      out.emplace_back(k, k, w * 0.5 * (cp - cm));
      out.emplace_back(k, k - o, -w * 0.5 * cm);
    }
  });
}

void add_drift_on_potential(Triplets& out, const Grid& g, const std::vector<double>& kappa,
                            const std::vector<double>& rho, double s) {
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    for (int ax = 0; ax < g.dim(); ++ax) {
      const std::int64_t o = st[ax];
      const double h2 = g.h[ax] * g.h[ax];
      const double wp = 0.5 * (kappa[k] + kappa[k + o]) * 0.5 * (rho[k] + rho[k + o]) / h2;
      const double wm = 0.5 * (kappa[k] + kappa[k - o]) * 0.5 * (rho[k] + rho[k - o]) / h2;
      out.emplace_back(k, k + o, s * wp);
      out.emplace_back(k, k, -s * (wp + wm));
      out.emplace_back(k, k - o, s * wm);
    }
  });
}

void add_advection(Triplets& out, const Grid& g,
                   const std::array<const std::vector<double>*, 3>& b, double s) {
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    for (int ax = 0; ax < g.dim(); ++ax) {
      const std::int64_t o = st[ax];
      const double c = s * (*b[ax])[k] / (2.0 * g.h[ax]);
      out.emplace_back(k, k + o, c);
      out.emplace_back(k, k - o, -c);
    }
  });
}

void add_interior_identity(Triplets& out, const Grid& g, double s) {
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) { out.emplace_back(k, k, s); });
}

void add_interior_scaled_identity(Triplets& out, const Grid& g, const std::vector<double>& c,
                                  double s) {
  for_interior(g,
               [&](std::int64_t k, const std::array<int, 3>&) { out.emplace_back(k, k, s * c[k]); });
}

void add_boundary_identity(Triplets& out, const Grid& g) {
  std::array<int, 3> i{0, 0, 0};
  for (std::int64_t k = 0; k < g.n_space; ++k, advance(g, i))
    if (g.on_boundary(i)) out.emplace_back(k, k, 1.0);
}

void apply_dirichlet_rhs(const Grid& g, const BoundaryTrace& data, int level,
                         Eigen::VectorXd& rhs) {
  const int j = data.levels == 1 ? 0 : level;
  for (int f = 0; f < 2 * g.dim(); ++f) {
    const std::int64_t nf = face_node_count(g, f);
    for (std::int64_t fi = 0; fi < nf; ++fi)
      rhs[g.index(face_node_multi(g, f, fi))] = data.val(f, fi, j);
  }
}

std::vector<double> drift_divergence_values(const Grid& g, const std::vector<double>& kappa,
                                            const std::vector<double>& density,
                                            const std::vector<double>& p) {
  std::vector<double> out(static_cast<std::size_t>(g.n_space), 0.0);
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    double acc = 0.0;
    for (int ax = 0; ax < g.dim(); ++ax) {
      const std::int64_t o = st[ax];
      const double h = g.h[ax];
      const double cp = 0.5 * (kappa[k] + kappa[k + o]) * (p[k + o] - p[k]) / h;
      const double cm = 0.5 * (kappa[k] + kappa[k - o]) * (p[k] - p[k - o]) / h;
      acc += (cp * 0.5 * (density[k] + density[k + o]) -
              cm * 0.5 * (density[k - o] + density[k])) /
             h;
    }
    out[k] = acc;
  });
  return out;
}

std::vector<double> laplacian_of_product_values(const Grid& g, const std::vector<double>& a,
                                                const std::vector<double>& u) {
  std::vector<double> out(static_cast<std::size_t>(g.n_space), 0.0);
  const auto st = strides(g);
  for_interior(g, [&](std::int64_t k, const std::array<int, 3>&) {
    double acc = 0.0;
    for (int ax = 0; ax < g.dim(); ++ax) {
      const std::int64_t o = st[ax];
      acc += (a[k - o] * u[k - o] - 2.0 * a[k] * u[k] + a[k + o] * u[k + o]) /
             (g.h[ax] * g.h[ax]);
    }
    out[k] = acc;
  });
  return out;
}

Eigen::VectorXd solve_sparse(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                             const char* where) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  require(lu.info() == Eigen::Success, errc::internal,
          std::string("sparse factorization failed in ") + where);
  Eigen::VectorXd x = lu.solve(b);
  require(lu.info() == Eigen::Success, errc::internal,
          std::string("sparse solve failed in ") + where);
  return x;
}

}  // namespace mfg
