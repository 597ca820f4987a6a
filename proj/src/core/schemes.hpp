#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "core/grid.hpp"

namespace mfg {

// Second-order interior stencils shared by the nonlinear marches, the
// linearized solvers and the monolithic space-time assembly travel through
// here, so every route discretizes the same rows. All helpers touch interior
// rows only; boundary rows are written by the callers (Dirichlet identity).

using Triplets = std::vector<Eigen::Triplet<double>>;

// s * Lap(a .* u): centered second differences of the nodal product a*u.
void add_laplacian_of_product(Triplets& out, const Grid& g, const std::vector<double>& a,
                              double s);

// s * c .* (Lap u): non-divergence form with a nodal coefficient.
void add_scaled_laplacian(Triplets& out, const Grid& g, const std::vector<double>& c,
                          double s);

// s * div(w grad u) with arithmetic face means of the nodal weight w.
void add_weighted_laplacian(Triplets& out, const Grid& g, const std::vector<double>& w,
                            double s);

// s * div(kappa u grad p) acting on the density u: conservative face fluxes
// kappa_face * u_face * (p_hi - p_lo)/h with arithmetic means for kappa and u.
void add_drift_on_density(Triplets& out, const Grid& g, const std::vector<double>& kappa,
                          const std::vector<double>& p, double s);

// s * div(kappa rho grad u) acting on the potential u for a frozen density
// rho: the same face fluxes as add_drift_on_density with the other factor
// held fixed, so the two are exact partial derivatives of one nonlinear flux.
void add_drift_on_potential(Triplets& out, const Grid& g, const std::vector<double>& kappa,
                            const std::vector<double>& rho, double s);

// s * (b . grad u) with a nodal vector field b given per component (centered).
void add_advection(Triplets& out, const Grid& g,
                   const std::array<const std::vector<double>*, 3>& b, double s);

// s * u on interior rows.
void add_interior_identity(Triplets& out, const Grid& g, double s);

// s * c .* u on interior rows (nodal coefficient).
void add_interior_scaled_identity(Triplets& out, const Grid& g,
                                  const std::vector<double>& c, double s);

// Dirichlet closure: unit diagonal on every boundary row.
void add_boundary_identity(Triplets& out, const Grid& g);

// Writes trace data into the boundary entries of a right-hand side.
void apply_dirichlet_rhs(const Grid& g, const BoundaryTrace& data, int level,
                         Eigen::VectorXd& rhs);

// Evaluates the same conservative drift divergence as add_drift_on_density for
// a known density (used by residual checks and right-hand sides).
std::vector<double> drift_divergence_values(const Grid& g, const std::vector<double>& kappa,
                                            const std::vector<double>& density,
                                            const std::vector<double>& p);

// Matrix application of the centered product Laplacian for known fields.
std::vector<double> laplacian_of_product_values(const Grid& g, const std::vector<double>& a,
                                                const std::vector<double>& u);

// Direct sparse solve (LU). Throws errc::internal on factorization failure.
Eigen::VectorXd solve_sparse(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                             const char* where);

}  // namespace mfg
