#pragma once

#include "nlsctl/grid.hpp"

namespace nlsctl {

/// Complete elliptic integral of the first kind K(k), modulus convention, via the AGM.
double complete_elliptic_k(double k);
/// Complete elliptic integral of the second kind E(k), from the same AGM sequence.
double complete_elliptic_e(double k);
/// Jacobi cn(u, k) by the descending Landen (AGM) recursion.
double jacobi_cn(double u, double k);

/// Left side of the modulus equation 4(j+1)^2 (2k^2 - 1) K(k)^2.
double modulus_equation(double k, int j);

/// Root k in [1/sqrt2, 1) of modulus_equation(k, j) = mu. Requires mu >= 0.
double solve_modulus(double mu, int j);

struct BoundState {
  double mu = 0.0;
  int j = 0;
  double k = 0.0;
  Grid grid{1};
  Field values;
  Field dmu_values;
};

/// Samples of phi_j(x) = 2 sqrt2 (j+1) k K cn(2(j+1)K(x - 1/2) + (j mod 2)K, k).
Field bound_state_values(double mu, int j, const Grid& grid);
/// d phi / d mu by central differences in mu (one-sided near mu = 0).
Field dmu_bound_state(double mu, int j, const Grid& grid);
BoundState bound_state(double mu, int j, const Grid& grid);

/// -D2 phi + mu phi - phi^3 on the grid.
Field bvp_residual(const BoundState& state);

struct NormIdentity {
  double lhs = 0.0;  // grid quadrature of phi^2
  double rhs = 0.0;  // 4 (j+1)^2 k^2 K \int_{-K}^{K} cn^2
};
NormIdentity norm_sq_identity(double mu, int j, const Grid& grid);

struct VariationalGroundState {
  Field values;      // lambda^{1/2} w
  Field minimizer;   // w, normalized to \int w^4 = 1
  double lambda = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// Ground state from minimizing 1/2 \int (u_x^2 + mu u^2) over \int u^4 = 1,
/// by a semi-implicit normalized gradient flow started at sin(pi x).
VariationalGroundState ground_state_variational(double mu, const Grid& grid, int max_iters = 20000,
                                                double tol = 1e-10, double tau = 0.05);

}  // namespace nlsctl
