#pragma once

#include "nlsctl/banded.hpp"
#include "nlsctl/elliptic.hpp"
#include "nlsctl/grid.hpp"
#include "nlsctl/tridiagonal.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace nlsctl {

/// Pair of real grid fields, (Re z, Im z) of a complex perturbation.
struct TwoComponentField {
  Field first;
  Field second;

  static TwoComponentField zero(int n) { return {Field::Zero(n), Field::Zero(n)}; }
  int size() const { return static_cast<int>(first.size()); }

  TwoComponentField& operator+=(const TwoComponentField& o);
  TwoComponentField& operator-=(const TwoComponentField& o);
  TwoComponentField& operator*=(double s);
  /// Pointwise multiplication of both components by a real profile.
  TwoComponentField scaled_by(const Field& profile) const;

  /// Interleaved layout (z1_0, z2_0, z1_1, z2_1, ...).
  Field interleaved() const;
  static TwoComponentField from_interleaved(const Field& v);
};

TwoComponentField operator+(TwoComponentField a, const TwoComponentField& b);
TwoComponentField operator-(TwoComponentField a, const TwoComponentField& b);
TwoComponentField operator*(double s, TwoComponentField a);

double inner(const Grid& grid, const TwoComponentField& u, const TwoComponentField& v);
double norm_l2(const Grid& grid, const TwoComponentField& u);
double seminorm_h1(const Grid& grid, const TwoComponentField& u);
double norm_h1(const Grid& grid, const TwoComponentField& u);

struct Interval {
  double a = 0.3;
  double b = 0.8;
};

/// Smooth bump exp(1 - 1/(1-s^2)) supported on (a,b) shrunk by 5% of its length per side.
Field cutoff_profile(const Interval& omega_prime, const Grid& grid);

/// The linearization of NLS at a bound state: L = [[0, L-], [-L+, 0]] and its transpose.
struct LinearizedSystem {
  Grid grid{1};
  double mu = 0.0;
  Field phi;
  Tridiagonal lminus;
  Tridiagonal lplus;
  Field chi;
  Interval omega_prime;
};

LinearizedSystem assemble(double mu, const Field& phi, const Grid& grid, const Interval& omega_prime = {});
LinearizedSystem assemble(const BoundState& state, const Interval& omega_prime = {});

TwoComponentField apply_L(const LinearizedSystem& sys, const TwoComponentField& z);
TwoComponentField apply_Lstar(const LinearizedSystem& sys, const TwoComponentField& v);
/// Potential part [[0, -phi^2], [3 phi^2, 0]] of L.
TwoComponentField apply_L1(const LinearizedSystem& sys, const TwoComponentField& z);
TwoComponentField apply_L1_star(const LinearizedSystem& sys, const TwoComponentField& z);

/// Band matrix alpha*I + beta*M on the interleaved layout, M = L or L^T.
RealBandedMatrix banded_system(const LinearizedSystem& sys, bool transpose, double alpha, double beta);

/// Crank-Nicolson (Cayley) step for Y' = M Y with M = L or M = -L*.
/// step(y) = (I - dt/2 M)^{-1} (I + dt/2 M) y, unstep is its inverse.
class CayleyMap {
 public:
  enum class Generator { L, MinusLstar };
  CayleyMap(const LinearizedSystem& sys, Generator g, double dt);

  Field step(const Field& y) const;
  Field unstep(const Field& y) const;
  /// (I + dt/2 M) y
  Field explicit_part(const Field& y) const;
  /// rhs <- (I - dt/2 M)^{-1} rhs
  void solve_implicit(Field& rhs) const;

 private:
  RealBandedMatrix plus_;   // I + dt/2 M
  RealBandedMatrix minus_;  // I - dt/2 M
  BandedLU<double> implicit_;
  mutable std::unique_ptr<BandedLU<double>> explicit_;  // factored on first unstep
};

struct Trajectory {
  std::vector<double> times;
  std::vector<TwoComponentField> states;
  std::vector<double> l2_norms;
  std::vector<double> h1_seminorms;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  double max_l2_ratio() const;
};

std::vector<double> uniform_times(double T, int nt);
Trajectory make_trajectory(const Grid& grid, std::vector<double> times, std::vector<TwoComponentField> states);
Trajectory zero_trajectory(const Grid& grid, double T, int nt);

/// V' = -L* V, V(0) = V0.
Trajectory propagate_adjoint(const LinearizedSystem& sys, const TwoComponentField& v0, double T, int nt);

/// Z' = L Z + chi H, Z(0) = initial. Forcing enters by the trapezoid rule on the
/// Duhamel integral, so forward and backward solves are exact inverses.
/// An empty forcing trajectory means H = 0.
Trajectory propagate_forward_forced(const LinearizedSystem& sys, const TwoComponentField& initial,
                                    const Trajectory& forcing, double T, int nt);
/// W' = L W + chi F, W(T) = final, solved backwards in time.
Trajectory propagate_backward_forced(const LinearizedSystem& sys, const TwoComponentField& final_state,
                                     const Trajectory& forcing, double T, int nt);

/// Dirichlet Green's function of u'' - omega^2 u on (0,1).
double greens_function(double omega, double x, double xi);
/// The closed form as two exponential blocks plus sinh(omega|x-xi|)/(2 omega); unstable for large omega.
double greens_function_direct(double omega, double x, double xi);

}  // namespace nlsctl
