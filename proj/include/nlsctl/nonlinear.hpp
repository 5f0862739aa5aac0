#pragma once

#include "nlsctl/hum.hpp"

#include <cstdint>
#include <vector>

namespace nlsctl {

/// Complex fields sampled on a time grid (states of i u_t = -u_xx - |u|^2 u + chi c, or controls c).
struct ComplexTrajectory {
  std::vector<double> times;
  std::vector<ComplexField> states;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  bool empty() const { return states.empty(); }
};

/// Piecewise linear resampling in t.
ComplexTrajectory resample(const ComplexTrajectory& traj, const std::vector<double>& times);

struct NlsOptions {
  /// Frequency of the rotating frame v = exp(-i frame_mu t) u the scheme works in.
  double frame_mu = 0.0;
  int max_sweeps = 10;
  double sweep_tol = 1e-12;
};

/// Crank-Nicolson for the cubic focusing equation with the midpoint cubic term solved by
/// fixed-point sweeps. The control enters as half kicks -i dt/2 chi c before and after
/// each step. An empty control means c = 0. Returned states are in the lab frame.
ComplexTrajectory nls_solve(const Grid& grid, const Field& chi, const ComplexField& u0,
                            const ComplexTrajectory& control, double T, int nt, const NlsOptions& options = {});

double mass(const Grid& grid, const ComplexField& u);
/// \int |u_x|^2 - |u|^4 / 2
double energy(const Grid& grid, const ComplexField& u);

/// Newton solution of the discrete bound-state equation -D2 phi + mu phi - phi^3 = 0,
/// started from the elliptic profile. Exactly stationary for the scheme above.
Field discrete_bound_state(double mu, int j, const Grid& grid, double tol = 1e-13);

// Forcing dictionary: h -> (Im h~, -Re h~) with h~ = exp(-i mu t) h.
TwoComponentField forcing_to_real(const ComplexField& h, double t, double mu);
ComplexField forcing_from_real(const TwoComponentField& H, double t, double mu);
// State dictionary: z -> (Re z~, Im z~) with z~ = exp(-i mu t) z.
TwoComponentField state_to_real(const ComplexField& z, double t, double mu);
ComplexField state_from_real(const TwoComponentField& Z, double t, double mu);

struct LinearizationDefect {
  double defect = 0.0;          // |v(T) - v_ref(T) - eps z~(T)| / eps
  double nonlinear_change = 0.0;  // |v(T) - v_ref(T)| / eps
  double linear_change = 0.0;   // |z~(T)|
};

/// Compares the nonlinear flow from phi + eps z0 with the linearized flow of z0 around the
/// discrete ground state, both in the frame rotating with mu.
LinearizationDefect linearization_consistency(double mu, double epsilon, const ComplexField& z0, double T, int nt,
                                              const Interval& omega_prime = {});

struct SteeringProblem {
  ComplexField u0;
  ComplexField u1;
  double mu = 10.0;
  double T = 2.0;
  int nt = 2048;
  double delta = 0.0;
  double newton_tol = 1e-6;
  int newton_max_iters = 8;
  /// Sine modes per component the linear solves work in; 0 picks resolved_modes.
  int filter_modes = 0;
  Field phi;        // discrete ground state the derivative is frozen at
  HumProblem hum;   // linearization at phi

  void validate() const;
};

/// u0 = phi + p0 and u1 = exp(i mu T) phi + p1 with random smooth perturbations of
/// H1 norm `radius * delta` (radius < 1).
SteeringProblem make_steering_problem(double mu, double T, int n_interior, int nt, double delta,
                                      const Interval& omega_prime = {}, std::uint64_t seed = 7,
                                      double radius = 0.9);

struct SteeringResult {
  ComplexTrajectory control;
  ComplexTrajectory state;
  ComplexField final_state;
  std::vector<double> h1_error_history;
  std::vector<int> cg_iterations;
  std::vector<double> step_lengths;
  int iterations = 0;
  int filter_modes = 0;
  bool interpolated = false;
  bool line_search_used = false;
};

/// Quasi-Newton iteration on c -> u(T; u0, c) - u1 with the HUM control map of the
/// linearization at phi as the inverse derivative. Throws IterationError (with the error
/// history) on divergence or when the iteration budget runs out.
SteeringResult steer(const SteeringProblem& problem);

struct BasinRow {
  double delta = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_error = 0.0;
};

struct BasinReport {
  double delta_star = 0.0;
  std::vector<BasinRow> rows;
};

/// Runs steer over an increasing list of perturbation sizes with fixed perturbation
/// directions and reports the largest size below which every run converged.
BasinReport basin_probe(double mu, double T, int n_interior, int nt, const std::vector<double>& delta_grid,
                        const Interval& omega_prime = {}, double cg_tol = 1e-8, std::uint64_t seed = 7);

}  // namespace nlsctl
