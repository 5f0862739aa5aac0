#include "nlsctl/nonlinear.hpp"

#include "nlsctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nlsctl {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

ComplexField rotate(const ComplexField& u, double angle) { return std::polar(1.0, angle) * u; }

ComplexTrajectory zero_control(const Grid& grid, double T, int nt) {
  ComplexTrajectory c;
  c.times = uniform_times(T, nt);
  c.states.assign(c.times.size(), ComplexField::Zero(grid.size()));
  return c;
}

bool same_times(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(b[i]))) return false;
  return true;
}

}  // namespace

ComplexTrajectory resample(const ComplexTrajectory& traj, const std::vector<double>& times) {
  if (traj.states.size() < 2 || traj.times.size() != traj.states.size())
    throw DimensionError("resample needs at least two samples with matching times");
  ComplexTrajectory out;
  out.times = times;
  out.states.reserve(times.size());
  std::size_t k = 0;
  for (double t : times) {
    while (k + 2 < traj.times.size() && traj.times[k + 1] < t) ++k;
    const double t0 = traj.times[k], t1 = traj.times[k + 1];
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    out.states.push_back((1.0 - w) * traj.states[k] + w * traj.states[k + 1]);
  }
  return out;
}

ComplexTrajectory nls_solve(const Grid& grid, const Field& chi, const ComplexField& u0,
                            const ComplexTrajectory& control, double T, int nt, const NlsOptions& options) {
  require_same_size(grid, u0.size(), "nls_solve initial state");
  require_same_size(grid, chi.size(), "nls_solve cutoff");
  if (!(T > 0.0)) throw DomainError("time horizon must be positive");
  if (nt < 1) throw DomainError("need at least one time step");
  if (options.max_sweeps < 1 || !(options.sweep_tol > 0.0)) throw DomainError("invalid fixed-point settings");

  const int n = grid.size();
  const double dt = T / nt;
  const double mu = options.frame_mu;
  const std::vector<double> times = uniform_times(T, nt);

  ComplexTrajectory c;
  const bool forced = !control.empty();
  if (forced) {
    c = same_times(control.times, times) ? control : resample(control, times);
    for (const auto& s : c.states) require_same_size(grid, s.size(), "nls_solve control");
  }

  const Tridiagonal a = Tridiagonal::schrodinger(grid, Field::Constant(n, mu));
  const BandedLU<cd> implicit(a.banded(cd{1.0, 0.0}, cd{0.0, 0.5 * dt}));

  auto kick = [&](ComplexField& v, int m) {
    if (!forced) return;
    const cd factor = -I * (0.5 * dt) * std::polar(1.0, -mu * times[m]);
    v.array() += factor * chi.array() * c.states[m].array();
  };

  ComplexTrajectory out;
  out.times = times;
  out.states.reserve(nt + 1);
  out.states.push_back(u0);

  ComplexField v = u0;
  ComplexField previous = u0;
  ComplexField w(n), next(n), mid(n);
  for (int m = 0; m < nt; ++m) {
    kick(v, m);
    const ComplexField base = v - (I * (0.5 * dt)) * a.apply(v);
    w = m > 0 ? ComplexField(2.0 * v - previous) : v;
    double change = 0.0;
    bool converged = false;
    for (int s = 0; s < options.max_sweeps; ++s) {
      mid = 0.5 * (v + w);
      next = base.array() + (I * dt) * mid.array().abs2() * mid.array();
      implicit.solve_in_place(std::span<cd>(next.data(), n));
      change = (next - w).cwiseAbs().maxCoeff();
      w.swap(next);
      if (change <= options.sweep_tol * std::max(1.0, w.cwiseAbs().maxCoeff())) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw IterationError("cubic fixed point failed at step " + std::to_string(m) +
                               "; retry with nt >= " + std::to_string(2 * nt),
                           change);
    previous = v;
    v = w;
    kick(v, m + 1);
    out.states.push_back(rotate(v, mu * times[m + 1]));
  }
  return out;
}

double mass(const Grid& grid, const ComplexField& u) { return grid.h() * u.squaredNorm(); }

double energy(const Grid& grid, const ComplexField& u) {
  const double grad = std::pow(seminorm_h1(grid, u), 2);
  return grad - 0.5 * grid.h() * u.cwiseAbs2().squaredNorm();
}

Field discrete_bound_state(double mu, int j, const Grid& grid, double tol) {
  Field phi = bound_state_values(mu, j, grid);
  const int n = grid.size();
  const Tridiagonal a = Tridiagonal::schrodinger(grid, Field::Constant(n, mu));
  double change = 0.0;
  for (int it = 0; it < 50; ++it) {
    Field f = a.apply(phi) - phi.cwiseProduct(phi).cwiseProduct(phi);
    const Field potential = (mu - 3.0 * phi.array().square()).matrix();
    const BandedLU<double> jac(Tridiagonal::schrodinger(grid, potential).banded(0.0, 1.0));
    jac.solve_in_place(std::span<double>(f.data(), n));
    phi -= f;
    change = f.lpNorm<Eigen::Infinity>();
    if (change <= tol * std::max(1.0, phi.lpNorm<Eigen::Infinity>())) return phi;
  }
  throw IterationError("discrete bound state Newton iteration did not converge", change);
}

TwoComponentField forcing_to_real(const ComplexField& h, double t, double mu) {
  const ComplexField ht = rotate(h, -mu * t);
  return {ht.imag(), -ht.real()};
}

ComplexField forcing_from_real(const TwoComponentField& H, double t, double mu) {
  ComplexField ht(H.size());
  ht.real() = -H.second;
  ht.imag() = H.first;
  return rotate(ht, mu * t);
}

TwoComponentField state_to_real(const ComplexField& z, double t, double mu) {
  const ComplexField zt = rotate(z, -mu * t);
  return {zt.real(), zt.imag()};
}

ComplexField state_from_real(const TwoComponentField& Z, double t, double mu) {
  ComplexField zt(Z.size());
  zt.real() = Z.first;
  zt.imag() = Z.second;
  return rotate(zt, mu * t);
}

LinearizationDefect linearization_consistency(double mu, double epsilon, const ComplexField& z0, double T, int nt,
                                              const Interval& omega_prime) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  const Grid grid(static_cast<int>(z0.size()));
  const Field phi = discrete_bound_state(mu, 0, grid);
  const LinearizedSystem sys = assemble(mu, phi, grid, omega_prime);
  const NlsOptions opts{.frame_mu = mu};
  const ComplexField phic = phi.cast<cd>();

  const ComplexTrajectory none;
  const ComplexField ref = rotate(nls_solve(grid, sys.chi, phic, none, T, nt, opts).states.back(), -mu * T);
  const ComplexField pert =
      rotate(nls_solve(grid, sys.chi, phic + epsilon * z0, none, T, nt, opts).states.back(), -mu * T);
  const Trajectory lin = propagate_forward_forced(sys, state_to_real(z0, 0.0, mu), Trajectory{}, T, nt);
  const ComplexField zt = state_from_real(lin.states.back(), 0.0, mu);

  LinearizationDefect d;
  d.defect = norm_l2(grid, ComplexField(pert - ref - epsilon * zt)) / epsilon;
  d.nonlinear_change = norm_l2(grid, ComplexField(pert - ref)) / epsilon;
  d.linear_change = norm_l2(grid, zt);
  return d;
}

void SteeringProblem::validate() const {
  hum.validate();
  const Grid& grid = hum.sys.grid;
  require_same_size(grid, u0.size(), "steering initial state");
  require_same_size(grid, u1.size(), "steering target state");
  require_same_size(grid, phi.size(), "steering soliton");
  if (!(T > 0.0) || nt < 2) throw DomainError("steering needs T > 0 and nt >= 2");
  if (std::abs(hum.T - T) > 1e-12 * T) throw DomainError("HUM horizon differs from the steering horizon");
  if (!(delta >= 0.0)) throw DomainError("delta must be nonnegative");
  if (!(newton_tol > 0.0) || newton_max_iters < 0) throw DomainError("invalid Newton settings");
  if (filter_modes < 0 || filter_modes > grid.size()) throw DomainError("filter_modes must lie in [0, n_interior]");
  const ComplexField phic = phi.cast<cd>();
  const double d0 = norm_h1(grid, ComplexField(u0 - phic));
  const double d1 = norm_h1(grid, ComplexField(u1 - rotate(phic, mu * T)));
  if ((d0 >= delta && d0 > 0.0) || (d1 >= delta && d1 > 0.0))
    throw DomainError("endpoints are not inside the delta-neighborhood of the soliton orbit");
}

SteeringProblem make_steering_problem(double mu, double T, int n_interior, int nt, double delta,
                                      const Interval& omega_prime, std::uint64_t seed, double radius) {
  if (!(radius >= 0.0 && radius < 1.0)) throw DomainError("perturbation radius must lie in [0,1)");
  const Grid grid(n_interior);
  SteeringProblem p;
  p.mu = mu;
  p.T = T;
  p.nt = nt;
  p.delta = delta;
  p.phi = discrete_bound_state(mu, 0, grid);
  p.hum.sys = assemble(mu, p.phi, grid, omega_prime);
  p.hum.T = T;
  p.hum.nt = nt;

  const auto probes = smooth_probes(grid, 2, std::min(20, n_interior), seed);
  auto perturbation = [&](const TwoComponentField& q) {
    ComplexField z(n_interior);
    z.real() = q.first;
    z.imag() = q.second;
    return ComplexField(radius * delta / norm_h1(grid, z) * z);
  };
  const ComplexField phic = p.phi.cast<cd>();
  p.u0 = phic + perturbation(probes[0]);
  p.u1 = rotate(phic, mu * T) + perturbation(probes[1]);
  return p;
}

SteeringResult steer(const SteeringProblem& problem) {
  problem.validate();
  const Grid& grid = problem.hum.sys.grid;
  const Field& chi = problem.hum.sys.chi;
  const double mu = problem.mu;
  const NlsOptions opts{.frame_mu = mu};

  SteeringResult result;
  result.interpolated = problem.hum.nt != problem.nt;
  result.control = zero_control(grid, problem.T, problem.nt);
  const std::vector<double> hum_times = uniform_times(problem.hum.T, problem.hum.nt);
  result.filter_modes = problem.filter_modes > 0 ? problem.filter_modes : resolved_modes(grid, mu, problem.hum.dt(), problem.T);
  HumProblem hum = problem.hum;
  hum.filter_modes = result.filter_modes;

  auto evaluate = [&](const ComplexTrajectory& c, ComplexTrajectory& state, double& error) {
    state = nls_solve(grid, chi, problem.u0, c, problem.T, problem.nt, opts);
    error = norm_h1(grid, ComplexField(state.states.back() - problem.u1));
  };
  auto shifted = [](const ComplexTrajectory& c, const ComplexTrajectory& dc, double s) {
    ComplexTrajectory out = c;
    for (std::size_t m = 0; m < out.states.size(); ++m) out.states[m] += s * dc.states[m];
    return out;
  };

  double error = 0.0;
  evaluate(result.control, result.state, error);
  int increases = 0;
  for (int k = 0;; ++k) {
    result.h1_error_history.push_back(error);
    if (error <= problem.newton_tol) break;
    if (k == problem.newton_max_iters)
      throw IterationError("steering did not reach tolerance within " + std::to_string(k) + " iterations", error,
                           result.h1_error_history);

    const ComplexField r = result.state.states.back() - problem.u1;
    ControlSolution lin;
    try {
      lin = solve_linear_control(hum, state_to_real(ComplexField(-r), problem.T, mu));
    } catch (const IterationError& e) {
      throw IterationError("linear control solve failed at Newton iteration " + std::to_string(k) + ": " + e.what(),
                           error, result.h1_error_history);
    }
    result.cg_iterations.push_back(lin.cg_iterations);
    ComplexTrajectory dc;
    dc.times = hum_times;
    for (std::size_t m = 0; m < hum_times.size(); ++m)
      dc.states.push_back(forcing_from_real(lin.control.states[m], hum_times[m], mu));
    if (result.interpolated) dc = resample(dc, result.control.times);

    ComplexTrajectory trial = shifted(result.control, dc, 1.0), trial_state;
    double trial_error = 0.0, step = 1.0;
    evaluate(trial, trial_state, trial_error);
    if (trial_error >= error) {
      // Halving line search, switched on by the first increase.
      result.line_search_used = true;
      for (int h = 0; h < 6 && trial_error >= error; ++h) {
        step *= 0.5;
        ComplexTrajectory t2 = shifted(result.control, dc, step), s2;
        double e2 = 0.0;
        evaluate(t2, s2, e2);
        if (e2 < trial_error || e2 < error) {
          trial = std::move(t2);
          trial_state = std::move(s2);
          trial_error = e2;
        }
      }
    }
    increases = trial_error >= error ? increases + 1 : 0;
    result.step_lengths.push_back(step);
    result.control = std::move(trial);
    result.state = std::move(trial_state);
    error = trial_error;
    result.iterations = k + 1;
    if (increases >= 2) {
      result.h1_error_history.push_back(error);
      throw IterationError("steering diverged: error grew on two consecutive iterations", error,
                           result.h1_error_history);
    }
  }
  result.final_state = result.state.states.back();
  return result;
}

BasinReport basin_probe(double mu, double T, int n_interior, int nt, const std::vector<double>& delta_grid,
                        const Interval& omega_prime, double cg_tol, std::uint64_t seed) {
  if (delta_grid.empty()) throw DomainError("delta grid is empty");
  if (!std::is_sorted(delta_grid.begin(), delta_grid.end()) || delta_grid.front() < 0.0)
    throw DomainError("delta grid must be nonnegative and increasing");
  BasinReport report;
  for (double delta : delta_grid) {
    SteeringProblem p = make_steering_problem(mu, T, n_interior, nt, delta, omega_prime, seed);
    p.hum.cg_tol = cg_tol;
    BasinRow row;
    row.delta = delta;
    try {
      const SteeringResult r = steer(p);
      row.converged = true;
      row.iterations = r.iterations;
      row.final_error = r.h1_error_history.back();
    } catch (const IterationError& e) {
      row.final_error = e.residual();
      row.iterations = static_cast<int>(e.history().size());
    }
    report.rows.push_back(row);
    if (!row.converged) break;
    report.delta_star = delta;
  }
  return report;
}

}  // namespace nlsctl
