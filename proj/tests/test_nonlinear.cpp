#include "doctest.h"

#include "nlsctl/errors.hpp"
#include "nlsctl/nonlinear.hpp"
#include "support.hpp"

#include <cmath>
#include <complex>

using namespace nlsctl;
using nlsctl::testing::sine;
using nlsctl::testing::smooth_pair;

namespace {

const std::complex<double> I(0.0, 1.0);

double sup_abs(const ComplexField& u) { return u.size() ? u.cwiseAbs().maxCoeff() : 0.0; }

ComplexField smooth_complex(const Grid& grid, int modes, std::uint64_t seed) {
  const TwoComponentField z = smooth_pair(grid, modes, seed);
  return z.first.cast<std::complex<double>>() + I * z.second.cast<std::complex<double>>();
}

// One implicit-midpoint step of i v_t = A v - |v|^2 v, A = -D2 + mu, solved by plain
// fixed-point iteration on dense complex vectors; an independent reference scheme.
ComplexField midpoint_step(const Grid& grid, double mu, const ComplexField& v, double dt) {
  const int n = grid.size();
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  auto apply_a = [&](const ComplexField& u) {
    ComplexField out(n);
    for (int i = 0; i < n; ++i) {
      const std::complex<double> left = i > 0 ? u[i - 1] : 0.0, right = i + 1 < n ? u[i + 1] : 0.0;
      out[i] = (2.0 * u[i] - left - right) * inv_h2 + mu * u[i];
    }
    return out;
  };
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0 * inv_h2 + mu;
    if (i > 0) a(i, i - 1) = -inv_h2;
    if (i + 1 < n) a(i, i + 1) = -inv_h2;
  }
  const Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(n, n) + 0.5 * I * dt * a;
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(lhs);
  const ComplexField explicit_part = v - 0.5 * I * dt * apply_a(v);
  ComplexField next = v;
  for (int sweep = 0; sweep < 100; ++sweep) {
    const ComplexField mid = 0.5 * (v + next);
    const ComplexField cubic = mid.cwiseAbs2().cast<std::complex<double>>().cwiseProduct(mid);
    const ComplexField updated = lu.solve(ComplexField(explicit_part + I * dt * cubic));
    const double change = (updated - next).cwiseAbs().maxCoeff();
    next = updated;
    if (change < 1e-15) break;
  }
  return next;
}

}  // namespace

TEST_CASE("zero data stays zero") {
  const Grid grid(64);
  const Field chi = cutoff_profile({}, grid);
  const ComplexTrajectory u = nls_solve(grid, chi, ComplexField::Zero(64), {}, 1.0, 64);
  CHECK(u.steps() == 64);
  for (const auto& s : u.states) CHECK(sup_abs(s) == 0.0);
}

TEST_CASE("independent midpoint reference") {
  const Grid grid(48);
  const Field chi = cutoff_profile({}, grid);
  const ComplexField u0 = 3.0 * smooth_complex(grid, 4, 3);
  NlsOptions options;
  options.frame_mu = 5.0;
  options.sweep_tol = 1e-14;
  options.max_sweeps = 60;
  const int nt = 40;
  const double T = 0.2, dt = T / nt;
  const ComplexTrajectory u = nls_solve(grid, chi, u0, {}, T, nt, options);
  // Reference in the rotating frame, mapped back to the lab frame.
  ComplexField v = u0;
  for (int m = 0; m < nt; ++m) v = midpoint_step(grid, 5.0, v, dt);
  const ComplexField reference = std::polar(1.0, 5.0 * T) * v;
  CHECK(sup_abs(ComplexField(u.states.back() - reference)) <= 1e-11 * sup_abs(reference));
}

TEST_CASE("discrete soliton") {
  const Grid grid(256);
  const Field phi = discrete_bound_state(10.0, 0, grid);
  const Field residual = -second_difference(grid, phi) + 10.0 * phi - phi.cwiseProduct(phi).cwiseProduct(phi);
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-9 * phi.maxCoeff());
  const Field elliptic = bound_state_values(10.0, 0, grid);
  CHECK((phi - elliptic).cwiseAbs().maxCoeff() <= 1e-3 * elliptic.maxCoeff());
  CHECK(phi.minCoeff() > 0.0);

  // Stationary in the rotating frame: u(t) = e^{i mu t} phi.
  NlsOptions options;
  options.frame_mu = 10.0;
  const ComplexField u0 = phi.cast<std::complex<double>>();
  const ComplexTrajectory u = nls_solve(grid, cutoff_profile({}, grid), u0, {}, 2.0, 512, options);
  for (int m = 0; m <= 512; m += 64) {
    const ComplexField expected = std::polar(1.0, 10.0 * u.times[m]) * u0;
    CHECK(norm_h1(grid, ComplexField(u.states[m] - expected)) <= 1e-9 * norm_h1(grid, u0));
  }
}

TEST_CASE("conservation") {
  const Grid grid(128);
  const Field chi = cutoff_profile({}, grid);
  const Field phi = discrete_bound_state(10.0, 0, grid);
  const ComplexField u0 = phi.cast<std::complex<double>>() + 0.5 * smooth_complex(grid, 6, 4);
  NlsOptions options;
  options.frame_mu = 10.0;

  const ComplexTrajectory u = nls_solve(grid, chi, u0, {}, 2.0, 4096, options);
  const double m0 = mass(grid, u0);
  double mass_drift = 0.0;
  for (const auto& s : u.states) mass_drift = std::max(mass_drift, std::abs(mass(grid, s) - m0) / m0);
  CHECK(mass_drift <= 1e-8);

  // Energy is conserved only up to O(dt^2): the largest drift along the run shrinks by about 4.
  NlsOptions tight = options;
  tight.sweep_tol = 1e-14;
  tight.max_sweeps = 40;
  auto energy_drift = [&](int nt) {
    const ComplexTrajectory v = nls_solve(grid, chi, u0, {}, 1.0, nt, tight);
    double worst = 0.0;
    for (const auto& state : v.states) worst = std::max(worst, std::abs(energy(grid, state) - energy(grid, u0)));
    return worst;
  };
  const double coarse = energy_drift(512), fine = energy_drift(1024);
  CHECK(coarse / fine >= 3.5);
  CHECK(coarse / fine <= 5.0);

  CHECK(mass(grid, phi.cast<std::complex<double>>()) == doctest::Approx(grid.h() * phi.squaredNorm()));
  // Energy of a single sine: |u_x|^2 integral minus half the quartic integral.
  const Grid fine_grid(4000);
  const ComplexField s = sine(fine_grid, 1).cast<std::complex<double>>();
  CHECK(energy(fine_grid, s) == doctest::Approx(M_PI * M_PI / 2.0 - 0.5 * 3.0 / 8.0).epsilon(1e-5));
}

TEST_CASE("controlled flow") {
  const Grid grid(64);
  const Field chi = cutoff_profile({}, grid);
  const double T = 1.0;
  const int nt = 128;
  // A control of e^{i t} * sine pushes mass only through chi and agrees with the linear
  // trapezoid forcing when the state stays small.
  ComplexTrajectory c;
  c.times = uniform_times(T, nt);
  for (double t : c.times) c.states.push_back(1e-6 * std::polar(1.0, t) * sine(grid, 2).cast<std::complex<double>>());
  const ComplexTrajectory u = nls_solve(grid, chi, ComplexField::Zero(64), c, T, nt);
  CHECK(sup_abs(u.states.back()) > 0.0);
  CHECK(sup_abs(u.states.back()) <= 1e-5);

  const ComplexTrajectory doubled = [&] {
    ComplexTrajectory d = c;
    for (auto& s : d.states) s *= 2.0;
    return nls_solve(grid, chi, ComplexField::Zero(64), d, T, nt);
  }();
  CHECK(sup_abs(ComplexField(doubled.states.back() - 2.0 * u.states.back())) <= 1e-9 * sup_abs(u.states.back()));

  // A control on another time grid is resampled linearly.
  const ComplexTrajectory coarse = resample(c, uniform_times(T, nt / 2));
  const ComplexTrajectory from_coarse = nls_solve(grid, chi, ComplexField::Zero(64), coarse, T, nt);
  const ComplexTrajectory from_resampled = nls_solve(grid, chi, ComplexField::Zero(64), resample(coarse, c.times), T, nt);
  CHECK(sup_abs(ComplexField(from_coarse.states.back() - from_resampled.states.back())) == 0.0);
  CHECK_THROWS_AS(nls_solve(grid, chi, ComplexField::Zero(32), {}, T, nt), DimensionError);
  CHECK_THROWS_AS(nls_solve(grid, chi, ComplexField::Zero(64), {}, -1.0, nt), DomainError);
}

TEST_CASE("fixed point failure reports the step") {
  const Grid grid(64);
  const ComplexField u0 = 40.0 * sine(grid, 1).cast<std::complex<double>>();
  NlsOptions options;
  options.max_sweeps = 2;
  CHECK_THROWS_AS(nls_solve(grid, cutoff_profile({}, grid), u0, {}, 1.0, 4, options), IterationError);
}

TEST_CASE("resampling") {
  ComplexTrajectory t;
  t.times = {0.0, 1.0, 2.0};
  for (double v : {0.0, 2.0, 6.0}) t.states.push_back(ComplexField::Constant(3, v));
  const ComplexTrajectory r = resample(t, {0.0, 0.5, 1.5, 2.0});
  CHECK(r.states[1][0].real() == doctest::Approx(1.0));
  CHECK(r.states[2][2].real() == doctest::Approx(4.0));
  CHECK(r.states[3][1].real() == doctest::Approx(6.0));
  CHECK_THROWS_AS(resample(ComplexTrajectory{}, {0.0}), DimensionError);
}

TEST_CASE("real dictionaries") {
  const Grid grid(32);
  const ComplexField h = smooth_complex(grid, 5, 2);
  const Field real_h = h.real();

  const TwoComponentField at_zero = forcing_to_real(real_h.cast<std::complex<double>>(), 0.0, 10.0);
  CHECK(at_zero.first.cwiseAbs().maxCoeff() == 0.0);
  CHECK((at_zero.second + real_h).cwiseAbs().maxCoeff() == 0.0);

  const TwoComponentField ih = forcing_to_real(I * real_h.cast<std::complex<double>>(), 0.0, 10.0);
  CHECK((ih.first - real_h).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ih.second.cwiseAbs().maxCoeff() == 0.0);

  for (double t : {0.0, 0.37, 1.9}) {
    CHECK(sup_abs(ComplexField(forcing_from_real(forcing_to_real(h, t, 10.0), t, 10.0) - h)) <= 1e-15 * 4 * sup_abs(h));
    CHECK(sup_abs(ComplexField(state_from_real(state_to_real(h, t, 10.0), t, 10.0) - h)) <= 1e-15 * 4 * sup_abs(h));
  }
  // The state dictionary removes the rotation e^{i mu t}.
  const TwoComponentField z = state_to_real(std::polar(1.0, 10.0 * 0.7) * h, 0.7, 10.0);
  CHECK((z.first - h.real()).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((z.second - h.imag()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("linearization consistency") {
  const Grid grid(128);
  const ComplexField z0 = smooth_complex(grid, 6, 5);
  const LinearizationDefect d1 = linearization_consistency(10.0, 1e-2, z0, 1.0, 512);
  const LinearizationDefect d2 = linearization_consistency(10.0, 5e-3, z0, 1.0, 512);
  const LinearizationDefect d3 = linearization_consistency(10.0, 2.5e-3, z0, 1.0, 512);
  CHECK(d1.defect / d2.defect == doctest::Approx(2.0).epsilon(0.1));
  CHECK(d2.defect / d3.defect == doctest::Approx(2.0).epsilon(0.1));
  CHECK(d1.defect < d1.linear_change);
  CHECK(d1.nonlinear_change == doctest::Approx(d1.linear_change).epsilon(0.05));

  const LinearizationDefect zero = linearization_consistency(10.0, 1e-2, ComplexField::Zero(128), 1.0, 64);
  CHECK(zero.defect <= 1e-12);
  CHECK_THROWS_AS(linearization_consistency(10.0, 0.0, z0, 1.0, 64), DomainError);
}

TEST_CASE("steering") {
  SUBCASE("soliton endpoints need no iterations") {
    const SteeringProblem p = make_steering_problem(10.0, 2.0, 128, 1024, 0.0);
    CHECK(norm_h1(p.hum.sys.grid, ComplexField(p.u0 - p.phi.cast<std::complex<double>>())) == 0.0);
    const SteeringResult r = steer(p);
    CHECK(r.iterations == 0);
    CHECK(r.h1_error_history.size() == 1);
    CHECK(r.h1_error_history.front() <= 1e-9);
  }
  SUBCASE("small perturbations converge geometrically") {
    const Grid grid(256);
    const double delta = 1e-2 * norm_h1(grid, discrete_bound_state(10.0, 0, grid));
    const SteeringProblem p = make_steering_problem(10.0, 2.0, 256, 2048, delta);
    const SteeringResult r = steer(p);
    CHECK(r.iterations <= 8);
    CHECK(r.h1_error_history.back() <= 1e-6);
    for (std::size_t k = 1; k < r.h1_error_history.size(); ++k)
      CHECK(r.h1_error_history[k] < 0.5 * r.h1_error_history[k - 1]);
    CHECK(r.filter_modes == 81);
    CHECK(norm_h1(grid, ComplexField(r.final_state - p.u1)) == doctest::Approx(r.h1_error_history.back()));
    CHECK(r.control.steps() == 2048);
  }
  SUBCASE("problem validation") {
    SteeringProblem p = make_steering_problem(10.0, 2.0, 64, 256, 0.05);
    p.u0 = p.u0 * 3.0;
    CHECK_THROWS_AS(steer(p), DomainError);
    SteeringProblem q = make_steering_problem(10.0, 2.0, 64, 256, 0.05);
    q.hum.T = 1.0;
    CHECK_THROWS_AS(steer(q), DomainError);
    CHECK_THROWS_AS(make_steering_problem(10.0, 2.0, 64, 256, 0.05, {}, 7, 1.5), DomainError);
  }
  SUBCASE("iteration budget") {
    const Grid grid(128);
    SteeringProblem p = make_steering_problem(10.0, 2.0, 128, 1024, 0.1);
    p.newton_max_iters = 1;
    try {
      steer(p);
      FAIL("expected the iteration budget to run out");
    } catch (const IterationError& e) {
      CHECK(e.history().size() >= 2);
      CHECK(e.history()[1] < e.history()[0]);
    }
  }
}

TEST_CASE("basin probe input") {
  CHECK_THROWS_AS(basin_probe(10.0, 2.0, 64, 256, {}), DomainError);
  CHECK_THROWS_AS(basin_probe(10.0, 2.0, 64, 256, {0.2, 0.1}), DomainError);
  const BasinReport r = basin_probe(10.0, 2.0, 64, 256, {0.0});
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows.front().converged);
  CHECK(r.rows.front().iterations == 0);
}
