#include "nlsctl/elliptic.hpp"

#include "nlsctl/banded.hpp"
#include "nlsctl/errors.hpp"
#include "nlsctl/tridiagonal.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace nlsctl {

namespace {

constexpr int kMaxAgmSteps = 40;

void check_modulus(double k) {
  if (!(k >= 0.0 && k < 1.0)) throw DomainError("elliptic modulus must lie in [0,1), got " + std::to_string(k));
}

double complementary(double k) { return std::sqrt((1.0 - k) * (1.0 + k)); }

struct Agm {
  double a;
  double sum;  // sum of 2^{n-1} c_n^2, n >= 0
};

Agm agm(double k) {
  double a = 1.0, b = complementary(k), c = k;
  double sum = 0.5 * c * c;
  double weight = 0.5;
  for (int n = 0; n < kMaxAgmSteps; ++n) {
    if (std::abs(c) <= 1e-17 * a) break;
    const double an = 0.5 * (a + b);
    c = 0.5 * (a - b);
    b = std::sqrt(a * b);
    a = an;
    weight *= 2.0;
    sum += weight * c * c;
  }
  return {a, sum};
}

double dk_dmodulus(double k, double kk, double ek) {
  const double kp2 = (1.0 - k) * (1.0 + k);
  return ek / (k * kp2) - kk / k;
}

}  // namespace

double complete_elliptic_k(double k) {
  check_modulus(k);
  return std::numbers::pi / (2.0 * agm(k).a);
}

double complete_elliptic_e(double k) {
  check_modulus(k);
  const Agm r = agm(k);
  return std::numbers::pi / (2.0 * r.a) * (1.0 - r.sum);
}

double jacobi_cn(double u, double k) {
  check_modulus(k);
  if (!std::isfinite(u)) throw DomainError("jacobi_cn needs a finite argument");
  if (k == 0.0) return std::cos(u);
  const double period = 4.0 * complete_elliptic_k(k);
  u = std::fmod(u, period);
  if (u < 0.0) u += period;

  std::array<double, kMaxAgmSteps + 1> a{}, c{};
  a[0] = 1.0;
  double b = complementary(k);
  c[0] = k;
  int n = 0;
  while (std::abs(c[n]) > 1e-17 * a[n] && n < kMaxAgmSteps) {
    a[n + 1] = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
  }
  double phi = std::ldexp(a[n] * u, n);
  for (int m = n; m > 0; --m) phi = 0.5 * (phi + std::asin(c[m] / a[m] * std::sin(phi)));
  return std::cos(phi);
}

double modulus_equation(double k, int j) {
  const double kk = complete_elliptic_k(k);
  const double p = 2.0 * (j + 1);
  return p * p * (2.0 * k * k - 1.0) * kk * kk;
}

double solve_modulus(double mu, int j) {
  if (j < 0) throw DomainError("node count must be non-negative");
  if (!(mu >= 0.0)) throw DomainError("modulus equation needs mu >= 0, got " + std::to_string(mu));
  const double k_min = 1.0 / std::numbers::sqrt2;
  if (mu == 0.0) return k_min;

  double lo = k_min, hi = 1.0 - 1e-12;
  if (modulus_equation(hi, j) < mu)
    throw IterationError("modulus root is not bracketed by [1/sqrt2, 1-1e-12]", modulus_equation(hi, j) - mu);
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (modulus_equation(mid, j) < mu) lo = mid;
    else hi = mid;
  }
  double k = 0.5 * (lo + hi);
  const double p2 = 4.0 * (j + 1) * (j + 1);
  for (int it = 0; it < 4; ++it) {
    const double kk = complete_elliptic_k(k);
    const double f = p2 * (2.0 * k * k - 1.0) * kk * kk - mu;
    const double dkk = dk_dmodulus(k, kk, complete_elliptic_e(k));
    const double df = p2 * (4.0 * k * kk * kk + 2.0 * (2.0 * k * k - 1.0) * kk * dkk);
    const double next = k - f / df;
    if (!(next > lo - 1e-12 && next < hi + 1e-12)) break;
    k = next;
  }
  const double residual = modulus_equation(k, j) - mu;
  if (std::abs(residual) > 1e-12 * std::max(1.0, mu))
    throw IterationError("modulus equation did not converge", residual);
  return k;
}

Field bound_state_values(double mu, int j, const Grid& grid) {
  const double k = solve_modulus(mu, j);
  const double kk = complete_elliptic_k(k);
  const double amp = 2.0 * std::numbers::sqrt2 * (j + 1) * k * kk;
  const double shift = (j % 2) * kk;
  Field v(grid.size());
  for (int i = 0; i < grid.size(); ++i)
    v[i] = amp * jacobi_cn(2.0 * (j + 1) * kk * (grid.node(i) - 0.5) + shift, k);
  return v;
}

Field dmu_bound_state(double mu, int j, const Grid& grid) {
  const double d = 1e-5 * std::max(1.0, mu);
  if (mu - d < 0.0) {
    const Field f0 = bound_state_values(mu, j, grid);
    const Field f1 = bound_state_values(mu + d, j, grid);
    const Field f2 = bound_state_values(mu + 2.0 * d, j, grid);
    return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * d);
  }
  return (bound_state_values(mu + d, j, grid) - bound_state_values(mu - d, j, grid)) / (2.0 * d);
}

BoundState bound_state(double mu, int j, const Grid& grid) {
  BoundState s;
  s.mu = mu;
  s.j = j;
  s.k = solve_modulus(mu, j);
  s.grid = grid;
  s.values = bound_state_values(mu, j, grid);
  s.dmu_values = dmu_bound_state(mu, j, grid);
  return s;
}

Field bvp_residual(const BoundState& state) {
  const Field& p = state.values;
  return -second_difference(state.grid, p) + state.mu * p - p.array().cube().matrix();
}

NormIdentity norm_sq_identity(double mu, int j, const Grid& grid) {
  const Field phi = bound_state_values(mu, j, grid);
  const double k = solve_modulus(mu, j);
  const double kk = complete_elliptic_k(k);
  using boost::math::quadrature::gauss_kronrod;
  auto cn2 = [k](double y) {
    const double c = jacobi_cn(y, k);
    return c * c;
  };
  const double integral = gauss_kronrod<double, 31>::integrate(cn2, -kk, kk, 15, 1e-14);
  NormIdentity r;
  r.lhs = inner(grid, phi, phi);
  r.rhs = 4.0 * (j + 1) * (j + 1) * k * k * kk * integral;
  return r;
}

VariationalGroundState ground_state_variational(double mu, const Grid& grid, int max_iters, double tol,
                                                double tau) {
  const double pi = std::numbers::pi;
  if (!(mu > -pi * pi)) throw DomainError("variational ground state needs mu > -pi^2");
  const int n = grid.size();
  const Tridiagonal a = Tridiagonal::schrodinger(grid, Field::Constant(n, mu));
  const BandedLU<double> step(a.banded(1.0, tau));

  auto normalize = [&](Field& u) { u /= std::pow(grid.h() * u.array().pow(4).sum(), 0.25); };
  Field u(n);
  for (int i = 0; i < n; ++i) u[i] = std::sin(pi * grid.node(i));
  normalize(u);

  VariationalGroundState r;
  for (int it = 1; it <= max_iters; ++it) {
    const Field au = a.apply(u);
    const double lambda = inner(grid, au, u);
    const Field cubic = u.array().cube().matrix();
    const double residual = norm_l2(grid, Field(au - lambda * cubic)) / norm_l2(grid, au);
    r.lambda = lambda;
    r.residual = residual;
    r.iterations = it;
    if (residual <= tol) break;
    Field next = u + tau * lambda * cubic;
    step.solve_in_place(std::span<double>(next.data(), n));
    normalize(next);
    u = std::move(next);
  }
  if (r.residual > tol) throw IterationError("variational gradient flow did not converge", r.residual);
  r.lambda = inner(grid, Field(a.apply(u)), u);
  r.minimizer = u;
  r.values = std::sqrt(r.lambda) * u;
  if (r.values.minCoeff() < 0.0) {
    r.values = -r.values;
    r.minimizer = -r.minimizer;
  }
  return r;
}

}  // namespace nlsctl
