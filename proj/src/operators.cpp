#include "nlsctl/operators.hpp"

#include "nlsctl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nlsctl {

TwoComponentField& TwoComponentField::operator+=(const TwoComponentField& o) {
  first += o.first;
  second += o.second;
  return *this;
}

TwoComponentField& TwoComponentField::operator-=(const TwoComponentField& o) {
  first -= o.first;
  second -= o.second;
  return *this;
}

TwoComponentField& TwoComponentField::operator*=(double s) {
  first *= s;
  second *= s;
  return *this;
}

TwoComponentField TwoComponentField::scaled_by(const Field& profile) const {
  return {first.cwiseProduct(profile), second.cwiseProduct(profile)};
}

Field TwoComponentField::interleaved() const {
  const int n = size();
  Field v(2 * n);
  for (int i = 0; i < n; ++i) {
    v[2 * i] = first[i];
    v[2 * i + 1] = second[i];
  }
  return v;
}

TwoComponentField TwoComponentField::from_interleaved(const Field& v) {
  const int n = static_cast<int>(v.size() / 2);
  TwoComponentField z = zero(n);
  for (int i = 0; i < n; ++i) {
    z.first[i] = v[2 * i];
    z.second[i] = v[2 * i + 1];
  }
  return z;
}

TwoComponentField operator+(TwoComponentField a, const TwoComponentField& b) { return a += b; }
TwoComponentField operator-(TwoComponentField a, const TwoComponentField& b) { return a -= b; }
TwoComponentField operator*(double s, TwoComponentField a) { return a *= s; }

double inner(const Grid& grid, const TwoComponentField& u, const TwoComponentField& v) {
  return inner(grid, u.first, v.first) + inner(grid, u.second, v.second);
}

double norm_l2(const Grid& grid, const TwoComponentField& u) { return std::sqrt(inner(grid, u, u)); }

double seminorm_h1(const Grid& grid, const TwoComponentField& u) {
  return std::hypot(seminorm_h1(grid, u.first), seminorm_h1(grid, u.second));
}

double norm_h1(const Grid& grid, const TwoComponentField& u) {
  return std::hypot(norm_l2(grid, u), seminorm_h1(grid, u));
}

Field cutoff_profile(const Interval& omega_prime, const Grid& grid) {
  const double a = omega_prime.a, b = omega_prime.b;
  if (!(a > 0.0 && a < b && b < 1.0))
    throw DomainError("control interval must satisfy 0 < a < b < 1");
  const double shrink = 0.05 * (b - a);
  const double lo = a + shrink, hi = b - shrink;
  const double center = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  Field chi = Field::Zero(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const double s = (grid.node(i) - center) / half;
    if (std::abs(s) < 1.0) chi[i] = std::exp(1.0 - 1.0 / (1.0 - s * s));
  }
  return chi;
}

LinearizedSystem assemble(double mu, const Field& phi, const Grid& grid, const Interval& omega_prime) {
  require_same_size(grid, phi.size(), "assemble");
  LinearizedSystem sys;
  sys.grid = grid;
  sys.mu = mu;
  sys.phi = phi;
  const Field phi2 = phi.cwiseProduct(phi);
  sys.lminus = Tridiagonal::schrodinger(grid, (mu - phi2.array()).matrix(), OperatorRole::Lminus);
  sys.lplus = Tridiagonal::schrodinger(grid, (mu - 3.0 * phi2.array()).matrix(), OperatorRole::Lplus);
  sys.chi = cutoff_profile(omega_prime, grid);
  sys.omega_prime = omega_prime;
  return sys;
}

LinearizedSystem assemble(const BoundState& state, const Interval& omega_prime) {
  return assemble(state.mu, state.values, state.grid, omega_prime);
}

namespace {

void check(const LinearizedSystem& sys, const TwoComponentField& z, const char* what) {
  require_same_size(sys.grid, z.first.size(), what);
  require_same_size(sys.grid, z.second.size(), what);
}

}  // namespace

TwoComponentField apply_L(const LinearizedSystem& sys, const TwoComponentField& z) {
  check(sys, z, "apply_L");
  return {sys.lminus.apply(z.second), -sys.lplus.apply(z.first)};
}

TwoComponentField apply_Lstar(const LinearizedSystem& sys, const TwoComponentField& v) {
  check(sys, v, "apply_Lstar");
  return {-sys.lplus.apply(v.second), sys.lminus.apply(v.first)};
}

TwoComponentField apply_L1(const LinearizedSystem& sys, const TwoComponentField& z) {
  check(sys, z, "apply_L1");
  const Field phi2 = sys.phi.cwiseProduct(sys.phi);
  return {-phi2.cwiseProduct(z.second), 3.0 * phi2.cwiseProduct(z.first)};
}

TwoComponentField apply_L1_star(const LinearizedSystem& sys, const TwoComponentField& z) {
  check(sys, z, "apply_L1_star");
  const Field phi2 = sys.phi.cwiseProduct(sys.phi);
  return {3.0 * phi2.cwiseProduct(z.second), -phi2.cwiseProduct(z.first)};
}

RealBandedMatrix banded_system(const LinearizedSystem& sys, bool transpose, double alpha, double beta) {
  const int n = sys.grid.size();
  RealBandedMatrix m(2 * n, 3, 3);
  // Row block of component 1 acts on component 2 and vice versa.
  const Tridiagonal& top = transpose ? sys.lplus : sys.lminus;
  const Tridiagonal& bottom = transpose ? sys.lminus : sys.lplus;
  const double top_sign = transpose ? -1.0 : 1.0;
  const double bottom_sign = -top_sign;
  for (int i = 0; i < n; ++i) {
    const int r1 = 2 * i, r2 = 2 * i + 1;
    m.at(r1, r1) = alpha;
    m.at(r2, r2) = alpha;
    m.at(r1, 2 * i + 1) = beta * top_sign * top.diag[i];
    m.at(r2, 2 * i) = beta * bottom_sign * bottom.diag[i];
    if (i > 0) {
      m.at(r1, 2 * (i - 1) + 1) = beta * top_sign * top.off[i - 1];
      m.at(r2, 2 * (i - 1)) = beta * bottom_sign * bottom.off[i - 1];
    }
    if (i + 1 < n) {
      m.at(r1, 2 * (i + 1) + 1) = beta * top_sign * top.off[i];
      m.at(r2, 2 * (i + 1)) = beta * bottom_sign * bottom.off[i];
    }
  }
  return m;
}

CayleyMap::CayleyMap(const LinearizedSystem& sys, Generator g, double dt)
    : plus_(banded_system(sys, g == Generator::MinusLstar, 1.0, (g == Generator::MinusLstar ? -0.5 : 0.5) * dt)),
      minus_(banded_system(sys, g == Generator::MinusLstar, 1.0, (g == Generator::MinusLstar ? 0.5 : -0.5) * dt)),
      implicit_(minus_) {}

Field CayleyMap::explicit_part(const Field& y) const {
  Field out(y.size());
  plus_.multiply(std::span<const double>(y.data(), y.size()), std::span<double>(out.data(), out.size()));
  return out;
}

void CayleyMap::solve_implicit(Field& rhs) const {
  implicit_.solve_in_place(std::span<double>(rhs.data(), rhs.size()));
}

Field CayleyMap::step(const Field& y) const {
  Field rhs = explicit_part(y);
  solve_implicit(rhs);
  return rhs;
}

Field CayleyMap::unstep(const Field& y) const {
  if (!explicit_) explicit_ = std::make_unique<BandedLU<double>>(plus_);
  Field rhs(y.size());
  minus_.multiply(std::span<const double>(y.data(), y.size()), std::span<double>(rhs.data(), rhs.size()));
  explicit_->solve_in_place(std::span<double>(rhs.data(), rhs.size()));
  return rhs;
}

double Trajectory::max_l2_ratio() const {
  if (l2_norms.empty() || l2_norms.front() == 0.0) return 0.0;
  return *std::max_element(l2_norms.begin(), l2_norms.end()) / l2_norms.front();
}

std::vector<double> uniform_times(double T, int nt) {
  std::vector<double> t(nt + 1);
  for (int n = 0; n <= nt; ++n) t[n] = T * n / nt;
  t[nt] = T;
  return t;
}

Trajectory make_trajectory(const Grid& grid, std::vector<double> times, std::vector<TwoComponentField> states) {
  Trajectory tr;
  tr.times = std::move(times);
  tr.states = std::move(states);
  tr.l2_norms.reserve(tr.states.size());
  tr.h1_seminorms.reserve(tr.states.size());
  for (const auto& s : tr.states) {
    tr.l2_norms.push_back(norm_l2(grid, s));
    tr.h1_seminorms.push_back(seminorm_h1(grid, s));
  }
  return tr;
}

Trajectory zero_trajectory(const Grid& grid, double T, int nt) {
  return make_trajectory(grid, uniform_times(T, nt),
                         std::vector<TwoComponentField>(nt + 1, TwoComponentField::zero(grid.size())));
}

namespace {

void check_time_grid(double T, int nt) {
  if (!(T > 0.0)) throw DomainError("time horizon must be positive");
  if (nt < 2) throw DomainError("need at least two time steps");
}

const TwoComponentField* forcing_at(const Trajectory& forcing, int n) {
  return forcing.states.empty() ? nullptr : &forcing.states[n];
}

void check_forcing(const LinearizedSystem& sys, const Trajectory& forcing, int nt) {
  if (forcing.states.empty()) return;
  if (static_cast<int>(forcing.states.size()) != nt + 1)
    throw DimensionError("forcing has " + std::to_string(forcing.states.size()) + " samples, expected " +
                         std::to_string(nt + 1));
  check(sys, forcing.states.front(), "forcing");
}

}  // namespace

Trajectory propagate_adjoint(const LinearizedSystem& sys, const TwoComponentField& v0, double T, int nt) {
  check_time_grid(T, nt);
  check(sys, v0, "propagate_adjoint");
  const CayleyMap map(sys, CayleyMap::Generator::MinusLstar, T / nt);
  std::vector<TwoComponentField> states;
  states.reserve(nt + 1);
  states.push_back(v0);
  Field y = v0.interleaved();
  for (int n = 0; n < nt; ++n) {
    y = map.step(y);
    states.push_back(TwoComponentField::from_interleaved(y));
  }
  return make_trajectory(sys.grid, uniform_times(T, nt), std::move(states));
}

Trajectory propagate_forward_forced(const LinearizedSystem& sys, const TwoComponentField& initial,
                                    const Trajectory& forcing, double T, int nt) {
  check_time_grid(T, nt);
  check(sys, initial, "propagate_forward_forced");
  check_forcing(sys, forcing, nt);
  const double dt = T / nt;
  const CayleyMap map(sys, CayleyMap::Generator::L, dt);
  std::vector<TwoComponentField> states;
  states.reserve(nt + 1);
  states.push_back(initial);
  Field y = initial.interleaved();
  for (int n = 0; n < nt; ++n) {
    if (const auto* f = forcing_at(forcing, n)) y += 0.5 * dt * f->scaled_by(sys.chi).interleaved();
    y = map.step(y);
    if (const auto* f = forcing_at(forcing, n + 1)) y += 0.5 * dt * f->scaled_by(sys.chi).interleaved();
    states.push_back(TwoComponentField::from_interleaved(y));
  }
  return make_trajectory(sys.grid, uniform_times(T, nt), std::move(states));
}

Trajectory propagate_backward_forced(const LinearizedSystem& sys, const TwoComponentField& final_state,
                                     const Trajectory& forcing, double T, int nt) {
  check_time_grid(T, nt);
  check(sys, final_state, "propagate_backward_forced");
  check_forcing(sys, forcing, nt);
  const double dt = T / nt;
  const CayleyMap map(sys, CayleyMap::Generator::L, dt);
  std::vector<TwoComponentField> states(nt + 1);
  states[nt] = final_state;
  Field y = final_state.interleaved();
  for (int n = nt; n > 0; --n) {
    if (const auto* f = forcing_at(forcing, n)) y -= 0.5 * dt * f->scaled_by(sys.chi).interleaved();
    y = map.unstep(y);
    if (const auto* f = forcing_at(forcing, n - 1)) y -= 0.5 * dt * f->scaled_by(sys.chi).interleaved();
    states[n - 1] = TwoComponentField::from_interleaved(y);
  }
  return make_trajectory(sys.grid, uniform_times(T, nt), std::move(states));
}

double greens_function_direct(double omega, double x, double xi) {
  const double w = omega;
  const double pre = 1.0 / (4.0 * w * std::sinh(w));
  const double s_xi = std::sinh(w * xi), s_rest = std::sinh(w * (1.0 - xi));
  return pre * ((s_xi * std::exp(-w) - s_rest) * std::exp(w * x) - (s_xi * std::exp(w) - s_rest) * std::exp(-w * x)) +
         std::sinh(w * std::abs(x - xi)) / (2.0 * w);
}

double greens_function(double omega, double x, double xi) {
  if (!(omega > 0.0)) throw DomainError("Green's function needs omega > 0");
  if (x < 0.0 || x > 1.0 || xi < 0.0 || xi > 1.0) throw DomainError("Green's function arguments must lie in [0,1]");
  // -sinh(w a) sinh(w b) / (w sinh w) with a = min(x,xi), b = 1 - max(x,xi), scaled by e^{-w}.
  const double a = std::min(x, xi), b = 1.0 - std::max(x, xi);
  const double num = std::expm1(-2.0 * omega * a) * std::expm1(-2.0 * omega * b);
  const double den = -2.0 * std::expm1(-2.0 * omega);
  return -std::exp(omega * (a + b - 1.0)) * num / (den * omega);
}

}  // namespace nlsctl
