#include "nlsctl/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nlsctl {

namespace {

template <typename Vec>
Vec apply_impl(const Tridiagonal& t, const Vec& u) {
  const int n = t.size();
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    auto s = t.diag[i] * u[i];
    if (i > 0) s += t.off[i - 1] * u[i - 1];
    if (i + 1 < n) s += t.off[i] * u[i + 1];
    y[i] = s;
  }
  return y;
}

template <typename T>
BandedMatrix<T> banded_impl(const Tridiagonal& t, T alpha, T beta) {
  const int n = t.size();
  BandedMatrix<T> m(n, 1, 1);
  for (int i = 0; i < n; ++i) {
    m.at(i, i) = alpha + beta * t.diag[i];
    if (i + 1 < n) {
      m.at(i, i + 1) = beta * t.off[i];
      m.at(i + 1, i) = beta * t.off[i];
    }
  }
  return m;
}

}  // namespace

Field Tridiagonal::apply(const Field& u) const { return apply_impl(*this, u); }
Eigen::VectorXcd Tridiagonal::apply(const Eigen::VectorXcd& u) const { return apply_impl(*this, u); }

int Tridiagonal::count_below(double sigma) const {
  const int n = size();
  int count = 0;
  double q = 1.0;
  const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  for (int i = 0; i < n; ++i) {
    const double b2 = i > 0 ? off[i - 1] * off[i - 1] : 0.0;
    q = diag[i] - sigma - (i > 0 ? b2 / q : 0.0);
    if (q == 0.0) q = -tiny;
    if (q < 0.0) ++count;
  }
  return count;
}

std::pair<double, double> Tridiagonal::spectral_bounds() const {
  const int n = size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < n) r += std::abs(off[i]);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  return {lo, hi};
}

double Tridiagonal::eigenvalue(int k, double tol) const {
  auto [lo, hi] = spectral_bounds();
  const double scale = std::max(std::abs(lo), std::abs(hi));
  while (hi - lo > tol * std::max(1.0, scale) ) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (count_below(mid) > k) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

RealBandedMatrix Tridiagonal::banded(double alpha, double beta) const {
  return banded_impl<double>(*this, alpha, beta);
}

ComplexBandedMatrix Tridiagonal::banded(std::complex<double> alpha, std::complex<double> beta) const {
  return banded_impl<std::complex<double>>(*this, alpha, beta);
}

Tridiagonal Tridiagonal::schrodinger(const Grid& grid, const Field& potential, OperatorRole role) {
  require_same_size(grid, potential.size(), "schrodinger operator");
  const int n = grid.size();
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  Tridiagonal t;
  t.diag = potential.array() + 2.0 * inv_h2;
  t.off = Field::Constant(std::max(0, n - 1), -inv_h2);
  t.role = role;
  return t;
}

}  // namespace nlsctl
