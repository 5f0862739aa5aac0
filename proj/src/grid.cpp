#include "nlsctl/grid.hpp"

#include "nlsctl/errors.hpp"

#include <cmath>
#include <string>

namespace nlsctl {

Grid::Grid(int n_interior) : n_(n_interior), h_(0.0) {
  if (n_interior < 1) throw DomainError("grid needs at least one interior node");
  h_ = 1.0 / (n_interior + 1);
}

Field Grid::nodes() const {
  Field x(n_);
  for (int i = 0; i < n_; ++i) x[i] = node(i);
  return x;
}

void require_same_size(const Grid& grid, Eigen::Index size, const char* what) {
  if (size != grid.size())
    throw DimensionError(std::string(what) + ": field has " + std::to_string(size) +
                         " entries, grid has " + std::to_string(grid.size()));
}

double inner(const Grid& grid, const Field& u, const Field& v) {
  return grid.h() * u.dot(v);
}

std::complex<double> inner(const Grid& grid, const ComplexField& u, const ComplexField& v) {
  // Linear in u, antilinear in v.
  return grid.h() * v.dot(u);
}

double norm_l2(const Grid& grid, const Field& u) { return std::sqrt(grid.h()) * u.norm(); }
double norm_l2(const Grid& grid, const ComplexField& u) { return std::sqrt(grid.h()) * u.norm(); }

namespace {

template <typename Vec>
Vec forward_difference_impl(const Grid& grid, const Vec& u) {
  const Eigen::Index n = u.size();
  Vec d(n + 1);
  const double inv_h = 1.0 / grid.h();
  d[0] = u[0] * inv_h;
  for (Eigen::Index i = 1; i < n; ++i) d[i] = (u[i] - u[i - 1]) * inv_h;
  d[n] = -u[n - 1] * inv_h;
  return d;
}

}  // namespace

Field forward_difference(const Grid& grid, const Field& u) {
  return forward_difference_impl(grid, u);
}

ComplexField forward_difference(const Grid& grid, const ComplexField& u) {
  return forward_difference_impl(grid, u);
}

Field edge_average(const Field& u) {
  const Eigen::Index n = u.size();
  Field a(n + 1);
  a[0] = 0.5 * u[0];
  for (Eigen::Index i = 1; i < n; ++i) a[i] = 0.5 * (u[i] + u[i - 1]);
  a[n] = 0.5 * u[n - 1];
  return a;
}

double seminorm_h1(const Grid& grid, const Field& u) {
  return std::sqrt(grid.h()) * forward_difference(grid, u).norm();
}

double seminorm_h1(const Grid& grid, const ComplexField& u) {
  return std::sqrt(grid.h()) * forward_difference(grid, u).norm();
}

double norm_h1(const Grid& grid, const Field& u) {
  return std::hypot(norm_l2(grid, u), seminorm_h1(grid, u));
}

double norm_h1(const Grid& grid, const ComplexField& u) {
  return std::hypot(norm_l2(grid, u), seminorm_h1(grid, u));
}

int sign_changes(const Field& u, double relative_floor) {
  const double floor = relative_floor * u.cwiseAbs().maxCoeff();
  int changes = 0;
  int last_sign = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u[i]) <= floor) continue;
    const int s = u[i] > 0 ? 1 : -1;
    if (last_sign != 0 && s != last_sign) ++changes;
    last_sign = s;
  }
  return changes;
}

Field second_difference(const Grid& grid, const Field& u) {
  const Eigen::Index n = u.size();
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  Field d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double left = i > 0 ? u[i - 1] : 0.0;
    const double right = i + 1 < n ? u[i + 1] : 0.0;
    d[i] = (left - 2.0 * u[i] + right) * inv_h2;
  }
  return d;
}

}  // namespace nlsctl
