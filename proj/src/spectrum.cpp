#include "nlsctl/spectrum.hpp"

#include "nlsctl/errors.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace nlsctl {

using cd = std::complex<double>;

ComplexTwoComponentField ComplexTwoComponentField::from_real(const TwoComponentField& z) {
  return {z.first.cast<cd>(), z.second.cast<cd>()};
}

ComplexTwoComponentField ComplexTwoComponentField::conjugate() const {
  return {first.conjugate(), second.conjugate()};
}

TwoComponentField ComplexTwoComponentField::real() const { return {first.real(), second.real()}; }
TwoComponentField ComplexTwoComponentField::imag() const { return {first.imag(), second.imag()}; }

cd inner(const Grid& grid, const ComplexTwoComponentField& u, const ComplexTwoComponentField& v) {
  return inner(grid, u.first, v.first) + inner(grid, u.second, v.second);
}

double norm_l2(const Grid& grid, const ComplexTwoComponentField& u) {
  return std::hypot(norm_l2(grid, u.first), norm_l2(grid, u.second));
}

ComplexTwoComponentField apply_minus_Lstar(const LinearizedSystem& sys, const ComplexTwoComponentField& v) {
  return {sys.lplus.apply(v.second), -sys.lminus.apply(v.first)};
}

NullPair nullspace_pair(const LinearizedSystem& sys, const Field& phi, const Field& dmu_phi) {
  require_same_size(sys.grid, phi.size(), "nullspace_pair");
  require_same_size(sys.grid, dmu_phi.size(), "nullspace_pair");
  const int n = sys.grid.size();
  NullPair p;
  p.v1 = {phi, Field::Zero(n)};
  p.w1 = {Field::Zero(n), -dmu_phi};
  const double scale = norm_l2(sys.grid, p.v1);
  p.jordan_residual = norm_l2(sys.grid, apply_Lstar(sys, p.w1) + p.v1) / scale;
  p.kernel_residual = norm_l2(sys.grid, apply_Lstar(sys, p.v1)) / scale;
  return p;
}

std::vector<cd> reduced_eigenvalues(const LinearizedSystem& sys) {
  const int n = sys.grid.size();
  Eigen::MatrixXd lm = Eigen::MatrixXd::Zero(n, n), lp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    lm(i, i) = sys.lminus.diag[i];
    lp(i, i) = sys.lplus.diag[i];
    if (i + 1 < n) {
      lm(i, i + 1) = lm(i + 1, i) = sys.lminus.off[i];
      lp(i, i + 1) = lp(i + 1, i) = sys.lplus.off[i];
    }
  }
  Eigen::MatrixXd a = lm * lp;
  std::vector<double> wr(n), wi(n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, wr.data(), wi.data(), nullptr,
                                        1, nullptr, 1);
  if (info != 0) throw NumericError("dgeev failed on the reduced eigenproblem, info = " + std::to_string(info));
  std::vector<cd> nu(n);
  for (int i = 0; i < n; ++i) nu[i] = {wr[i], wi[i]};
  std::sort(nu.begin(), nu.end(), [](cd x, cd y) { return x.real() < y.real(); });
  return nu;
}

namespace {

ComplexBandedMatrix shifted_minus_lstar(const LinearizedSystem& sys, double beta) {
  const RealBandedMatrix real = banded_system(sys, true, 0.0, -1.0);
  const int n2 = real.size();
  ComplexBandedMatrix m(n2, 3, 3);
  for (int i = 0; i < n2; ++i)
    for (int j = std::max(0, i - 3); j <= std::min(n2 - 1, i + 3); ++j) m.at(i, j) = real.at(i, j);
  for (int i = 0; i < n2; ++i) m.at(i, i) -= cd(0.0, beta);
  return m;
}

ComplexTwoComponentField deinterleave(const ComplexField& y) {
  const auto n = y.size() / 2;
  ComplexTwoComponentField v{ComplexField(n), ComplexField(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    v.first[i] = y[2 * i];
    v.second[i] = y[2 * i + 1];
  }
  return v;
}

void normalize_mode(const Grid& grid, ComplexTwoComponentField& v) {
  const double nrm = norm_l2(grid, v);
  v.first /= nrm;
  v.second /= nrm;
  const ComplexField& big = v.first.norm() >= v.second.norm() ? v.first : v.second;
  Eigen::Index peak = 0;
  big.cwiseAbs().maxCoeff(&peak);
  const cd phase = std::conj(big[peak]) / std::abs(big[peak]);
  v.first *= phase;
  v.second *= phase;
}

struct RefinedMode {
  ComplexTwoComponentField v;
  double beta;
  double real_part;
};

RefinedMode refine_mode(const LinearizedSystem& sys, double beta0, std::mt19937_64& rng) {
  const Grid& grid = sys.grid;
  const int n2 = 2 * grid.size();
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ComplexField y(n2);
  for (int i = 0; i < n2; ++i) y[i] = cd(dist(rng), dist(rng));

  auto iterate = [&](double shift, int sweeps) {
    const BandedLU<cd> lu(shifted_minus_lstar(sys, shift));
    for (int s = 0; s < sweeps; ++s) {
      lu.solve_in_place(std::span<cd>(y.data(), n2));
      y /= y.norm();
    }
  };
  auto rayleigh = [&](const ComplexTwoComponentField& v) {
    return inner(grid, apply_minus_Lstar(sys, v), v) / inner(grid, v, v);
  };

  iterate(beta0, 3);
  ComplexTwoComponentField v = deinterleave(y);
  cd q = rayleigh(v);
  iterate(q.imag(), 1);
  v = deinterleave(y);
  q = rayleigh(v);
  normalize_mode(grid, v);
  return {v, q.imag(), q.real()};
}

}  // namespace

SpectralBasis compute_spectrum(const LinearizedSystem& sys, int m, const Field* dmu_phi) {
  const Grid& grid = sys.grid;
  const int n = grid.size();
  if (m < 1 || m > n - 2) throw DomainError("mode count must lie in [1, n_interior - 2]");

  SpectralBasis basis;
  basis.n_interior = n;
  basis.mu = sys.mu;
  const std::vector<cd> nu = reduced_eigenvalues(sys);
  basis.total_reduced = static_cast<int>(nu.size());

  std::vector<cd> sorted = nu;
  std::sort(sorted.begin(), sorted.end(), [](cd x, cd y) { return std::abs(x) < std::abs(y); });
  basis.zero_eigenvalue_estimate = std::abs(sorted[0]);
  basis.zero_mode_excluded = std::abs(sorted[0]) < 1e-2 * std::abs(sorted[1]);
  std::vector<cd> nonzero(sorted.begin() + (basis.zero_mode_excluded ? 1 : 0), sorted.end());
  std::sort(nonzero.begin(), nonzero.end(), [](cd x, cd y) { return x.real() < y.real(); });
  if (static_cast<int>(nonzero.size()) < m) throw NumericError("not enough nonzero eigenvalues");

  int zeros = 0;
  for (const cd& x : nu)
    if (std::abs(x) < 1e-2 * std::abs(nonzero.front())) ++zeros;
  basis.zero_cluster_count = 2 * zeros;

  const double first_beta = std::sqrt(std::abs(nonzero.front()));
  basis.spectral_gap = first_beta;
  const double lm0 = std::abs(sys.lminus.eigenvalue(0)), lm1 = std::abs(sys.lminus.eigenvalue(1));
  const double lp0 = std::abs(sys.lplus.eigenvalue(0)), lp1 = std::abs(sys.lplus.eigenvalue(1));
  basis.smallest_singular_lminus = std::min(lm0, lm1);
  basis.smallest_singular_lplus = std::min(lp0, lp1);
  const double thr = 1e-2 * first_beta;
  basis.geometric_zero_count = (lm0 < thr) + (lm1 < thr) + (lp0 < thr) + (lp1 < thr);

  std::mt19937_64 rng(20240917);
  const int offset = basis.zero_mode_excluded ? 2 : 1;
  for (int i = 0; i < m; ++i) {
    const cd beta_c = std::sqrt(nonzero[i]);
    basis.max_real_part = std::max(basis.max_real_part, std::abs(beta_c.imag()));
    RefinedMode mode = refine_mode(sys, beta_c.real(), rng);
    basis.max_real_part = std::max(basis.max_real_part, std::abs(mode.real_part));
    const ComplexTwoComponentField lv = apply_minus_Lstar(sys, mode.v);
    const ComplexTwoComponentField r{lv.first - cd(0, mode.beta) * mode.v.first,
                                     lv.second - cd(0, mode.beta) * mode.v.second};
    basis.indices.push_back(i + offset);
    basis.betas.push_back(mode.beta);
    basis.residuals.push_back(norm_l2(grid, r) / mode.beta);
    basis.modes.push_back(std::move(mode.v));
  }
  basis.min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < m; ++i) basis.min_gap = std::min(basis.min_gap, basis.betas[i + 1] - basis.betas[i]);
  if (m == 1) basis.min_gap = basis.betas[0];
  basis.degenerate = basis.min_gap < 1e-10;
  if (dmu_phi) basis.null_pair = nullspace_pair(sys, sys.phi, *dmu_phi);
  return basis;
}

double continuum_eigenvalue(int n, double mu) {
  const double w = n * std::numbers::pi;
  return w * w + mu;
}

double discrete_free_eigenvalue(int n, double mu, const Grid& grid) {
  const double h = grid.h();
  const double s = std::sin(0.5 * n * std::numbers::pi * h);
  return 4.0 / (h * h) * s * s + mu;
}

EigenvalueAsymptotics verify_eigenvalue_asymptotics(const SpectralBasis& basis, double mu, const Grid& grid,
                                                    bool discrete_reference) {
  EigenvalueAsymptotics r;
  const int trusted = basis.n_interior / 8;
  for (std::size_t i = 0; i < basis.betas.size(); ++i) {
    const int n = basis.indices[i];
    if (n > trusted) break;
    const double ref = discrete_reference ? discrete_free_eigenvalue(n, mu, grid) : continuum_eigenvalue(n, mu);
    r.indices.push_back(n);
    r.deviations.push_back(basis.betas[i] - ref);
    r.constant = std::max(r.constant, std::abs(basis.betas[i] - ref));
  }
  r.trusted_modes = static_cast<int>(r.indices.size());
  if (r.trusted_modes >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = r.trusted_modes;
    for (int i = 0; i < r.trusted_modes; ++i) {
      const double x = r.indices[i], y = std::abs(r.deviations[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    r.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  r.growth_flag = r.slope > 0.05;
  return r;
}

std::pair<ComplexTwoComponentField, ComplexTwoComponentField> m_basis_pair(const ComplexTwoComponentField& v) {
  const cd i(0.0, 1.0);
  auto jinv = [&](const ComplexTwoComponentField& z) {
    return ComplexTwoComponentField{0.5 * (z.first - i * z.second), 0.5 * (z.first + i * z.second)};
  };
  return {jinv(v.conjugate()), jinv(v)};
}

namespace {

// Sup distance of (dominant, other) to (s, 0) after the best complex rescaling of the pair.
double profile_deviation(const ComplexField& dominant, const ComplexField& other, const Field& s) {
  const cd scale = dominant.dot(s.cast<cd>()) / dominant.squaredNorm();
  const double d1 = (scale * dominant - s.cast<cd>()).cwiseAbs().maxCoeff();
  const double d2 = (scale * other).cwiseAbs().maxCoeff();
  return std::max(d1, d2);
}

}  // namespace

EigenfunctionAsymptotics verify_eigenfunction_asymptotics(const SpectralBasis& basis, double mu, const Grid& grid,
                                                          int first, int last) {
  EigenfunctionAsymptotics r;
  const double h = grid.h();
  const Field x = grid.nodes();
  for (std::size_t i = 0; i < basis.betas.size(); ++i) {
    const int n = basis.indices[i];
    if (n < first || n > last) continue;
    const double beta = basis.betas[i];
    if (beta <= mu) {
      r.skipped.push_back(n);
      continue;
    }
    const double arg = std::min(1.0, 0.5 * h * std::sqrt(beta - mu));
    const double omega = 2.0 / h * std::asin(arg);
    const Field s = (omega * x.array()).sin().matrix();
    const auto [wp, wm] = m_basis_pair(basis.modes[i]);
    EigenfunctionRow row;
    row.n = n;
    row.beta = beta;
    row.plus_deviation = profile_deviation(wp.second, wp.first, s);
    row.minus_deviation = profile_deviation(wm.first, wm.second, s);
    row.scaled = n * row.plus_deviation;
    r.envelope_constant = std::max(r.envelope_constant, row.scaled);
    r.rows.push_back(row);
  }
  return r;
}

namespace {

// \int_0^T t^p e^{i w t} dt for p = 0, 1.
cd moment(int p, double w, double T) {
  const cd i(0.0, 1.0);
  if (std::abs(w) * T < 1e-2) {
    cd sum = 0.0, term = 1.0;
    for (int k = 0; k < 10; ++k) {
      if (k > 0) term *= i * w * T / double(k);
      sum += term * std::pow(T, p + 1) / double(k + p + 1);
    }
    return sum;
  }
  const cd e = std::exp(i * w * T);
  if (p == 0) return (e - 1.0) / (i * w);
  return e * (T / (i * w) + 1.0 / (w * w)) - 1.0 / (w * w);
}

}  // namespace

double riesz_constant(const std::vector<double>& betas, double T, bool* singular) {
  if (!(T > 0.0)) throw DomainError("time horizon must be positive");
  // Basis functions t^p e^{i w t}: (p, w).
  std::vector<std::pair<int, double>> f{{0, 0.0}, {1, 0.0}};
  for (double b : betas) {
    f.emplace_back(0, b);
    f.emplace_back(0, -b);
  }
  const int k = static_cast<int>(f.size());
  Eigen::MatrixXcd g(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      const int p = f[a].first + f[b].first;
      const double w = f[a].second - f[b].second;
      g(a, b) = p == 2 ? cd(T * T * T / 3.0, 0.0) : moment(p, w, T);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(k - 1);
  const bool bad = !(lo > 1e-13 * hi);
  if (singular) *singular = bad;
  return bad ? 0.0 : lo;
}

namespace {

std::vector<ComplexTwoComponentField> system_elements(const SpectralBasis& basis, const Grid& grid, bool normalized) {
  std::vector<ComplexTwoComponentField> e;
  if (basis.null_pair) {
    for (const TwoComponentField* z : {&basis.null_pair->v1, &basis.null_pair->w1}) {
      ComplexTwoComponentField c = ComplexTwoComponentField::from_real(*z);
      if (normalized) {
        const double nrm = norm_l2(grid, c);
        c.first /= nrm;
        c.second /= nrm;
      }
      e.push_back(std::move(c));
    }
  }
  for (const auto& v : basis.modes) {
    e.push_back(v);
    e.push_back(v.conjugate());
  }
  return e;
}

Eigen::MatrixXcd gram(const std::vector<ComplexTwoComponentField>& e, const Grid& grid) {
  const int k = static_cast<int>(e.size());
  Eigen::MatrixXcd g(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      g(a, b) = inner(grid, e[b], e[a]);
      g(b, a) = std::conj(g(a, b));
    }
  return g;
}

}  // namespace

FrameReport frame_constants(const SpectralBasis& basis, const Grid& grid, const Field& chi, double T) {
  require_same_size(grid, chi.size(), "frame_constants");
  FrameReport r;
  const auto e = system_elements(basis, grid, true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram(e, grid), Eigen::EigenvaluesOnly);
  r.bessel_B = es.eigenvalues()(0);
  r.m_V = std::numeric_limits<double>::infinity();
  for (const auto& v : e) {
    const double mass = grid.h() * (chi.array() * (v.first.cwiseAbs2().array() + v.second.cwiseAbs2().array())).sum();
    r.m_V = std::min(r.m_V, mass);
  }
  r.riesz_A = riesz_constant(basis.betas, T, &r.riesz_singular);
  if (basis.n_interior >= 16) r.asymptotic_C = verify_eigenvalue_asymptotics(basis, basis.mu, grid).constant;
  return r;
}

SpectralCoefficients expand(const SpectralBasis& basis, const Grid& grid, const TwoComponentField& v0) {
  const auto e = system_elements(basis, grid, false);
  const int k = static_cast<int>(e.size());
  const Eigen::MatrixXcd g = gram(e, grid);
  const ComplexTwoComponentField z = ComplexTwoComponentField::from_real(v0);
  Eigen::VectorXcd rhs(k);
  for (int a = 0; a < k; ++a) rhs[a] = inner(grid, z, e[a]);
  const Eigen::VectorXcd c = g.ldlt().solve(rhs);
  SpectralCoefficients out;
  int pos = 0;
  if (basis.null_pair) {
    out.c1 = c[0].real();
    out.d1 = c[1].real();
    pos = 2;
  }
  for (std::size_t n = 0; n < basis.modes.size(); ++n, pos += 2) out.c.push_back(0.5 * (c[pos] + std::conj(c[pos + 1])));
  return out;
}

TwoComponentField spectral_solution(const SpectralBasis& basis, const SpectralCoefficients& coefficients, double t) {
  const int n = basis.n_interior;
  TwoComponentField v = TwoComponentField::zero(n);
  if (basis.null_pair) {
    v += (coefficients.c1 + t * coefficients.d1) * basis.null_pair->v1;
    v += coefficients.d1 * basis.null_pair->w1;
  }
  for (std::size_t k = 0; k < basis.modes.size() && k < coefficients.c.size(); ++k) {
    const cd a = coefficients.c[k] * std::exp(cd(0.0, basis.betas[k] * t));
    const auto& m = basis.modes[k];
    v.first += 2.0 * (a * m.first).real();
    v.second += 2.0 * (a * m.second).real();
  }
  return v;
}

}  // namespace nlsctl
