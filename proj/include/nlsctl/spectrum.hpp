#pragma once

#include "nlsctl/operators.hpp"

#include <complex>
#include <optional>
#include <vector>

namespace nlsctl {

struct ComplexTwoComponentField {
  ComplexField first;
  ComplexField second;

  static ComplexTwoComponentField from_real(const TwoComponentField& z);
  ComplexTwoComponentField conjugate() const;
  TwoComponentField real() const;
  TwoComponentField imag() const;
};

/// sum h (u1 conj(v1) + u2 conj(v2)); linear in u.
std::complex<double> inner(const Grid& grid, const ComplexTwoComponentField& u, const ComplexTwoComponentField& v);
double norm_l2(const Grid& grid, const ComplexTwoComponentField& u);

/// -L* applied to a complex two-component field.
ComplexTwoComponentField apply_minus_Lstar(const LinearizedSystem& sys, const ComplexTwoComponentField& v);

struct NullPair {
  TwoComponentField v1;  // (phi, 0)
  TwoComponentField w1;  // (0, -d phi/d mu), so that -L* W1 = V1
  double jordan_residual = 0.0;     // ||L* W1 + V1|| / ||V1||
  double kernel_residual = 0.0;     // ||L* V1|| / ||V1||
};

NullPair nullspace_pair(const LinearizedSystem& sys, const Field& phi, const Field& dmu_phi);

struct SpectralBasis {
  std::vector<int> indices;   // n = 2, 3, ... (1, 2, ... without a zero mode)
  std::vector<double> betas;  // eigenvalues i*beta_n of -L*, increasing
  std::vector<ComplexTwoComponentField> modes;  // unit L2 norm
  std::vector<double> residuals;  // ||(-L* - i beta) V|| / beta
  std::optional<NullPair> null_pair;

  double max_real_part = 0.0;   // max |Re lambda| over the computed modes
  double min_gap = 0.0;
  bool degenerate = false;      // some gap below 1e-10
  bool zero_mode_excluded = false;
  int zero_cluster_count = 0;   // eigenvalues of -L* counted at zero (algebraic)
  int geometric_zero_count = 0; // near-zero singular values of -L*
  double smallest_singular_lminus = 0.0;
  double smallest_singular_lplus = 0.0;
  double zero_eigenvalue_estimate = 0.0;  // |nu_0| of the reduced problem
  double spectral_gap = 0.0;              // beta of the first nonzero mode
  int n_interior = 0;
  double mu = 0.0;
  int total_reduced = 0;                  // eigenvalues of the reduced problem
};

/// All eigenvalues nu = beta^2 of the reduced problem L- L+ v = nu v, sorted by real part.
std::vector<std::complex<double>> reduced_eigenvalues(const LinearizedSystem& sys);

/// First m nonzero eigenpairs i*beta_n of -L*. With dmu_phi, also fills the null pair.
SpectralBasis compute_spectrum(const LinearizedSystem& sys, int m, const Field* dmu_phi = nullptr);

struct EigenvalueAsymptotics {
  double constant = 0.0;   // sup |beta_n - lambda_n|
  double slope = 0.0;      // least-squares slope of the deviation in n
  bool growth_flag = false;
  int trusted_modes = 0;
  std::vector<int> indices;
  std::vector<double> deviations;  // beta_n - lambda_n (signed)
};

/// Continuum reference n^2 pi^2 + mu.
double continuum_eigenvalue(int n, double mu);
/// Free discrete reference (4/h^2) sin^2(n pi h / 2) + mu, the exact eigenvalue of -D2 + mu.
double discrete_free_eigenvalue(int n, double mu, const Grid& grid);

/// Deviation of beta_n from the free eigenvalues over modes n <= n_interior/8.
EigenvalueAsymptotics verify_eigenvalue_asymptotics(const SpectralBasis& basis, double mu, const Grid& grid,
                                                    bool discrete_reference = true);

struct EigenfunctionRow {
  int n = 0;
  double beta = 0.0;
  double plus_deviation = 0.0;   // W+ against sin(w x) (0,1)
  double minus_deviation = 0.0;  // W- against sin(w x) (1,0)
  double scaled = 0.0;           // n * plus_deviation
};

struct EigenfunctionAsymptotics {
  std::vector<EigenfunctionRow> rows;
  std::vector<int> skipped;  // modes with beta <= mu
  double envelope_constant = 0.0;  // max n * deviation
};

/// W+ = J^{-1} conj(V), W- = J^{-1} V with J^{-1} = 1/2 [[1, -i], [1, i]].
std::pair<ComplexTwoComponentField, ComplexTwoComponentField> m_basis_pair(const ComplexTwoComponentField& v);

EigenfunctionAsymptotics verify_eigenfunction_asymptotics(const SpectralBasis& basis, double mu, const Grid& grid,
                                                          int first = 5, int last = 40);

struct FrameReport {
  double bessel_B = 0.0;
  double m_V = 0.0;
  double riesz_A = 0.0;
  double asymptotic_C = 0.0;
  bool riesz_singular = false;
};

/// Smallest eigenvalue of the L2(0,T) Gram matrix of {1, t, e^{+-i beta_n t}}.
double riesz_constant(const std::vector<double>& betas, double T, bool* singular = nullptr);

FrameReport frame_constants(const SpectralBasis& basis, const Grid& grid, const Field& chi, double T);

struct SpectralCoefficients {
  double c1 = 0.0;
  double d1 = 0.0;
  std::vector<std::complex<double>> c;  // one per mode
};

/// Least-squares expansion of a real field in {V1, W1, V_n, conj V_n}.
SpectralCoefficients expand(const SpectralBasis& basis, const Grid& grid, const TwoComponentField& v0);

/// (c1 + t d1) V1 + d1 W1 + 2 Re sum c_n e^{i beta_n t} V_n.
TwoComponentField spectral_solution(const SpectralBasis& basis, const SpectralCoefficients& coefficients, double t);

}  // namespace nlsctl
