#pragma once

#include <complex>
#include <span>
#include <vector>

namespace nlsctl {

/// General band matrix in LAPACK band storage (column major, with the kl extra
/// rows dgbtrf needs for fill-in).
template <typename T>
class BandedMatrix {
 public:
  BandedMatrix(int n, int kl, int ku);

  int size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }

  /// Entry (i, j); requires -kl <= j - i <= ku.
  T& at(int i, int j);
  T at(int i, int j) const;

  void multiply(std::span<const T> x, std::span<T> y) const;

  std::vector<T>& storage() { return ab_; }
  const std::vector<T>& storage() const { return ab_; }
  int leading_dimension() const { return ldab_; }

 private:
  int n_, kl_, ku_, ldab_;
  std::vector<T> ab_;
};

/// LU factorization with partial pivoting of a band matrix (LAPACK ?gbtrf).
template <typename T>
class BandedLU {
 public:
  explicit BandedLU(BandedMatrix<T> matrix);

  int size() const { return matrix_.size(); }
  void solve_in_place(std::span<T> rhs) const;

 private:
  BandedMatrix<T> matrix_;
  std::vector<int> pivots_;
};

using RealBandedMatrix = BandedMatrix<double>;
using ComplexBandedMatrix = BandedMatrix<std::complex<double>>;

}  // namespace nlsctl
