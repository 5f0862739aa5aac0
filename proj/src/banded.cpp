#include "nlsctl/banded.hpp"

#include "nlsctl/errors.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cassert>
#include <string>
#include <type_traits>

namespace nlsctl {

template <typename T>
BandedMatrix<T>::BandedMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1),
      ab_(static_cast<std::size_t>(ldab_) * n, T{}) {}

template <typename T>
T& BandedMatrix<T>::at(int i, int j) {
  assert(j - i <= ku_ && i - j <= kl_);
  return ab_[static_cast<std::size_t>(j) * ldab_ + (kl_ + ku_ + i - j)];
}

template <typename T>
T BandedMatrix<T>::at(int i, int j) const {
  if (j - i > ku_ || i - j > kl_) return T{};
  return ab_[static_cast<std::size_t>(j) * ldab_ + (kl_ + ku_ + i - j)];
}

template <typename T>
void BandedMatrix<T>::multiply(std::span<const T> x, std::span<T> y) const {
  const int off = kl_ + ku_;
  for (int i = 0; i < n_; ++i) y[i] = T{};
  for (int j = 0; j < n_; ++j) {
    const T xj = x[j];
    const T* col = ab_.data() + static_cast<std::size_t>(j) * ldab_ + off - j;
    const int i0 = std::max(0, j - ku_);
    const int i1 = std::min(n_ - 1, j + kl_);
    for (int i = i0; i <= i1; ++i) y[i] += col[i] * xj;
  }
}

template <typename T>
BandedLU<T>::BandedLU(BandedMatrix<T> matrix)
    : matrix_(std::move(matrix)), pivots_(matrix_.size()) {
  const int n = matrix_.size();
  lapack_int info = 0;
  if constexpr (std::is_same_v<T, double>) {
    info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, matrix_.lower(), matrix_.upper(),
                          matrix_.storage().data(), matrix_.leading_dimension(),
                          pivots_.data());
  } else {
    info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n, n, matrix_.lower(), matrix_.upper(),
                          reinterpret_cast<lapack_complex_double*>(matrix_.storage().data()),
                          matrix_.leading_dimension(), pivots_.data());
  }
  if (info != 0) throw NumericError("banded LU factorization failed, info = " + std::to_string(info));
}

template <typename T>
void BandedLU<T>::solve_in_place(std::span<T> rhs) const {
  // Same layout as ?gbtrs with one right-hand side: L is stored as multipliers
  // below the diagonal with row interchanges, U as a band of width kl + ku.
  const int n = matrix_.size();
  const int kl = matrix_.lower();
  const int kv = kl + matrix_.upper();
  const int ld = matrix_.leading_dimension();
  const T* ab = matrix_.storage().data();
  assert(static_cast<int>(rhs.size()) == n);
  if (kl > 0) {
    for (int j = 0; j + 1 < n; ++j) {
      const int lm = std::min(kl, n - j - 1);
      const int p = pivots_[j] - 1;
      if (p != j) std::swap(rhs[p], rhs[j]);
      const T bj = rhs[j];
      const T* col = ab + static_cast<std::size_t>(j) * ld + kv + 1;
      for (int i = 0; i < lm; ++i) rhs[j + 1 + i] -= col[i] * bj;
    }
  }
  for (int j = n - 1; j >= 0; --j) {
    const T* col = ab + static_cast<std::size_t>(j) * ld;
    rhs[j] /= col[kv];
    const T bj = rhs[j];
    const int i0 = std::max(0, j - kv);
    for (int i = i0; i < j; ++i) rhs[i] -= col[kv + i - j] * bj;
  }
}

template class BandedMatrix<double>;
template class BandedMatrix<std::complex<double>>;
template class BandedLU<double>;
template class BandedLU<std::complex<double>>;

}  // namespace nlsctl
