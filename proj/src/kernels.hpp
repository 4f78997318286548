#pragma once

// Dense row-major kernels. Each output element accumulates over the inner
// index in ascending order, so a row of the result depends only on the
// matching input row and is bitwise stable under adding or removing rows.

#include <cstddef>
#include <vector>

namespace dirhoi::kernels {

// c[m×n] += a[m×k] · b[k×n]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m×n] += a[m×k] · b[n×k]ᵀ, through a transposed copy of b so the inner
// loop runs over contiguous output columns.
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, m, k, n);
}

// c[k×n] += a[m×k]ᵀ · b[m×n]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* arow = a + r * k;
    const double* brow = b + r * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace dirhoi::kernels
