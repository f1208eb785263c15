#pragma once

// Dense matrix kernels used by the tensor graph. Each kernel has a serial
// reference and an OpenMP version; both run the identical per-element
// accumulation order, so their outputs are bit-identical and the parallel
// path can be validated against the reference exactly.

#include <cstdint>

namespace tocm::kernels {

bool parallel_enabled();
void set_parallel(bool on);

// Work (in multiply-adds) below which threading is not worth spawning.
inline constexpr int64_t kParallelCutoff = 2 * 1024 * 1024;

namespace detail {

// c[row, 0..n) = sum_k a_row[k] * b[k, 0..n); additions over k in ascending
// order per output element.
template <typename T>
inline void nn_row(const T* a_row, const T* b, T* c_row, int k, int n) {
  for (int j = 0; j < n; ++j) c_row[j] = T(0);
  for (int kk = 0; kk < k; ++kk) {
    const T av = a_row[kk];
    const T* b_row = b + int64_t(kk) * n;
    for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

// Dot of two contiguous rows with four fixed partial accumulators.
template <typename T>
inline T dot_row(const T* x, const T* y, int n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

// c[m,n] = a[m,k] . b[k,n]
template <typename T>
void matmul_nn_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    detail::nn_row(a + int64_t(i) * k, b, c + int64_t(i) * n, k, n);
}

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n);

// c[m,n] += a[m,k] . b[k,n]
template <typename T>
void matmul_nn_acc_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* a_row = a + int64_t(i) * k;
    T* c_row = c + int64_t(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const T av = a_row[kk];
      const T* b_row = b + int64_t(kk) * n;
      for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
  }
}

template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* c, int m, int k, int n);

// c[m,p] += a[m,n] . b[p,n]^T
template <typename T>
void matmul_nt_acc_serial(const T* a, const T* b, T* c, int m, int n, int p) {
  for (int i = 0; i < m; ++i) {
    const T* a_row = a + int64_t(i) * n;
    T* c_row = c + int64_t(i) * p;
    for (int l = 0; l < p; ++l) c_row[l] += detail::dot_row(a_row, b + int64_t(l) * n, n);
  }
}

template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* c, int m, int n, int p);

// at[n,m] = a[m,n]^T
template <typename T>
void transpose(const T* a, T* at, int m, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) at[int64_t(j) * m + i] = a[int64_t(i) * n + j];
}

}  // namespace tocm::kernels
