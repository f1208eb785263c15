#include "tocm/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tocm::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n) {
  if (!parallel_enabled() || int64_t(m) * k * n < kParallelCutoff || m < 2) {
    matmul_nn_serial(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    detail::nn_row(a + int64_t(i) * k, b, c + int64_t(i) * n, k, n);
}

template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  if (!parallel_enabled() || int64_t(m) * k * n < kParallelCutoff || m < 2) {
    matmul_nn_acc_serial(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
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
void matmul_nt_acc(const T* a, const T* b, T* c, int m, int n, int p) {
  if (!parallel_enabled() || int64_t(m) * n * p < kParallelCutoff || m < 2) {
    matmul_nt_acc_serial(a, b, c, m, n, p);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* a_row = a + int64_t(i) * n;
    T* c_row = c + int64_t(i) * p;
    for (int l = 0; l < p; ++l) c_row[l] += detail::dot_row(a_row, b + int64_t(l) * n, n);
  }
}

template void matmul_nn<float>(const float*, const float*, float*, int, int, int);
template void matmul_nn<double>(const double*, const double*, double*, int, int, int);
template void matmul_nn_acc<float>(const float*, const float*, float*, int, int, int);
template void matmul_nn_acc<double>(const double*, const double*, double*, int, int, int);
template void matmul_nt_acc<float>(const float*, const float*, float*, int, int, int);
template void matmul_nt_acc<double>(const double*, const double*, double*, int, int, int);

}  // namespace tocm::kernels
