#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "tocm/kernels.hpp"
#include "tocm/rng.hpp"

using namespace tocm;

namespace {

std::vector<float> random_mat(Rng& rng, int r, int c) {
  std::vector<float> m(size_t(r) * c);
  for (auto& x : m) x = float(rng.uniform(-1.0, 1.0));
  return m;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng(11, "kernels");
  const int sizes[][3] = {{48, 128, 128}, {7, 33, 5}, {1, 16, 16}, {200, 64, 96}, {3, 1, 7}};
  for (auto [m, k, n] : sizes) {
    auto a = random_mat(rng, m, k);
    auto b = random_mat(rng, k, n);
    std::vector<float> c_ser(size_t(m) * n, 0.0f), c_par(size_t(m) * n, 0.0f);

    kernels::matmul_nn_serial(a.data(), b.data(), c_ser.data(), m, k, n);
    kernels::set_parallel(true);
    kernels::matmul_nn(a.data(), b.data(), c_par.data(), m, k, n);
    CHECK(std::memcmp(c_ser.data(), c_par.data(), c_ser.size() * sizeof(float)) == 0);

    auto seed = random_mat(rng, m, n);
    auto acc_ser = seed, acc_par = seed;
    kernels::matmul_nn_acc_serial(a.data(), b.data(), acc_ser.data(), m, k, n);
    kernels::matmul_nn_acc(a.data(), b.data(), acc_par.data(), m, k, n);
    CHECK(std::memcmp(acc_ser.data(), acc_par.data(), acc_ser.size() * sizeof(float)) == 0);

    // nt: [m,n].[p,n]^T
    auto bt = random_mat(rng, 17, k);
    std::vector<float> nt_ser(size_t(m) * 17, 0.5f), nt_par(size_t(m) * 17, 0.5f);
    kernels::matmul_nt_acc_serial(a.data(), bt.data(), nt_ser.data(), m, k, 17);
    kernels::matmul_nt_acc(a.data(), bt.data(), nt_par.data(), m, k, 17);
    CHECK(std::memcmp(nt_ser.data(), nt_par.data(), nt_ser.size() * sizeof(float)) == 0);

    // transpose round trip
    std::vector<float> at(size_t(k) * m), back(size_t(m) * k);
    kernels::transpose(a.data(), at.data(), m, k);
    kernels::transpose(at.data(), back.data(), k, m);
    CHECK(back == a);
  }
}

TEST_CASE("kernel outputs agree with a plain triple-loop product") {
  Rng rng(5, "oracle");
  const int m = 9, k = 31, n = 14;
  auto a = random_mat(rng, m, k);
  auto b = random_mat(rng, k, n);
  std::vector<float> c(size_t(m) * n, 0.0f);
  kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n);

  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0;
      for (int kk = 0; kk < k; ++kk) acc += double(a[i * k + kk]) * double(b[kk * n + j]);
      CHECK(double(c[size_t(i) * n + j]) == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("serial toggle is honored") {
  kernels::set_parallel(false);
  CHECK_FALSE(kernels::parallel_enabled());
  kernels::set_parallel(true);
  CHECK(kernels::parallel_enabled());
}
