#include <gtest/gtest.h>
#include <omp.h>

#include <cstring>
#include <vector>

#include "dad/kernels.hpp"
#include "dad/random.hpp"

using namespace dad;
namespace ks = dad::kernels::serial;
namespace kp = dad::kernels::parallel;
using dad::kernels::Trans;

namespace {

template <class T>
std::vector<T> rand_vec(std::size_t n, RandomSource& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

class KernelParity : public ::testing::Test {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(4);
  }
  void TearDown() override { omp_set_num_threads(saved_); }
  int saved_ = 1;
};

}  // namespace

TEST_F(KernelParity, GemmAllTransposes) {
  RandomSource rng(1);
  const std::size_t M = 67, N = 45, K = 129;
  for (Trans ta : {Trans::No, Trans::Yes}) {
    for (Trans tb : {Trans::No, Trans::Yes}) {
      for (bool acc : {false, true}) {
        auto A = rand_vec<float>(M * K, rng);
        auto B = rand_vec<float>(K * N, rng);
        auto C0 = rand_vec<float>(M * N, rng);
        auto C1 = C0;
        ks::gemm(ta, tb, M, N, K, A.data(), B.data(), C0.data(), acc);
        kp::gemm(ta, tb, M, N, K, A.data(), B.data(), C1.data(), acc);
        EXPECT_TRUE(same_bits(C0, C1));
      }
    }
  }
}

TEST_F(KernelParity, GemmMatchesNaiveProduct) {
  RandomSource rng(2);
  const std::size_t M = 5, N = 4, K = 3;
  auto A = rand_vec<double>(M * K, rng);
  auto B = rand_vec<double>(K * N, rng);
  std::vector<double> C(M * N);
  ks::gemm(Trans::No, Trans::No, M, N, K, A.data(), B.data(), C.data(), false);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += A[i * K + k] * B[k * N + j];
      EXPECT_NEAR(C[i * N + j], s, 1e-14);
    }
}

TEST_F(KernelParity, Im2colAndFold) {
  RandomSource rng(3);
  const std::size_t T = 300, Cin = 24, k = 3;
  for (std::size_t stride : {1u, 2u, 4u}) {
    const std::size_t Tout = (T + 2 - k) / stride + 1;
    auto x = rand_vec<float>(T * Cin, rng);
    std::vector<float> c0(Tout * k * Cin), c1(c0.size());
    ks::im2col(x.data(), T, Cin, k, stride, 1, Tout, c0.data());
    kp::im2col(x.data(), T, Cin, k, stride, 1, Tout, c1.data());
    EXPECT_TRUE(same_bits(c0, c1));
    auto dcol = rand_vec<float>(c0.size(), rng);
    std::vector<float> d0(T * Cin, 0.0f), d1(T * Cin, 0.0f);
    ks::col2im_add(dcol.data(), T, Cin, k, stride, 1, Tout, d0.data());
    kp::col2im_add(dcol.data(), T, Cin, k, stride, 1, Tout, d1.data());
    EXPECT_TRUE(same_bits(d0, d1));
  }
}

TEST_F(KernelParity, SoftmaxAndLayerNorm) {
  RandomSource rng(4);
  const std::size_t R = 256, Cc = 200;
  auto x = rand_vec<float>(R * Cc, rng);
  std::vector<float> y0(x.size()), y1(x.size());
  ks::softmax_rows(x.data(), R, Cc, y0.data());
  kp::softmax_rows(x.data(), R, Cc, y1.data());
  EXPECT_TRUE(same_bits(y0, y1));
  auto dy = rand_vec<float>(x.size(), rng);
  std::vector<float> dx0(x.size(), 0.0f), dx1(x.size(), 0.0f);
  ks::softmax_rows_backward(y0.data(), dy.data(), R, Cc, dx0.data());
  kp::softmax_rows_backward(y0.data(), dy.data(), R, Cc, dx1.data());
  EXPECT_TRUE(same_bits(dx0, dx1));

  auto g = rand_vec<float>(Cc, rng), b = rand_vec<float>(Cc, rng);
  std::vector<float> m0(R), m1(R), r0(R), r1(R);
  ks::layer_norm_forward(x.data(), R, Cc, g.data(), b.data(), 1e-5f, y0.data(), m0.data(), r0.data());
  kp::layer_norm_forward(x.data(), R, Cc, g.data(), b.data(), 1e-5f, y1.data(), m1.data(), r1.data());
  EXPECT_TRUE(same_bits(y0, y1));
  EXPECT_TRUE(same_bits(m0, m1));
  EXPECT_TRUE(same_bits(r0, r1));
  std::vector<float> dg0(Cc, 0.0f), dg1(Cc, 0.0f), db0(Cc, 0.0f), db1(Cc, 0.0f);
  std::fill(dx0.begin(), dx0.end(), 0.0f);
  std::fill(dx1.begin(), dx1.end(), 0.0f);
  ks::layer_norm_backward(dy.data(), x.data(), m0.data(), r0.data(), g.data(), R, Cc, dx0.data(),
                          dg0.data(), db0.data());
  kp::layer_norm_backward(dy.data(), x.data(), m0.data(), r0.data(), g.data(), R, Cc, dx1.data(),
                          dg1.data(), db1.data());
  EXPECT_TRUE(same_bits(dx0, dx1));
  EXPECT_TRUE(same_bits(dg0, dg1));
  EXPECT_TRUE(same_bits(db0, db1));
}

TEST_F(KernelParity, RelativeBiasGatherScatter) {
  RandomSource rng(5);
  for (std::size_t N : {7u, 256u}) {
    for (std::size_t radius : {0u, 3u, 32u}) {
      const std::size_t r = std::min(radius, N - 1);
      auto S = rand_vec<double>(N * (2 * r + 1), rng);
      std::vector<double> P0(N * N), P1(N * N);
      ks::relbias_gather(S.data(), N, r, P0.data());
      kp::relbias_gather(S.data(), N, r, P1.data());
      EXPECT_TRUE(same_bits(P0, P1));
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < N; ++m) {
          long d = static_cast<long>(n) - static_cast<long>(m);
          d = std::max(-static_cast<long>(r), std::min(static_cast<long>(r), d));
          ASSERT_EQ(P0[n * N + m], S[n * (2 * r + 1) + static_cast<std::size_t>(d + static_cast<long>(r))]);
        }
      auto dP = rand_vec<double>(N * N, rng);
      std::vector<double> dS0(S.size(), 0.0), dS1(S.size(), 0.0);
      ks::relbias_scatter_add(dP.data(), N, r, dS0.data());
      kp::relbias_scatter_add(dP.data(), N, r, dS1.data());
      EXPECT_TRUE(same_bits(dS0, dS1));
    }
  }
}
