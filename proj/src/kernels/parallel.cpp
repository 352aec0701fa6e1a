#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dad/kernels.hpp"
#include "rows.hpp"

namespace dad::kernels::parallel {

namespace {

// Splits [0, n) into contiguous static chunks, one per thread. `work` is the
// approximate multiply-add count; small jobs stay on the calling thread.
template <class Body>
void for_rows(std::size_t n, std::size_t work, Body&& body) {
#ifdef _OPENMP
  if (work >= kParallelThreshold && n > 1 && omp_get_max_threads() > 1) {
#pragma omp parallel
    {
      const std::size_t nt = static_cast<std::size_t>(omp_get_num_threads());
      const std::size_t id = static_cast<std::size_t>(omp_get_thread_num());
      const std::size_t chunk = (n + nt - 1) / nt;
      const std::size_t r0 = std::min(n, id * chunk);
      const std::size_t r1 = std::min(n, r0 + chunk);
      if (r0 < r1) body(r0, r1);
    }
    return;
  }
#endif
  (void)work;
  body(std::size_t{0}, n);
}

}  // namespace

template <class T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, const T* A,
          const T* B, T* C, bool accumulate) {
  std::vector<T> bt;
  const T* b = B;
  if (tb == Trans::Yes) {
    bt.resize(K * N);
    rows::transpose(B, N, K, bt.data());
    b = bt.data();
  }
  for_rows(M, M * N * K, [&](std::size_t r0, std::size_t r1) {
    rows::gemm_rows(ta == Trans::Yes, M, N, K, A, b, C, accumulate, r0, r1);
  });
}

template <class T>
void im2col(const T* x, std::size_t T_in, std::size_t channels, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t T_out, T* col) {
  for_rows(T_out, T_out * k * channels, [&](std::size_t r0, std::size_t r1) {
    rows::im2col_rows(x, T_in, channels, k, stride, pad, col, r0, r1);
  });
}

template <class T>
void col2im_add(const T* dcol, std::size_t T_in, std::size_t channels, std::size_t k,
                std::size_t stride, std::size_t pad, std::size_t T_out, T* dx) {
  for_rows(T_in, T_in * k * channels, [&](std::size_t r0, std::size_t r1) {
    rows::col2im_rows(dcol, channels, k, stride, pad, T_out, dx, r0, r1);
  });
}

template <class T>
void softmax_rows(const T* x, std::size_t rows_, std::size_t cols, T* y) {
  for_rows(rows_, rows_ * cols * 8, [&](std::size_t r0, std::size_t r1) {
    rows::softmax_rows_range(x, cols, y, r0, r1);
  });
}

template <class T>
void softmax_rows_backward(const T* y, const T* dy, std::size_t rows_, std::size_t cols, T* dx) {
  for_rows(rows_, rows_ * cols * 2, [&](std::size_t r0, std::size_t r1) {
    rows::softmax_backward_range(y, dy, cols, dx, r0, r1);
  });
}

template <class T>
void layer_norm_forward(const T* x, std::size_t rows_, std::size_t dim, const T* gain,
                        const T* bias, T eps, T* y, T* mean, T* rstd) {
  for_rows(rows_, rows_ * dim * 4, [&](std::size_t r0, std::size_t r1) {
    rows::layer_norm_forward_range(x, dim, gain, bias, eps, y, mean, rstd, r0, r1);
  });
}

template <class T>
void layer_norm_backward(const T* dy, const T* x, const T* mean, const T* rstd, const T* gain,
                         std::size_t rows_, std::size_t dim, T* dx, T* dgain, T* dbias) {
  if (dx) {
    for_rows(rows_, rows_ * dim * 4, [&](std::size_t r0, std::size_t r1) {
      rows::layer_norm_dx_range(dy, x, mean, rstd, gain, dim, dx, r0, r1);
    });
  }
  if (dgain || dbias) {
    for_rows(dim, rows_ * dim * 2, [&](std::size_t c0, std::size_t c1) {
      rows::layer_norm_params_range(dy, x, mean, rstd, rows_, dim, dgain, dbias, c0, c1);
    });
  }
}

template <class T>
void relbias_gather(const T* S, std::size_t N, std::size_t radius, T* P) {
  for_rows(N, N * N, [&](std::size_t r0, std::size_t r1) {
    rows::relbias_gather_rows(S, N, radius, P, r0, r1);
  });
}

template <class T>
void relbias_scatter_add(const T* dP, std::size_t N, std::size_t radius, T* dS) {
  for_rows(N, N * N, [&](std::size_t r0, std::size_t r1) {
    rows::relbias_scatter_rows(dP, N, radius, dS, r0, r1);
  });
}

#define DAD_INSTANTIATE(T)                                                                     \
  template void gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, const T*,         \
                        const T*, T*, bool);                                                   \
  template void im2col<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,        \
                          std::size_t, std::size_t, T*);                                       \
  template void col2im_add<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,    \
                              std::size_t, std::size_t, T*);                                   \
  template void softmax_rows<T>(const T*, std::size_t, std::size_t, T*);                       \
  template void softmax_rows_backward<T>(const T*, const T*, std::size_t, std::size_t, T*);    \
  template void layer_norm_forward<T>(const T*, std::size_t, std::size_t, const T*, const T*,  \
                                      T, T*, T*, T*);                                          \
  template void layer_norm_backward<T>(const T*, const T*, const T*, const T*, const T*,       \
                                       std::size_t, std::size_t, T*, T*, T*);                  \
  template void relbias_gather<T>(const T*, std::size_t, std::size_t, T*);                     \
  template void relbias_scatter_add<T>(const T*, std::size_t, std::size_t, T*);

DAD_INSTANTIATE(float)
DAD_INSTANTIATE(double)

}  // namespace dad::kernels::parallel
