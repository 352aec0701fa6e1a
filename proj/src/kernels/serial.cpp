#include <vector>

#include "dad/kernels.hpp"
#include "rows.hpp"

namespace dad::kernels::serial {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, const T* A,
          const T* B, T* C, bool accumulate) {
  if (tb == Trans::Yes) {
    std::vector<T> bt(K * N);
    rows::transpose(B, N, K, bt.data());
    rows::gemm_rows(ta == Trans::Yes, M, N, K, A, bt.data(), C, accumulate, 0, M);
    return;
  }
  rows::gemm_rows(ta == Trans::Yes, M, N, K, A, B, C, accumulate, 0, M);
}

template <class T>
void im2col(const T* x, std::size_t T_in, std::size_t channels, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t T_out, T* col) {
  rows::im2col_rows(x, T_in, channels, k, stride, pad, col, 0, T_out);
}

template <class T>
void col2im_add(const T* dcol, std::size_t T_in, std::size_t channels, std::size_t k,
                std::size_t stride, std::size_t pad, std::size_t T_out, T* dx) {
  rows::col2im_rows(dcol, channels, k, stride, pad, T_out, dx, 0, T_in);
}

template <class T>
void softmax_rows(const T* x, std::size_t rows_, std::size_t cols, T* y) {
  rows::softmax_rows_range(x, cols, y, 0, rows_);
}

template <class T>
void softmax_rows_backward(const T* y, const T* dy, std::size_t rows_, std::size_t cols, T* dx) {
  rows::softmax_backward_range(y, dy, cols, dx, 0, rows_);
}

template <class T>
void layer_norm_forward(const T* x, std::size_t rows_, std::size_t dim, const T* gain,
                        const T* bias, T eps, T* y, T* mean, T* rstd) {
  rows::layer_norm_forward_range(x, dim, gain, bias, eps, y, mean, rstd, 0, rows_);
}

template <class T>
void layer_norm_backward(const T* dy, const T* x, const T* mean, const T* rstd, const T* gain,
                         std::size_t rows_, std::size_t dim, T* dx, T* dgain, T* dbias) {
  if (dx) rows::layer_norm_dx_range(dy, x, mean, rstd, gain, dim, dx, 0, rows_);
  if (dgain || dbias) rows::layer_norm_params_range(dy, x, mean, rstd, rows_, dim, dgain, dbias, 0, dim);
}

template <class T>
void relbias_gather(const T* S, std::size_t N, std::size_t radius, T* P) {
  rows::relbias_gather_rows(S, N, radius, P, 0, N);
}

template <class T>
void relbias_scatter_add(const T* dP, std::size_t N, std::size_t radius, T* dS) {
  rows::relbias_scatter_rows(dP, N, radius, dS, 0, N);
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

}  // namespace dad::kernels::serial
