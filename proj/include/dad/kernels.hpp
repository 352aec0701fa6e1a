#pragma once

// Dense kernels behind the differentiable ops. Every kernel exists twice with
// identical signatures: `serial` is the single-threaded reference and
// `parallel` splits the work with OpenMP. Each output element is produced by
// exactly one thread with the same accumulation order as the serial loop, so
// the two variants agree bitwise.

#include <cstddef>

namespace dad::kernels {

enum class Trans { No, Yes };

// Work (multiply-adds) below which the parallel variants stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

#define DAD_KERNEL_DECLS                                                                       \
  /* C = op(A) * op(B), or C += ... when accumulate. Row-major; op(A) is M x K,           */   \
  /* op(B) is K x N.                                                                         */ \
  template <class T>                                                                           \
  void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, const T* A,      \
            const T* B, T* C, bool accumulate);                                                \
                                                                                               \
  /* Unfolds x[T x Cin] into col[Tout x (k*Cin)] for a strided, zero-padded window.       */   \
  template <class T>                                                                           \
  void im2col(const T* x, std::size_t T_in, std::size_t channels, std::size_t k,              \
              std::size_t stride, std::size_t pad, std::size_t T_out, T* col);                 \
                                                                                               \
  /* Adjoint of im2col: dx += fold(dcol).                                                 */   \
  template <class T>                                                                           \
  void col2im_add(const T* dcol, std::size_t T_in, std::size_t channels, std::size_t k,       \
                  std::size_t stride, std::size_t pad, std::size_t T_out, T* dx);              \
                                                                                               \
  template <class T>                                                                           \
  void softmax_rows(const T* x, std::size_t rows, std::size_t cols, T* y);                    \
                                                                                               \
  /* dx += y * (dy - <y, dy>) per row.                                                    */   \
  template <class T>                                                                           \
  void softmax_rows_backward(const T* y, const T* dy, std::size_t rows, std::size_t cols,     \
                             T* dx);                                                           \
                                                                                               \
  template <class T>                                                                           \
  void layer_norm_forward(const T* x, std::size_t rows, std::size_t dim, const T* gain,       \
                          const T* bias, T eps, T* y, T* mean, T* rstd);                       \
                                                                                               \
  /* Accumulating backward; any of dx, dgain, dbias may be null.                          */   \
  template <class T>                                                                           \
  void layer_norm_backward(const T* dy, const T* x, const T* mean, const T* rstd,             \
                           const T* gain, std::size_t rows, std::size_t dim, T* dx, T* dgain,  \
                           T* dbias);                                                          \
                                                                                               \
  /* P[n, m] = S[n, clamp(n - m, -radius, radius) + radius], S is N x (2*radius + 1).     */   \
  template <class T>                                                                           \
  void relbias_gather(const T* S, std::size_t N, std::size_t radius, T* P);                   \
                                                                                               \
  template <class T>                                                                           \
  void relbias_scatter_add(const T* dP, std::size_t N, std::size_t radius, T* dS);

namespace serial {
DAD_KERNEL_DECLS
}  // namespace serial

namespace parallel {
DAD_KERNEL_DECLS
}  // namespace parallel

#undef DAD_KERNEL_DECLS

// The variant used by the ops layer.
namespace active = parallel;

}  // namespace dad::kernels
