#pragma once

// Row-range bodies shared by the serial and parallel kernel variants. A body
// called on [r0, r1) writes only the outputs owned by those rows (or columns,
// for the reductions), so splitting the range never changes results.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include "dad/kernels.hpp"

namespace dad::kernels::rows {

inline constexpr std::size_t kBlockK = 128;

// C[r0:r1, :] (+)= A * B with A row-major M x K (or K x M when a_trans), B K x N.
template <class T>
void gemm_rows(bool a_trans, std::size_t M, std::size_t N, std::size_t K, const T* A,
               const T* B, T* C, bool accumulate, std::size_t r0, std::size_t r1) {
  if (!accumulate) {
    for (std::size_t i = r0; i < r1; ++i) std::fill_n(C + i * N, N, T(0));
  }
  for (std::size_t kb = 0; kb < K; kb += kBlockK) {
    const std::size_t ke = std::min(K, kb + kBlockK);
    for (std::size_t i = r0; i < r1; ++i) {
      T* crow = C + i * N;
      for (std::size_t k = kb; k < ke; ++k) {
        const T a = a_trans ? A[k * M + i] : A[i * K + k];
        const T* brow = B + k * N;
        for (std::size_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  }
}

template <class T>
void transpose(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

template <class T>
void im2col_rows(const T* x, std::size_t T_in, std::size_t channels, std::size_t k,
                 std::size_t stride, std::size_t pad, T* col, std::size_t r0, std::size_t r1) {
  const std::size_t width = k * channels;
  for (std::size_t t = r0; t < r1; ++t) {
    T* out = col + t * width;
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + j) -
                                 static_cast<std::ptrdiff_t>(pad);
      T* dst = out + j * channels;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T_in)) {
        std::fill_n(dst, channels, T(0));
      } else {
        std::memcpy(dst, x + static_cast<std::size_t>(src) * channels, channels * sizeof(T));
      }
    }
  }
}

// Rows here are input positions u; contributions are gathered in ascending tap order.
template <class T>
void col2im_rows(const T* dcol, std::size_t channels, std::size_t k, std::size_t stride,
                 std::size_t pad, std::size_t T_out, T* dx, std::size_t r0, std::size_t r1) {
  const std::size_t width = k * channels;
  for (std::size_t u = r0; u < r1; ++u) {
    T* drow = dx + u * channels;
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t num = static_cast<std::ptrdiff_t>(u + pad) -
                                 static_cast<std::ptrdiff_t>(j);
      if (num < 0 || num % static_cast<std::ptrdiff_t>(stride) != 0) continue;
      const std::size_t t = static_cast<std::size_t>(num) / stride;
      if (t >= T_out) continue;
      const T* src = dcol + t * width + j * channels;
      for (std::size_t c = 0; c < channels; ++c) drow[c] += src[c];
    }
  }
}

template <class T>
void softmax_rows_range(const T* x, std::size_t cols, T* y, std::size_t r0, std::size_t r1) {
  for (std::size_t r = r0; r < r1; ++r) {
    const T* in = x + r * cols;
    T* out = y + r * cols;
    T mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    T total = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    }
    const T inv = T(1) / total;
    for (std::size_t j = 0; j < cols; ++j) out[j] *= inv;
  }
}

template <class T>
void softmax_backward_range(const T* y, const T* dy, std::size_t cols, T* dx, std::size_t r0,
                            std::size_t r1) {
  for (std::size_t r = r0; r < r1; ++r) {
    const T* yr = y + r * cols;
    const T* gr = dy + r * cols;
    T dot = 0;
    for (std::size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
    T* out = dx + r * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += yr[j] * (gr[j] - dot);
  }
}

template <class T>
void layer_norm_forward_range(const T* x, std::size_t dim, const T* gain, const T* bias, T eps,
                              T* y, T* mean, T* rstd, std::size_t r0, std::size_t r1) {
  for (std::size_t r = r0; r < r1; ++r) {
    const T* in = x + r * dim;
    T mu = 0;
    for (std::size_t j = 0; j < dim; ++j) mu += in[j];
    mu /= static_cast<T>(dim);
    T var = 0;
    for (std::size_t j = 0; j < dim; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<T>(dim);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    T* out = y + r * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] = (in[j] - mu) * rs * gain[j] + bias[j];
  }
}

template <class T>
void layer_norm_dx_range(const T* dy, const T* x, const T* mean, const T* rstd, const T* gain,
                         std::size_t dim, T* dx, std::size_t r0, std::size_t r1) {
  for (std::size_t r = r0; r < r1; ++r) {
    const T* g = dy + r * dim;
    const T* in = x + r * dim;
    T sum_g = 0;
    T sum_gx = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const T gj = g[j] * gain[j];
      const T xhat = (in[j] - mean[r]) * rstd[r];
      sum_g += gj;
      sum_gx += gj * xhat;
    }
    const T inv_d = T(1) / static_cast<T>(dim);
    T* out = dx + r * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      const T xhat = (in[j] - mean[r]) * rstd[r];
      out[j] += rstd[r] * (g[j] * gain[j] - sum_g * inv_d - xhat * sum_gx * inv_d);
    }
  }
}

// Column-range reduction over all rows for the affine parameters.
template <class T>
void layer_norm_params_range(const T* dy, const T* x, const T* mean, const T* rstd,
                             std::size_t rows, std::size_t dim, T* dgain, T* dbias,
                             std::size_t c0, std::size_t c1) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = dy + r * dim;
    const T* in = x + r * dim;
    for (std::size_t j = c0; j < c1; ++j) {
      if (dgain) dgain[j] += g[j] * (in[j] - mean[r]) * rstd[r];
      if (dbias) dbias[j] += g[j];
    }
  }
}

inline std::size_t clamp_offset(std::size_t n, std::size_t m, std::size_t radius) {
  const std::ptrdiff_t delta = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(m);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(radius);
  return static_cast<std::size_t>(std::clamp(delta, -r, r) + r);
}

template <class T>
void relbias_gather_rows(const T* S, std::size_t N, std::size_t radius, T* P, std::size_t r0,
                         std::size_t r1) {
  const std::size_t width = 2 * radius + 1;
  for (std::size_t n = r0; n < r1; ++n) {
    const T* srow = S + n * width;
    T* prow = P + n * N;
    for (std::size_t m = 0; m < N; ++m) prow[m] = srow[clamp_offset(n, m, radius)];
  }
}

template <class T>
void relbias_scatter_rows(const T* dP, std::size_t N, std::size_t radius, T* dS, std::size_t r0,
                          std::size_t r1) {
  const std::size_t width = 2 * radius + 1;
  for (std::size_t n = r0; n < r1; ++n) {
    const T* grow = dP + n * N;
    T* srow = dS + n * width;
    for (std::size_t m = 0; m < N; ++m) srow[clamp_offset(n, m, radius)] += grow[m];
  }
}

}  // namespace dad::kernels::rows
