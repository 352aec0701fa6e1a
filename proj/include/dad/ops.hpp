#pragma once

// Differentiable primitives. Every op records its analytic backward when any
// input requires a gradient. Matrices are rank-2 row-major [rows x cols];
// sequences are [time x channels].

#include <cstddef>
#include <vector>

#include "dad/random.hpp"
#include "dad/tensor.hpp"

namespace dad {

template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// a * b^T with a [M x K], b [N x K].
template <class T> Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b);
// x * w (+ bias broadcast over rows). `bias` may be undefined.
template <class T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T factor);
// alpha * a + beta * b, same shapes.
template <class T> Tensor<T> weighted_sum(const Tensor<T>& a, T alpha, const Tensor<T>& b, T beta);

template <class T> Tensor<T> sum(const Tensor<T>& a);
template <class T> Tensor<T> mean(const Tensor<T>& a);

template <class T> Tensor<T> softmax_rows(const Tensor<T>& x);
template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> gelu(const Tensor<T>& x);
template <class T> Tensor<T> relu(const Tensor<T>& x);

// Normalizes the last dimension, then applies gain and bias ([D] each).
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

// Temporal cross-correlation with zero padding. x [T x Cin],
// kernel [k x Cin x Cout], bias [Cout] (may be undefined) -> [T' x Cout],
// T' = floor((T + 2*padding - k) / stride) + 1.
template <class T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

std::size_t conv1d_output_length(std::size_t length, std::size_t k, std::size_t stride,
                                 std::size_t padding);

// Align-corners linear interpolation along time: [T' x D] -> [target_len x D].
template <class T> Tensor<T> upsample_linear(const Tensor<T>& x, std::size_t target_len);

// Inverted dropout; identity when !training or rate == 0.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, RandomSource& rng);

template <class T> Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count);
template <class T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <class T> Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t count);
// Appends zero rows up to `length`.
template <class T> Tensor<T> pad_rows(const Tensor<T>& x, std::size_t length);

// Query-dependent relative positional bias, P[n, m] = sum_d q[n, d] *
// omega[clamp(n - m, -r_clip, r_clip) + r_clip, d]; omega is
// [(2 r_clip + 1) x D_h].
//
// The direct form loops over every (n, m, d). The skewed form multiplies q by
// only the offset rows reachable at this length (one N x (2r + 1) product,
// r = min(r_clip, N - 1)) and realigns the result by relative offset, so no
// N x N x D_h intermediate is built.
template <class T>
Tensor<T> relative_bias_direct(const Tensor<T>& q, const Tensor<T>& omega, std::size_t r_clip);
template <class T>
Tensor<T> relative_bias_skewed(const Tensor<T>& q, const Tensor<T>& omega, std::size_t r_clip);

}  // namespace dad
