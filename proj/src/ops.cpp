#include "dad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dad/kernels.hpp"

namespace dad {

namespace k = kernels::active;
using kernels::Trans;

namespace {

template <class T>
T* parent_grad(Node<T>& node, std::size_t i) {
  auto& p = *node.parents[i];
  return p.requires_grad ? p.grad_data() : nullptr;
}

template <class T>
const T* parent_value(Node<T>& node, std::size_t i) {
  return node.parents[i]->value.data();
}

template <class T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op) {
  if (!x.defined() || x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                         " tensor, got " + (x.defined() ? shape_str(x.shape()) : "<undefined>"));
  }
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

template <class T, class F, class G>
Tensor<T> unary_elementwise(const Tensor<T>& x, const char* op, F forward, G derivative) {
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return make_result<T>(x.shape(), std::move(out), op, {x}, [derivative](Node<T>& self) {
    T* dx = parent_grad(self, 0);
    if (!dx) return;
    const T* xv = parent_value(self, 0);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      dx[i] += self.grad[i] * derivative(xv[i], self.value[i]);
    }
  });
}

}  // namespace

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  if (b.dim(0) != K) {
    throw DimensionError("matmul: inner dimensions of " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " disagree");
  }
  std::vector<T> out(M * N);
  k::gemm(Trans::No, Trans::No, M, N, K, a.data().data(), b.data().data(), out.data(), false);
  return make_result<T>({M, N}, std::move(out), "matmul", {a, b}, [M, N, K](Node<T>& self) {
    if (T* da = parent_grad(self, 0)) {
      k::gemm(Trans::No, Trans::Yes, M, K, N, self.grad.data(), parent_value(self, 1), da, true);
    }
    if (T* db = parent_grad(self, 1)) {
      k::gemm(Trans::Yes, Trans::No, K, N, M, parent_value(self, 0), self.grad.data(), db, true);
    }
  });
}

template <class T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul_bt");
  require_rank(b, 2, "matmul_bt");
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(0);
  if (b.dim(1) != K) {
    throw DimensionError("matmul_bt: inner dimensions of " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + "^T disagree");
  }
  std::vector<T> out(M * N);
  k::gemm(Trans::No, Trans::Yes, M, N, K, a.data().data(), b.data().data(), out.data(), false);
  return make_result<T>({M, N}, std::move(out), "matmul_bt", {a, b}, [M, N, K](Node<T>& self) {
    if (T* da = parent_grad(self, 0)) {
      k::gemm(Trans::No, Trans::No, M, K, N, self.grad.data(), parent_value(self, 1), da, true);
    }
    if (T* db = parent_grad(self, 1)) {
      k::gemm(Trans::Yes, Trans::No, N, K, M, self.grad.data(), parent_value(self, 0), db, true);
    }
  });
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t M = x.dim(0), K = x.dim(1), N = w.dim(1);
  if (w.dim(0) != K) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(w.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{N}) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(w.shape()));
  }
  std::vector<T> out(M * N);
  k::gemm(Trans::No, Trans::No, M, N, K, x.data().data(), w.data().data(), out.data(), false);
  std::vector<Tensor<T>> parents{x, w};
  if (has_bias) {
    const auto b = bias.data();
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < N; ++j) out[i * N + j] += b[j];
    parents.push_back(bias);
  }
  return make_result<T>({M, N}, std::move(out), "linear", parents,
                        [M, N, K, has_bias](Node<T>& self) {
    if (T* dx = parent_grad(self, 0)) {
      k::gemm(Trans::No, Trans::Yes, M, K, N, self.grad.data(), parent_value(self, 1), dx, true);
    }
    if (T* dw = parent_grad(self, 1)) {
      k::gemm(Trans::Yes, Trans::No, K, N, M, parent_value(self, 0), self.grad.data(), dw, true);
    }
    if (has_bias) {
      if (T* db = parent_grad(self, 2)) {
        for (std::size_t i = 0; i < M; ++i)
          for (std::size_t j = 0; j < N; ++j) db[j] += self.grad[i * N + j];
      }
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return weighted_sum(a, T(1), b, T(1));
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return weighted_sum(a, T(1), b, T(-1));
}

template <class T>
Tensor<T> weighted_sum(const Tensor<T>& a, T alpha, const Tensor<T>& b, T beta) {
  require_same_shape(a, b, "weighted_sum");
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * av[i] + beta * bv[i];
  return make_result<T>(a.shape(), std::move(out), "weighted_sum", {a, b},
                        [alpha, beta](Node<T>& self) {
    const std::size_t n = self.value.size();
    if (T* da = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) da[i] += alpha * self.grad[i];
    if (T* db = parent_grad(self, 1))
      for (std::size_t i = 0; i < n; ++i) db[i] += beta * self.grad[i];
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>(a.shape(), std::move(out), "mul", {a, b}, [](Node<T>& self) {
    const std::size_t n = self.value.size();
    if (T* da = parent_grad(self, 0)) {
      const T* bv = parent_value(self, 1);
      for (std::size_t i = 0; i < n; ++i) da[i] += self.grad[i] * bv[i];
    }
    if (T* db = parent_grad(self, 1)) {
      const T* av = parent_value(self, 0);
      for (std::size_t i = 0; i < n; ++i) db[i] += self.grad[i] * av[i];
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(a.shape(), std::move(out), "scale", {a}, [factor](Node<T>& self) {
    if (T* da = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.value.size(); ++i) da[i] += factor * self.grad[i];
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.data()) total += v;
  return make_result<T>({1}, {total}, "sum", {a}, [](Node<T>& self) {
    if (T* da = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) da[i] += self.grad[0];
    }
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t R = x.dim(0), C = x.dim(1);
  std::vector<T> out(R * C);
  k::softmax_rows(x.data().data(), R, C, out.data());
  return make_result<T>(x.shape(), std::move(out), "softmax_rows", {x}, [R, C](Node<T>& self) {
    if (T* dx = parent_grad(self, 0)) {
      k::softmax_rows_backward(self.value.data(), self.grad.data(), R, C, dx);
    }
  });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_elementwise(
      x, "sigmoid",
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(0.70710678118654752440);
  constexpr T inv_sqrt2pi = T(0.39894228040143267794);
  return unary_elementwise(
      x, "gelu", [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
      [](T v, T) {
        return T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) +
               v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_elementwise(
      x, "relu", [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t D = x.shape().back();
  if (gain.shape() != Shape{D} || bias.shape() != Shape{D}) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match input " + shape_str(x.shape()));
  }
  const std::size_t R = x.numel() / D;
  std::vector<T> out(x.numel());
  auto stats = std::make_shared<std::vector<T>>(2 * R);
  k::layer_norm_forward(x.data().data(), R, D, gain.data().data(), bias.data().data(), eps,
                        out.data(), stats->data(), stats->data() + R);
  return make_result<T>(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                        [R, D, stats](Node<T>& self) {
    k::layer_norm_backward(self.grad.data(), parent_value(self, 0), stats->data(),
                           stats->data() + R, parent_value(self, 1), R, D,
                           parent_grad(self, 0), parent_grad(self, 1), parent_grad(self, 2));
  });
}

std::size_t conv1d_output_length(std::size_t length, std::size_t k, std::size_t stride,
                                 std::size_t padding) {
  if (stride == 0) throw ContractError("conv1d: stride must be >= 1");
  if (length + 2 * padding < k) {
    throw SequenceTooShortError("conv1d: sequence of length " + std::to_string(length) +
                                " with padding " + std::to_string(padding) +
                                " is shorter than kernel size " + std::to_string(k));
  }
  return (length + 2 * padding - k) / stride + 1;
}

template <class T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank(x, 2, "conv1d");
  require_rank(kernel, 3, "conv1d");
  const std::size_t Tin = x.dim(0), Cin = x.dim(1);
  const std::size_t K = kernel.dim(0), Cout = kernel.dim(2);
  if (kernel.dim(1) != Cin) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + " does not match kernel " +
                         shape_str(kernel.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{Cout}) {
    throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " does not match kernel " +
                         shape_str(kernel.shape()));
  }
  const std::size_t Tout = conv1d_output_length(Tin, K, stride, padding);
  const std::size_t width = K * Cin;
  auto col = std::make_shared<std::vector<T>>(Tout * width);
  k::im2col(x.data().data(), Tin, Cin, K, stride, padding, Tout, col->data());
  std::vector<T> out(Tout * Cout);
  k::gemm(Trans::No, Trans::No, Tout, Cout, width, col->data(), kernel.data().data(), out.data(),
          false);
  std::vector<Tensor<T>> parents{x, kernel};
  if (has_bias) {
    const auto b = bias.data();
    for (std::size_t t = 0; t < Tout; ++t)
      for (std::size_t c = 0; c < Cout; ++c) out[t * Cout + c] += b[c];
    parents.push_back(bias);
  }
  return make_result<T>({Tout, Cout}, std::move(out), "conv1d", parents,
                        [=](Node<T>& self) {
    if (T* dw = parent_grad(self, 1)) {
      k::gemm(Trans::Yes, Trans::No, width, Cout, Tout, col->data(), self.grad.data(), dw, true);
    }
    if (T* dx = parent_grad(self, 0)) {
      std::vector<T> dcol(Tout * width);
      k::gemm(Trans::No, Trans::Yes, Tout, width, Cout, self.grad.data(), parent_value(self, 1),
              dcol.data(), false);
      k::col2im_add(dcol.data(), Tin, Cin, K, stride, padding, Tout, dx);
    }
    if (has_bias) {
      if (T* db = parent_grad(self, 2)) {
        for (std::size_t t = 0; t < Tout; ++t)
          for (std::size_t c = 0; c < Cout; ++c) db[c] += self.grad[t * Cout + c];
      }
    }
  });
}

template <class T>
Tensor<T> upsample_linear(const Tensor<T>& x, std::size_t target_len) {
  require_rank(x, 2, "upsample_linear");
  if (target_len == 0) throw ContractError("upsample_linear: target length must be >= 1");
  const std::size_t Tin = x.dim(0), D = x.dim(1);
  struct Tap {
    std::size_t lo, hi;
    T w;
  };
  auto taps = std::make_shared<std::vector<Tap>>(target_len);
  for (std::size_t t = 0; t < target_len; ++t) {
    if (Tin == 1 || target_len == 1) {
      (*taps)[t] = {0, 0, T(0)};
      continue;
    }
    const double pos = static_cast<double>(t * (Tin - 1)) / static_cast<double>(target_len - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), Tin - 1);
    const std::size_t hi = std::min(lo + 1, Tin - 1);
    (*taps)[t] = {lo, hi, static_cast<T>(pos - static_cast<double>(lo))};
  }
  std::vector<T> out(target_len * D);
  const auto xv = x.data();
  for (std::size_t t = 0; t < target_len; ++t) {
    const auto& tap = (*taps)[t];
    for (std::size_t d = 0; d < D; ++d) {
      out[t * D + d] = (T(1) - tap.w) * xv[tap.lo * D + d] + tap.w * xv[tap.hi * D + d];
    }
  }
  return make_result<T>({target_len, D}, std::move(out), "upsample_linear", {x},
                        [taps, D](Node<T>& self) {
    T* dx = parent_grad(self, 0);
    if (!dx) return;
    for (std::size_t t = 0; t < taps->size(); ++t) {
      const auto& tap = (*taps)[t];
      for (std::size_t d = 0; d < D; ++d) {
        const T g = self.grad[t * D + d];
        dx[tap.lo * D + d] += (T(1) - tap.w) * g;
        dx[tap.hi * D + d] += tap.w * g;
      }
    }
  });
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, RandomSource& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  for (auto& m : *mask) m = rng.uniform() < rate ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * (*mask)[i];
  return make_result<T>(x.shape(), std::move(out), "dropout", {x}, [mask](Node<T>& self) {
    if (T* dx = parent_grad(self, 0))
      for (std::size_t i = 0; i < mask->size(); ++i) dx[i] += self.grad[i] * (*mask)[i];
  });
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const std::size_t R = x.dim(0), C = x.dim(1);
  if (count == 0 || start + count > C) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_str(x.shape()));
  }
  std::vector<T> out(R * count);
  const auto xv = x.data();
  for (std::size_t r = 0; r < R; ++r)
    std::copy_n(xv.data() + r * C + start, count, out.data() + r * count);
  return make_result<T>({R, count}, std::move(out), "slice_cols", {x},
                        [R, C, start, count](Node<T>& self) {
    if (T* dx = parent_grad(self, 0))
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < count; ++c) dx[r * C + start + c] += self.grad[r * count + c];
  });
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t R = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t C = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != R) {
      throw DimensionError("concat_cols: row counts differ (" + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()) + ")");
    }
    widths.push_back(p.dim(1));
    C += p.dim(1);
  }
  std::vector<T> out(R * C);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto pv = parts[i].data();
    for (std::size_t r = 0; r < R; ++r)
      std::copy_n(pv.data() + r * widths[i], widths[i], out.data() + r * C + offset);
    offset += widths[i];
  }
  return make_result<T>({R, C}, std::move(out), "concat_cols", parts,
                        [R, C, widths](Node<T>& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (T* dp = parent_grad(self, i)) {
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < widths[i]; ++c)
            dp[r * widths[i] + c] += self.grad[r * C + offset + c];
      }
      offset += widths[i];
    }
  });
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_rows");
  const std::size_t R = x.dim(0), C = x.dim(1);
  if (count == 0 || start + count > R) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " +
                         shape_str(x.shape()));
  }
  const auto xv = x.data();
  std::vector<T> out(xv.begin() + start * C, xv.begin() + (start + count) * C);
  return make_result<T>({count, C}, std::move(out), "slice_rows", {x},
                        [start, C](Node<T>& self) {
    if (T* dx = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.value.size(); ++i) dx[start * C + i] += self.grad[i];
  });
}

template <class T>
Tensor<T> pad_rows(const Tensor<T>& x, std::size_t length) {
  require_rank(x, 2, "pad_rows");
  const std::size_t R = x.dim(0), C = x.dim(1);
  if (length < R) {
    throw DimensionError("pad_rows: target length " + std::to_string(length) +
                         " is shorter than " + shape_str(x.shape()));
  }
  if (length == R) return x;
  std::vector<T> out(length * C, T(0));
  std::copy(x.data().begin(), x.data().end(), out.begin());
  return make_result<T>({length, C}, std::move(out), "pad_rows", {x}, [R, C](Node<T>& self) {
    if (T* dx = parent_grad(self, 0))
      for (std::size_t i = 0; i < R * C; ++i) dx[i] += self.grad[i];
  });
}

namespace {

template <class T>
void check_relative_operands(const Tensor<T>& q, const Tensor<T>& omega, std::size_t r_clip,
                             const char* op) {
  require_rank(q, 2, op);
  require_rank(omega, 2, op);
  if (omega.dim(0) != 2 * r_clip + 1 || omega.dim(1) != q.dim(1)) {
    throw DimensionError(std::string(op) + ": embedding table " + shape_str(omega.shape()) +
                         " does not match queries " + shape_str(q.shape()) + " with r_clip " +
                         std::to_string(r_clip));
  }
}

std::size_t table_row(std::size_t n, std::size_t m, std::size_t r_clip) {
  const auto delta = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(m);
  const auto r = static_cast<std::ptrdiff_t>(r_clip);
  return static_cast<std::size_t>(std::clamp(delta, -r, r) + r);
}

}  // namespace

template <class T>
Tensor<T> relative_bias_direct(const Tensor<T>& q, const Tensor<T>& omega, std::size_t r_clip) {
  check_relative_operands(q, omega, r_clip, "relative_bias_direct");
  const std::size_t N = q.dim(0), Dh = q.dim(1);
  const auto qv = q.data();
  const auto ov = omega.data();
  std::vector<T> out(N * N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = 0; m < N; ++m) {
      const std::size_t row = table_row(n, m, r_clip);
      T acc = 0;
      for (std::size_t d = 0; d < Dh; ++d) acc += qv[n * Dh + d] * ov[row * Dh + d];
      out[n * N + m] = acc;
    }
  }
  return make_result<T>({N, N}, std::move(out), "relative_bias_direct", {q, omega},
                        [N, Dh, r_clip](Node<T>& self) {
    T* dq = parent_grad(self, 0);
    T* domega = parent_grad(self, 1);
    const T* qv = parent_value(self, 0);
    const T* ov = parent_value(self, 1);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t m = 0; m < N; ++m) {
        const std::size_t row = table_row(n, m, r_clip);
        const T g = self.grad[n * N + m];
        for (std::size_t d = 0; d < Dh; ++d) {
          if (dq) dq[n * Dh + d] += g * ov[row * Dh + d];
          if (domega) domega[row * Dh + d] += g * qv[n * Dh + d];
        }
      }
    }
  });
}

template <class T>
Tensor<T> relative_bias_skewed(const Tensor<T>& q, const Tensor<T>& omega, std::size_t r_clip) {
  check_relative_operands(q, omega, r_clip, "relative_bias_skewed");
  const std::size_t N = q.dim(0), Dh = q.dim(1);
  const std::size_t radius = std::min(r_clip, N - 1);
  const std::size_t width = 2 * radius + 1;
  const std::size_t first_row = r_clip - radius;
  std::vector<T> rel(N * width);
  k::gemm(Trans::No, Trans::Yes, N, width, Dh, q.data().data(),
          omega.data().data() + first_row * Dh, rel.data(), false);
  std::vector<T> out(N * N);
  k::relbias_gather(rel.data(), N, radius, out.data());
  return make_result<T>({N, N}, std::move(out), "relative_bias_skewed", {q, omega},
                        [=](Node<T>& self) {
    std::vector<T> drel(N * width, T(0));
    k::relbias_scatter_add(self.grad.data(), N, radius, drel.data());
    if (T* dq = parent_grad(self, 0)) {
      k::gemm(Trans::No, Trans::No, N, Dh, width, drel.data(), parent_value(self, 1) + first_row * Dh,
              dq, true);
    }
    if (T* domega = parent_grad(self, 1)) {
      k::gemm(Trans::Yes, Trans::No, width, Dh, N, drel.data(), parent_value(self, 0),
              domega + first_row * Dh, true);
    }
  });
}

#define DAD_INSTANTIATE(T)                                                                     \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> matmul_bt<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                            \
  template Tensor<T> weighted_sum<T>(const Tensor<T>&, T, const Tensor<T>&, T);                \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                 \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                \
  template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                        \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                             \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                                \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);   \
  template Tensor<T> conv1d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                               std::size_t, std::size_t);                                      \
  template Tensor<T> upsample_linear<T>(const Tensor<T>&, std::size_t);                        \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, bool, RandomSource&);                \
  template Tensor<T> slice_cols<T>(const Tensor<T>&, std::size_t, std::size_t);                \
  template Tensor<T> concat_cols<T>(const std::vector<Tensor<T>>&);                            \
  template Tensor<T> slice_rows<T>(const Tensor<T>&, std::size_t, std::size_t);                \
  template Tensor<T> pad_rows<T>(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> relative_bias_direct<T>(const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> relative_bias_skewed<T>(const Tensor<T>&, const Tensor<T>&, std::size_t);

DAD_INSTANTIATE(float)
DAD_INSTANTIATE(double)

}  // namespace dad
