#include "dad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dad/random.hpp"

namespace dad {

double relative_gradient_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, RandomSource& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

template <class A, class N>
GradCheckResult compare_gradients(const std::function<Tensor<A>()>& f_analytic,
                                  std::vector<Tensor<A>> leaves,
                                  const std::function<Tensor<N>()>& f_numeric,
                                  std::vector<Tensor<N>> numeric_leaves,
                                  const GradCheckOptions& options) {
  if (leaves.size() != numeric_leaves.size()) {
    throw ContractError("compare_gradients: leaf lists differ in length");
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].shape() != numeric_leaves[i].shape()) {
      throw DimensionError("compare_gradients: leaf " + std::to_string(i) + " has shape " +
                           shape_str(leaves[i].shape()) + " vs " +
                           shape_str(numeric_leaves[i].shape()));
    }
    if (!leaves[i].requires_grad()) {
      throw ContractError("compare_gradients: leaf " + std::to_string(i) +
                          " does not require a gradient");
    }
    auto src = leaves[i].data();
    auto dst = numeric_leaves[i].mutable_data();
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<N>(src[j]);
  }

  for (auto& leaf : leaves) leaf.zero_grad();
  backward(f_analytic());

  struct Sample {
    std::size_t leaf, index;
    double analytic, numeric;
  };
  std::vector<Sample> samples;
  RandomSource rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto values = numeric_leaves[li].mutable_data();
    const auto grad = leaves[li].grad();
    for (std::size_t idx : pick_coords(values.size(), options.max_coords_per_leaf, rng)) {
      const N saved = values[idx];
      values[idx] = saved + static_cast<N>(options.eps);
      const double up = static_cast<double>(f_numeric().item());
      values[idx] = saved - static_cast<N>(options.eps);
      const double down = static_cast<double>(f_numeric().item());
      values[idx] = saved;
      samples.push_back({li, idx, grad.empty() ? 0.0 : static_cast<double>(grad[idx]),
                         (up - down) / (2.0 * options.eps)});
    }
  }

  double scale = 0.0;
  for (const auto& s : samples) scale = std::max(scale, std::abs(s.numeric));
  const double floor = std::max(options.absolute_floor, options.scale_floor * scale);

  GradCheckResult result;
  result.floor = floor;
  for (const auto& s : samples) {
    const double err = relative_gradient_error(s.analytic, s.numeric, floor);
    ++result.coords_checked;
    if (err > result.max_relative_error || result.coords_checked == 1) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      result.worst_leaf = s.leaf;
      result.worst_index = s.index;
      result.worst_analytic = s.analytic;
      result.worst_numeric = s.numeric;
    }
  }
  return result;
}

template <class T>
GradCheckResult finite_difference_check(const std::function<Tensor<T>()>& f,
                                        std::vector<Tensor<T>> leaves,
                                        const GradCheckOptions& options) {
  return compare_gradients<T, T>(f, leaves, f, leaves, options);
}

template <class T>
double finite_difference_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                               const Tensor<T>& x, double eps) {
  Tensor<T> leaf(x.shape(), std::vector<T>(x.data().begin(), x.data().end()), true);
  GradCheckOptions options;
  options.eps = eps;
  std::function<Tensor<T>()> g = [&] { return f(leaf); };
  return finite_difference_check<T>(g, {leaf}, options).max_relative_error;
}

template GradCheckResult compare_gradients<float, double>(const std::function<Tensor<float>()>&,
                                                          std::vector<Tensor<float>>,
                                                          const std::function<Tensor<double>()>&,
                                                          std::vector<Tensor<double>>,
                                                          const GradCheckOptions&);
template GradCheckResult compare_gradients<float, float>(const std::function<Tensor<float>()>&,
                                                         std::vector<Tensor<float>>,
                                                         const std::function<Tensor<float>()>&,
                                                         std::vector<Tensor<float>>,
                                                         const GradCheckOptions&);
template GradCheckResult compare_gradients<double, double>(const std::function<Tensor<double>()>&,
                                                           std::vector<Tensor<double>>,
                                                           const std::function<Tensor<double>()>&,
                                                           std::vector<Tensor<double>>,
                                                           const GradCheckOptions&);
template GradCheckResult finite_difference_check<float>(const std::function<Tensor<float>()>&,
                                                        std::vector<Tensor<float>>,
                                                        const GradCheckOptions&);
template GradCheckResult finite_difference_check<double>(const std::function<Tensor<double>()>&,
                                                         std::vector<Tensor<double>>,
                                                         const GradCheckOptions&);
template double finite_difference_check<float>(
    const std::function<Tensor<float>(const Tensor<float>&)>&, const Tensor<float>&, double);
template double finite_difference_check<double>(
    const std::function<Tensor<double>(const Tensor<double>&)>&, const Tensor<double>&, double);

}  // namespace dad
