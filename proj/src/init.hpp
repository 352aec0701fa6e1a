#pragma once

#include <cmath>
#include <string>

#include "dad/random.hpp"
#include "dad/tensor.hpp"

namespace dad::init {

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <class T>
Parameter<T> fan_in_uniform(std::string name, Shape shape, std::size_t fan_in, RandomSource& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Parameter<T>(std::move(name), Tensor<T>(std::move(shape), std::move(values), true));
}

template <class T>
Parameter<T> normal(std::string name, Shape shape, double stddev, RandomSource& rng) {
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(rng.normal(0.0, stddev));
  return Parameter<T>(std::move(name), Tensor<T>(std::move(shape), std::move(values), true));
}

template <class T>
Parameter<T> constant(std::string name, Shape shape, T value) {
  return Parameter<T>(std::move(name), Tensor<T>::full(std::move(shape), value, true));
}

}  // namespace dad::init
