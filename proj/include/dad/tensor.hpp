#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dad/error.hpp"

namespace dad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Recording of gradient history is on by default; NoGradGuard turns it off
// for the current thread (evaluation, finite differences, optimizer updates).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// One vertex of the computation graph. `backward` reads `grad` and
// accumulates into the parents that require gradients.
template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
  bool is_leaf() const { return !backward; }
};

// Dense row-major tensor handle. Copies share the underlying node; values are
// not modified once produced by an op, except for leaves (parameters) through
// mutable_data().
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  const T& at(std::size_t flat) const { return node_->value.at(flat); }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return {node_->grad_data(), node_->value.size()}; }
  void zero_grad() { node_->grad.clear(); }

  const char* op() const { return node_->op; }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

  // Same values, no history.
  Tensor detach() const;

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds the result of an op. History (parents + backward) is recorded only
// when grad mode is on and at least one parent requires a gradient.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, const char* op,
                      std::initializer_list<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward_fn);

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, const char* op,
                      const std::vector<Tensor<T>>& parents,
                      std::function<void(Node<T>&)> backward_fn);

// Reverse pass from a scalar. Leaves accumulate into their grad buffers;
// intermediate gradient buffers are released once propagated.
template <class T>
void backward(const Tensor<T>& loss);

// Name of the earliest op (in forward order) in `root`'s history whose output
// contains a NaN or Inf, or nullptr when every value is finite.
template <class T>
const char* first_nonfinite_op(const Tensor<T>& root);

// Learnable tensor with a hierarchical name. Frozen parameters still pass
// gradients through to their inputs but are never updated by an optimizer.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)) {}
};

template <class T>
using ParameterList = std::vector<Parameter<T>*>;

}  // namespace dad
