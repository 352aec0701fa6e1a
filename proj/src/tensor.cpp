#include "dad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dad {

namespace {
thread_local bool g_grad_enabled = true;

template <class T>
bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + shape_str(shape) + " has a zero extent");
  }
  node_ = std::make_shared<Node<T>>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, const char* op,
                      const std::vector<Tensor<T>>& parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
#ifndef NDEBUG
  if (!all_finite(node->value)) {
    bool inputs_finite = true;
    for (const auto& p : parents) inputs_finite = inputs_finite && all_finite(p.node()->value);
    if (inputs_finite) {
      throw NumericalError(std::string("op '") + op + "' produced a non-finite value from finite inputs");
    }
  }
#endif
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, const char* op,
                      std::initializer_list<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  return make_result(std::move(shape), std::move(value), op, std::vector<Tensor<T>>(parents),
                     std::move(backward_fn));
}

namespace {

// Post-order over nodes that require gradients; iterative to survive deep graphs.
template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root, bool only_grad) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* child = node->parents[next++].get();
      if ((!only_grad || child->requires_grad) && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

template <class T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss without recorded history");
  }
  NoGradGuard no_grad;
  auto order = topo_order(loss.node(), true);
  loss.node()->grad_data()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->is_leaf()) continue;
    if (!node->grad.empty()) node->backward(*node);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

template <class T>
const char* first_nonfinite_op(const Tensor<T>& root) {
  if (!root.defined()) return nullptr;
  for (Node<T>* node : topo_order(root.node(), false)) {
    if (!all_finite(node->value)) return node->op;
  }
  return nullptr;
}

#define DAD_INSTANTIATE(T)                                                                 \
  template class Tensor<T>;                                                                \
  template Tensor<T> make_result<T>(Shape, std::vector<T>, const char*,                    \
                                    const std::vector<Tensor<T>>&,                         \
                                    std::function<void(Node<T>&)>);                        \
  template Tensor<T> make_result<T>(Shape, std::vector<T>, const char*,                    \
                                    std::initializer_list<Tensor<T>>,                      \
                                    std::function<void(Node<T>&)>);                        \
  template void backward<T>(const Tensor<T>&);                                             \
  template const char* first_nonfinite_op<T>(const Tensor<T>&);

DAD_INSTANTIATE(float)
DAD_INSTANTIATE(double)

}  // namespace dad
