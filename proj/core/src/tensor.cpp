#include "retex/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace retex {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool enabled) { g_grad_enabled = enabled; }

template <typename S>
Tensor<S> Tensor<S>::zeros(const Shape& shape, bool requires_grad) {
  return from_data(shape, std::vector<S>(shape_numel(shape), S(0)),
                   requires_grad);
}

template <typename S>
Tensor<S> Tensor<S>::full(const Shape& shape, S value, bool requires_grad) {
  return from_data(shape, std::vector<S>(shape_numel(shape), value),
                   requires_grad);
}

template <typename S>
Tensor<S> Tensor<S>::from_data(const Shape& shape, std::vector<S> data,
                               bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
    throw std::invalid_argument("tensor: element count " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = shape;
  impl->value = std::move(data);
  impl->requires_grad = requires_grad;
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

template <typename S>
Tensor<S> Tensor<S>::scalar(S value) {
  return from_data({1}, {value});
}

template <typename S>
Tensor<S> Tensor<S>::make_op(const Shape& shape, std::vector<S> value,
                             std::vector<Tensor> parents,
                             std::function<void(Impl&)> backward_fn,
                             const char* op_name) {
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) {
      if (p.requires_grad()) {
        needs_grad = true;
        break;
      }
    }
  }
  Tensor out = from_data(shape, std::move(value), needs_grad);
  out.impl_->op_name = op_name;
  if (needs_grad) {
    out.impl_->parents.reserve(parents.size());
    for (auto& p : parents) out.impl_->parents.push_back(p.impl_ptr());
    out.impl_->backward_fn = std::move(backward_fn);
  }
  return out;
}

template <typename S>
S Tensor<S>::item() const {
  if (numel() != 1) {
    throw std::logic_error("tensor: item() requires a single element, shape " +
                           shape_str(shape()));
  }
  return impl_->value[0];
}

template <typename S>
const std::vector<S>& Tensor<S>::grad() const& {
  if (!has_grad()) {
    throw std::logic_error("tensor: no gradient present");
  }
  return impl_->grad;
}

template <typename S>
void Tensor<S>::zero_grad() {
  if (!impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
  }
}

template <typename S>
Tensor<S> Tensor<S>::detach() const {
  return from_data(shape(), impl_->value, false);
}

template <typename S>
Tensor<S> Tensor<S>::clone(bool requires_grad) const {
  return from_data(shape(), impl_->value, requires_grad);
}

template <typename S>
Graph<S> Graph<S>::record(const Tensor<S>& root) {
  Graph g;
  std::unordered_set<detail::TensorImpl<S>*> visited;
  // Iterative post-order DFS so deep chains do not overflow the stack.
  struct Frame {
    detail::TensorImpl<S>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  auto* root_impl = root.impl();
  if (root_impl == nullptr) throw std::logic_error("backward: empty tensor");
  stack.push_back({root_impl, 0});
  visited.insert(root_impl);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      auto* parent = f.node->parents[f.next_parent++].get();
      if (visited.insert(parent).second) {
        stack.push_back({parent, 0});
      }
    } else {
      g.order.push_back(f.node);
      stack.pop_back();
    }
  }
  return g;
}

template <typename S>
void Graph<S>::run_backward() {
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl<S>* node = *it;
    if (!node->backward_fn) continue;
    if (node->backward_done) {
      throw std::logic_error(
          std::string("backward: node '") + node->op_name +
          "' already consumed; re-record the graph before a second pass");
    }
    node->ensure_grad();
    node->backward_fn(*node);
    node->backward_done = true;
  }
}

template <typename S>
void Tensor<S>::backward() const {
  if (numel() != 1) {
    throw std::logic_error("backward: root must be scalar, shape " +
                           shape_str(shape()));
  }
  if (!requires_grad()) {
    throw std::logic_error("backward: root does not require gradients");
  }
  Graph<S> graph = Graph<S>::record(*this);
  impl_->ensure_grad();
  impl_->grad[0] += S(1);
  graph.run_backward();
}

template class Tensor<float>;
template class Tensor<double>;
template struct Graph<float>;
template struct Graph<double>;

}  // namespace retex
