#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace retex {

// Dense shapes; image-like tensors use the (N, C, H, W) convention.
using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> value;
  bool requires_grad = false;
  std::vector<S> grad;  // allocated lazily, same extent as value

  // Graph linkage. A node with a backward_fn is an op output; a node
  // without one is a leaf.
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
  bool backward_done = false;
  const char* op_name = "leaf";

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), S(0));
  }
};

}  // namespace detail

// Gradient recording can be suspended (inference, frozen networks).
bool grad_enabled();
void set_grad_enabled(bool enabled);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename S>
class Tensor {
 public:
  using Impl = detail::TensorImpl<S>;

  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, S value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<S> data,
                          bool requires_grad = false);
  static Tensor scalar(S value);

  // Op outputs record their parents and a rule that propagates this
  // node's grad into the parents' grads. Falls back to a plain value
  // when recording is off or no parent needs gradients.
  static Tensor make_op(const Shape& shape, std::vector<S> value,
                        std::vector<Tensor> parents,
                        std::function<void(Impl&)> backward_fn,
                        const char* op_name);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int extent(int axis) const { return impl_->shape[axis]; }
  int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }
  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  bool is_leaf() const { return impl_ && impl_->parents.empty(); }

  const std::vector<S>& value() const& { return impl_->value; }
  // Binding the reference past a temporary's lifetime is a bug; name the
  // tensor first.
  const std::vector<S>& value() const&& = delete;
  // Direct write access for initialization and optimizer updates; graph
  // ops never mutate values through this.
  std::vector<S>& raw_value() { return impl_->value; }
  S item() const;

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<S>& grad() const&;
  const std::vector<S>& grad() const&& = delete;
  void zero_grad();
  void set_requires_grad(bool requires_grad) {
    impl_->requires_grad = requires_grad;
  }

  // Reverse-mode pass from a scalar root. Each recorded node runs its
  // rule exactly once; running a graph twice without re-recording throws.
  void backward() const;

  // Value copy detached from the graph.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  Impl* impl() const { return impl_.get(); }
  std::shared_ptr<Impl> impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

// Recorded operations of one backward pass, parents before consumers.
template <typename S>
struct Graph {
  std::vector<detail::TensorImpl<S>*> order;

  static Graph record(const Tensor<S>& root);
  // Propagates grads in reverse topological order; the root's grad must
  // already be seeded.
  void run_backward();
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace retex
