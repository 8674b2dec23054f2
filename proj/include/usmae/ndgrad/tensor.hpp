#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace usmae::ndgrad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& dims);
std::string shape_string(const Shape& dims);

// Global switch for graph recording on the current thread.
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

std::uint64_t next_node_id();

template <class T>
struct Node {
  Shape dims;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::uint64_t id = next_node_id();
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

// One executed operation in topological order.
struct GraphRecord {
  std::uint64_t output_id;
  const char* op;
  std::vector<std::uint64_t> input_ids;
};

// Dense row-major tensor with optional reverse-mode gradient tracking. Copies
// share storage; use clone() or detach() for an independent value.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static BasicTensor zeros(Shape dims, bool requires_grad = false);
  static BasicTensor full(Shape dims, T value, bool requires_grad = false);
  static BasicTensor from(Shape dims, std::vector<T> values, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& dims() const { return node_->dims; }
  std::size_t rank() const { return node_->dims.size(); }
  std::size_t dim(std::size_t axis) const { return node_->dims.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T operator[](std::size_t i) const { return node_->data[i]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  const char* op() const { return node_->op; }
  std::uint64_t id() const { return node_->id; }

  // Independent copy of the values, no graph, requires_grad off.
  BasicTensor detach() const;
  // Independent copy of the values keeping requires_grad.
  BasicTensor clone() const;

  // Reverse pass from a scalar. Leaf gradients accumulate; intermediate
  // state is released afterwards unless keep_graph is set.
  void backward(bool keep_graph = false) const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Nodes reachable from root through requires_grad edges, inputs first.
template <class T>
std::vector<Node<T>*> topological_order(const BasicTensor<T>& root);

template <class T>
std::vector<GraphRecord> record_graph(const BasicTensor<T>& root);

// Throws NumericError naming `op` if any value is NaN or Inf.
template <class T>
void check_finite(std::span<const T> values, const char* op);

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace usmae::ndgrad
