#include "usmae/ndgrad/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "usmae/errors.hpp"

namespace usmae::ndgrad {

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_id{1};
}  // namespace

std::size_t numel(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::uint64_t next_node_id() { return g_next_id.fetch_add(1, std::memory_order_relaxed); }

template <class T>
void check_finite(std::span<const T> values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << "non-finite value " << values[i] << " at index " << i << " produced by " << op;
      throw NumericError(os.str());
    }
  }
}

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape dims, bool requires_grad) {
  return full(std::move(dims), T(0), requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::full(Shape dims, T value, bool requires_grad) {
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_string(dims));
  }
  auto node = std::make_shared<Node<T>>();
  node->data.assign(ndgrad::numel(dims), value);
  node->dims = std::move(dims);
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <class T>
BasicTensor<T> BasicTensor<T>::from(Shape dims, std::vector<T> values, bool requires_grad) {
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_string(dims));
  }
  if (ndgrad::numel(dims) != values.size()) {
    throw ShapeError("tensor dims " + shape_string(dims) + " hold " + std::to_string(ndgrad::numel(dims)) +
                     " values, got " + std::to_string(values.size()));
  }
  check_finite<T>(values, "tensor construction");
  auto node = std::make_shared<Node<T>>();
  node->dims = std::move(dims);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <class T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <class T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(dims()));
  return node_->data[0];
}

template <class T>
BasicTensor<T> BasicTensor<T>::detach() const {
  auto node = std::make_shared<Node<T>>();
  node->dims = node_->dims;
  node->data = node_->data;
  return BasicTensor(std::move(node));
}

template <class T>
BasicTensor<T> BasicTensor<T>::clone() const {
  auto out = detach();
  out.set_requires_grad(requires_grad());
  return out;
}

template <class T>
std::vector<Node<T>*> topological_order(const BasicTensor<T>& root) {
  std::vector<Node<T>*> order;
  if (!root.defined()) return order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS; graphs from deep transformer stacks are long.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

template <class T>
std::vector<GraphRecord> record_graph(const BasicTensor<T>& root) {
  std::vector<GraphRecord> records;
  for (Node<T>* node : topological_order(root)) {
    GraphRecord rec{node->id, node->op, {}};
    for (const auto& in : node->inputs) rec.input_ids.push_back(in->id);
    records.push_back(std::move(rec));
  }
  return records;
}

template <class T>
void BasicTensor<T>::backward(bool keep_graph) const {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_string(dims()));
  }
  if (!requires_grad()) throw ContractError("backward() on a tensor that does not require grad");
  auto order = topological_order(*this);
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  if (!keep_graph) {
    for (Node<T>* node : order) {
      if (node->is_leaf()) continue;
      node->backward_fn = nullptr;
      node->inputs.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template std::vector<Node<float>*> topological_order(const BasicTensor<float>&);
template std::vector<Node<double>*> topological_order(const BasicTensor<double>&);
template std::vector<GraphRecord> record_graph(const BasicTensor<float>&);
template std::vector<GraphRecord> record_graph(const BasicTensor<double>&);
template void check_finite<float>(std::span<const float>, const char*);
template void check_finite<double>(std::span<const double>, const char*);

}  // namespace usmae::ndgrad
