// Copyright 2026 The demsr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense NCHW tensors with define-by-run reverse-mode differentiation.
//
// Ops record themselves on the graph installed by a GraphScope on the calling
// thread, but only when at least one operand needs a gradient (a leaf marked
// requires_grad, or the output of an earlier recorded op). Without an active
// scope every op is a plain forward computation.
//
//   Graph<float> graph;
//   GraphScope<float> scope(graph);
//   auto loss = mse_loss(model.forward(x), y);
//   graph.backward(loss);   // accumulates into parameter grads

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace demsr {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
class Graph;

namespace detail {

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  // Producer node, if this tensor is the output of a recorded op.
  const Graph<T>* graph = nullptr;
  std::size_t node = 0;
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using Storage = detail::TensorStorage<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1, 1, 1, 1}, value); }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t size() const { return s_->data.size(); }

  std::span<const T> data() const { return s_->data; }
  // Parameters are written by initializers and the optimizer only.
  std::span<T> mutable_data() { return s_->data; }
  T item() const;

  std::size_t index(int n, int c, int h, int w) const {
    const Shape& s = s_->shape;
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
  }
  T at(int n, int c, int h, int w) const { return s_->data[index(n, c, h, w)]; }

  bool requires_grad() const { return s_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    s_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return !s_->grad.empty(); }
  std::span<const T> grad() const { return s_->grad; }
  // Allocates a zero gradient when none exists yet.
  std::span<T> mutable_grad();
  void zero_grad();

  bool is_leaf() const { return s_->graph == nullptr; }
  std::optional<std::size_t> node_id() const;

  // Fresh leaf holding a copy of the values.
  Tensor detach() const;

  const std::shared_ptr<Storage>& storage() const { return s_; }
  static Tensor from_storage(std::shared_ptr<Storage> s) {
    Tensor t;
    t.s_ = std::move(s);
    return t;
  }

 private:
  std::shared_ptr<Storage> s_;
};

// Append-only tape. Nodes are stored in recording order, which is a
// topological order because an op can only consume existing tensors.
template <typename T>
class Graph {
 public:
  using StoragePtr = std::shared_ptr<detail::TensorStorage<T>>;

  Graph() = default;
  ~Graph() { clear(); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const char* op_name(std::size_t node) const { return nodes_.at(node).op; }

  void record(const char* op, std::vector<StoragePtr> inputs, const StoragePtr& output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every node up to the loss node once,
  // in reverse order. Intermediate gradients are reset on entry; leaf
  // gradients accumulate.
  void backward(const Tensor<T>& loss);

  // Drops the tape; recorded outputs become plain leaves.
  void clear();

 private:
  struct Node {
    const char* op;
    std::vector<StoragePtr> inputs;
    StoragePtr output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

template <typename T>
Graph<T>*& active_graph();

// Installs a graph as the recording target for the current thread.
template <typename T>
class GraphScope {
 public:
  explicit GraphScope(Graph<T>& graph) : previous_(active_graph<T>()) {
    active_graph<T>() = &graph;
  }
  ~GraphScope() { active_graph<T>() = previous_; }
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph<T>* previous_;
};

namespace detail {

template <typename T>
bool needs_grad(const Tensor<T>& t) {
  return t.defined() && (t.requires_grad() || !t.is_leaf());
}

// The active graph if any operand needs a gradient, otherwise nullptr.
template <typename T>
Graph<T>* recording_graph(std::initializer_list<const Tensor<T>*> operands) {
  Graph<T>* g = active_graph<T>();
  if (g == nullptr) return nullptr;
  for (const Tensor<T>* t : operands)
    if (t != nullptr && needs_grad(*t)) return g;
  return nullptr;
}

// Gradient buffer of an operand inside a backward rule, or nullptr when the
// operand does not take part in differentiation.
template <typename T>
T* grad_slot(TensorStorage<T>* s) {
  if (s == nullptr || (!s->requires_grad && s->graph == nullptr)) return nullptr;
  if (s->grad.size() != s->data.size()) s->grad.assign(s->data.size(), T(0));
  return s->grad.data();
}

// Neumaier-compensated summation in double; reductions that feed a loss use
// it so finite-difference probes are not drowned by accumulation error.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

// NaN/Inf detection at op boundaries. On by default in builds without
// NDEBUG; tests switch it on explicitly.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

template <typename T>
void check_finite(const Tensor<T>& t, const char* op);

// Elementwise binary ops. b either matches a, or is (1|n, 1|c, 1, 1) and is
// broadcast over the remaining axes.
enum class BinaryOp { kAdd, kSub, kMul };

template <typename T>
Tensor<T> ew_binary(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return ew_binary(BinaryOp::kAdd, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return ew_binary(BinaryOp::kSub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return ew_binary(BinaryOp::kMul, a, b);
}

// x * factor for a constant factor.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// Arithmetic mean of all elements as a (1,1,1,1) tensor.
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x);

// Double-precision copy, used by verification code.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> v(x.data().begin(), x.data().end());
  return Tensor<To>(x.shape(), std::move(v));
}

}  // namespace demsr
