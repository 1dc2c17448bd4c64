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

#include "tensor.hpp"

#include <atomic>
#include <cmath>

#include "errors.hpp"

namespace demsr {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

namespace {

void check_shape(const Shape& s) {
  if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0)
    throw DimensionError("tensor shape must be positive, got " + s.str());
}

#ifdef NDEBUG
std::atomic<bool> g_finite_checks{false};
#else
std::atomic<bool> g_finite_checks{true};
#endif

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(std::memory_order_relaxed); }

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!finite_checks_enabled()) return;
  for (T v : t.data())
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : s_(std::make_shared<Storage>()) {
  check_shape(shape);
  s_->shape = shape;
  s_->data.assign(shape.size(), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<Storage>()) {
  check_shape(shape);
  if (values.size() != shape.size())
    throw DimensionError("tensor of shape " + shape.str() + " needs " +
                         std::to_string(shape.size()) + " values, got " +
                         std::to_string(values.size()));
  s_->shape = shape;
  s_->data = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape().str());
  return s_->data[0];
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (s_->grad.size() != s_->data.size()) s_->grad.assign(s_->data.size(), T(0));
  return s_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  s_->grad.assign(s_->data.size(), T(0));
}

template <typename T>
std::optional<std::size_t> Tensor<T>::node_id() const {
  if (s_->graph == nullptr) return std::nullopt;
  return s_->node;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), s_->data);
}

template <typename T>
Graph<T>*& active_graph() {
  thread_local Graph<T>* graph = nullptr;
  return graph;
}

template <typename T>
void Graph<T>::record(const char* op, std::vector<StoragePtr> inputs, const StoragePtr& output,
                      std::function<void()> backward) {
  output->graph = this;
  output->node = nodes_.size();
  nodes_.push_back(Node{op, std::move(inputs), output, std::move(backward)});
}

template <typename T>
void Graph<T>::clear() {
  for (auto& node : nodes_)
    if (node.output->graph == this) node.output->graph = nullptr;
  nodes_.clear();
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.shape() != Shape{1, 1, 1, 1})
    throw ContractError("backward() needs a scalar (1,1,1,1) loss");
  const auto* s = loss.storage().get();
  if (s->graph != this || s->node >= nodes_.size() || nodes_[s->node].output.get() != s)
    throw ContractError("backward(): loss was not recorded on this graph");

  const std::size_t last = s->node;
  for (std::size_t i = 0; i <= last; ++i) {
    auto& out = *nodes_[i].output;
    out.grad.assign(out.data.size(), T(0));
  }
  nodes_[last].output->grad[0] = T(1);
  for (std::size_t i = last + 1; i-- > 0;) nodes_[i].backward();
}

template <typename T>
Tensor<T> ew_binary(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool same = sa == sb;
  const bool bcast = !same && sb.h == 1 && sb.w == 1 && (sb.n == 1 || sb.n == sa.n) &&
                     (sb.c == 1 || sb.c == sa.c);
  if (!same && !bcast)
    throw DimensionError("elementwise op: shapes " + sa.str() + " and " + sb.str() +
                         " are incompatible");

  Tensor<T> out(sa);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.mutable_data().data();
  const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;

  // Offset of the b element paired with plane (n, c).
  auto b_index = [&](int n, int c) {
    return static_cast<std::size_t>(sb.n == 1 ? 0 : n) * sb.c + (sb.c == 1 ? 0 : c);
  };

  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * sa.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T bv = same ? pb[base + i] : pb[b_index(n, c)];
        switch (op) {
          case BinaryOp::kAdd: po[base + i] = pa[base + i] + bv; break;
          case BinaryOp::kSub: po[base + i] = pa[base + i] - bv; break;
          case BinaryOp::kMul: po[base + i] = pa[base + i] * bv; break;
        }
      }
    }
  }
  check_finite(out, "ew_binary");

  if (Graph<T>* g = detail::recording_graph<T>({&a, &b})) {
    auto sa_ptr = a.storage();
    auto sb_ptr = b.storage();
    auto so_ptr = out.storage();
    g->record("ew_binary", {sa_ptr, sb_ptr}, so_ptr,
              [op, same, plane, sa, sb, A = sa_ptr.get(), B = sb_ptr.get(), O = so_ptr.get()] {
                const T* go = O->grad.data();
                T* ga = detail::grad_slot(A);
                T* gb = detail::grad_slot(B);
                for (int n = 0; n < sa.n; ++n) {
                  for (int c = 0; c < sa.c; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * sa.c + c) * plane;
                    const std::size_t bi =
                        static_cast<std::size_t>(sb.n == 1 ? 0 : n) * sb.c + (sb.c == 1 ? 0 : c);
                    for (std::size_t i = 0; i < plane; ++i) {
                      const T g = go[base + i];
                      const std::size_t bj = same ? base + i : bi;
                      switch (op) {
                        case BinaryOp::kAdd:
                          if (ga) ga[base + i] += g;
                          if (gb) gb[bj] += g;
                          break;
                        case BinaryOp::kSub:
                          if (ga) ga[base + i] += g;
                          if (gb) gb[bj] -= g;
                          break;
                        case BinaryOp::kMul:
                          if (ga) ga[base + i] += g * B->data[bj];
                          if (gb) gb[bj] += g * A->data[base + i];
                          break;
                      }
                    }
                  }
                }
              });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * factor;
  check_finite(out, "scale");
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("scale", {xs}, os, [factor, X = xs.get(), O = os.get()] {
      T* gx = detail::grad_slot(X);
      if (!gx) return;
      for (std::size_t i = 0; i < O->grad.size(); ++i) gx[i] += factor * O->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x) {
  if (!x.defined() || x.size() == 0) throw DimensionError("reduce_mean of an empty tensor");
  detail::CompensatedSum acc;
  for (T v : x.data()) acc.add(static_cast<double>(v));
  const double len = static_cast<double>(x.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc.value() / len));
  check_finite(out, "reduce_mean");
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("reduce_mean", {xs}, os, [len, X = xs.get(), O = os.get()] {
      T* gx = detail::grad_slot(X);
      if (!gx) return;
      const T share = static_cast<T>(O->grad[0] / len);
      for (std::size_t i = 0; i < X->data.size(); ++i) gx[i] += share;
    });
  }
  return out;
}

#define DEMSR_INSTANTIATE(T)                                                     \
  template class Tensor<T>;                                                      \
  template class Graph<T>;                                                       \
  template Graph<T>*& active_graph<T>();                                         \
  template void check_finite<T>(const Tensor<T>&, const char*);                  \
  template Tensor<T> ew_binary<T>(BinaryOp, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                              \
  template Tensor<T> reduce_mean<T>(const Tensor<T>&);

DEMSR_INSTANTIATE(float)
DEMSR_INSTANTIATE(double)

#undef DEMSR_INSTANTIATE

}  // namespace demsr
