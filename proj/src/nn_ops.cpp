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

#include "nn_ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace demsr {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeom {
  int n, ci, h, w;
  int co, k, stride, pad;
  int oh, ow;

  std::size_t in_plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t out_plane() const { return static_cast<std::size_t>(oh) * ow; }
  std::size_t col_rows() const { return static_cast<std::size_t>(ci) * k * k; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

ConvGeom conv_geometry(const char* op, const Shape& x, const Shape& wt, int stride, int padding,
                       bool depthwise) {
  if (wt.h != wt.w || wt.h % 2 == 0)
    throw DimensionError(std::string(op) + ": kernel must be square with odd size, got " +
                         wt.str());
  if (stride < 1 || padding < 0)
    throw DimensionError(std::string(op) + ": stride must be >= 1 and padding >= 0");
  if (depthwise ? (wt.n != x.c || wt.c != 1) : (wt.c != x.c))
    throw DimensionError(std::string(op) + ": weight " + wt.str() +
                         " does not match input channels of " + x.str());
  ConvGeom g{x.n, x.c, x.h, x.w, wt.n, wt.h, stride, padding, 0, 0};
  const int span_h = x.h + 2 * padding - g.k;
  const int span_w = x.w + 2 * padding - g.k;
  if (span_h < 0 || span_w < 0)
    throw DimensionError(std::string(op) + ": kernel " + std::to_string(g.k) +
                         " larger than padded input " + x.str());
  if (span_h % stride != 0 || span_w % stride != 0)
    throw DimensionError(std::string(op) + ": non-integer output size for input " + x.str() +
                         " with stride " + std::to_string(stride));
  g.oh = span_h / stride + 1;
  g.ow = span_w / stride + 1;
  return g;
}

void check_bias(const char* op, const Shape& bias, int channels) {
  if (bias.size() != static_cast<std::size_t>(channels))
    throw DimensionError(std::string(op) + ": bias " + bias.str() + " does not have " +
                         std::to_string(channels) + " channels");
}

// Output rows oy for which oy*stride - pad + kk lands inside [0, size).
std::pair<int, int> valid_range(int kk, int size, int out, int stride, int pad) {
  auto ceil_div = [](int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); };
  auto floor_div = [](int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
  const int lo = std::max(0, ceil_div(pad - kk, stride));
  const int hi = std::min(out - 1, floor_div(size - 1 + pad - kk, stride));
  return {lo, hi};
}

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const std::size_t cols = g.out_plane();
  for (int c = 0; c < g.ci; ++c) {
    const T* plane = x + c * g.in_plane();
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * cols;
        std::fill(row, row + cols, T(0));
        const auto [y0, y1] = valid_range(ky, g.h, g.oh, g.stride, g.pad);
        const auto [x0, x1] = valid_range(kx, g.w, g.ow, g.stride, g.pad);
        for (int oy = y0; oy <= y1; ++oy) {
          const T* src = plane + static_cast<std::size_t>(oy * g.stride - g.pad + ky) * g.w;
          T* dst = row + static_cast<std::size_t>(oy) * g.ow;
          for (int ox = x0; ox <= x1; ++ox) dst[ox] = src[ox * g.stride - g.pad + kx];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* dx) {
  const std::size_t cols = g.out_plane();
  for (int c = 0; c < g.ci; ++c) {
    T* plane = dx + c * g.in_plane();
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * cols;
        const auto [y0, y1] = valid_range(ky, g.h, g.oh, g.stride, g.pad);
        const auto [x0, x1] = valid_range(kx, g.w, g.ow, g.stride, g.pad);
        for (int oy = y0; oy <= y1; ++oy) {
          T* dst = plane + static_cast<std::size_t>(oy * g.stride - g.pad + ky) * g.w;
          const T* src = row + static_cast<std::size_t>(oy) * g.ow;
          for (int ox = x0; ox <= x1; ++ox) dst[ox * g.stride - g.pad + kx] += src[ox];
        }
      }
    }
  }
}

template <typename T>
void add_in_order(std::vector<std::vector<T>>& partials, T* dst) {
  for (const auto& p : partials)
    for (std::size_t i = 0; i < p.size(); ++i) dst[i] += p[i];
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int padding) {
  const ConvGeom g = conv_geometry("conv2d", x.shape(), weight.shape(), stride, padding, false);
  if (bias.defined()) check_bias("conv2d", bias.shape(), g.co);

  Tensor<T> out(Shape{g.n, g.co, g.oh, g.ow});
  const T* px = x.data().data();
  const T* pb = bias.defined() ? bias.data().data() : nullptr;
  T* po = out.mutable_data().data();
  const ConstMatMap<T> wmat(weight.data().data(), g.co, g.col_rows());

  parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t n) {
    const T* xn = px + n * g.ci * g.in_plane();
    MatMap<T> on(po + n * g.co * g.out_plane(), g.co, g.out_plane());
    if (g.pointwise()) {
      on.noalias() = wmat * ConstMatMap<T>(xn, g.ci, g.in_plane());
    } else {
      RowMat<T> col(g.col_rows(), g.out_plane());
      im2col(xn, g, col.data());
      on.noalias() = wmat * col;
    }
    if (pb)
      for (int c = 0; c < g.co; ++c) on.row(c).array() += pb[c];
  });
  check_finite(out, "conv2d");

  if (Graph<T>* graph = detail::recording_graph<T>({&x, &weight, &bias})) {
    auto xs = x.storage();
    auto ws = weight.storage();
    auto bs = bias.defined() ? bias.storage() : nullptr;
    auto os = out.storage();
    std::vector<typename Graph<T>::StoragePtr> inputs{xs, ws};
    if (bs) inputs.push_back(bs);
    graph->record("conv2d", std::move(inputs), os,
                  [g, X = xs.get(), W = ws.get(), B = bs.get(), O = os.get()] {
                    T* gx = detail::grad_slot(X);
                    T* gw = detail::grad_slot(W);
                    T* gb = detail::grad_slot(B);
                    const ConstMatMap<T> wmat(W->data.data(), g.co, g.col_rows());
                    std::vector<std::vector<T>> wparts(gw ? g.n : 0);
                    std::vector<std::vector<T>> bparts(gb ? g.n : 0);
                    parallel_for(static_cast<std::size_t>(g.n), [&](std::size_t n) {
                      const ConstMatMap<T> gon(O->grad.data() + n * g.co * g.out_plane(), g.co,
                                               g.out_plane());
                      const T* xn = X->data.data() + n * g.ci * g.in_plane();
                      RowMat<T> col;
                      if (gw && !g.pointwise()) {
                        col.resize(g.col_rows(), g.out_plane());
                        im2col(xn, g, col.data());
                      }
                      if (gw) {
                        wparts[n].assign(static_cast<std::size_t>(g.co) * g.col_rows(), T(0));
                        MatMap<T> part(wparts[n].data(), g.co, g.col_rows());
                        if (g.pointwise())
                          part.noalias() = gon * ConstMatMap<T>(xn, g.ci, g.in_plane()).transpose();
                        else
                          part.noalias() = gon * col.transpose();
                      }
                      if (gb) {
                        bparts[n].resize(g.co);
                        for (int c = 0; c < g.co; ++c) bparts[n][c] = gon.row(c).sum();
                      }
                      if (gx) {
                        T* gxn = gx + n * g.ci * g.in_plane();
                        if (g.pointwise()) {
                          MatMap<T>(gxn, g.ci, g.in_plane()).noalias() += wmat.transpose() * gon;
                        } else {
                          RowMat<T> gcol = wmat.transpose() * gon;
                          col2im_add(gcol.data(), g, gxn);
                        }
                      }
                    });
                    if (gw) add_in_order(wparts, gw);
                    if (gb) add_in_order(bparts, gb);
                  });
  }
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int padding) {
  const ConvGeom g =
      conv_geometry("depthwise_conv2d", x.shape(), weight.shape(), stride, padding, true);
  if (bias.defined()) check_bias("depthwise_conv2d", bias.shape(), g.ci);

  Tensor<T> out(Shape{g.n, g.ci, g.oh, g.ow});
  const T* px = x.data().data();
  const T* pw = weight.data().data();
  const T* pb = bias.defined() ? bias.data().data() : nullptr;
  T* po = out.mutable_data().data();

  parallel_for(static_cast<std::size_t>(g.n) * g.ci, [&](std::size_t nc) {
    const int c = static_cast<int>(nc % g.ci);
    const T* plane = px + nc * g.in_plane();
    T* dst = po + nc * g.out_plane();
    std::fill(dst, dst + g.out_plane(), pb ? pb[c] : T(0));
    for (int ky = 0; ky < g.k; ++ky) {
      const auto [y0, y1] = valid_range(ky, g.h, g.oh, g.stride, g.pad);
      for (int kx = 0; kx < g.k; ++kx) {
        const auto [x0, x1] = valid_range(kx, g.w, g.ow, g.stride, g.pad);
        const T wv = pw[(static_cast<std::size_t>(c) * g.k + ky) * g.k + kx];
        for (int oy = y0; oy <= y1; ++oy) {
          const T* src = plane + static_cast<std::size_t>(oy * g.stride - g.pad + ky) * g.w;
          T* row = dst + static_cast<std::size_t>(oy) * g.ow;
          for (int ox = x0; ox <= x1; ++ox) row[ox] += wv * src[ox * g.stride - g.pad + kx];
        }
      }
    }
  });
  check_finite(out, "depthwise_conv2d");

  if (Graph<T>* graph = detail::recording_graph<T>({&x, &weight, &bias})) {
    auto xs = x.storage();
    auto ws = weight.storage();
    auto bs = bias.defined() ? bias.storage() : nullptr;
    auto os = out.storage();
    std::vector<typename Graph<T>::StoragePtr> inputs{xs, ws};
    if (bs) inputs.push_back(bs);
    graph->record(
        "depthwise_conv2d", std::move(inputs), os,
        [g, X = xs.get(), W = ws.get(), B = bs.get(), O = os.get()] {
          T* gx = detail::grad_slot(X);
          T* gw = detail::grad_slot(W);
          T* gb = detail::grad_slot(B);
          // One task per channel; batch is summed inside in a fixed order.
          parallel_for(static_cast<std::size_t>(g.ci), [&](std::size_t cc) {
            const int c = static_cast<int>(cc);
            for (int n = 0; n < g.n; ++n) {
              const std::size_t nc = static_cast<std::size_t>(n) * g.ci + c;
              const T* go = O->grad.data() + nc * g.out_plane();
              const T* plane = X->data.data() + nc * g.in_plane();
              if (gb) {
                T acc = T(0);
                for (std::size_t i = 0; i < g.out_plane(); ++i) acc += go[i];
                gb[c] += acc;
              }
              for (int ky = 0; ky < g.k; ++ky) {
                const auto [y0, y1] = valid_range(ky, g.h, g.oh, g.stride, g.pad);
                for (int kx = 0; kx < g.k; ++kx) {
                  const auto [x0, x1] = valid_range(kx, g.w, g.ow, g.stride, g.pad);
                  const std::size_t wi = (static_cast<std::size_t>(c) * g.k + ky) * g.k + kx;
                  const T wv = W->data[wi];
                  T wacc = T(0);
                  for (int oy = y0; oy <= y1; ++oy) {
                    const std::size_t src_row =
                        static_cast<std::size_t>(oy * g.stride - g.pad + ky) * g.w;
                    const T* grow = go + static_cast<std::size_t>(oy) * g.ow;
                    for (int ox = x0; ox <= x1; ++ox) {
                      const std::size_t xi = src_row + ox * g.stride - g.pad + kx;
                      wacc += grow[ox] * plane[xi];
                      if (gx) gx[nc * g.in_plane() + xi] += wv * grow[ox];
                    }
                  }
                  if (gw) gw[wi] += wacc;
                }
              }
            }
          });
        });
  }
  return out;
}

namespace {
thread_local KinkProbe* g_kink_probe = nullptr;
}  // namespace

KinkProbe::KinkProbe() : previous_(g_kink_probe) { g_kink_probe = this; }
KinkProbe::~KinkProbe() { g_kink_probe = previous_; }
KinkProbe* KinkProbe::active() { return g_kink_probe; }

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope) {
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] >= T(0) ? src[i] : negative_slope * src[i];
  if (KinkProbe* probe = KinkProbe::active())
    for (T v : src) probe->fold(v >= T(0));
  check_finite(out, "leaky_relu");
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("leaky_relu", {xs}, os, [negative_slope, X = xs.get(), O = os.get()] {
      T* gx = detail::grad_slot(X);
      if (!gx) return;
      for (std::size_t i = 0; i < X->data.size(); ++i)
        gx[i] += X->data[i] >= T(0) ? O->grad[i] : negative_slope * O->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const T v = src[i];
    if (v >= T(0)) {
      dst[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      dst[i] = e / (T(1) + e);
    }
  }
  check_finite(out, "sigmoid");
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("sigmoid", {xs}, os, [X = xs.get(), O = os.get()] {
      T* gx = detail::grad_slot(X);
      if (!gx) return;
      for (std::size_t i = 0; i < O->data.size(); ++i) {
        const T y = O->data[i];
        gx[i] += O->grad[i] * y * (T(1) - y);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape s = x.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(src[p * plane + i]);
    dst[p] = static_cast<T>(acc / static_cast<double>(plane));
  }
  check_finite(out, "global_avg_pool");
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("global_avg_pool", {xs}, os, [plane, X = xs.get(), O = os.get()] {
      T* gx = detail::grad_slot(X);
      if (!gx) return;
      for (std::size_t p = 0; p < O->data.size(); ++p) {
        const T share = O->grad[p] / static_cast<T>(plane);
        for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += share;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> se_block(const Tensor<T>& x, const Tensor<T>& w_reduce, const Tensor<T>& b_reduce,
                   const Tensor<T>& w_expand, const Tensor<T>& b_expand, T negative_slope) {
  const Shape s = x.shape();
  const Shape wr = w_reduce.shape();
  const Shape we = w_expand.shape();
  if (wr.h != 1 || wr.w != 1 || we.h != 1 || we.w != 1 || wr.c != s.c || we.n != s.c ||
      we.c != wr.n || wr.n < 1)
    throw DimensionError("se_block: weights " + wr.str() + " / " + we.str() +
                         " do not fit input " + s.str());
  const Tensor<T> pooled = global_avg_pool(x);
  const Tensor<T> squeezed = leaky_relu(conv2d(pooled, w_reduce, b_reduce), negative_slope);
  const Tensor<T> gate = sigmoid(conv2d(squeezed, w_expand, b_expand));
  return mul(x, gate);
}

namespace {

// Position in the shuffled (n, c, h*r, w*r) tensor for input element
// (n, ic, y, x) of the (n, c*r*r, h, w) tensor.
struct ShuffleIndex {
  Shape in;
  int r;
  std::size_t out_index(int n, int ic, int y, int x) const {
    const int oc = ic / (r * r);
    const int sub = ic % (r * r);
    const int oy = y * r + sub / r;
    const int ox = x * r + sub % r;
    const int oh = in.h * r;
    const int ow = in.w * r;
    return ((static_cast<std::size_t>(n) * (in.c / (r * r)) + oc) * oh + oy) * ow + ox;
  }
};

// Copies src -> dst where dst[map(i)] = src[i] (forward) or
// dst[i] = src[map(i)] (gather), iterating in input-tensor order.
template <typename T>
void permute(const ShuffleIndex& idx, const T* src, T* dst, bool scatter, bool accumulate) {
  const Shape& s = idx.in;
  std::size_t i = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x, ++i) {
          const std::size_t o = idx.out_index(n, c, y, x);
          if (scatter) {
            if (accumulate) dst[o] += src[i]; else dst[o] = src[i];
          } else {
            if (accumulate) dst[i] += src[o]; else dst[i] = src[o];
          }
        }
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  const Shape s = x.shape();
  if (r < 1 || s.c % (r * r) != 0)
    throw DimensionError("pixel_shuffle: channels of " + s.str() + " not divisible by r^2 = " +
                         std::to_string(r * r));
  const ShuffleIndex idx{s, r};
  Tensor<T> out(Shape{s.n, s.c / (r * r), s.h * r, s.w * r});
  permute(idx, x.data().data(), out.mutable_data().data(), true, false);
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("pixel_shuffle", {xs}, os, [idx, X = xs.get(), O = os.get()] {
      if (T* gx = detail::grad_slot(X)) permute(idx, O->grad.data(), gx, false, true);
    });
  }
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  const Shape s = x.shape();
  if (r < 1 || s.h % r != 0 || s.w % r != 0)
    throw DimensionError("pixel_unshuffle: spatial dims of " + s.str() +
                         " not divisible by r = " + std::to_string(r));
  const Shape in{s.n, s.c * r * r, s.h / r, s.w / r};
  const ShuffleIndex idx{in, r};
  Tensor<T> out(in);
  permute(idx, x.data().data(), out.mutable_data().data(), false, false);
  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("pixel_unshuffle", {xs}, os, [idx, X = xs.get(), O = os.get()] {
      if (T* gx = detail::grad_slot(X)) permute(idx, O->grad.data(), gx, true, true);
    });
  }
  return out;
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw DimensionError("mse_loss: prediction " + pred.shape().str() + " vs target " +
                         target.shape().str());
  if (detail::needs_grad(target))
    throw ContractError("mse_loss: target must not require a gradient");
  auto p = pred.data();
  auto t = target.data();
  detail::CompensatedSum acc;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    acc.add(d * d);
  }
  const double len = static_cast<double>(p.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc.value() / len));
  check_finite(out, "mse_loss");
  if (Graph<T>* g = detail::recording_graph<T>({&pred})) {
    auto ps = pred.storage();
    auto ts = target.storage();
    auto os = out.storage();
    g->record("mse_loss", {ps, ts}, os, [len, P = ps.get(), Tg = ts.get(), O = os.get()] {
      T* gp = detail::grad_slot(P);
      if (!gp) return;
      const T coef = static_cast<T>(2.0 * O->grad[0] / len);
      for (std::size_t i = 0; i < P->data.size(); ++i) gp[i] += coef * (P->data[i] - Tg->data[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> interpolate(const Tensor<T>& x, int out_h, int out_w, InterpMethod method) {
  const Shape s = x.shape();
  const AxisTaps rows = axis_taps(s.h, out_h, method);
  const AxisTaps cols = axis_taps(s.w, out_w, method);
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  const std::size_t in_plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  std::vector<double> scratch(static_cast<std::size_t>(s.h) * out_w);
  for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p)
    resize_plane<T>(x.data().subspan(p * in_plane, in_plane), s.h, s.w, rows, cols,
                    out.mutable_data().subspan(p * out_plane, out_plane), scratch);
  check_finite(out, "interpolate");

  if (Graph<T>* g = detail::recording_graph<T>({&x})) {
    auto xs = x.storage();
    auto os = out.storage();
    g->record("interpolate", {xs}, os,
              [s, out_h, out_w, rows, cols, in_plane, out_plane, X = xs.get(), O = os.get()] {
                T* gx = detail::grad_slot(X);
                if (!gx) return;
                std::vector<double> gtmp(static_cast<std::size_t>(s.h) * out_w);
                for (std::size_t p = 0; p < static_cast<std::size_t>(s.n) * s.c; ++p) {
                  std::fill(gtmp.begin(), gtmp.end(), 0.0);
                  const T* go = O->grad.data() + p * out_plane;
                  for (int y = 0; y < out_h; ++y)
                    for (int k = rows.offsets[y]; k < rows.offsets[y + 1]; ++k) {
                      double* dst = gtmp.data() + static_cast<std::size_t>(rows.taps[k].index) * out_w;
                      const double wgt = rows.taps[k].weight;
                      for (int x = 0; x < out_w; ++x)
                        dst[x] += wgt * static_cast<double>(go[static_cast<std::size_t>(y) * out_w + x]);
                    }
                  T* gxp = gx + p * in_plane;
                  for (int y = 0; y < s.h; ++y)
                    for (int x = 0; x < out_w; ++x) {
                      const double gv = gtmp[static_cast<std::size_t>(y) * out_w + x];
                      for (int k = cols.offsets[x]; k < cols.offsets[x + 1]; ++k)
                        gxp[static_cast<std::size_t>(y) * s.w + cols.taps[k].index] +=
                            static_cast<T>(cols.taps[k].weight * gv);
                    }
                }
              });
  }
  return out;
}

#define DEMSR_INSTANTIATE(T)                                                                   \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> depthwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                         int, int);                                            \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                                       \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                             \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                     \
  template Tensor<T> se_block<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                 const Tensor<T>&, const Tensor<T>&, T);                       \
  template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, int);                                  \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, int);                                \
  template Tensor<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> interpolate<T>(const Tensor<T>&, int, int, InterpMethod);

DEMSR_INSTANTIATE(float)
DEMSR_INSTANTIATE(double)

#undef DEMSR_INSTANTIATE

}  // namespace demsr
