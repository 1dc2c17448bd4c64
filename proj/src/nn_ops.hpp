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

// Differentiable network layers. All ops take and return NCHW tensors and
// record backward rules on the active graph (see tensor.hpp).

#pragma once

#include <cstdint>

#include "interp.hpp"
#include "tensor.hpp"

namespace demsr {

inline constexpr double kDefaultLeakySlope = 0.2;

// Cross-correlation with zero padding. weight is (co, ci, k, k) with odd k;
// bias is (1, co, 1, 1) or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride = 1, int padding = 0);

// Per-channel convolution; weight is (c, 1, k, k).
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride = 1, int padding = 0);

// Subgradient at 0 is 1.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope);

// While alive, folds the branch taken by every leaky_relu element evaluated
// on this thread into a fingerprint. Two evaluations with equal fingerprints
// lie on the same linear piece of every activation.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  std::uint64_t fingerprint() const { return hash_; }
  void reset() { hash_ = kSeed; }
  void fold(bool positive) { hash_ = (hash_ ^ (positive ? 0x9dU : 0x3bU)) * 0x100000001b3ULL; }
  static KinkProbe* active();

 private:
  static constexpr std::uint64_t kSeed = 0xcbf29ce484222325ULL;
  std::uint64_t hash_ = kSeed;
  KinkProbe* previous_;
};

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// (n, c, h, w) -> (n, c, 1, 1) spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

// Squeeze-and-excite: x * sigmoid(expand(leaky(reduce(pool(x))))).
template <typename T>
Tensor<T> se_block(const Tensor<T>& x, const Tensor<T>& w_reduce, const Tensor<T>& b_reduce,
                   const Tensor<T>& w_expand, const Tensor<T>& b_expand,
                   T negative_slope = static_cast<T>(kDefaultLeakySlope));

// (n, c*r*r, h, w) -> (n, c, h*r, w*r) with
// out(n, c, y, x) = in(n, c*r*r + (y % r)*r + (x % r), y / r, x / r).
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);

// Inverse permutation of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r);

// Mean of squared differences. target does not receive a gradient.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

// Plane-wise resampling to (out_h, out_w); see interp.hpp for the mapping.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& x, int out_h, int out_w, InterpMethod method);

}  // namespace demsr
