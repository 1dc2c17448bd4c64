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

// 16x DEM super-resolution network.
//
//   lr (n,1,h,w)
//    -> stem 3x3 conv (1 -> 24) + LeakyReLU
//    -> six stages of MBConv blocks, all stride 1 (spatial size unchanged)
//    -> up-block 1: 3x3 conv (256 -> 64*16), pixel shuffle x4, LeakyReLU
//    -> up-block 2: 3x3 conv (64 -> 16), pixel shuffle x4
//    -> + interpolate(lr, 16h, 16w)
//    -> final 3x3 conv (1 -> 1)
//
// MBConv: [1x1 expand + LeakyReLU] -> 3x3 depthwise + LeakyReLU -> SE ->
// 1x1 linear projection [+ input when channels match]. No normalization
// layers anywhere.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "interp.hpp"
#include "tensor.hpp"

namespace demsr {

struct StageSpec {
  int out_channels = 0;
  int expansion_ratio = 1;
  int num_layers = 1;
  int kernel = 3;
  int stride = 1;
  double se_ratio = 0.25;
};

struct ModelConfig {
  int stem_channels = 24;
  std::vector<StageSpec> stages;
  int up1_mid = 64;
  int up1_r = 4;
  int up2_r = 4;
  InterpMethod skip_interpolation = InterpMethod::kBicubic;
  int final_kernel = 3;
  double leaky_slope = 0.2;
  int scale_factor = 16;
  std::uint64_t seed = 0;

  // The six-stage network with stem width 24.
  static ModelConfig production();
  // Production widths divided by 8 (stem 3) with one block per stage.
  static ModelConfig tiny();

  // Throws ConfigError naming the offending field.
  void validate() const;
  int total_blocks() const;
};

// SE bottleneck width for a block with the given expanded width.
int se_width(int expanded_channels, double se_ratio);

template <typename T>
class Model {
 public:
  using NamedTensor = std::pair<std::string, Tensor<T>>;

  explicit Model(ModelConfig config);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }

  // (n, 1, h, w) -> (n, 1, 16h, 16w). When stage_shapes is given it receives
  // the activation shape after the stem and after every stage.
  Tensor<T> forward(const Tensor<T>& lr, std::vector<Shape>* stage_shapes = nullptr) const;

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_in_channels(int b) const { return blocks_.at(b).cin; }
  int block_out_channels(int b) const { return blocks_.at(b).cout; }
  int block_expansion(int b) const { return blocks_.at(b).expansion; }
  int block_stage(int b) const { return blocks_.at(b).stage; }
  Tensor<T> mbconv_forward(int b, const Tensor<T>& x) const;

  // Parameters in registration order; names are stable across save/load.
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  Tensor<T>& param(const std::string& name);
  const Tensor<T>& param(const std::string& name) const;

  std::size_t count_params() const;
  void zero_grad();
  // Marks every parameter as requiring (or not) a gradient.
  void set_trainable(bool on);

 private:
  struct Block {
    int stage = 0;
    int cin = 0;
    int cout = 0;
    int expansion = 1;
    Tensor<T> expand_w, expand_b;
    Tensor<T> dw_w, dw_b;
    Tensor<T> se_reduce_w, se_reduce_b, se_expand_w, se_expand_b;
    Tensor<T> project_w, project_b;
  };

  Tensor<T> add_param(const std::string& name, Shape shape);

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<Block> blocks_;
  Tensor<T> stem_w_, stem_b_;
  Tensor<T> up1_w_, up1_b_;
  Tensor<T> up2_w_, up2_b_;
  Tensor<T> final_w_, final_b_;
};

template <typename T>
Model<T> build_model(const ModelConfig& config) {
  return Model<T>(config);
}

}  // namespace demsr
