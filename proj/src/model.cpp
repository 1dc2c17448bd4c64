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

#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "errors.hpp"
#include "nn_ops.hpp"

namespace demsr {

ModelConfig ModelConfig::production() {
  ModelConfig c;
  c.stem_channels = 24;
  c.stages = {{24, 1, 2}, {48, 4, 4}, {64, 4, 4}, {128, 4, 6}, {160, 6, 9}, {256, 6, 15}};
  c.up1_mid = 64;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.stem_channels = 3;
  c.stages = {{3, 1, 1}, {6, 4, 1}, {8, 4, 1}, {16, 4, 1}, {20, 6, 1}, {32, 6, 1}};
  c.up1_mid = 8;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("model config: " + field + " " + why);
  };
  if (stem_channels < 1) fail("stem_channels", "must be positive");
  if (stages.empty()) fail("stages", "must not be empty");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    const std::string at = "stages[" + std::to_string(i) + "].";
    if (s.out_channels < 1) fail(at + "out_channels", "must be positive");
    if (s.expansion_ratio < 1) fail(at + "expansion_ratio", "must be positive");
    if (s.num_layers < 1) fail(at + "num_layers", "must be positive");
    if (s.kernel < 1 || s.kernel % 2 == 0) fail(at + "kernel", "must be odd");
    if (s.stride != 1) fail(at + "stride", "must be 1 (resolution is kept until upsampling)");
    if (!(s.se_ratio > 0.0 && s.se_ratio <= 1.0)) fail(at + "se_ratio", "must be in (0, 1]");
  }
  if (up1_mid < 1) fail("up1_mid", "must be positive");
  if (up1_r < 1) fail("up1_r", "must be positive");
  if (up2_r < 1) fail("up2_r", "must be positive");
  if (scale_factor != up1_r * up2_r)
    fail("scale_factor", "must equal up1_r * up2_r (" + std::to_string(up1_r * up2_r) + ")");
  if (final_kernel < 1 || final_kernel % 2 == 0) fail("final_kernel", "must be odd");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) fail("leaky_slope", "must be in (0, 1)");
}

int ModelConfig::total_blocks() const {
  int n = 0;
  for (const auto& s : stages) n += s.num_layers;
  return n;
}

int se_width(int expanded_channels, double se_ratio) {
  return std::max(1, static_cast<int>(std::floor(expanded_channels * se_ratio)));
}

namespace {

// Deterministic uniform draws independent of the standard library's
// distribution implementations.
class InitRng {
 public:
  explicit InitRng(std::uint64_t seed) : rng_(seed) {}
  double uniform(double bound) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * bound;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

template <typename T>
Tensor<T> Model<T>::add_param(const std::string& name, Shape shape) {
  Tensor<T> t(shape);
  t.set_requires_grad(true);
  params_.emplace_back(name, t);
  return t;
}

template <typename T>
Model<T>::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const int k = 3;
  const double act_gain = std::sqrt(2.0 / (1.0 + config_.leaky_slope * config_.leaky_slope));

  // (tensor, fan_in, gain); biases are left at zero.
  std::vector<std::tuple<Tensor<T>, int, double>> init;
  auto weight = [&](const std::string& name, Shape s, double gain) {
    Tensor<T> t = add_param(name, s);
    init.emplace_back(t, s.c * s.h * s.w, gain);
    return t;
  };
  auto bias = [&](const std::string& name, int channels) {
    return add_param(name, Shape{1, channels, 1, 1});
  };

  stem_w_ = weight("stem.weight", {config_.stem_channels, 1, k, k}, act_gain);
  stem_b_ = bias("stem.bias", config_.stem_channels);

  int cin = config_.stem_channels;
  for (std::size_t s = 0; s < config_.stages.size(); ++s) {
    const StageSpec& spec = config_.stages[s];
    for (int layer = 0; layer < spec.num_layers; ++layer) {
      Block b;
      b.stage = static_cast<int>(s);
      b.cin = cin;
      b.cout = spec.out_channels;
      b.expansion = spec.expansion_ratio;
      const int expanded = cin * spec.expansion_ratio;
      const int se = se_width(expanded, spec.se_ratio);
      const int dk = spec.kernel;
      const std::string p = "stages." + std::to_string(s) + "." + std::to_string(layer) + ".";
      if (spec.expansion_ratio > 1) {
        b.expand_w = weight(p + "expand.weight", {expanded, cin, 1, 1}, act_gain);
        b.expand_b = bias(p + "expand.bias", expanded);
      }
      b.dw_w = weight(p + "dw.weight", {expanded, 1, dk, dk}, act_gain);
      b.dw_b = bias(p + "dw.bias", expanded);
      b.se_reduce_w = weight(p + "se.reduce.weight", {se, expanded, 1, 1}, act_gain);
      b.se_reduce_b = bias(p + "se.reduce.bias", se);
      b.se_expand_w = weight(p + "se.expand.weight", {expanded, se, 1, 1}, 1.0);
      b.se_expand_b = bias(p + "se.expand.bias", expanded);
      b.project_w = weight(p + "project.weight", {spec.out_channels, expanded, 1, 1}, 1.0);
      b.project_b = bias(p + "project.bias", spec.out_channels);
      blocks_.push_back(std::move(b));
      cin = spec.out_channels;
    }
  }

  const int r1 = config_.up1_r;
  const int r2 = config_.up2_r;
  up1_w_ = weight("up1.weight", {config_.up1_mid * r1 * r1, cin, k, k}, act_gain);
  up1_b_ = bias("up1.bias", config_.up1_mid * r1 * r1);
  // The learned branch starts silent and the final conv as the identity, so
  // the untrained network reproduces the interpolated input.
  up2_w_ = add_param("up2.weight", {r2 * r2, config_.up1_mid, k, k});
  up2_b_ = bias("up2.bias", r2 * r2);
  const int fk = config_.final_kernel;
  final_w_ = add_param("final.weight", {1, 1, fk, fk});
  final_w_.mutable_data()[fk * fk / 2] = T(1);
  final_b_ = bias("final.bias", 1);

  // Kaiming-uniform: bound = gain * sqrt(3 / fan_in).
  InitRng rng(config_.seed);
  for (auto& [t, fan_in, gain] : init) {
    const double bound = gain * std::sqrt(3.0 / fan_in);
    for (T& v : t.mutable_data()) v = static_cast<T>(rng.uniform(bound));
  }
}

template <typename T>
Tensor<T> Model<T>::mbconv_forward(int index, const Tensor<T>& x) const {
  const Block& b = blocks_.at(index);
  if (x.shape().c != b.cin)
    throw DimensionError("mbconv block " + std::to_string(index) + ": expected " +
                         std::to_string(b.cin) + " input channels, got " + x.shape().str());
  const T slope = static_cast<T>(config_.leaky_slope);
  const int pad = b.dw_w.shape().h / 2;
  Tensor<T> h = x;
  if (b.expand_w.defined()) h = leaky_relu(conv2d(h, b.expand_w, b.expand_b), slope);
  h = leaky_relu(depthwise_conv2d(h, b.dw_w, b.dw_b, 1, pad), slope);
  h = se_block(h, b.se_reduce_w, b.se_reduce_b, b.se_expand_w, b.se_expand_b, slope);
  h = conv2d(h, b.project_w, b.project_b);
  if (b.cin == b.cout) h = add(h, x);
  return h;
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& lr, std::vector<Shape>* stage_shapes) const {
  const Shape in = lr.shape();
  if (in.c != 1) throw DimensionError("model input must have 1 channel, got " + in.str());
  if (in.h < 3 || in.w < 3) throw DimensionError("model input must be at least 3x3, got " + in.str());
  const T slope = static_cast<T>(config_.leaky_slope);

  Tensor<T> h = leaky_relu(conv2d(lr, stem_w_, stem_b_, 1, 1), slope);
  if (stage_shapes) stage_shapes->push_back(h.shape());
  for (int i = 0; i < num_blocks(); ++i) {
    h = mbconv_forward(i, h);
    const bool stage_end = i + 1 == num_blocks() || blocks_[i + 1].stage != blocks_[i].stage;
    if (stage_end) {
      if (h.shape().h != in.h || h.shape().w != in.w)
        throw DimensionError("stage " + std::to_string(blocks_[i].stage) +
                             " changed the spatial size to " + h.shape().str());
      if (stage_shapes) stage_shapes->push_back(h.shape());
    }
  }

  h = leaky_relu(pixel_shuffle(conv2d(h, up1_w_, up1_b_, 1, 1), config_.up1_r), slope);
  h = pixel_shuffle(conv2d(h, up2_w_, up2_b_, 1, 1), config_.up2_r);
  const int f = config_.scale_factor;
  h = add(h, interpolate(lr, in.h * f, in.w * f, config_.skip_interpolation));
  return conv2d(h, final_w_, final_b_, 1, config_.final_kernel / 2);
}

template <typename T>
Tensor<T>& Model<T>::param(const std::string& name) {
  for (auto& [n, t] : params_)
    if (n == name) return t;
  throw ContractError("model has no parameter '" + name + "'");
}

template <typename T>
const Tensor<T>& Model<T>::param(const std::string& name) const {
  return const_cast<Model*>(this)->param(name);
}

template <typename T>
std::size_t Model<T>::count_params() const {
  std::size_t total = 0;
  for (const auto& [n, t] : params_) total += t.size();
  return total;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& [n, t] : params_) t.zero_grad();
}

template <typename T>
void Model<T>::set_trainable(bool on) {
  for (auto& [n, t] : params_) t.set_requires_grad(on);
}

template class Model<float>;
template class Model<double>;

}  // namespace demsr
