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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "errors.hpp"
#include "model.hpp"
#include "nn_ops.hpp"
#include "test_util.hpp"
#include "train.hpp"

namespace demsr {
namespace {

using testing::random_tensor;

// Closed-form parameter total, written from the layer plan alone.
std::size_t closed_form_params(int stem, const std::vector<std::array<int, 3>>& stages, int up1_mid, int r1,
                               int r2) {
  std::size_t total = stem * 9 + stem;  // stem conv + bias
  int cin = stem;
  for (const auto& [cout, e, layers] : stages)
    for (int l = 0; l < layers; ++l) {
      const std::size_t x = static_cast<std::size_t>(cin) * e;
      const std::size_t se = std::max<std::size_t>(1, x / 4);
      if (e > 1) total += x * cin + x;
      total += x * 9 + x;                  // depthwise
      total += se * x + se + x * se + x;   // squeeze-excite
      total += cout * x + cout;            // projection
      cin = cout;
    }
  total += static_cast<std::size_t>(up1_mid) * r1 * r1 * cin * 9 + up1_mid * r1 * r1;
  total += static_cast<std::size_t>(r2) * r2 * up1_mid * 9 + r2 * r2;
  total += 9 + 1;
  return total;
}

const std::vector<std::array<int, 3>> kStagePlan = {{24, 1, 2}, {48, 4, 4}, {64, 4, 4},
                                                 {128, 4, 6}, {160, 6, 9}, {256, 6, 15}};

TEST(ModelConfig, ProductionMatchesStagePlan) {
  const ModelConfig c = ModelConfig::production();
  ASSERT_EQ(c.stages.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(c.stages[i].out_channels, kStagePlan[i][0]);
    EXPECT_EQ(c.stages[i].expansion_ratio, kStagePlan[i][1]);
    EXPECT_EQ(c.stages[i].num_layers, kStagePlan[i][2]);
    EXPECT_EQ(c.stages[i].kernel, 3);
    EXPECT_EQ(c.stages[i].stride, 1);
  }
  EXPECT_EQ(c.stem_channels, 24);
  EXPECT_EQ(c.total_blocks(), 40);
  EXPECT_EQ(c.up1_r * c.up2_r, 16);
  EXPECT_EQ(c.scale_factor, 16);
}

TEST(ModelConfig, ValidationNamesField) {
  ModelConfig c = ModelConfig::tiny();
  c.stages[2].stride = 2;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("stride"), std::string::npos);
  }
  c = ModelConfig::tiny();
  c.scale_factor = 8;
  EXPECT_THROW(Model<float>{c}, ConfigError);
  c = ModelConfig::tiny();
  c.stages[0].kernel = 4;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, ProductionBlocksAndParamCount) {
  const Model<float> m(ModelConfig::production());
  EXPECT_EQ(m.num_blocks(), 40);
  EXPECT_EQ(m.count_params(), closed_form_params(24, kStagePlan, 64, 4, 4));
  int b = 0;
  for (std::size_t s = 0; s < kStagePlan.size(); ++s)
    for (int l = 0; l < kStagePlan[s][2]; ++l, ++b) {
      EXPECT_EQ(m.block_stage(b), static_cast<int>(s));
      EXPECT_EQ(m.block_out_channels(b), kStagePlan[s][0]);
      EXPECT_EQ(m.block_expansion(b), kStagePlan[s][1]);
    }
}

TEST(Model, TinyParamCount) {
  const Model<double> m(ModelConfig::tiny());
  EXPECT_EQ(m.count_params(), closed_form_params(3, {{3, 1, 1}, {6, 4, 1}, {8, 4, 1}, {16, 4, 1}, {20, 6, 1}, {32, 6, 1}},
                                                 8, 4, 4));
  std::size_t sum = 0;
  for (const auto& [name, t] : m.parameters()) sum += t.size();
  EXPECT_EQ(sum, m.count_params());
}

TEST(Model, WiderUpsamplerHasMoreParams) {
  ModelConfig c = ModelConfig::tiny();
  const std::size_t base = Model<float>(c).count_params();
  c.up1_mid *= 2;
  EXPECT_GT(Model<float>(c).count_params(), base);
}

TEST(Model, ParameterNamesUnique) {
  const Model<float> m(ModelConfig::production());
  std::set<std::string> names;
  for (const auto& [name, t] : m.parameters()) EXPECT_TRUE(names.insert(name).second) << name;
}

TEST(Model, SameSeedSameBytes) {
  ModelConfig c = ModelConfig::tiny();
  c.seed = 42;
  const Model<float> a(c), b(c);
  c.seed = 43;
  const Model<float> d(c);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& ta = a.parameters()[i].second;
    const auto& tb = b.parameters()[i].second;
    ASSERT_EQ(std::memcmp(ta.data().data(), tb.data().data(), ta.size() * sizeof(float)), 0);
    const auto& td = d.parameters()[i].second;
    any_diff |= std::memcmp(ta.data().data(), td.data().data(), ta.size() * sizeof(float)) != 0;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, AllParametersFiniteAfterInit) {
  const Model<float> m(ModelConfig::production());
  for (const auto& [name, t] : m.parameters())
    for (float v : t.data()) ASSERT_TRUE(std::isfinite(v)) << name;
}

TEST(Model, ProductionShapesAndStageBoundaries) {
  const Model<float> m(ModelConfig::production());
  std::vector<Shape> stages;
  const auto y = m.forward(random_tensor<float>(Shape{1, 1, 25, 25}, 1), &stages);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 400, 400}));
  ASSERT_EQ(stages.size(), 7u);  // stem + six stages
  for (const Shape& s : stages) {
    EXPECT_EQ(s.h, 25);
    EXPECT_EQ(s.w, 25);
  }
  EXPECT_EQ(stages.back().c, 256);
}

TEST(Model, ShapeLaw) {
  const Model<float> m(ModelConfig::tiny());
  EXPECT_EQ(m.forward(random_tensor<float>(Shape{2, 1, 10, 10}, 2)).shape(), (Shape{2, 1, 160, 160}));
  EXPECT_EQ(m.forward(random_tensor<float>(Shape{1, 1, 3, 5}, 3)).shape(), (Shape{1, 1, 48, 80}));
  EXPECT_EQ(m.forward(random_tensor<float>(Shape{1, 1, 25, 25}, 4)).shape(), (Shape{1, 1, 400, 400}));
  EXPECT_THROW(m.forward(random_tensor<float>(Shape{1, 2, 5, 5}, 5)), DimensionError);
}

template <typename T>
void zero_all(Model<T>& m) {
  for (auto& [name, t] : m.parameters())
    for (T& v : t.mutable_data()) v = T(0);
}

TEST(Model, SkipPathEqualsBicubicWhenBranchIsSilent) {
  Model<double> m(ModelConfig::tiny());
  zero_all(m);
  m.param("final.weight").mutable_data()[4] = 1.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = random_tensor(Shape{1, 1, 25, 25}, s, 200, 900);
    const auto y = m.forward(x);
    const auto want = interpolate(x, 400, 400, InterpMethod::kBicubic);
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y.data()[i], want.data()[i], 1e-5);
  }
}

TEST(Model, UntrainedNetworkReproducesSkipInterpolation) {
  // up2 starts at zero and final as the delta kernel.
  const Model<double> m(ModelConfig::tiny());
  const auto x = random_tensor(Shape{1, 1, 8, 8}, 9);
  const auto y = m.forward(x);
  const auto want = interpolate(x, 128, 128, InterpMethod::kBicubic);
  for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y.data()[i], want.data()[i], 1e-12);
}

TEST(MBConv, ZeroResidualBlockIsIdentity) {
  Model<double> m(ModelConfig::production());
  zero_all(m);
  // Block 1 is the second block of stage 1: 24 -> 24.
  ASSERT_EQ(m.block_in_channels(1), m.block_out_channels(1));
  const auto x = random_tensor(Shape{1, 24, 6, 6}, 3);
  const auto y = m.mbconv_forward(1, x);
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(y.data()[i], x.data()[i]);
}

TEST(MBConv, ZeroNonResidualBlockIsZero) {
  Model<double> m(ModelConfig::production());
  zero_all(m);
  // Block 2 opens stage 2: 24 -> 48, no residual.
  ASSERT_EQ(m.block_in_channels(2), 24);
  ASSERT_EQ(m.block_out_channels(2), 48);
  const auto y = m.mbconv_forward(2, random_tensor(Shape{1, 24, 25, 25}, 4));
  EXPECT_EQ(y.shape(), (Shape{1, 48, 25, 25}));
  for (double v : y.data()) ASSERT_EQ(v, 0.0);
  EXPECT_THROW(m.mbconv_forward(2, random_tensor(Shape{1, 23, 5, 5}, 5)), DimensionError);
}

TEST(Model, GradientReachesEveryParameter) {
  ModelConfig c = ModelConfig::tiny();
  c.seed = 3;
  Model<float> m(c);
  const auto x = random_tensor<float>(Shape{2, 1, 6, 6}, 10);
  const auto t = random_tensor<float>(Shape{2, 1, 96, 96}, 11);
  auto backward_once = [&] {
    m.zero_grad();
    Graph<float> g;
    GraphScope<float> scope(g);
    g.backward(mse_loss(m.forward(x), t));
  };
  // The silent up2 init blocks upstream gradients until the first update.
  backward_once();
  AdamState adam;
  adam_step(m.parameters(), adam, 1e-3);
  backward_once();
  for (const auto& [name, p] : m.parameters()) {
    double norm = 0;
    for (float g : p.grad()) norm += double(g) * g;
    EXPECT_GT(norm, 0.0) << name;
  }
}

TEST(Model, ForwardDeterministic) {
  const Model<float> m(ModelConfig::tiny());
  const auto x = random_tensor<float>(Shape{2, 1, 12, 12}, 12);
  const auto a = m.forward(x), b = m.forward(x);
  EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)), 0);
}

TEST(Model, SeWidth) {
  EXPECT_EQ(se_width(24, 0.25), 6);
  EXPECT_EQ(se_width(3, 0.25), 1);
  EXPECT_EQ(se_width(1536, 0.25), 384);
}

}  // namespace
}  // namespace demsr
