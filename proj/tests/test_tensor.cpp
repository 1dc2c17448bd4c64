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

#include "errors.hpp"
#include "grad_check.hpp"
#include "nn_ops.hpp"
#include "tensor.hpp"
#include "test_util.hpp"

namespace demsr {
namespace {

using testing::random_tensor;
using TD = Tensor<double>;

TEST(Tensor, ShapeAndStorage) {
  TD t(Shape{2, 3, 4, 5}, 1.5);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.index(1, 2, 3, 4), 119u);
  EXPECT_DOUBLE_EQ(t.at(1, 0, 0, 0), 1.5);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(TD(Shape{0, 1, 1, 1}), DimensionError);
  EXPECT_THROW(TD(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(EwBinary, AddZerosIsIdentity) {
  const TD x = random_tensor(Shape{1, 1, 2, 2}, 1);
  const TD y = add(TD(Shape{1, 1, 2, 2}), x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(EwBinary, ScalarShapedMultiply) {
  const TD a(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const TD y = mul(a, TD::scalar(0.5));
  const double want[] = {0.5, 1, 1.5, 2};
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y.data()[i], want[i]);
}

TEST(EwBinary, ChannelBroadcastMatchesLoop) {
  const TD ones(Shape{1, 2, 2, 2}, 1.0);
  const TD bias(Shape{1, 2, 1, 1}, {10, 20});
  const TD y = add(ones, bias);
  for (int c = 0; c < 2; ++c)
    for (int h = 0; h < 2; ++h)
      for (int w = 0; w < 2; ++w) EXPECT_DOUBLE_EQ(y.at(0, c, h, w), 1.0 + bias.at(0, c, 0, 0));
}

TEST(EwBinary, SubAndBroadcastGradientSumsOverSpace) {
  Graph<double> g;
  GraphScope<double> scope(g);
  TD a = random_tensor(Shape{2, 3, 2, 2}, 2);
  TD b = random_tensor(Shape{1, 3, 1, 1}, 3);
  a.set_requires_grad();
  b.set_requires_grad();
  g.backward(reduce_mean(sub(a, b)));
  for (double v : a.grad()) EXPECT_NEAR(v, 1.0 / 24, 1e-15);
  // Each channel of b is broadcast over 2*2*2 elements.
  for (double v : b.grad()) EXPECT_NEAR(v, -8.0 / 24, 1e-15);
}

TEST(EwBinary, IncompatibleShapesNameBoth) {
  try {
    add(TD(Shape{1, 2, 3, 3}), TD(Shape{1, 3, 3, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
  EXPECT_THROW(add(TD(Shape{1, 2, 3, 3}), TD(Shape{1, 2, 3, 1})), DimensionError);
}

TEST(ReduceMean, Constants) {
  EXPECT_DOUBLE_EQ(reduce_mean(TD(Shape{3, 2, 5, 7}, 7.0)).item(), 7.0);
  EXPECT_DOUBLE_EQ(reduce_mean(TD(Shape{1, 1, 2, 2}, {1, 2, 3, 4})).item(), 2.5);
}

TEST(ReduceMean, MatchesNaiveSum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TD x = random_tensor(Shape{2, 3, 4, 4}, seed, -100, 100);
    long double sum = 0;
    for (double v : x.data()) sum += v;
    const double want = static_cast<double>(sum / x.size());
    EXPECT_NEAR(reduce_mean(x).item(), want, 1e-6 * std::abs(want) + 1e-12);
  }
}

TEST(Backward, MeanGradient) {
  Graph<double> g;
  GraphScope<double> scope(g);
  TD x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  x.set_requires_grad();
  g.backward(reduce_mean(x));
  for (double v : x.grad()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Backward, SquareMeanIsTwoXOverN) {
  Graph<double> g;
  GraphScope<double> scope(g);
  TD x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  x.set_requires_grad();
  g.backward(reduce_mean(mul(x, x)));
  const double want[] = {0.5, 1, 1.5, 2};
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], want[i]);
}

TEST(Backward, AccumulatesAcrossCalls) {
  TD x = random_tensor(Shape{1, 2, 3, 3}, 9);
  x.set_requires_grad();
  auto once = [&] {
    Graph<double> g;
    GraphScope<double> scope(g);
    g.backward(reduce_mean(mul(x, x)));
  };
  once();
  const std::vector<double> g1(x.grad().begin(), x.grad().end());
  once();
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * g1[i]);
}

TEST(Backward, UnreachableParametersUntouched) {
  Graph<double> g;
  GraphScope<double> scope(g);
  TD x = random_tensor(Shape{1, 1, 2, 2}, 1);
  TD unused = random_tensor(Shape{1, 1, 2, 2}, 2);
  x.set_requires_grad();
  unused.set_requires_grad();
  g.backward(reduce_mean(x));
  EXPECT_FALSE(unused.has_grad());
}

TEST(Backward, Contracts) {
  Graph<double> g;
  GraphScope<double> scope(g);
  TD x = random_tensor(Shape{1, 1, 2, 2}, 1);
  x.set_requires_grad();
  EXPECT_THROW(g.backward(mul(x, x)), ContractError);  // not scalar
  Graph<double> other;
  TD loss;
  {
    GraphScope<double> inner(other);
    loss = reduce_mean(x);
  }
  EXPECT_THROW(g.backward(loss), ContractError);  // recorded elsewhere
}

TEST(Backward, GraphIsTopological) {
  Graph<double> g;
  GraphScope<double> scope(g);
  TD x = random_tensor(Shape{1, 1, 3, 3}, 4);
  x.set_requires_grad();
  const TD y = mul(x, x);
  const TD z = add(y, x);
  const TD l = reduce_mean(z);
  EXPECT_LT(*y.node_id(), *z.node_id());
  EXPECT_LT(*z.node_id(), *l.node_id());
  EXPECT_EQ(g.size(), 3u);
}

TEST(Backward, Linearity) {
  TD x = random_tensor(Shape{1, 2, 4, 4}, 11);
  const TD w = random_tensor(Shape{3, 2, 3, 3}, 12);
  const double a = 1.7, b = -0.6;
  auto grad_of = [&](auto build) {
    TD xi = x.detach();
    xi.set_requires_grad();
    Graph<double> g;
    GraphScope<double> scope(g);
    g.backward(build(xi));
    return std::vector<double>(xi.grad().begin(), xi.grad().end());
  };
  auto f = [&](const TD& v) { return reduce_mean(mul(v, v)); };
  auto h = [&](const TD& v) { return reduce_mean(conv2d(v, w, TD(), 1, 1)); };
  const auto gf = grad_of(f);
  const auto gh = grad_of(h);
  const auto gc = grad_of([&](const TD& v) { return add(scale(f(v), a), scale(h(v), b)); });
  for (std::size_t i = 0; i < gc.size(); ++i) {
    const double want = a * gf[i] + b * gh[i];
    EXPECT_NEAR(gc[i], want, 1e-6 * std::abs(want) + 1e-15);
  }
}

TEST(Backward, ConvActivationMeanMatchesFiniteDifferences) {
  const TD w = random_tensor(Shape{4, 2, 3, 3}, 21);
  const TD x = random_tensor(Shape{1, 2, 5, 5}, 22);
  const double err = grad_check(
      [&](const TD& v) { return reduce_mean(sigmoid(conv2d(v, w, TD(), 1, 1))); }, x, 1e-5);
  EXPECT_LT(err, 1e-5);
}

TEST(GradCheck, MeanIsExact) {
  const TD x = random_tensor(Shape{2, 3, 4, 4}, 5);
  EXPECT_LT(grad_check([](const TD& v) { return reduce_mean(v); }, x, 1e-6), 1e-10);
}

TEST(GradCheck, MeanSquare) {
  const TD x = random_tensor(Shape{2, 3, 4, 4}, 6);
  EXPECT_LT(grad_check([](const TD& v) { return reduce_mean(mul(v, v)); }, x, 1e-6), 1e-7);
}

TEST(GradCheck, DetectsWrongGradient) {
  // scale(x, 2) forward with a stop-gradient copy: analytic grad is half the truth.
  const TD x = random_tensor(Shape{1, 1, 3, 3}, 7);
  const double err = grad_check(
      [](const TD& v) { return reduce_mean(add(v, v.detach())); }, x, 1e-6);
  EXPECT_GT(err, 0.3);
}

TEST(Tensor, FiniteInputsGiveFiniteOutputs) {
  const TD x = random_tensor(Shape{2, 2, 4, 4}, 8, -50, 50);
  for (const TD& y : {mul(x, x), sigmoid(x), leaky_relu(x, 0.2), add(x, x)})
    for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Tensor, NonFiniteIsReported) {
  set_finite_checks(true);
  TD x(Shape{1, 1, 1, 2}, {1.0, std::nan("")});
  EXPECT_THROW(check_finite(x, "test"), NumericError);
}

}  // namespace
}  // namespace demsr
