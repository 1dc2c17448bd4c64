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

#include "grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "errors.hpp"
#include "model.hpp"
#include "nn_ops.hpp"

namespace demsr {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

namespace {

// Derivative at 0 of a scalar function of a step along some direction. The
// step is halved while the probe points land on different linear pieces of
// some LeakyReLU, where a finite difference is meaningless.
double smooth_derivative(const std::function<double(double)>& g, double eps, bool fourth_order) {
  double h = eps;
  double derivative = 0.0;
  for (int attempt = 0; attempt < 30; ++attempt, h *= 0.5) {
    KinkProbe probe;
    std::uint64_t reference = 0;
    bool smooth = true;
    auto at = [&](double step) {
      probe.reset();
      const double v = g(step);
      if (step == h) reference = probe.fingerprint();
      else smooth = smooth && probe.fingerprint() == reference;
      return v;
    };
    const double up = at(h);
    const double down = at(-h);
    if (fourth_order) {
      const double up2 = at(2.0 * h);
      const double down2 = at(-2.0 * h);
      derivative = (8.0 * (up - down) - (up2 - down2)) / (12.0 * h);
    } else {
      derivative = (up - down) / (2.0 * h);
    }
    if (smooth) break;
  }
  return derivative;
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor<double>& x, double eps) {
  return grad_check(f, x, GradCheckOptions{eps, 0, 0});
}

double grad_check(const ScalarFn& f, const Tensor<double>& x, const GradCheckOptions& opt) {
  Tensor<double> probe = x.detach();
  probe.set_requires_grad(true);
  {
    Graph<double> graph;
    GraphScope<double> scope(graph);
    const Tensor<double> y = f(probe);
    if (y.shape() != Shape{1, 1, 1, 1}) throw ContractError("grad_check: f must return a scalar");
    graph.backward(y);
  }
  const std::vector<double> analytic(probe.grad().begin(), probe.grad().end());

  std::vector<std::size_t> elements(x.size());
  std::iota(elements.begin(), elements.end(), 0);
  if (opt.max_elements > 0 && opt.max_elements < elements.size()) {
    std::mt19937_64 rng(opt.seed);
    for (std::size_t i = 0; i < opt.max_elements; ++i) {
      const std::size_t j = i + rng() % (elements.size() - i);
      std::swap(elements[i], elements[j]);
    }
    elements.resize(opt.max_elements);
  }

  double worst = 0.0;
  for (std::size_t i : elements) {
    const double numeric = smooth_derivative(
        [&](double step) {
          Tensor<double> moved = x.detach();
          moved.mutable_data()[i] += step;
          return f(moved).item();
        },
        opt.eps, false);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

// ------------------------------------------------------------------ suite

namespace {

class SuiteRng {
 public:
  explicit SuiteRng(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  Tensor<double> tensor(Shape s, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(s);
    for (double& v : t.mutable_data()) v = uniform(lo, hi);
    return t;
  }
  // Values bounded away from zero so kinks are not straddled by the probe.
  Tensor<double> tensor_off_zero(Shape s, double margin) {
    Tensor<double> t(s);
    for (double& v : t.mutable_data()) {
      v = uniform(margin, 1.0);
      if (rng_() & 1) v = -v;
    }
    return t;
  }
  std::uint64_t next() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

// Scalar readout mean(y * weights), weights drawn once per check.
Tensor<double> readout(const Tensor<double>& y, const Tensor<double>& weights) {
  return reduce_mean(mul(y, weights));
}

struct Suite {
  double eps;
  std::vector<GradCheckEntry> entries;

  void report(const std::string& op, double err) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.op == op; });
    if (it == entries.end()) {
      entries.push_back({op, err, 1});
    } else {
      it->max_rel_error = std::max(it->max_rel_error, err);
      ++it->checks;
    }
  }
  double check(const ScalarFn& f, const Tensor<double>& x) { return grad_check(f, x, eps); }
};

Shape random_shape(SuiteRng& rng, int max_c = 4) {
  return Shape{rng.integer(1, 2), rng.integer(1, max_c), rng.integer(3, 6), rng.integer(3, 6)};
}

void check_conv(Suite& suite, SuiteRng& rng) {
  const Shape xs = random_shape(rng);
  const int k = rng.integer(0, 1) ? 3 : 1;
  const int pad = k / 2;
  const int co = rng.integer(1, 4);
  const Tensor<double> x = rng.tensor(xs);
  const Tensor<double> w = rng.tensor({co, xs.c, k, k});
  const Tensor<double> b = rng.tensor({1, co, 1, 1});
  const Tensor<double> r = rng.tensor({xs.n, co, xs.h, xs.w});
  double err = suite.check([&](const Tensor<double>& v) { return readout(conv2d(v, w, b, 1, pad), r); }, x);
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(conv2d(x, v, b, 1, pad), r); }, w));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(conv2d(x, w, v, 1, pad), r); }, b));
  // Strided variant on an odd-sized input.
  const Tensor<double> xo = rng.tensor({1, xs.c, 5, 5});
  const Tensor<double> w3 = rng.tensor({co, xs.c, 3, 3});
  const Tensor<double> r2 = rng.tensor({1, co, 3, 3});
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(conv2d(v, w3, b, 2, 1), r2); }, xo));
  suite.report("conv2d", err);
}

void check_depthwise(Suite& suite, SuiteRng& rng) {
  const Shape xs = random_shape(rng);
  const Tensor<double> x = rng.tensor(xs);
  const Tensor<double> w = rng.tensor({xs.c, 1, 3, 3});
  const Tensor<double> b = rng.tensor({1, xs.c, 1, 1});
  const Tensor<double> r = rng.tensor(xs);
  auto f = [&](const Tensor<double>& xv, const Tensor<double>& wv, const Tensor<double>& bv) {
    return readout(depthwise_conv2d(xv, wv, bv, 1, 1), r);
  };
  double err = suite.check([&](const Tensor<double>& v) { return f(v, w, b); }, x);
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return f(x, v, b); }, w));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return f(x, w, v); }, b));
  suite.report("depthwise_conv2d", err);
}

void check_pointwise(Suite& suite, SuiteRng& rng) {
  const Shape xs = random_shape(rng);
  const Tensor<double> r = rng.tensor(xs);
  suite.report("leaky_relu",
               suite.check([&](const Tensor<double>& v) { return readout(leaky_relu(v, 0.2), r); },
                           rng.tensor_off_zero(xs, 0.05)));
  suite.report("sigmoid", suite.check([&](const Tensor<double>& v) { return readout(sigmoid(v), r); },
                                      rng.tensor(xs, -4.0, 4.0)));
  const Tensor<double> rp = rng.tensor({xs.n, xs.c, 1, 1});
  suite.report("global_avg_pool",
               suite.check([&](const Tensor<double>& v) { return readout(global_avg_pool(v), rp); },
                           rng.tensor(xs)));
  const Tensor<double> target = rng.tensor(xs);
  // Central differences are exact on a quadratic, so a wide step only removes
  // rounding noise.
  suite.report("mse_loss", grad_check([&](const Tensor<double>& v) { return mse_loss(v, target); },
                                      rng.tensor(xs), 1e-2));
  suite.report("reduce_mean", suite.check([&](const Tensor<double>& v) { return reduce_mean(v); },
                                          rng.tensor(xs)));

  // Broadcast operands of the elementwise ops.
  const Tensor<double> a = rng.tensor(xs);
  const Tensor<double> bias = rng.tensor({1, xs.c, 1, 1});
  double err = suite.check([&](const Tensor<double>& v) { return readout(mul(v, bias), r); }, a);
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(mul(a, v), r); }, bias));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(add(a, v), r); }, bias));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(sub(a, v), r); }, bias));
  suite.report("ew_binary", err);
}

void check_se(Suite& suite, SuiteRng& rng) {
  const Shape xs = random_shape(rng);
  const int cr = rng.integer(1, 3);
  const Tensor<double> x = rng.tensor(xs);
  const Tensor<double> wr = rng.tensor({cr, xs.c, 1, 1});
  const Tensor<double> br = rng.tensor({1, cr, 1, 1});
  const Tensor<double> we = rng.tensor({xs.c, cr, 1, 1});
  const Tensor<double> be = rng.tensor({1, xs.c, 1, 1});
  const Tensor<double> r = rng.tensor(xs);
  double err = suite.check([&](const Tensor<double>& v) { return readout(se_block(v, wr, br, we, be), r); }, x);
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(se_block(x, v, br, we, be), r); }, wr));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(se_block(x, wr, v, we, be), r); }, br));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(se_block(x, wr, br, v, be), r); }, we));
  err = std::max(err, suite.check([&](const Tensor<double>& v) { return readout(se_block(x, wr, br, we, v), r); }, be));
  suite.report("se_block", err);
}

void check_shuffle(Suite& suite, SuiteRng& rng) {
  const int r = rng.integer(1, 2);
  const Shape xs{rng.integer(1, 2), r * r * rng.integer(1, 2), rng.integer(3, 6), rng.integer(3, 6)};
  const Tensor<double> ro = rng.tensor({xs.n, xs.c / (r * r), xs.h * r, xs.w * r});
  suite.report("pixel_shuffle",
               suite.check([&](const Tensor<double>& v) { return readout(pixel_shuffle(v, r), ro); },
                           rng.tensor(xs)));
  const Tensor<double> ru = rng.tensor(xs);
  suite.report("pixel_unshuffle",
               suite.check([&](const Tensor<double>& v) { return readout(pixel_unshuffle(v, r), ru); },
                           rng.tensor(ro.shape())));
}

void check_interpolate(Suite& suite, SuiteRng& rng) {
  const Shape xs = random_shape(rng);
  const int oh = rng.integer(2, 16);
  const int ow = rng.integer(2, 16);
  const Tensor<double> r = rng.tensor({xs.n, xs.c, oh, ow});
  for (InterpMethod m : {InterpMethod::kBilinear, InterpMethod::kBicubic})
    suite.report("interpolate_" + to_string(m),
                 suite.check([&](const Tensor<double>& v) { return readout(interpolate(v, oh, ow, m), r); },
                             rng.tensor(xs)));
}

void check_model(Suite& suite, SuiteRng& rng, std::uint64_t seed) {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.seed = seed;
  Model<double> model(cfg);
  // The initializer leaves up2 at zero, which would zero every upstream
  // gradient; draw the output layers at random so all paths are exercised.
  for (const char* name : {"up2.weight", "final.weight"}) {
    Tensor<double>& p = model.param(name);
    const Shape s = p.shape();
    const double bound = std::sqrt(3.0 / (s.c * s.h * s.w));
    for (double& v : p.mutable_data()) v = rng.uniform(-bound, bound);
  }
  const int h = rng.integer(3, 5);
  const int w = rng.integer(3, 5);
  const Tensor<double> x = rng.tensor({1, 1, h, w});
  const Tensor<double> target = rng.tensor({1, 1, 16 * h, 16 * w});

  // Input gradient with frozen parameters.
  model.set_trainable(false);
  double err = suite.check([&](const Tensor<double>& v) { return mse_loss(model.forward(v), target); }, x);
  model.set_trainable(true);

  // Parameter gradients: one directional derivative per parameter tensor
  // along v = sign(grad), so <grad, v> = |grad|_1 and no element can hide
  // behind cancellation. Single elements of the deep SE weights move the loss
  // by less than its rounding step, so per-element probes cannot resolve them.
  model.zero_grad();
  {
    Graph<double> graph;
    GraphScope<double> scope(graph);
    graph.backward(mse_loss(model.forward(x), target));
  }
  const Tensor<double> base = model.forward(x);
  for (auto& [name, p] : model.parameters()) {
    std::vector<double> dir(p.size());
    double analytic = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      const double g = p.grad()[i];
      dir[i] = g > 0.0 ? 1.0 : g < 0.0 ? -1.0 : (rng.next() & 1) ? 1.0 : -1.0;
      analytic += dir[i] * p.grad()[i];
    }
    const std::vector<double> orig(p.data().begin(), p.data().end());
    // Loss change relative to the unperturbed point, accumulated term by term
    // so its rounding step scales with the change rather than the loss.
    const double numeric = smooth_derivative(
        [&](double step) {
          for (std::size_t i = 0; i < dir.size(); ++i) p.mutable_data()[i] = orig[i] + step * dir[i];
          const Tensor<double> moved = model.forward(x);
          detail::CompensatedSum delta;
          for (std::size_t i = 0; i < base.size(); ++i) {
            const double a = moved.data()[i] - target.data()[i];
            const double b = base.data()[i] - target.data()[i];
            delta.add((a - b) * (a + b));
          }
          return delta.value() / static_cast<double>(base.size());
        },
        1e-3, true);
    std::copy(orig.begin(), orig.end(), p.mutable_data().begin());
    err = std::max(err, relative_error(analytic, numeric));
  }
  suite.report("model_tiny", err);
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(int seeds, double eps) {
  Suite suite{eps, {}};
  for (int s = 0; s < seeds; ++s) {
    SuiteRng rng(0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(s + 1));
    check_conv(suite, rng);
    check_depthwise(suite, rng);
    check_pointwise(suite, rng);
    check_se(suite, rng);
    check_shuffle(suite, rng);
    check_interpolate(suite, rng);
    check_model(suite, rng, static_cast<std::uint64_t>(s));
  }
  return suite.entries;
}

}  // namespace demsr
