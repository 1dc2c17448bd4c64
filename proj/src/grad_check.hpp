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

// Central finite-difference verification of reverse-mode gradients.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace demsr {

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

struct GradCheckOptions {
  double eps = 1e-6;
  // Number of randomly chosen elements to probe; 0 probes all of them.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

// max_i |analytic_i - numeric_i| / max(1e-12, |analytic_i| + |numeric_i|),
// with numeric_i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
double grad_check(const ScalarFn& f, const Tensor<double>& x, double eps);
double grad_check(const ScalarFn& f, const Tensor<double>& x, const GradCheckOptions& opt);

double relative_error(double analytic, double numeric);

struct GradCheckEntry {
  std::string op;
  double max_rel_error = 0.0;
  int checks = 0;
};

// Randomized gradient checks for every differentiable op and for the tiny
// model, one entry per op, each the worst case over `seeds` seeds.
std::vector<GradCheckEntry> run_gradcheck_suite(int seeds = 20, double eps = 1e-6);

}  // namespace demsr
