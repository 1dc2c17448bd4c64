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

// Bilinear and bicubic resampling.
//
// Output sample d maps to source coordinate (d + 0.5) * in / out - 0.5
// (pixel centers aligned), and taps falling outside the source are clamped
// to the nearest edge sample. Bicubic uses the Keys cubic-convolution kernel
// with a = -0.5. Both methods are applied separably, rows first.

#pragma once

#include <span>
#include <string>
#include <vector>

namespace demsr {

struct TilePair;

enum class InterpMethod { kBilinear, kBicubic };

std::string to_string(InterpMethod m);
InterpMethod parse_interp_method(const std::string& name);

// Keys cubic-convolution kernel.
double cubic_kernel(double x, double a = -0.5);

// Source samples and weights contributing to each output position along one
// axis. taps[offsets[d] .. offsets[d + 1]) belong to output d.
struct AxisTaps {
  struct Tap {
    int index;
    double weight;
  };
  std::vector<int> offsets;
  std::vector<Tap> taps;
};

AxisTaps axis_taps(int in_size, int out_size, InterpMethod method);

template <typename T>
struct Array2D {
  int rows = 0;
  int cols = 0;
  std::vector<T> values;

  Array2D() = default;
  Array2D(int r, int c, T fill = T(0)) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
};

Array2D<double> resize(const Array2D<double>& src, int out_h, int out_w, InterpMethod method);

// Separable resampling of a single row-major plane; used by the tensor op.
template <typename T>
void resize_plane(std::span<const T> src, int in_h, int in_w, const AxisTaps& rows,
                  const AxisTaps& cols, std::span<T> dst, std::span<double> scratch);

// Mean squared error (m^2) of interpolating every LR tile up to its HR tile.
double baseline_mse(std::span<const TilePair> pairs, InterpMethod method);

}  // namespace demsr
