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

#include "interp.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "grid.hpp"

namespace demsr {

std::string to_string(InterpMethod m) {
  return m == InterpMethod::kBilinear ? "bilinear" : "bicubic";
}

InterpMethod parse_interp_method(const std::string& name) {
  if (name == "bilinear") return InterpMethod::kBilinear;
  if (name == "bicubic") return InterpMethod::kBicubic;
  throw ConfigError("unknown interpolation method '" + name + "' (expected bilinear|bicubic)");
}

double cubic_kernel(double x, double a) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

AxisTaps axis_taps(int in_size, int out_size, InterpMethod method) {
  if (out_size <= 0) throw DimensionError("resize: output size must be positive");
  if (in_size < 2)
    throw DimensionError("resize: input size must be at least 2, got " + std::to_string(in_size));

  AxisTaps axis;
  axis.offsets.reserve(out_size + 1);
  axis.offsets.push_back(0);
  const double ratio = static_cast<double>(in_size) / out_size;
  auto clamp = [in_size](int i) { return std::clamp(i, 0, in_size - 1); };

  for (int d = 0; d < out_size; ++d) {
    const double src = (d + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    const int i0 = static_cast<int>(base);
    if (method == InterpMethod::kBilinear) {
      axis.taps.push_back({clamp(i0), 1.0 - t});
      axis.taps.push_back({clamp(i0 + 1), t});
    } else {
      axis.taps.push_back({clamp(i0 - 1), cubic_kernel(t + 1.0)});
      axis.taps.push_back({clamp(i0), cubic_kernel(t)});
      axis.taps.push_back({clamp(i0 + 1), cubic_kernel(1.0 - t)});
      axis.taps.push_back({clamp(i0 + 2), cubic_kernel(2.0 - t)});
    }
    axis.offsets.push_back(static_cast<int>(axis.taps.size()));
  }
  return axis;
}

template <typename T>
void resize_plane(std::span<const T> src, int in_h, int in_w, const AxisTaps& rows,
                  const AxisTaps& cols, std::span<T> dst, std::span<double> scratch) {
  const int out_h = static_cast<int>(rows.offsets.size()) - 1;
  const int out_w = static_cast<int>(cols.offsets.size()) - 1;
  // Horizontal pass into scratch (in_h x out_w), then vertical pass. Each sum
  // is taken relative to its first tap; weights sum to one, so flat input
  // comes back unchanged.
  for (int y = 0; y < in_h; ++y) {
    const T* row = src.data() + static_cast<std::size_t>(y) * in_w;
    double* out = scratch.data() + static_cast<std::size_t>(y) * out_w;
    for (int x = 0; x < out_w; ++x) {
      const int k0 = cols.offsets[x];
      const double anchor = static_cast<double>(row[cols.taps[k0].index]);
      double acc = 0.0;
      for (int k = k0 + 1; k < cols.offsets[x + 1]; ++k)
        acc += cols.taps[k].weight * (static_cast<double>(row[cols.taps[k].index]) - anchor);
      out[x] = anchor + acc;
    }
  }
  for (int y = 0; y < out_h; ++y) {
    T* out = dst.data() + static_cast<std::size_t>(y) * out_w;
    const int k0 = rows.offsets[y];
    const double* base = scratch.data() + static_cast<std::size_t>(rows.taps[k0].index) * out_w;
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = k0 + 1; k < rows.offsets[y + 1]; ++k)
        acc += rows.taps[k].weight * (scratch[static_cast<std::size_t>(rows.taps[k].index) * out_w + x] - base[x]);
      out[x] = static_cast<T>(base[x] + acc);
    }
  }
}

template void resize_plane<float>(std::span<const float>, int, int, const AxisTaps&,
                                  const AxisTaps&, std::span<float>, std::span<double>);
template void resize_plane<double>(std::span<const double>, int, int, const AxisTaps&,
                                   const AxisTaps&, std::span<double>, std::span<double>);

Array2D<double> resize(const Array2D<double>& src, int out_h, int out_w, InterpMethod method) {
  if (out_h <= 0 || out_w <= 0) throw DimensionError("resize: output dims must be positive");
  const AxisTaps rows = axis_taps(src.rows, out_h, method);
  const AxisTaps cols = axis_taps(src.cols, out_w, method);
  Array2D<double> out(out_h, out_w);
  std::vector<double> scratch(static_cast<std::size_t>(src.rows) * out_w);
  resize_plane<double>(src.values, src.rows, src.cols, rows, cols, out.values, scratch);
  return out;
}

double baseline_mse(std::span<const TilePair> pairs, InterpMethod method) {
  if (pairs.empty()) throw ContractError("baseline_mse: no tile pairs");
  double sum = 0.0;
  std::size_t count = 0;
  for (const TilePair& p : pairs) {
    const Array2D<double> up = resize(to_array(p.lr), p.hr.nrows, p.hr.ncols, method);
    for (std::size_t i = 0; i < up.values.size(); ++i) {
      const double d = up.values[i] - static_cast<double>(p.hr.values[i]);
      sum += d * d;
    }
    count += up.values.size();
  }
  return sum / static_cast<double>(count);
}

}  // namespace demsr
