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

// Elevation rasters and the tile preprocessing used to build training pairs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "interp.hpp"
#include "tensor.hpp"

namespace demsr {

// Row-major elevations in meters, first row at the north edge. origin is the
// lower-left corner of the raster (ESRI xllcorner/yllcorner). cell_size is
// in the source's horizontal unit (feet for the reference data).
struct Grid {
  int nrows = 0;
  int ncols = 0;
  double cell_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  float nodata = -9999.0f;
  std::vector<float> values;

  Grid() = default;
  Grid(int rows, int cols, float fill = 0.0f)
      : nrows(rows), ncols(cols), values(static_cast<std::size_t>(rows) * cols, fill) {}

  float& at(int r, int c) { return values[static_cast<std::size_t>(r) * ncols + c]; }
  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * ncols + c]; }
  bool has_nodata() const;
  // Throws DimensionError if the invariants do not hold.
  void validate() const;
};

Array2D<double> to_array(const Grid& g);

// ESRI ASCII grid.
Grid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(const Grid& grid, const std::filesystem::path& path);

// "DEMR" binary raster: magic, u32 version, u32 nrows, u32 ncols,
// f64 cell_size, f64 origin x/y, f32 nodata, then f32 values (all LE).
Grid read_raw_raster(const std::filesystem::path& path);
void write_raw_raster(const Grid& grid, const std::filesystem::path& path);

// Dispatches on extension: .asc -> ASCII grid, anything else -> DEMR.
Grid read_grid(const std::filesystem::path& path);
void write_grid(const Grid& grid, const std::filesystem::path& path);

// Splits into tile x tile pieces in row-major tile order.
std::vector<Grid> tile_grid(const Grid& grid, int tile);

struct TilePair {
  std::string id;
  Grid lr;
  Grid hr;
};

// Pairs aligned tile lists (row-major, tile_cols tiles per row) and drops
// pairs where either side contains nodata. Ids are "<source>_r<row>_c<col>".
std::vector<TilePair> pair_and_filter(const std::vector<Grid>& lr_tiles,
                                      const std::vector<Grid>& hr_tiles,
                                      const std::string& source, int tile_cols, int ratio = 16);

struct DatasetStats {
  double avg = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
};

DatasetStats dataset_stats(std::span<const Grid> tiles);
// Statistics over the HR side of the pairs.
DatasetStats dataset_stats(std::span<const TilePair> pairs);

// v' = (v - mean) / scale.
struct Normalization {
  double mean = 0.0;
  double scale = 1.0;

  double apply(double v) const { return (v - mean) / scale; }
  double invert(double v) const { return v * scale + mean; }
};

Normalization make_normalization(const DatasetStats& stats);
std::vector<TilePair> normalize(std::span<const TilePair> pairs, const Normalization& norm);
template <typename T>
Tensor<T> denormalize(const Tensor<T>& x, const Normalization& norm);

// (1, 1, nrows, ncols) tensor of a grid, optionally normalized.
template <typename T>
Tensor<T> grid_to_tensor(const Grid& g, const Normalization* norm = nullptr);
// Stacks same-size grids into (n, 1, h, w).
template <typename T>
Tensor<T> stack_grids(std::span<const Grid* const> grids, const Normalization* norm = nullptr);

struct TerrainOptions {
  double roughness = 0.2;
  double min_elevation = 205.0;
  double max_elevation = 985.0;
  double cell_size = 3.0;
};

// Diamond-square fractal surface rescaled to [min_elevation, max_elevation].
// roughness scales the random displacement from one subdivision level to the
// next; 0 gives a surface built purely by averaging the four random corners.
Grid synthesize_terrain(std::uint64_t seed, int rows, int cols, const TerrainOptions& opt = {});

// Block means; cell_size grows by factor. Blocks touching nodata become nodata.
Grid downsample_avg(const Grid& grid, int factor);

// Tab-separated "id<TAB>lr_path<TAB>hr_path" lines.
struct ManifestEntry {
  std::string id;
  std::filesystem::path lr_path;
  std::filesystem::path hr_path;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
// Paths are written relative to the manifest directory when possible.
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<TilePair> load_pairs(const std::filesystem::path& manifest, int ratio = 16);

}  // namespace demsr
