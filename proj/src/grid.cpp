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

#include "grid.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "errors.hpp"

namespace demsr {

namespace fs = std::filesystem;

bool Grid::has_nodata() const {
  return std::any_of(values.begin(), values.end(), [this](float v) { return v == nodata; });
}

void Grid::validate() const {
  if (nrows <= 0 || ncols <= 0)
    throw DimensionError("grid dimensions must be positive, got " + std::to_string(nrows) + "x" +
                         std::to_string(ncols));
  if (values.size() != static_cast<std::size_t>(nrows) * ncols)
    throw DimensionError("grid holds " + std::to_string(values.size()) + " values for " +
                         std::to_string(nrows) + "x" + std::to_string(ncols));
  if (!(cell_size > 0.0)) throw DimensionError("grid cell_size must be positive");
}

Array2D<double> to_array(const Grid& g) {
  Array2D<double> a(g.nrows, g.ncols);
  std::copy(g.values.begin(), g.values.end(), a.values.begin());
  return a;
}

// ---------------------------------------------------------------- ASCII grid

namespace {

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::optional<double> parse_number(const std::string& token) {
  if (token.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

Grid read_ascii_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::optional<double> ncols, nrows, xll, yll, cell, nodata;
  bool x_center = false;
  bool y_center = false;
  Grid g;
  std::size_t expected = 0;
  bool in_header = true;
  std::string line;
  int line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (in_header) {
      if (!(ss >> token)) continue;
      if (std::isalpha(static_cast<unsigned char>(token[0]))) {
        const std::string key = lower(token);
        std::string value;
        if (!(ss >> value)) throw ParseError("header key '" + token + "' has no value", line_no);
        const auto num = parse_number(value);
        if (!num) throw ParseError("header value '" + value + "' is not a number", line_no);
        if (key == "ncols") ncols = num;
        else if (key == "nrows") nrows = num;
        else if (key == "xllcorner" || key == "xllcenter") xll = num, x_center = key == "xllcenter";
        else if (key == "yllcorner" || key == "yllcenter") yll = num, y_center = key == "yllcenter";
        else if (key == "cellsize") cell = num;
        else if (key == "nodata_value") nodata = num;
        else throw ParseError("unknown header key '" + token + "'", line_no);
        continue;
      }
      // First data line.
      if (!ncols || !nrows || !xll || !yll || !cell)
        throw ParseError("incomplete header (need ncols, nrows, xllcorner, yllcorner, cellsize)",
                         line_no);
      if (*ncols < 1 || *nrows < 1 || *ncols != std::floor(*ncols) || *nrows != std::floor(*nrows))
        throw ParseError("ncols/nrows must be positive integers", line_no);
      if (!(*cell > 0.0)) throw ParseError("cellsize must be positive", line_no);
      g.ncols = static_cast<int>(*ncols);
      g.nrows = static_cast<int>(*nrows);
      g.cell_size = *cell;
      g.origin_x = x_center ? *xll - 0.5 * *cell : *xll;
      g.origin_y = y_center ? *yll - 0.5 * *cell : *yll;
      if (nodata) g.nodata = static_cast<float>(*nodata);
      expected = static_cast<std::size_t>(g.nrows) * g.ncols;
      g.values.reserve(expected);
      in_header = false;
      ss.clear();
      ss.str(line);
    }
    while (ss >> token) {
      const auto v = parse_number(token);
      if (!v) throw ParseError("value '" + token + "' is not a number", line_no);
      if (g.values.size() == expected)
        throw ParseError("more than the " + std::to_string(expected) + " declared values", line_no);
      g.values.push_back(static_cast<float>(*v));
    }
  }
  if (in_header) throw ParseError("no data values in '" + path.string() + "'", line_no);
  if (g.values.size() != expected)
    throw ParseError("expected " + std::to_string(expected) + " values, found " +
                         std::to_string(g.values.size()),
                     line_no);
  return g;
}

void write_ascii_grid(const Grid& grid, const fs::path& path) {
  grid.validate();
  std::ostringstream out;
  out << "ncols " << grid.ncols << "\n"
      << "nrows " << grid.nrows << "\n"
      << "xllcorner " << format_g(grid.origin_x, 17) << "\n"
      << "yllcorner " << format_g(grid.origin_y, 17) << "\n"
      << "cellsize " << format_g(grid.cell_size, 17) << "\n"
      << "NODATA_value " << format_g(grid.nodata, 9) << "\n";
  for (int r = 0; r < grid.nrows; ++r) {
    for (int c = 0; c < grid.ncols; ++c) {
      if (c) out << ' ';
      out << format_g(grid.at(r, c), 9);
    }
    out << '\n';
  }
  const std::string text = out.str();
  bin::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------- DEMR raster

namespace {
constexpr std::string_view kRasterMagic = "DEMR";
constexpr std::uint32_t kRasterVersion = 1;
}  // namespace

Grid read_raw_raster(const fs::path& path) {
  const auto data = bin::read_file(path);
  bin::Reader rd(data.data(), data.size(), "raster '" + path.string() + "'");
  if (rd.bytes(4) != kRasterMagic) throw FormatError("'" + path.string() + "' is not a DEMR raster");
  const std::uint32_t version = rd.u32();
  if (version != kRasterVersion)
    throw FormatError("unsupported DEMR version " + std::to_string(version));
  Grid g;
  const std::uint32_t rows = rd.u32();
  const std::uint32_t cols = rd.u32();
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
    throw FormatError("DEMR raster has invalid dimensions");
  g.nrows = static_cast<int>(rows);
  g.ncols = static_cast<int>(cols);
  g.cell_size = rd.f64();
  g.origin_x = rd.f64();
  g.origin_y = rd.f64();
  g.nodata = rd.f32();
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (rd.remaining() != count * 4)
    throw FormatError("DEMR payload is " + std::to_string(rd.remaining()) + " bytes, expected " +
                      std::to_string(count * 4));
  g.values.resize(count);
  for (auto& v : g.values) v = rd.f32();
  return g;
}

void write_raw_raster(const Grid& grid, const fs::path& path) {
  grid.validate();
  bin::Writer w;
  w.bytes(kRasterMagic);
  w.u32(kRasterVersion);
  w.u32(static_cast<std::uint32_t>(grid.nrows));
  w.u32(static_cast<std::uint32_t>(grid.ncols));
  w.f64(grid.cell_size);
  w.f64(grid.origin_x);
  w.f64(grid.origin_y);
  w.f32(grid.nodata);
  for (float v : grid.values) w.f32(v);
  bin::write_file(path, w.buffer());
}

Grid read_grid(const fs::path& path) {
  return lower(path.extension().string()) == ".asc" ? read_ascii_grid(path) : read_raw_raster(path);
}

void write_grid(const Grid& grid, const fs::path& path) {
  if (lower(path.extension().string()) == ".asc")
    write_ascii_grid(grid, path);
  else
    write_raw_raster(grid, path);
}

// ---------------------------------------------------------------- tiling

std::vector<Grid> tile_grid(const Grid& grid, int tile) {
  grid.validate();
  if (tile <= 0) throw DimensionError("tile size must be positive");
  if (grid.nrows % tile != 0 || grid.ncols % tile != 0)
    throw DimensionError("grid " + std::to_string(grid.nrows) + "x" + std::to_string(grid.ncols) +
                         " is not divisible into " + std::to_string(tile) + "x" +
                         std::to_string(tile) + " tiles");
  const int tr = grid.nrows / tile;
  const int tc = grid.ncols / tile;
  std::vector<Grid> tiles;
  tiles.reserve(static_cast<std::size_t>(tr) * tc);
  for (int i = 0; i < tr; ++i) {
    for (int j = 0; j < tc; ++j) {
      Grid t(tile, tile);
      t.cell_size = grid.cell_size;
      t.nodata = grid.nodata;
      t.origin_x = grid.origin_x + j * tile * grid.cell_size;
      t.origin_y = grid.origin_y + (grid.nrows - (i + 1) * tile) * grid.cell_size;
      for (int r = 0; r < tile; ++r) {
        const float* src = &grid.values[static_cast<std::size_t>(i * tile + r) * grid.ncols + j * tile];
        std::copy(src, src + tile, &t.values[static_cast<std::size_t>(r) * tile]);
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<TilePair> pair_and_filter(const std::vector<Grid>& lr_tiles,
                                      const std::vector<Grid>& hr_tiles, const std::string& source,
                                      int tile_cols, int ratio) {
  if (lr_tiles.size() != hr_tiles.size())
    throw DimensionError("pairing: " + std::to_string(lr_tiles.size()) + " LR tiles vs " +
                         std::to_string(hr_tiles.size()) + " HR tiles");
  if (tile_cols <= 0) throw ContractError("pairing: tile_cols must be positive");
  std::vector<TilePair> pairs;
  for (std::size_t i = 0; i < lr_tiles.size(); ++i) {
    const Grid& lr = lr_tiles[i];
    const Grid& hr = hr_tiles[i];
    if (hr.nrows != ratio * lr.nrows || hr.ncols != ratio * lr.ncols)
      throw DimensionError("pairing: HR tile " + std::to_string(hr.nrows) + "x" +
                           std::to_string(hr.ncols) + " is not " + std::to_string(ratio) +
                           "x LR tile " + std::to_string(lr.nrows) + "x" + std::to_string(lr.ncols));
    if (lr.has_nodata() || hr.has_nodata()) continue;
    const std::size_t row = i / static_cast<std::size_t>(tile_cols);
    const std::size_t col = i % static_cast<std::size_t>(tile_cols);
    pairs.push_back(TilePair{source + "_r" + std::to_string(row) + "_c" + std::to_string(col), lr, hr});
  }
  return pairs;
}

// ---------------------------------------------------------------- statistics

DatasetStats dataset_stats(std::span<const Grid> tiles) {
  DatasetStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const Grid& g : tiles)
    for (float v : g.values) {
      if (v == g.nodata) continue;
      sum += v;
      s.min = std::min(s.min, static_cast<double>(v));
      s.max = std::max(s.max, static_cast<double>(v));
      ++s.count;
    }
  if (s.count == 0) throw ContractError("dataset_stats: no valid pixels");
  s.avg = s.mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (const Grid& g : tiles)
    for (float v : g.values) {
      if (v == g.nodata) continue;
      const double d = v - s.mean;
      ss += d * d;
    }
  s.std = std::sqrt(ss / static_cast<double>(s.count));
  return s;
}

DatasetStats dataset_stats(std::span<const TilePair> pairs) {
  std::vector<Grid> hr;
  hr.reserve(pairs.size());
  for (const auto& p : pairs) hr.push_back(p.hr);
  return dataset_stats(std::span<const Grid>(hr));
}

Normalization make_normalization(const DatasetStats& stats) {
  if (!(stats.std > 1e-12))
    throw DegenerateDataError("cannot normalize: elevation standard deviation is " +
                              format_g(stats.std, 6));
  return Normalization{stats.mean, stats.std};
}

namespace {
Grid normalized(const Grid& g, const Normalization& norm) {
  Grid out = g;
  for (float& v : out.values) v = static_cast<float>(norm.apply(v));
  return out;
}
}  // namespace

std::vector<TilePair> normalize(std::span<const TilePair> pairs, const Normalization& norm) {
  std::vector<TilePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(TilePair{p.id, normalized(p.lr, norm), normalized(p.hr, norm)});
  return out;
}

template <typename T>
Tensor<T> denormalize(const Tensor<T>& x, const Normalization& norm) {
  std::vector<T> v(x.data().begin(), x.data().end());
  for (T& e : v) e = static_cast<T>(norm.invert(e));
  return Tensor<T>(x.shape(), std::move(v));
}

template <typename T>
Tensor<T> stack_grids(std::span<const Grid* const> grids, const Normalization* norm) {
  if (grids.empty()) throw ContractError("stack_grids: no grids");
  const int h = grids[0]->nrows;
  const int w = grids[0]->ncols;
  std::vector<T> v;
  v.reserve(grids.size() * static_cast<std::size_t>(h) * w);
  for (const Grid* g : grids) {
    if (g->nrows != h || g->ncols != w) throw DimensionError("stack_grids: mixed grid sizes");
    for (float e : g->values) v.push_back(static_cast<T>(norm ? norm->apply(e) : e));
  }
  return Tensor<T>(Shape{static_cast<int>(grids.size()), 1, h, w}, std::move(v));
}

template <typename T>
Tensor<T> grid_to_tensor(const Grid& g, const Normalization* norm) {
  const Grid* one[] = {&g};
  return stack_grids<T>(one, norm);
}

template Tensor<float> denormalize<float>(const Tensor<float>&, const Normalization&);
template Tensor<double> denormalize<double>(const Tensor<double>&, const Normalization&);
template Tensor<float> stack_grids<float>(std::span<const Grid* const>, const Normalization*);
template Tensor<double> stack_grids<double>(std::span<const Grid* const>, const Normalization*);
template Tensor<float> grid_to_tensor<float>(const Grid&, const Normalization*);
template Tensor<double> grid_to_tensor<double>(const Grid&, const Normalization*);

// ---------------------------------------------------------------- synthesis

Grid synthesize_terrain(std::uint64_t seed, int rows, int cols, const TerrainOptions& opt) {
  if (rows <= 0 || cols <= 0) throw DimensionError("synthesize_terrain: size must be positive");
  if (!(opt.max_elevation >= opt.min_elevation))
    throw ConfigError("synthesize_terrain: max_elevation below min_elevation");
  int n = 2;
  while (n + 1 < std::max(rows, cols)) n *= 2;
  const int size = n + 1;

  std::mt19937_64 rng(seed);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  std::vector<double> h(static_cast<std::size_t>(size) * size, 0.0);
  auto at = [&](int r, int c) -> double& { return h[static_cast<std::size_t>(r) * size + c]; };

  at(0, 0) = uniform();
  at(0, n) = uniform();
  at(n, 0) = uniform();
  at(n, n) = uniform();

  double amp = 1.0;
  for (int step = n; step > 1; step /= 2) {
    const int half = step / 2;
    amp *= opt.roughness;
    // Diamond step: square centers.
    for (int r = half; r < size; r += step)
      for (int c = half; c < size; c += step)
        at(r, c) = 0.25 * (at(r - half, c - half) + at(r - half, c + half) + at(r + half, c - half) +
                           at(r + half, c + half)) +
                   amp * uniform();
    // Square step: edge midpoints, averaging the neighbours that exist.
    for (int r = 0; r < size; r += half) {
      for (int c = (r / half) % 2 == 0 ? half : 0; c < size; c += step) {
        double sum = 0.0;
        int k = 0;
        if (r >= half) sum += at(r - half, c), ++k;
        if (r + half < size) sum += at(r + half, c), ++k;
        if (c >= half) sum += at(r, c - half), ++k;
        if (c + half < size) sum += at(r, c + half), ++k;
        at(r, c) = sum / k + amp * uniform();
      }
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) lo = std::min(lo, at(r, c)), hi = std::max(hi, at(r, c));

  Grid g(rows, cols);
  g.cell_size = opt.cell_size;
  const double span = hi - lo;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double t = span > 0.0 ? (at(r, c) - lo) / span : 0.5;
      g.at(r, c) = static_cast<float>(opt.min_elevation + t * (opt.max_elevation - opt.min_elevation));
    }
  return g;
}

Grid downsample_avg(const Grid& grid, int factor) {
  grid.validate();
  if (factor <= 0) throw DimensionError("downsample factor must be positive");
  if (grid.nrows % factor != 0 || grid.ncols % factor != 0)
    throw DimensionError("grid " + std::to_string(grid.nrows) + "x" + std::to_string(grid.ncols) +
                         " not divisible by downsample factor " + std::to_string(factor));
  Grid out(grid.nrows / factor, grid.ncols / factor);
  out.cell_size = grid.cell_size * factor;
  out.origin_x = grid.origin_x;
  out.origin_y = grid.origin_y;
  out.nodata = grid.nodata;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int r = 0; r < out.nrows; ++r)
    for (int c = 0; c < out.ncols; ++c) {
      double sum = 0.0;
      bool gap = false;
      for (int i = 0; i < factor; ++i)
        for (int j = 0; j < factor; ++j) {
          const float v = grid.at(r * factor + i, c * factor + j);
          gap |= v == grid.nodata;
          sum += v;
        }
      out.at(r, c) = gap ? grid.nodata : static_cast<float>(sum * inv);
    }
  return out;
}

// ---------------------------------------------------------------- manifests

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
      fields.push_back(line.substr(start, tab - start));
    fields.push_back(line.substr(start));
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw ParseError("manifest line must be id<TAB>lr_path<TAB>hr_path", line_no);
    auto resolve = [&base](const std::string& p) {
      fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    entries.push_back(ManifestEntry{fields[0], resolve(fields[1]), resolve(fields[2])});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::current_path() : fs::absolute(path.parent_path());
  auto rel = [&base](const fs::path& p) {
    std::error_code ec;
    fs::path r = fs::relative(fs::absolute(p), base, ec);
    return (ec || r.empty()) ? p.generic_string() : r.generic_string();
  };
  std::string text;
  for (const auto& e : entries) text += e.id + "\t" + rel(e.lr_path) + "\t" + rel(e.hr_path) + "\n";
  bin::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<TilePair> load_pairs(const fs::path& manifest, int ratio) {
  std::vector<TilePair> pairs;
  for (const auto& e : read_manifest(manifest)) {
    TilePair p{e.id, read_grid(e.lr_path), read_grid(e.hr_path)};
    if (p.hr.nrows != ratio * p.lr.nrows || p.hr.ncols != ratio * p.lr.ncols)
      throw DimensionError("pair '" + e.id + "': HR is not " + std::to_string(ratio) + "x LR");
    if (p.lr.has_nodata() || p.hr.has_nodata())
      throw ContractError("pair '" + e.id + "' contains nodata");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace demsr
