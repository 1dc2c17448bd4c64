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

#include "commands.hpp"

#include <system_error>

#include "checkpoint.hpp"
#include "errors.hpp"

namespace demsr::cmd {
namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void note(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is not set");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw IoError(std::string(what) + " '" + p.string() + "' does not exist");
}

void make_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("out_dir is not set");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

int ratio_of(const RunConfig& cfg) {
  cfg.validate();
  return cfg.scale_factor;
}

}  // namespace

SynthResult synth(const RunConfig& cfg, const LogFn& log) {
  const int ratio = ratio_of(cfg);
  if (cfg.synth_size % cfg.tile_size != 0)
    throw DimensionError("synth_size " + std::to_string(cfg.synth_size) + " is not a multiple of tile_size " +
                         std::to_string(cfg.tile_size));
  make_dir(cfg.out_dir);
  const std::string ext = cfg.synth_format == "asc" ? ".asc" : ".demr";
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < cfg.synth_count; ++i) {
    const std::uint64_t seed = splitmix64(cfg.train.seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    const Grid hr = synthesize_terrain(seed, cfg.synth_size, cfg.synth_size, cfg.terrain);
    const Grid lr = downsample_avg(hr, ratio);
    const std::string id = "synth_" + std::to_string(i);
    ManifestEntry e{id, cfg.out_dir / ("lr_" + std::to_string(i) + ext), cfg.out_dir / ("hr_" + std::to_string(i) + ext)};
    write_grid(hr, e.hr_path);
    write_grid(lr, e.lr_path);
    entries.push_back(std::move(e));
    note(log, "synth: wrote " + id);
  }
  SynthResult r{entries.size(), cfg.out_dir / "manifest.tsv"};
  write_manifest(entries, r.manifest);
  return r;
}

TileResult tile(const RunConfig& cfg, const fs::path& hr_path, const fs::path& lr_path, const LogFn& log) {
  const int ratio = ratio_of(cfg);
  require_file(hr_path, "HR raster");
  require_file(lr_path, "LR raster");
  const Grid hr = read_grid(hr_path);
  const Grid lr = read_grid(lr_path);
  if (hr.nrows != ratio * lr.nrows || hr.ncols != ratio * lr.ncols)
    throw DimensionError("HR raster " + std::to_string(hr.nrows) + "x" + std::to_string(hr.ncols) + " is not " +
                         std::to_string(ratio) + "x the LR raster " + std::to_string(lr.nrows) + "x" +
                         std::to_string(lr.ncols));
  const int lr_tile = cfg.tile_size / ratio;
  const auto hr_tiles = tile_grid(hr, cfg.tile_size);
  const auto lr_tiles = tile_grid(lr, lr_tile);
  const auto pairs = pair_and_filter(lr_tiles, hr_tiles, hr_path.stem().string(), hr.ncols / cfg.tile_size, ratio);

  make_dir(cfg.out_dir / "tiles");
  const std::string ext = cfg.synth_format == "asc" ? ".asc" : ".demr";
  std::vector<ManifestEntry> entries;
  for (const TilePair& p : pairs) {
    ManifestEntry e{p.id, cfg.out_dir / "tiles" / (p.id + "_lr" + ext), cfg.out_dir / "tiles" / (p.id + "_hr" + ext)};
    write_grid(p.lr, e.lr_path);
    write_grid(p.hr, e.hr_path);
    entries.push_back(std::move(e));
  }
  TileResult r{pairs.size(), hr_tiles.size() - pairs.size(), cfg.out_dir / "manifest.tsv"};
  write_manifest(entries, r.manifest);
  note(log, "tile: kept " + std::to_string(r.kept) + ", dropped " + std::to_string(r.dropped));
  return r;
}

DatasetStats stats(const fs::path& manifest) {
  require_file(manifest, "manifest");
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw ContractError("manifest '" + manifest.string() + "' has no entries");
  std::vector<Grid> hr;
  hr.reserve(entries.size());
  for (const auto& e : entries) hr.push_back(read_grid(e.hr_path));
  return dataset_stats(std::span<const Grid>(hr));
}

FitResult train(const RunConfig& cfg, const LogFn& log) {
  cfg.validate();
  require_file(cfg.train_manifest, "train_manifest");
  if (!cfg.holdout_manifest.empty()) require_file(cfg.holdout_manifest, "holdout_manifest");
  if (!cfg.resume.empty()) require_file(cfg.resume, "resume");
  if (cfg.train.schedule_on == ScheduleOn::kHoldout && cfg.holdout_manifest.empty())
    throw ConfigError("schedule_on = holdout needs holdout_manifest");
  make_dir(cfg.out_dir);

  const auto pairs = load_pairs(cfg.train_manifest, cfg.scale_factor);
  std::vector<TilePair> holdout;
  if (!cfg.holdout_manifest.empty()) holdout = load_pairs(cfg.holdout_manifest, cfg.scale_factor);
  note(log, "train: " + std::to_string(pairs.size()) + " pairs, " + std::to_string(holdout.size()) + " held out");

  Model<float> model(cfg.model_config());
  FitOptions opt;
  opt.out_dir = cfg.out_dir;
  if (!cfg.resume.empty()) opt.resume_from = cfg.resume;
  opt.holdout = holdout;
  opt.log = log;
  return fit(model, pairs, cfg.train, opt);
}

EvalMethod parse_eval_method(const std::string& name) {
  if (name == "model") return EvalMethod::kModel;
  if (name == "bicubic") return EvalMethod::kBicubic;
  if (name == "bilinear") return EvalMethod::kBilinear;
  throw ConfigError("unknown eval method '" + name + "' (model, bicubic, bilinear)");
}

EvalReport eval(const RunConfig& cfg, EvalMethod method, const fs::path& checkpoint, const fs::path& manifest,
                const fs::path& out_csv) {
  cfg.validate();
  require_file(manifest, "manifest");
  EvalReport report;
  if (method == EvalMethod::kModel) {
    require_file(checkpoint, "checkpoint");
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    const auto pairs = load_pairs(manifest, ck.model.config().scale_factor);
    if (pairs.empty()) throw ContractError("manifest '" + manifest.string() + "' has no entries");
    report = evaluate(ck.model, ck.norm, pairs, cfg.bins);
  } else {
    const auto pairs = load_pairs(manifest, cfg.scale_factor);
    if (pairs.empty()) throw ContractError("manifest '" + manifest.string() + "' has no entries");
    report = evaluate(method == EvalMethod::kBicubic ? InterpMethod::kBicubic : InterpMethod::kBilinear, pairs,
                      cfg.bins);
  }
  if (!out_csv.empty()) {
    if (out_csv.has_parent_path()) make_dir(out_csv.parent_path());
    export_report(report, out_csv);
  }
  return report;
}

Grid upscale(const Model<float>& model, const Normalization& norm, const Grid& input) {
  input.validate();
  if (input.has_nodata())
    throw ContractError("input grid contains nodata cells; the model is undefined on gaps");
  const int s = model.config().scale_factor;
  const Tensor<float> y = model.forward(grid_to_tensor<float>(input, &norm));
  Grid out(y.shape().h, y.shape().w);
  out.cell_size = input.cell_size / s;
  out.origin_x = input.origin_x;
  out.origin_y = input.origin_y;
  out.nodata = input.nodata;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = static_cast<float>(norm.invert(y.data()[i]));
  return out;
}

void upscale_file(const fs::path& checkpoint, const fs::path& in, const fs::path& out) {
  require_file(checkpoint, "checkpoint");
  require_file(in, "input grid");
  if (out.empty()) throw ConfigError("output path is not set");
  std::error_code ec;
  if (fs::exists(out, ec) && fs::equivalent(in, out, ec)) throw ConfigError("output would overwrite the input grid");
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const Grid g = upscale(ck.model, ck.norm, read_grid(in));
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_grid(g, out);
}

std::vector<GradCheckEntry> gradcheck(int seeds) {
  if (seeds < 1) throw ConfigError("gradcheck needs at least one seed");
  return run_gradcheck_suite(seeds);
}

}  // namespace demsr::cmd
