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

// End-to-end pipeline steps behind the CLI subcommands. Inputs are never
// modified; every output goes under an explicit directory or path.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "grad_check.hpp"
#include "grid.hpp"
#include "train.hpp"

namespace demsr::cmd {

using LogFn = std::function<void(const std::string&)>;

struct SynthResult {
  std::size_t pairs = 0;
  std::filesystem::path manifest;
};

// synth_count terrains of synth_size^2 cells seeded from cfg.train.seed. Each
// writes hr_<i> and its block-averaged lr_<i> (scale_factor) into out_dir,
// plus out_dir/manifest.tsv with one line per terrain.
SynthResult synth(const RunConfig& cfg, const LogFn& log = {});

struct TileResult {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::filesystem::path manifest;
};

// Cuts an aligned HR/LR pair into tile_size and tile_size/scale_factor tiles,
// drops tiles with nodata and writes them to out_dir/tiles plus
// out_dir/manifest.tsv. Throws DimensionError when the rasters do not align.
TileResult tile(const RunConfig& cfg, const std::filesystem::path& hr_path,
                const std::filesystem::path& lr_path, const LogFn& log = {});

// Elevation statistics over the HR tiles of a manifest.
DatasetStats stats(const std::filesystem::path& manifest);

// Trains per cfg (train_manifest, optional holdout_manifest and resume) and
// writes checkpoints and history under out_dir.
FitResult train(const RunConfig& cfg, const LogFn& log = {});

enum class EvalMethod { kModel, kBicubic, kBilinear };
EvalMethod parse_eval_method(const std::string& name);

// Scores a model checkpoint or an interpolation baseline on a manifest.
// Writes the report CSV to out_csv when it is non-empty.
EvalReport eval(const RunConfig& cfg, EvalMethod method, const std::filesystem::path& checkpoint,
                const std::filesystem::path& manifest, const std::filesystem::path& out_csv);

// Single-grid inference: (h, w) -> (s*h, s*w), cell size divided by s. The
// lower-left corner is kept, so the extent is unchanged. Throws ContractError
// when the input contains nodata.
Grid upscale(const Model<float>& model, const Normalization& norm, const Grid& input);
void upscale_file(const std::filesystem::path& checkpoint, const std::filesystem::path& in,
                  const std::filesystem::path& out);

std::vector<GradCheckEntry> gradcheck(int seeds = 20);

}  // namespace demsr::cmd
