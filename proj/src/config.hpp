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

// Run configuration: one flat key=value namespace covering the model,
// training, data and synthesis settings.
//
//   # comment
//   model = tiny
//   learning_rate = 0.001
//
// Later assignments win, so applying defaults, then a file, then flags gives
// the documented precedence.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grid.hpp"
#include "model.hpp"
#include "train.hpp"

namespace demsr {

struct RunConfig {
  // model
  std::string model = "production";  // production | tiny
  InterpMethod skip_interpolation = InterpMethod::kBicubic;
  int scale_factor = 16;

  // training
  TrainConfig train;

  // data
  std::filesystem::path train_manifest;
  std::filesystem::path holdout_manifest;
  std::filesystem::path out_dir;
  std::filesystem::path resume;
  int tile_size = 400;
  int bins = 50;

  // synthesis
  int synth_count = 8;
  int synth_size = 400;
  std::string synth_format = "demr";  // demr | asc
  TerrainOptions terrain;

  // Assigns one key from its text form. Throws ConfigError for unknown keys
  // and malformed values. Dashes in the key are read as underscores.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();
  static bool is_flag_key(const std::string& key);  // boolean keys

  // Throws IoError if unreadable, ParseError (with line) on bad syntax and
  // ConfigError on unknown keys or values.
  void load_file(const std::filesystem::path& path);

  // Cross-field checks; throws ConfigError.
  void validate() const;

  // Every key with its value, one "key = value" line each.
  std::string effective() const;

  ModelConfig model_config() const;
};

}  // namespace demsr
