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

// Checkpoint archives.
//
//   "EV2D" | u32 version | u32 count | record * count
//   ( u8 section tag | u32 count | record * count ) *
//   u32 crc32 of everything before it
//
//   record = u32 name_len | name | u8 dtype | u8 ndim | u32 dims[ndim] | payload
//
// All integers and IEEE-754 payloads are little-endian. The leading table
// holds the model parameters; sections carry the model configuration ('C'),
// normalization constants ('N'), optimizer state ('O') and trainer state
// ('T').

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grid.hpp"
#include "model.hpp"
#include "train.hpp"

namespace demsr {
namespace ckpt {

inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2, kI64 = 3, kU64 = 4, kU8 = 5 };

struct Record {
  std::string name;
  DType dtype = DType::kU8;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;

  static Record f32(std::string name, std::vector<std::uint32_t> dims, std::span<const float> v);
  static Record f64(std::string name, std::span<const double> v);
  static Record f64(std::string name, double v);
  static Record i64(std::string name, std::vector<std::uint32_t> dims, std::span<const std::int64_t> v);
  static Record i64(std::string name, std::int64_t v);
  static Record u64(std::string name, std::uint64_t v);
  static Record text(std::string name, const std::string& s);

  // Typed views; throw FormatError on a dtype mismatch.
  std::vector<float> as_f32() const;
  std::vector<double> as_f64() const;
  std::vector<std::int64_t> as_i64() const;
  std::uint64_t as_u64() const;
  double scalar_f64() const;
  std::int64_t scalar_i64() const;
  std::string as_text() const;
};

struct Section {
  char tag = 0;
  std::vector<Record> records;

  // Throws FormatError when the record is missing.
  const Record& get(const std::string& name) const;
  const Record* find(const std::string& name) const;
};

struct Archive {
  std::vector<Record> tensors;
  std::vector<Section> sections;

  const Section* section(char tag) const;
};

std::vector<std::uint8_t> encode(const Archive& archive);
// Throws FormatError on bad magic, version, CRC or structure.
Archive decode(std::span<const std::uint8_t> bytes, const std::string& what);

void save(const Archive& archive, const std::filesystem::path& path);
Archive load(const std::filesystem::path& path);

}  // namespace ckpt

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const Normalization& norm, const TrainerState* trainer = nullptr);

struct LoadedCheckpoint {
  Model<float> model;
  Normalization norm;
  std::optional<TrainerState> trainer;
};

// Rebuilds the model from the stored configuration and loads its weights.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Copies stored weights into an existing model with the same configuration.
void load_weights(const ckpt::Archive& archive, Model<float>& model);

}  // namespace demsr
