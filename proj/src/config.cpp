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

#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "errors.hpp"

namespace demsr {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string canonical(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  if constexpr (std::is_floating_point_v<N>)
    if (!std::isfinite(v)) throw ConfigError("config key '" + key + "': value must be finite");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  const char* key;
  bool flag;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DEMSR_INT(name, field)                                                                 \
  Entry{name, false, [](RunConfig& c, const std::string& v) { c.field = parse_number<int>(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define DEMSR_REAL(name, field)                                                                   \
  Entry{name, false, [](RunConfig& c, const std::string& v) { c.field = parse_number<double>(name, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }}
#define DEMSR_PATH(name, field)                                                        \
  Entry{name, false, [](RunConfig& c, const std::string& v) { c.field = v; },          \
        [](const RunConfig& c) { return c.field.string(); }}

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      Entry{"model", false,
            [](RunConfig& c, const std::string& v) {
              if (v != "production" && v != "tiny")
                throw ConfigError("config key 'model': expected 'production' or 'tiny', got '" + v + "'");
              c.model = v;
            },
            [](const RunConfig& c) { return c.model; }},
      Entry{"skip_interpolation", false,
            [](RunConfig& c, const std::string& v) { c.skip_interpolation = parse_interp_method(v); },
            [](const RunConfig& c) { return to_string(c.skip_interpolation); }},
      DEMSR_INT("scale_factor", scale_factor),
      DEMSR_REAL("learning_rate", train.learning_rate),
      DEMSR_INT("batch_size", train.batch_size),
      DEMSR_INT("max_epochs", train.max_epochs),
      DEMSR_INT("plateau_patience", train.plateau_patience),
      DEMSR_REAL("plateau_factor", train.plateau_factor),
      DEMSR_REAL("plateau_threshold", train.plateau_threshold),
      DEMSR_REAL("min_lr", train.min_lr),
      Entry{"seed", false,
            [](RunConfig& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      Entry{"deterministic", true,
            [](RunConfig& c, const std::string& v) { c.train.deterministic = parse_bool("deterministic", v); },
            [](const RunConfig& c) { return std::string(c.train.deterministic ? "true" : "false"); }},
      Entry{"schedule_on", false,
            [](RunConfig& c, const std::string& v) { c.train.schedule_on = parse_schedule_on(v); },
            [](const RunConfig& c) { return to_string(c.train.schedule_on); }},
      DEMSR_PATH("train_manifest", train_manifest),
      DEMSR_PATH("holdout_manifest", holdout_manifest),
      DEMSR_PATH("out_dir", out_dir),
      DEMSR_PATH("resume", resume),
      DEMSR_INT("tile_size", tile_size),
      DEMSR_INT("bins", bins),
      DEMSR_INT("synth_count", synth_count),
      DEMSR_INT("synth_size", synth_size),
      Entry{"synth_format", false,
            [](RunConfig& c, const std::string& v) {
              if (v != "demr" && v != "asc")
                throw ConfigError("config key 'synth_format': expected 'demr' or 'asc', got '" + v + "'");
              c.synth_format = v;
            },
            [](const RunConfig& c) { return c.synth_format; }},
      DEMSR_REAL("roughness", terrain.roughness),
      DEMSR_REAL("min_elevation", terrain.min_elevation),
      DEMSR_REAL("max_elevation", terrain.max_elevation),
      DEMSR_REAL("cell_size", terrain.cell_size),
  };
  return entries;
}

#undef DEMSR_INT
#undef DEMSR_REAL
#undef DEMSR_PATH

const Entry& lookup(const std::string& key) {
  const std::string k = canonical(key);
  for (const Entry& e : table())
    if (k == e.key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

int integer_root(int v) {
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
  return r * r == v ? r : 0;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { lookup(key).set(*this, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const Entry& e : table()) out.emplace_back(e.key);
    return out;
  }();
  return k;
}

bool RunConfig::is_flag_key(const std::string& key) { return lookup(key).flag; }

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ": expected 'key = value', got '" + line + "'", lineno);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(path.string() + ": missing key", lineno);
    try {
      set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::validate() const {
  train.validate();
  if (integer_root(scale_factor) < 1)
    throw ConfigError("scale_factor must be a perfect square (two equal sub-pixel stages), got " +
                      std::to_string(scale_factor));
  if (tile_size < 1 || tile_size % scale_factor != 0)
    throw ConfigError("tile_size must be a positive multiple of scale_factor, got " + std::to_string(tile_size));
  if (bins < 1) throw ConfigError("bins must be >= 1");
  if (synth_count < 1) throw ConfigError("synth_count must be >= 1");
  if (synth_size < 2) throw ConfigError("synth_size must be >= 2");
  if (!(terrain.roughness >= 0.0 && terrain.roughness < 1.0)) throw ConfigError("roughness must be in [0, 1)");
  if (!(terrain.max_elevation > terrain.min_elevation))
    throw ConfigError("max_elevation must exceed min_elevation");
  if (!(terrain.cell_size > 0.0)) throw ConfigError("cell_size must be > 0");
  model_config().validate();
}

std::string RunConfig::effective() const {
  std::string out;
  for (const Entry& e : table()) out += std::string(e.key) + " = " + e.get(*this) + "\n";
  return out;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m = model == "tiny" ? ModelConfig::tiny() : ModelConfig::production();
  m.skip_interpolation = skip_interpolation;
  m.scale_factor = scale_factor;
  const int r = integer_root(scale_factor);
  m.up1_r = r;
  m.up2_r = r;
  m.seed = train.seed;
  return m;
}

}  // namespace demsr
