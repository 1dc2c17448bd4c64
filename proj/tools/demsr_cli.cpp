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

// demsr command-line front end. Talks to the library only through the C API.
//
// Exit codes: 0 ok, 1 verification/contract/numeric failure, 2 usage or
// configuration error, 3 I/O, parse or format error.

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "demsr/demsr.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int exit_code(demsr_status s) {
  switch (s) {
    case DEMSR_OK: return kExitOk;
    case DEMSR_ERR_INVALID_ARGUMENT:
    case DEMSR_ERR_CONFIG: return kExitUsage;
    case DEMSR_ERR_PARSE:
    case DEMSR_ERR_FORMAT:
    case DEMSR_ERR_IO: return kExitIo;
    default: return kExitFailure;
  }
}

// Prints the failure and returns its exit code.
int report(demsr_status s, const char* what) {
  std::fprintf(stderr, "demsr %s: %s: %s\n", what, demsr_status_name(s), demsr_last_error());
  return exit_code(s);
}

void log_to_stderr(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

struct ConfigDeleter {
  void operator()(demsr_config* c) const { demsr_config_free(c); }
};
using ConfigPtr = std::unique_ptr<demsr_config, ConfigDeleter>;

// One --flag per config key, bound to a text slot.
struct ConfigFlags {
  std::string file;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> values;

  void attach(CLI::App* sub) {
    sub->add_option("--config", file, "key = value config file (flags override it)");
    const size_t n = demsr_config_key_count();
    for (size_t i = 0; i < n; ++i) {
      const std::string key = demsr_config_key_name(i);
      std::string flag = key;
      for (char& ch : flag)
        if (ch == '_') ch = '-';
      std::string& slot = values[key];
      CLI::Option* opt;
      if (demsr_config_key_is_flag(key.c_str()))
        opt = sub->add_flag("--" + flag + "{true},--no-" + flag + "{false}", slot, "config key " + key);
      else
        opt = sub->add_option("--" + flag, slot, "config key " + key);
      options.emplace_back(key, opt);
    }
  }

  // Defaults, then the file, then explicit flags.
  int build(ConfigPtr& out, const char* what) {
    demsr_config* raw = nullptr;
    demsr_status s = demsr_config_create(&raw);
    if (s != DEMSR_OK) return report(s, what);
    out.reset(raw);
    if (!file.empty() && (s = demsr_config_load_file(out.get(), file.c_str())) != DEMSR_OK) return report(s, what);
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      if ((s = demsr_config_set(out.get(), key.c_str(), values[key].c_str())) != DEMSR_OK) return report(s, what);
    }
    if ((s = demsr_config_validate(out.get())) != DEMSR_OK) return report(s, what);
    return kExitOk;
  }
};

void print_effective(const demsr_config* cfg) {
  size_t needed = 0;
  if (demsr_config_effective(cfg, nullptr, 0, &needed) != DEMSR_OK) return;
  std::string text(needed, '\0');
  if (demsr_config_effective(cfg, text.data(), text.size(), &needed) != DEMSR_OK) return;
  text.resize(needed - 1);
  std::fprintf(stderr, "# effective config\n%s", text.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"16x DEM super-resolution: synthesis, tiling, training, evaluation and inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", demsr_version());

  ConfigFlags synth_cfg, tile_cfg, train_cfg, eval_cfg;

  CLI::App* synth = app.add_subcommand("synth", "write synthetic HR/LR grid pairs and a manifest");
  synth_cfg.attach(synth);

  CLI::App* tile = app.add_subcommand("tile", "cut an aligned HR/LR raster pair into training tiles");
  std::string hr_path, lr_path;
  tile->add_option("--hr", hr_path, "high-resolution raster")->required();
  tile->add_option("--lr", lr_path, "low-resolution raster")->required();
  tile_cfg.attach(tile);

  CLI::App* stats = app.add_subcommand("stats", "elevation statistics of one or more manifests (stdout)");
  std::vector<std::string> stat_manifests;
  stats->add_option("manifests", stat_manifests, "manifest files")->required();

  CLI::App* train = app.add_subcommand("train", "train the network; writes checkpoints and history.csv");
  train_cfg.attach(train);

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint or an interpolation baseline");
  std::string eval_method = "model", eval_ckpt, eval_manifest, eval_out;
  eval->add_option("--method", eval_method, "model | bicubic | bilinear")
      ->check(CLI::IsMember({"model", "bicubic", "bilinear"}));
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint (method model)");
  eval->add_option("--manifest", eval_manifest, "pairs to score")->required();
  eval->add_option("--out", eval_out, "report CSV path");
  eval_cfg.attach(eval);

  CLI::App* upscale = app.add_subcommand("upscale", "upscale one grid with a trained checkpoint");
  std::string up_ckpt, up_in, up_out;
  upscale->add_option("--checkpoint", up_ckpt, "checkpoint")->required();
  upscale->add_option("--input", up_in, "low-resolution grid")->required();
  upscale->add_option("--output", up_out, "output grid (.asc or DEMR)")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  int gc_seeds = 20;
  double gc_threshold = 1e-5;
  gradcheck->add_option("--seeds", gc_seeds, "random seeds per op")->check(CLI::PositiveNumber);
  gradcheck->add_option("--threshold", gc_threshold, "maximum relative error")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  demsr_set_log_callback(log_to_stderr, nullptr);
  ConfigPtr cfg;
  demsr_status s = DEMSR_OK;

  if (synth->parsed()) {
    if (int rc = synth_cfg.build(cfg, "synth")) return rc;
    print_effective(cfg.get());
    size_t n = 0;
    if ((s = demsr_synth(cfg.get(), &n)) != DEMSR_OK) return report(s, "synth");
    std::fprintf(stderr, "synth: %zu pairs\n", n);
    return kExitOk;
  }

  if (tile->parsed()) {
    if (int rc = tile_cfg.build(cfg, "tile")) return rc;
    print_effective(cfg.get());
    size_t kept = 0, dropped = 0;
    if ((s = demsr_tile(cfg.get(), hr_path.c_str(), lr_path.c_str(), &kept, &dropped)) != DEMSR_OK)
      return report(s, "tile");
    return kExitOk;
  }

  if (stats->parsed()) {
    std::printf("%-24s %10s %10s %10s %14s %10s\n", "set", "avg_m", "min_m", "max_m", "pixels", "std_m");
    for (const std::string& m : stat_manifests) {
      demsr_stats st{};
      if ((s = demsr_stats_compute(m.c_str(), &st)) != DEMSR_OK) return report(s, "stats");
      std::printf("%-24s %10.1f %10.1f %10.1f %14llu %10.3f\n", m.c_str(), st.avg, st.min, st.max,
                  static_cast<unsigned long long>(st.count), st.std);
    }
    return kExitOk;
  }

  if (train->parsed()) {
    if (int rc = train_cfg.build(cfg, "train")) return rc;
    print_effective(cfg.get());
    demsr_train_summary sum{};
    if ((s = demsr_train(cfg.get(), &sum)) != DEMSR_OK) return report(s, "train");
    std::fprintf(stderr, "train: %d epochs, final loss %.6g, best %.6g, lr %.3g\n", sum.epochs, sum.final_loss,
                 sum.best_loss, sum.final_lr);
    return kExitOk;
  }

  if (eval->parsed()) {
    if (int rc = eval_cfg.build(cfg, "eval")) return rc;
    print_effective(cfg.get());
    const demsr_eval_method method = eval_method == "bicubic"    ? DEMSR_EVAL_BICUBIC
                                     : eval_method == "bilinear" ? DEMSR_EVAL_BILINEAR
                                                                 : DEMSR_EVAL_MODEL;
    if (method == DEMSR_EVAL_MODEL && eval_ckpt.empty()) {
      std::fprintf(stderr, "demsr eval: --checkpoint is required for method model\n");
      return kExitUsage;
    }
    demsr_report r{};
    s = demsr_eval(cfg.get(), method, eval_ckpt.empty() ? nullptr : eval_ckpt.c_str(), eval_manifest.c_str(),
                   eval_out.empty() ? nullptr : eval_out.c_str(), &r);
    if (s != DEMSR_OK) return report(s, "eval");
    std::printf("method,%s\nmse,%.9g\nerr_mean,%.9g\nerr_median,%.9g\nerr_std,%.9g\nwithin_one_std_frac,%.9g\n"
                "pixel_count,%llu\n",
                eval_method.c_str(), r.mse, r.err_mean, r.err_median, r.err_std, r.within_one_std_frac,
                static_cast<unsigned long long>(r.pixel_count));
    return kExitOk;
  }

  if (upscale->parsed()) {
    if ((s = demsr_upscale_file(up_ckpt.c_str(), up_in.c_str(), up_out.c_str())) != DEMSR_OK)
      return report(s, "upscale");
    return kExitOk;
  }

  if (gradcheck->parsed()) {
    std::vector<demsr_gradcheck_entry> entries(64);
    size_t count = 0;
    s = demsr_gradcheck(gc_seeds, gc_threshold, entries.data(), entries.size(), &count);
    if (s != DEMSR_OK && s != DEMSR_ERR_VERIFICATION) return report(s, "gradcheck");
    std::printf("%-28s %14s %8s %s\n", "op", "max_rel_error", "checks", "status");
    for (size_t i = 0; i < count && i < entries.size(); ++i) {
      const auto& e = entries[i];
      std::printf("%-28s %14.3e %8d %s\n", e.op, e.max_rel_error, e.checks,
                  e.max_rel_error < gc_threshold ? "ok" : "FAIL");
    }
    if (s == DEMSR_ERR_VERIFICATION) return report(s, "gradcheck");
    return kExitOk;
  }
  return kExitUsage;
}
