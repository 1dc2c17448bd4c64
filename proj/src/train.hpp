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

// Optimizer, learning-rate schedule, training loop and evaluation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "grid.hpp"
#include "model.hpp"

namespace demsr {

enum class ScheduleOn { kTrain, kHoldout };

std::string to_string(ScheduleOn s);
ScheduleOn parse_schedule_on(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 4;
  int max_epochs = 100;
  int plateau_patience = 10;
  double plateau_factor = 0.1;
  double plateau_threshold = 1e-4;  // relative
  double min_lr = 1e-6;
  std::uint64_t seed = 0;
  // Training is always run with a fixed reduction order; the flag is kept
  // for configuration compatibility.
  bool deterministic = true;
  ScheduleOn schedule_on = ScheduleOn::kTrain;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// ------------------------------------------------------------------ Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

// One bias-corrected Adam update of every parameter. Moments are allocated
// on the first call. Throws ContractError naming a parameter that has no
// gradient, DimensionError when the state does not mirror the parameters.
void adam_step(std::vector<Model<float>::NamedTensor>& params, AdamState& state, double lr);

// ------------------------------------------------------------------ schedule

// Reduce-on-plateau, "min" mode with a relative threshold. An epoch improves
// when loss < best * (1 - threshold); once more than `patience` consecutive
// epochs fail to improve, lr <- max(min_lr, lr * factor) and the count resets.
class PlateauScheduler {
 public:
  PlateauScheduler() = default;
  PlateauScheduler(double lr, int patience, double factor, double threshold, double min_lr);
  explicit PlateauScheduler(const TrainConfig& cfg)
      : PlateauScheduler(cfg.learning_rate, cfg.plateau_patience, cfg.plateau_factor,
                         cfg.plateau_threshold, cfg.min_lr) {}

  // Feeds one epoch's loss and returns the lr for the next epoch. Throws
  // NumericError on a non-finite loss.
  double step(double loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  int num_bad_epochs() const { return num_bad_; }
  int reductions() const { return reductions_; }

  // Raw state for checkpointing.
  struct State {
    double lr, best;
    std::int64_t num_bad, reductions;
  };
  State state() const { return {lr_, best_, num_bad_, reductions_}; }
  void restore(const State& s);

 private:
  double lr_ = 1e-3;
  int patience_ = 10;
  double factor_ = 0.1;
  double threshold_ = 1e-4;
  double min_lr_ = 1e-6;
  double best_ = 0.0;
  bool has_best_ = false;
  int num_bad_ = 0;
  int reductions_ = 0;
};

// ------------------------------------------------------------------ training

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
};

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);

// Everything besides the weights that a resumed run needs to continue
// bit-identically.
struct TrainerState {
  int epoch = 0;  // completed epochs
  PlateauScheduler scheduler;
  AdamState adam;
  std::mt19937_64 rng;
  std::vector<EpochRecord> history;
  double best_loss = 0.0;
};

struct FitOptions {
  // latest.ckpt, best.ckpt and history.csv are rewritten here after every
  // epoch when set.
  std::optional<std::filesystem::path> out_dir;
  // Continue from this checkpoint (must carry trainer state).
  std::optional<std::filesystem::path> resume_from;
  // Pairs scored each epoch for ScheduleOn::kHoldout.
  std::span<const TilePair> holdout;
  // Stop after this many epochs in this call (simulates interruption); 0 means
  // run to max_epochs.
  int stop_after = 0;
  std::function<void(const std::string&)> log;
};

struct FitResult {
  std::vector<EpochRecord> history;
  double best_loss = 0.0;
  Normalization norm;
};

// Trains `model` on `pairs` (meters). Normalization is derived from the pairs
// unless the resume checkpoint carries one. Throws ContractError on empty
// pairs and NumericError on a non-finite loss; the checkpoints of the last
// finished epoch are left in place.
FitResult fit(Model<float>& model, std::span<const TilePair> pairs, const TrainConfig& cfg,
              const FitOptions& opt = {});

// Model prediction in meters for every pair's LR tile.
std::vector<Grid> predict(const Model<float>& model, const Normalization& norm,
                          std::span<const TilePair> pairs, int batch_size = 4);

// Mean squared error in normalized units (the training objective).
double normalized_mse(const Model<float>& model, const Normalization& norm,
                      std::span<const TilePair> pairs, int batch_size = 4);

// ------------------------------------------------------------------ evaluation

struct EvalReport {
  double mse = 0.0;  // m^2
  double err_mean = 0.0;
  double err_median = 0.0;
  double err_std = 0.0;  // population, over absolute errors
  double within_one_std_frac = 0.0;
  std::uint64_t pixel_count = 0;
  std::vector<double> bin_edges;  // bins + 1 edges
  std::vector<std::uint64_t> counts;
};

// Report over paired predictions and targets (meters). The histogram spans
// [0, max error] (or [0, 1] when every error is 0).
EvalReport make_report(std::span<const double> predicted, std::span<const double> target, int bins = 50);

EvalReport evaluate(const Model<float>& model, const Normalization& norm,
                    std::span<const TilePair> pairs, int bins = 50);
EvalReport evaluate(InterpMethod baseline, std::span<const TilePair> pairs, int bins = 50);

// CSV: "bin_lo,bin_hi,count" rows, then "# key,value" summary lines.
void export_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace demsr
