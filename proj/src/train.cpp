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

#include "train.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "checkpoint.hpp"
#include "errors.hpp"
#include "nn_ops.hpp"

namespace demsr {

std::string to_string(ScheduleOn s) { return s == ScheduleOn::kTrain ? "train" : "holdout"; }

ScheduleOn parse_schedule_on(const std::string& name) {
  if (name == "train") return ScheduleOn::kTrain;
  if (name == "holdout") return ScheduleOn::kHoldout;
  throw ConfigError("schedule_on must be 'train' or 'holdout', got '" + name + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("train config: " + field + " " + why);
  };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be > 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (max_epochs < 1) fail("max_epochs", "must be >= 1");
  if (plateau_patience < 1) fail("plateau_patience", "must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor", "must be in (0, 1)");
  if (!(plateau_threshold >= 0.0 && plateau_threshold < 1.0)) fail("plateau_threshold", "must be in [0, 1)");
  if (!(min_lr >= 0.0)) fail("min_lr", "must be >= 0");
}

// ------------------------------------------------------------------ Adam

void adam_step(std::vector<Model<float>::NamedTensor>& params, AdamState& state, double lr) {
  for (const auto& [name, p] : params)
    if (!p.has_grad()) throw ContractError("adam_step: parameter '" + name + "' has no gradient");
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.size(), 0.0f);
      state.v.emplace_back(p.size(), 0.0f);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                         " tensors, model has " + std::to_string(params.size()));
  ++state.t;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].second;
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.size() || v.size() != p.size())
      throw DimensionError("adam_step: optimizer state for '" + params[k].first + "' has the wrong size");
    auto data = p.mutable_data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      data[i] = static_cast<float>(data[i] - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

// ------------------------------------------------------------------ schedule

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor, double threshold, double min_lr)
    : lr_(lr), patience_(patience), factor_(factor), threshold_(threshold), min_lr_(min_lr) {}

double PlateauScheduler::step(double loss) {
  if (!std::isfinite(loss))
    throw NumericError("plateau scheduler: epoch loss is not finite; training aborted");
  if (!has_best_ || loss < best_ * (1.0 - threshold_)) {
    best_ = loss;
    has_best_ = true;
    num_bad_ = 0;
  } else {
    ++num_bad_;
  }
  if (num_bad_ > patience_) {
    const double reduced = std::max(min_lr_, lr_ * factor_);
    if (reduced < lr_) {
      lr_ = reduced;
      ++reductions_;
    }
    num_bad_ = 0;
  }
  return lr_;
}

void PlateauScheduler::restore(const State& s) {
  lr_ = s.lr;
  best_ = s.best;
  has_best_ = std::isfinite(s.best);
  num_bad_ = static_cast<int>(s.num_bad);
  reductions_ = static_cast<int>(s.reductions);
}

// ------------------------------------------------------------------ history

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  std::string text = "epoch,train_loss,lr\n";
  char line[96];
  for (const EpochRecord& e : history) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.lr);
    text += line;
  }
  bin::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line != "epoch,train_loss,lr")
    throw ParseError(path.string() + ": expected header 'epoch,train_loss,lr'", lineno);
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EpochRecord e;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &e.epoch, &e.train_loss, &e.lr) != 3)
      throw ParseError(path.string() + ": malformed history row", lineno);
    out.push_back(e);
  }
  return out;
}

// ------------------------------------------------------------------ training

namespace {

// Normalized tiles flattened for fast batch assembly.
struct Samples {
  Shape lr_shape;  // (1, 1, h, w)
  Shape hr_shape;
  std::vector<std::vector<float>> lr;
  std::vector<std::vector<float>> hr;
};

Samples prepare(std::span<const TilePair> pairs, const Normalization& norm) {
  Samples s;
  for (const TilePair& p : pairs) {
    const Shape ls{1, 1, p.lr.nrows, p.lr.ncols};
    const Shape hs{1, 1, p.hr.nrows, p.hr.ncols};
    if (s.lr.empty()) {
      s.lr_shape = ls;
      s.hr_shape = hs;
    } else if (ls != s.lr_shape || hs != s.hr_shape) {
      throw DimensionError("pair '" + p.id + "' has tile shapes " + ls.str() + " / " + hs.str() +
                           ", expected " + s.lr_shape.str() + " / " + s.hr_shape.str());
    }
    auto convert = [&](const Grid& g) {
      std::vector<float> v(g.values.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(norm.apply(g.values[i]));
      return v;
    };
    s.lr.push_back(convert(p.lr));
    s.hr.push_back(convert(p.hr));
  }
  return s;
}

Tensor<float> gather(const std::vector<std::vector<float>>& src, Shape one, std::span<const std::size_t> idx) {
  Shape s = one;
  s.n = static_cast<int>(idx.size());
  std::vector<float> v;
  v.reserve(s.size());
  for (std::size_t i : idx) v.insert(v.end(), src[i].begin(), src[i].end());
  return Tensor<float>(s, std::move(v));
}

// Fisher-Yates with the raw generator output so the order does not depend on
// the standard library's distribution implementation.
std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

void emit(const FitOptions& opt, const std::string& msg) {
  if (opt.log) opt.log(msg);
}

}  // namespace

FitResult fit(Model<float>& model, std::span<const TilePair> pairs, const TrainConfig& cfg,
              const FitOptions& opt) {
  if (pairs.empty()) throw ContractError("fit: no training pairs");
  cfg.validate();
  if (cfg.schedule_on == ScheduleOn::kHoldout && opt.holdout.empty())
    throw ContractError("fit: schedule_on=holdout needs held-out pairs");

  TrainerState st;
  Normalization norm;
  if (opt.resume_from) {
    const ckpt::Archive archive = ckpt::load(*opt.resume_from);
    LoadedCheckpoint loaded = load_checkpoint(*opt.resume_from);
    if (!loaded.trainer)
      throw FormatError(opt.resume_from->string() + ": checkpoint carries no trainer state");
    load_weights(archive, model);
    norm = loaded.norm;
    st = std::move(*loaded.trainer);
    emit(opt, "resumed at epoch " + std::to_string(st.epoch));
  } else {
    norm = make_normalization(dataset_stats(pairs));
    st.scheduler = PlateauScheduler(cfg);
    st.rng.seed(cfg.seed);
    st.best_loss = std::numeric_limits<double>::infinity();
  }

  const Samples data = prepare(pairs, norm);
  const std::size_t n = data.lr.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  if (opt.out_dir) std::filesystem::create_directories(*opt.out_dir);

  int run = 0;
  while (st.epoch < cfg.max_epochs) {
    const int epoch = st.epoch + 1;
    const double lr = st.scheduler.lr();
    const std::vector<std::size_t> order = shuffled(n, st.rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(bs, n - start));
      const Tensor<float> x = gather(data.lr, data.lr_shape, idx);
      const Tensor<float> y = gather(data.hr, data.hr_shape, idx);
      model.zero_grad();
      double loss = 0.0;
      {
        Graph<float> graph;
        GraphScope<float> scope(graph);
        const Tensor<float> l = mse_loss(model.forward(x), y);
        loss = l.item();
        if (!std::isfinite(loss))
          throw NumericError("non-finite training loss in epoch " + std::to_string(epoch) +
                             "; checkpoints of epoch " + std::to_string(st.epoch) + " are kept");
        graph.backward(l);
      }
      adam_step(model.parameters(), st.adam, lr);
      loss_sum += loss * static_cast<double>(idx.size());
    }
    model.zero_grad();
    const double epoch_loss = loss_sum / static_cast<double>(n);
    const double sched_loss =
        cfg.schedule_on == ScheduleOn::kHoldout ? normalized_mse(model, norm, opt.holdout, cfg.batch_size)
                                                : epoch_loss;
    st.scheduler.step(sched_loss);
    st.epoch = epoch;
    st.history.push_back({epoch, epoch_loss, lr});
    const bool improved = sched_loss < st.best_loss;
    if (improved) st.best_loss = sched_loss;

    if (opt.out_dir) {
      save_checkpoint(*opt.out_dir / "latest.ckpt", model, norm, &st);
      if (improved) save_checkpoint(*opt.out_dir / "best.ckpt", model, norm, &st);
      write_history_csv(st.history, *opt.out_dir / "history.csv");
    }
    char msg[160];
    std::snprintf(msg, sizeof msg, "epoch %d loss %.6g lr %.3g%s", epoch, epoch_loss, lr,
                  cfg.schedule_on == ScheduleOn::kHoldout ? (" holdout " + std::to_string(sched_loss)).c_str() : "");
    emit(opt, msg);
    if (opt.stop_after > 0 && ++run >= opt.stop_after) break;
  }
  return {st.history, st.best_loss, norm};
}

std::vector<Grid> predict(const Model<float>& model, const Normalization& norm,
                          std::span<const TilePair> pairs, int batch_size) {
  std::vector<Grid> out;
  if (pairs.empty()) return out;
  const Samples data = prepare(pairs, norm);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  std::vector<std::size_t> all(pairs.size());
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t start = 0; start < all.size(); start += bs) {
    const std::span<const std::size_t> idx(all.data() + start, std::min(bs, all.size() - start));
    const Tensor<float> y = model.forward(gather(data.lr, data.lr_shape, idx));
    const std::size_t plane = static_cast<std::size_t>(y.shape().h) * y.shape().w;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Grid& hr = pairs[idx[k]].hr;
      Grid g(y.shape().h, y.shape().w);
      g.cell_size = hr.cell_size;
      g.origin_x = hr.origin_x;
      g.origin_y = hr.origin_y;
      g.nodata = hr.nodata;
      for (std::size_t i = 0; i < plane; ++i) g.values[i] = static_cast<float>(norm.invert(y.data()[k * plane + i]));
      out.push_back(std::move(g));
    }
  }
  return out;
}

double normalized_mse(const Model<float>& model, const Normalization& norm,
                      std::span<const TilePair> pairs, int batch_size) {
  if (pairs.empty()) throw ContractError("normalized_mse: no pairs");
  const Samples data = prepare(pairs, norm);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  std::vector<std::size_t> all(pairs.size());
  std::iota(all.begin(), all.end(), 0);
  detail::CompensatedSum acc;
  std::size_t count = 0;
  for (std::size_t start = 0; start < all.size(); start += bs) {
    const std::span<const std::size_t> idx(all.data() + start, std::min(bs, all.size() - start));
    const Tensor<float> y = model.forward(gather(data.lr, data.lr_shape, idx));
    const Tensor<float> t = gather(data.hr, data.hr_shape, idx);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = static_cast<double>(y.data()[i]) - t.data()[i];
      acc.add(d * d);
    }
    count += y.size();
  }
  return acc.value() / static_cast<double>(count);
}

// ------------------------------------------------------------------ evaluation

EvalReport make_report(std::span<const double> predicted, std::span<const double> target, int bins) {
  if (predicted.size() != target.size())
    throw DimensionError("make_report: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
  if (predicted.empty()) throw ContractError("make_report: no pixels");
  if (bins < 1) throw ConfigError("make_report: bins must be >= 1");
  const std::size_t n = predicted.size();
  std::vector<double> err(n);
  detail::CompensatedSum sq, abs_sum;
  double max_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = predicted[i] - target[i];
    sq.add(d * d);
    err[i] = std::abs(d);
    abs_sum.add(err[i]);
    max_err = std::max(max_err, err[i]);
  }
  EvalReport r;
  r.pixel_count = n;
  r.mse = sq.value() / static_cast<double>(n);
  r.err_mean = abs_sum.value() / static_cast<double>(n);
  detail::CompensatedSum var;
  for (double e : err) var.add((e - r.err_mean) * (e - r.err_mean));
  r.err_std = std::sqrt(var.value() / static_cast<double>(n));
  std::size_t within = 0;
  for (double e : err)
    if (std::abs(e - r.err_mean) <= r.err_std) ++within;
  r.within_one_std_frac = static_cast<double>(within) / static_cast<double>(n);

  const double hi = max_err > 0.0 ? max_err : 1.0;
  r.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) r.bin_edges[b] = hi * b / bins;
  r.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double e : err) {
    const auto b = static_cast<std::size_t>(e / hi * bins);
    ++r.counts[std::min<std::size_t>(b, static_cast<std::size_t>(bins) - 1)];
  }

  std::vector<double> sorted = err;
  const std::size_t mid = n / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  r.err_median = sorted[mid];
  if (n % 2 == 0) r.err_median = 0.5 * (r.err_median + *std::max_element(sorted.begin(), sorted.begin() + mid));
  return r;
}

namespace {

void append_pixels(const Grid& pred, const Grid& hr, std::vector<double>& p, std::vector<double>& t) {
  if (pred.nrows != hr.nrows || pred.ncols != hr.ncols)
    throw DimensionError("prediction is " + std::to_string(pred.nrows) + "x" + std::to_string(pred.ncols) +
                         ", target is " + std::to_string(hr.nrows) + "x" + std::to_string(hr.ncols));
  p.insert(p.end(), pred.values.begin(), pred.values.end());
  t.insert(t.end(), hr.values.begin(), hr.values.end());
}

}  // namespace

EvalReport evaluate(const Model<float>& model, const Normalization& norm,
                    std::span<const TilePair> pairs, int bins) {
  if (pairs.empty()) throw ContractError("evaluate: no pairs");
  const std::vector<Grid> preds = predict(model, norm, pairs);
  std::vector<double> p, t;
  for (std::size_t i = 0; i < pairs.size(); ++i) append_pixels(preds[i], pairs[i].hr, p, t);
  return make_report(p, t, bins);
}

EvalReport evaluate(InterpMethod baseline, std::span<const TilePair> pairs, int bins) {
  if (pairs.empty()) throw ContractError("evaluate: no pairs");
  std::vector<double> p, t;
  for (const TilePair& pair : pairs) {
    const Array2D<double> up = resize(to_array(pair.lr), pair.hr.nrows, pair.hr.ncols, baseline);
    p.insert(p.end(), up.values.begin(), up.values.end());
    t.insert(t.end(), pair.hr.values.begin(), pair.hr.values.end());
  }
  return make_report(p, t, bins);
}

void export_report(const EvalReport& r, const std::filesystem::path& path) {
  std::string text = "bin_lo,bin_hi,count\n";
  char line[128];
  for (std::size_t b = 0; b < r.counts.size(); ++b) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%" PRIu64 "\n", r.bin_edges[b], r.bin_edges[b + 1], r.counts[b]);
    text += line;
  }
  const std::pair<const char*, double> scalars[] = {
      {"mse", r.mse},
      {"err_mean", r.err_mean},
      {"err_median", r.err_median},
      {"err_std", r.err_std},
      {"within_one_std_frac", r.within_one_std_frac},
  };
  for (const auto& [key, value] : scalars) {
    std::snprintf(line, sizeof line, "# %s,%.9g\n", key, value);
    text += line;
  }
  std::snprintf(line, sizeof line, "# pixel_count,%" PRIu64 "\n", r.pixel_count);
  text += line;
  bin::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line != "bin_lo,bin_hi,count")
    throw ParseError(path.string() + ": expected header 'bin_lo,bin_hi,count'", lineno);
  EvalReport r;
  bool seen[6] = {};
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos || line.size() < 3)
        throw ParseError(path.string() + ": malformed summary line", lineno);
      const std::string key = line.substr(2, comma - 2);
      const std::string value = line.substr(comma + 1);
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str()) throw ParseError(path.string() + ": bad value for '" + key + "'", lineno);
      static const char* keys[] = {"mse", "err_mean", "err_median", "err_std", "within_one_std_frac", "pixel_count"};
      double* slots[] = {&r.mse, &r.err_mean, &r.err_median, &r.err_std, &r.within_one_std_frac, nullptr};
      const auto it = std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return key == k; });
      if (it == std::end(keys)) throw ParseError(path.string() + ": unknown summary key '" + key + "'", lineno);
      const auto k = static_cast<std::size_t>(it - std::begin(keys));
      if (slots[k]) *slots[k] = v;
      else r.pixel_count = std::strtoull(value.c_str(), nullptr, 10);
      seen[k] = true;
      continue;
    }
    double lo = 0.0, hi = 0.0;
    unsigned long long count = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%llu", &lo, &hi, &count) != 3)
      throw ParseError(path.string() + ": malformed histogram row", lineno);
    if (r.bin_edges.empty()) r.bin_edges.push_back(lo);
    r.bin_edges.push_back(hi);
    r.counts.push_back(count);
  }
  for (bool s : seen)
    if (!s) throw ParseError(path.string() + ": summary footer is incomplete", lineno);
  return r;
}

}  // namespace demsr
