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

#include "demsr/demsr.h"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "commands.hpp"
#include "errors.hpp"

struct demsr_config {
  demsr::RunConfig cfg;
};

struct demsr_grid {
  demsr::Grid grid;
};

struct demsr_model {
  demsr::Model<float> model;
  demsr::Normalization norm;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
demsr_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_message(const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn) g_log_fn(msg.c_str(), g_log_user);
}

demsr_status fail(demsr_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs fn, mapping exceptions onto status codes.
template <typename Fn>
demsr_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const demsr::ConfigError& e) {
    return fail(DEMSR_ERR_CONFIG, e.what());
  } catch (const demsr::DimensionError& e) {
    return fail(DEMSR_ERR_DIMENSION, e.what());
  } catch (const demsr::ContractError& e) {
    return fail(DEMSR_ERR_CONTRACT, e.what());
  } catch (const demsr::NumericError& e) {
    return fail(DEMSR_ERR_NUMERIC, e.what());
  } catch (const demsr::DegenerateDataError& e) {
    return fail(DEMSR_ERR_DEGENERATE_DATA, e.what());
  } catch (const demsr::ParseError& e) {
    return fail(DEMSR_ERR_PARSE, e.what());
  } catch (const demsr::FormatError& e) {
    return fail(DEMSR_ERR_FORMAT, e.what());
  } catch (const demsr::IoError& e) {
    return fail(DEMSR_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DEMSR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DEMSR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DEMSR_ERR_INTERNAL, "unknown error");
  }
}

demsr_status copy_text(const std::string& text, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buf) return cap == 0 ? DEMSR_OK : fail(DEMSR_ERR_INVALID_ARGUMENT, "buffer is NULL");
  if (cap == 0) return fail(DEMSR_ERR_INVALID_ARGUMENT, "buffer capacity is 0");
  const size_t n = std::min(cap - 1, text.size());
  std::memcpy(buf, text.data(), n);
  buf[n] = '\0';
  if (n < text.size()) return fail(DEMSR_ERR_INVALID_ARGUMENT, "buffer too small");
  return DEMSR_OK;
}

#define DEMSR_REQUIRE(ptr)                                                   \
  do {                                                                       \
    if (!(ptr)) return fail(DEMSR_ERR_INVALID_ARGUMENT, #ptr " is NULL");    \
  } while (0)

std::string opt_path(const char* p) { return p ? p : ""; }

}  // namespace

extern "C" {

const char* demsr_version(void) { return "0.1.0"; }

const char* demsr_status_name(demsr_status status) {
  switch (status) {
    case DEMSR_OK: return "ok";
    case DEMSR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DEMSR_ERR_CONFIG: return "config error";
    case DEMSR_ERR_DIMENSION: return "dimension error";
    case DEMSR_ERR_CONTRACT: return "contract error";
    case DEMSR_ERR_NUMERIC: return "numeric error";
    case DEMSR_ERR_DEGENERATE_DATA: return "degenerate data";
    case DEMSR_ERR_PARSE: return "parse error";
    case DEMSR_ERR_FORMAT: return "format error";
    case DEMSR_ERR_IO: return "io error";
    case DEMSR_ERR_VERIFICATION: return "verification failed";
    case DEMSR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* demsr_last_error(void) { return g_last_error.c_str(); }

void demsr_set_log_callback(demsr_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

// ------------------------------------------------------------------- config

demsr_status demsr_config_create(demsr_config** out) {
  return guarded([&] {
    DEMSR_REQUIRE(out);
    *out = new demsr_config{};
    return DEMSR_OK;
  });
}

void demsr_config_free(demsr_config* cfg) { delete cfg; }

demsr_status demsr_config_set(demsr_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    DEMSR_REQUIRE(key);
    DEMSR_REQUIRE(value);
    cfg->cfg.set(key, value);
    return DEMSR_OK;
  });
}

demsr_status demsr_config_get(const demsr_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    DEMSR_REQUIRE(key);
    return copy_text(cfg->cfg.get(key), buf, cap, needed);
  });
}

demsr_status demsr_config_load_file(demsr_config* cfg, const char* path) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    DEMSR_REQUIRE(path);
    cfg->cfg.load_file(path);
    return DEMSR_OK;
  });
}

demsr_status demsr_config_validate(const demsr_config* cfg) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    cfg->cfg.validate();
    return DEMSR_OK;
  });
}

demsr_status demsr_config_effective(const demsr_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    return copy_text(cfg->cfg.effective(), buf, cap, needed);
  });
}

size_t demsr_config_key_count(void) { return demsr::RunConfig::keys().size(); }

const char* demsr_config_key_name(size_t i) {
  const auto& keys = demsr::RunConfig::keys();
  return i < keys.size() ? keys[i].c_str() : nullptr;
}

int demsr_config_key_is_flag(const char* key) {
  if (!key) return 0;
  try {
    return demsr::RunConfig::is_flag_key(key) ? 1 : 0;
  } catch (const demsr::Error&) {
    return 0;
  }
}

// --------------------------------------------------------------------- grid

demsr_status demsr_grid_read(const char* path, demsr_grid** out) {
  return guarded([&] {
    DEMSR_REQUIRE(path);
    DEMSR_REQUIRE(out);
    *out = new demsr_grid{demsr::read_grid(path)};
    return DEMSR_OK;
  });
}

demsr_status demsr_grid_write(const demsr_grid* grid, const char* path) {
  return guarded([&] {
    DEMSR_REQUIRE(grid);
    DEMSR_REQUIRE(path);
    demsr::write_grid(grid->grid, path);
    return DEMSR_OK;
  });
}

demsr_status demsr_grid_create(const demsr_grid_info* info, const float* values, demsr_grid** out) {
  return guarded([&] {
    DEMSR_REQUIRE(info);
    DEMSR_REQUIRE(values);
    DEMSR_REQUIRE(out);
    if (info->rows <= 0 || info->cols <= 0) return fail(DEMSR_ERR_DIMENSION, "grid dimensions must be positive");
    demsr::Grid g(info->rows, info->cols);
    g.cell_size = info->cell_size;
    g.origin_x = info->origin_x;
    g.origin_y = info->origin_y;
    g.nodata = info->nodata;
    std::copy(values, values + g.values.size(), g.values.begin());
    g.validate();
    *out = new demsr_grid{std::move(g)};
    return DEMSR_OK;
  });
}

void demsr_grid_free(demsr_grid* grid) { delete grid; }

demsr_status demsr_grid_info_get(const demsr_grid* grid, demsr_grid_info* out) {
  return guarded([&] {
    DEMSR_REQUIRE(grid);
    DEMSR_REQUIRE(out);
    const demsr::Grid& g = grid->grid;
    *out = demsr_grid_info{g.nrows, g.ncols, g.cell_size, g.origin_x, g.origin_y, g.nodata, g.has_nodata() ? 1 : 0};
    return DEMSR_OK;
  });
}

const float* demsr_grid_values(const demsr_grid* grid) { return grid ? grid->grid.values.data() : nullptr; }

// -------------------------------------------------------------------- model

demsr_status demsr_model_create(const demsr_config* cfg, demsr_model** out) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    DEMSR_REQUIRE(out);
    cfg->cfg.validate();
    *out = new demsr_model{demsr::Model<float>(cfg->cfg.model_config()), demsr::Normalization{}};
    return DEMSR_OK;
  });
}

demsr_status demsr_model_load(const char* checkpoint, demsr_model** out) {
  return guarded([&] {
    DEMSR_REQUIRE(checkpoint);
    DEMSR_REQUIRE(out);
    demsr::LoadedCheckpoint ck = demsr::load_checkpoint(checkpoint);
    *out = new demsr_model{std::move(ck.model), ck.norm};
    return DEMSR_OK;
  });
}

void demsr_model_free(demsr_model* model) { delete model; }

demsr_status demsr_model_param_count(const demsr_model* model, uint64_t* out) {
  return guarded([&] {
    DEMSR_REQUIRE(model);
    DEMSR_REQUIRE(out);
    *out = model->model.count_params();
    return DEMSR_OK;
  });
}

demsr_status demsr_model_upscale(const demsr_model* model, const demsr_grid* in, demsr_grid** out) {
  return guarded([&] {
    DEMSR_REQUIRE(model);
    DEMSR_REQUIRE(in);
    DEMSR_REQUIRE(out);
    *out = new demsr_grid{demsr::cmd::upscale(model->model, model->norm, in->grid)};
    return DEMSR_OK;
  });
}

// ----------------------------------------------------------------- commands

demsr_status demsr_synth(const demsr_config* cfg, size_t* pairs_written) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    const auto r = demsr::cmd::synth(cfg->cfg, log_message);
    if (pairs_written) *pairs_written = r.pairs;
    return DEMSR_OK;
  });
}

demsr_status demsr_tile(const demsr_config* cfg, const char* hr_path, const char* lr_path, size_t* kept,
                        size_t* dropped) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    DEMSR_REQUIRE(hr_path);
    DEMSR_REQUIRE(lr_path);
    const auto r = demsr::cmd::tile(cfg->cfg, hr_path, lr_path, log_message);
    if (kept) *kept = r.kept;
    if (dropped) *dropped = r.dropped;
    return DEMSR_OK;
  });
}

demsr_status demsr_stats_compute(const char* manifest, demsr_stats* out) {
  return guarded([&] {
    DEMSR_REQUIRE(manifest);
    DEMSR_REQUIRE(out);
    const auto s = demsr::cmd::stats(manifest);
    *out = demsr_stats{s.avg, s.min, s.max, s.std, s.count};
    return DEMSR_OK;
  });
}

demsr_status demsr_train(const demsr_config* cfg, demsr_train_summary* out) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    const auto r = demsr::cmd::train(cfg->cfg, log_message);
    if (out) {
      *out = demsr_train_summary{};
      out->epochs = static_cast<int32_t>(r.history.size());
      out->best_loss = r.best_loss;
      if (!r.history.empty()) {
        out->epochs = r.history.back().epoch;
        out->final_loss = r.history.back().train_loss;
        out->final_lr = r.history.back().lr;
      }
    }
    return DEMSR_OK;
  });
}

demsr_status demsr_eval(const demsr_config* cfg, demsr_eval_method method, const char* checkpoint,
                        const char* manifest, const char* out_csv, demsr_report* out) {
  return guarded([&] {
    DEMSR_REQUIRE(cfg);
    DEMSR_REQUIRE(manifest);
    demsr::cmd::EvalMethod m;
    switch (method) {
      case DEMSR_EVAL_MODEL: m = demsr::cmd::EvalMethod::kModel; break;
      case DEMSR_EVAL_BICUBIC: m = demsr::cmd::EvalMethod::kBicubic; break;
      case DEMSR_EVAL_BILINEAR: m = demsr::cmd::EvalMethod::kBilinear; break;
      default: return fail(DEMSR_ERR_INVALID_ARGUMENT, "unknown eval method");
    }
    const auto r = demsr::cmd::eval(cfg->cfg, m, opt_path(checkpoint), manifest, opt_path(out_csv));
    if (out) *out = demsr_report{r.mse, r.err_mean, r.err_median, r.err_std, r.within_one_std_frac, r.pixel_count};
    return DEMSR_OK;
  });
}

demsr_status demsr_upscale_file(const char* checkpoint, const char* in_path, const char* out_path) {
  return guarded([&] {
    DEMSR_REQUIRE(checkpoint);
    DEMSR_REQUIRE(in_path);
    DEMSR_REQUIRE(out_path);
    demsr::cmd::upscale_file(checkpoint, in_path, out_path);
    return DEMSR_OK;
  });
}

demsr_status demsr_gradcheck(int32_t seeds, double threshold, demsr_gradcheck_entry* entries, size_t cap,
                             size_t* count) {
  return guarded([&] {
    if (cap > 0) DEMSR_REQUIRE(entries);
    const auto r = demsr::cmd::gradcheck(seeds);
    if (count) *count = r.size();
    std::string failing;
    for (size_t i = 0; i < r.size(); ++i) {
      if (i < cap) {
        demsr_gradcheck_entry& e = entries[i];
        std::memset(e.op, 0, sizeof e.op);
        std::strncpy(e.op, r[i].op.c_str(), sizeof e.op - 1);
        e.max_rel_error = r[i].max_rel_error;
        e.checks = r[i].checks;
      }
      if (threshold > 0.0 && !(r[i].max_rel_error < threshold)) failing += (failing.empty() ? "" : ", ") + r[i].op;
    }
    if (!failing.empty()) return fail(DEMSR_ERR_VERIFICATION, "gradient check above threshold: " + failing);
    return DEMSR_OK;
  });
}

}  // extern "C"
