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

// Exercises the shared library through its public C header only.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "demsr/demsr.h"

namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("demsr_capi_") + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string operator/(const std::string& p) const { return (path_ / p).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct Config {
  demsr_config* c = nullptr;
  Config() { EXPECT_EQ(demsr_config_create(&c), DEMSR_OK); }
  ~Config() { demsr_config_free(c); }
  void set(const char* k, const std::string& v) { ASSERT_EQ(demsr_config_set(c, k, v.c_str()), DEMSR_OK) << k; }
};

std::string get(const demsr_config* c, const char* key) {
  size_t needed = 0;
  EXPECT_EQ(demsr_config_get(c, key, nullptr, 0, &needed), DEMSR_OK);
  std::string s(needed, '\0');
  EXPECT_EQ(demsr_config_get(c, key, s.data(), s.size(), &needed), DEMSR_OK);
  s.resize(needed - 1);
  return s;
}

size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

demsr_grid* make_grid(int rows, int cols, float base, double cell = 3.0) {
  std::vector<float> v(static_cast<size_t>(rows) * cols);
  for (size_t i = 0; i < v.size(); ++i) v[i] = base + static_cast<float>(i % 97) * 0.5f;
  const demsr_grid_info info{rows, cols, cell, 100.0, 200.0, -9999.0f, 0};
  demsr_grid* g = nullptr;
  EXPECT_EQ(demsr_grid_create(&info, v.data(), &g), DEMSR_OK);
  return g;
}

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(demsr_status_name(DEMSR_OK), "ok");
  EXPECT_STREQ(demsr_status_name(DEMSR_ERR_IO), "io error");
  EXPECT_STRNE(demsr_version(), "");
}

TEST(CApi, NullArgumentsReported) {
  EXPECT_EQ(demsr_config_create(nullptr), DEMSR_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(demsr_last_error()).find("NULL"), std::string::npos);
  EXPECT_EQ(demsr_config_set(nullptr, "seed", "1"), DEMSR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(demsr_grid_values(nullptr), nullptr);
  demsr_config_free(nullptr);
  demsr_grid_free(nullptr);
  demsr_model_free(nullptr);
}

TEST(CApi, ConfigSetGetAndErrors) {
  Config cfg;
  cfg.set("learning-rate", "0.005");
  EXPECT_EQ(get(cfg.c, "learning_rate"), "0.0050000000000000001");
  EXPECT_EQ(demsr_config_set(cfg.c, "nope", "1"), DEMSR_ERR_CONFIG);
  EXPECT_NE(std::string(demsr_last_error()).find("nope"), std::string::npos);
  char small[3];
  size_t needed = 0;
  EXPECT_EQ(demsr_config_get(cfg.c, "model", small, sizeof small, &needed), DEMSR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(needed, std::string("production").size() + 1);
  EXPECT_STREQ(small, "pr");
  EXPECT_EQ(demsr_config_validate(cfg.c), DEMSR_OK);
  cfg.set("scale_factor", "12");
  EXPECT_EQ(demsr_config_validate(cfg.c), DEMSR_ERR_CONFIG);
}

TEST(CApi, ConfigKeysAndFile) {
  TempDir dir;
  const size_t n = demsr_config_key_count();
  ASSERT_GT(n, 10u);
  bool saw_seed = false;
  for (size_t i = 0; i < n; ++i) saw_seed |= std::string(demsr_config_key_name(i)) == "seed";
  EXPECT_TRUE(saw_seed);
  EXPECT_EQ(demsr_config_key_name(n), nullptr);
  EXPECT_EQ(demsr_config_key_is_flag("deterministic"), 1);
  EXPECT_EQ(demsr_config_key_is_flag("bogus"), 0);

  std::ofstream(dir / "a.conf") << "seed = 9\nbatch_size = \n";
  Config cfg;
  EXPECT_EQ(demsr_config_load_file(cfg.c, (dir / "a.conf").c_str()), DEMSR_ERR_CONFIG);
  std::ofstream(dir / "b.conf") << "seed 9\n";
  EXPECT_EQ(demsr_config_load_file(cfg.c, (dir / "b.conf").c_str()), DEMSR_ERR_PARSE);
  EXPECT_EQ(demsr_config_load_file(cfg.c, (dir / "none.conf").c_str()), DEMSR_ERR_IO);

  size_t needed = 0;
  ASSERT_EQ(demsr_config_effective(cfg.c, nullptr, 0, &needed), DEMSR_OK);
  std::string text(needed, '\0');
  ASSERT_EQ(demsr_config_effective(cfg.c, text.data(), text.size(), &needed), DEMSR_OK);
  EXPECT_NE(text.find("seed = 9\n"), std::string::npos);
}

TEST(CApi, GridRoundTripAndInfo) {
  TempDir dir;
  demsr_grid* g = make_grid(5, 4, 300.0f);
  ASSERT_EQ(demsr_grid_write(g, (dir / "g.asc").c_str()), DEMSR_OK);
  demsr_grid* h = nullptr;
  ASSERT_EQ(demsr_grid_read((dir / "g.asc").c_str(), &h), DEMSR_OK);
  demsr_grid_info info{};
  ASSERT_EQ(demsr_grid_info_get(h, &info), DEMSR_OK);
  EXPECT_EQ(info.rows, 5);
  EXPECT_EQ(info.cols, 4);
  EXPECT_DOUBLE_EQ(info.origin_x, 100.0);
  EXPECT_EQ(info.has_nodata, 0);
  for (int i = 0; i < 20; ++i) EXPECT_FLOAT_EQ(demsr_grid_values(h)[i], demsr_grid_values(g)[i]);
  demsr_grid_free(g);
  demsr_grid_free(h);
  EXPECT_EQ(demsr_grid_read((dir / "missing.demr").c_str(), &h), DEMSR_ERR_IO);
  std::ofstream(dir / "bad.demr") << "nope";
  EXPECT_EQ(demsr_grid_read((dir / "bad.demr").c_str(), &h), DEMSR_ERR_FORMAT);
}

TEST(CApi, ModelUpscaleShapesAndGeometry) {
  Config cfg;
  cfg.set("model", "tiny");
  demsr_model* m = nullptr;
  ASSERT_EQ(demsr_model_create(cfg.c, &m), DEMSR_OK);
  uint64_t params = 0;
  ASSERT_EQ(demsr_model_param_count(m, &params), DEMSR_OK);
  EXPECT_GT(params, 0u);

  for (auto [h, w] : {std::pair{25, 25}, std::pair{10, 10}}) {
    demsr_grid* in = make_grid(h, w, 500.0f, 48.0);
    demsr_grid* out = nullptr;
    ASSERT_EQ(demsr_model_upscale(m, in, &out), DEMSR_OK) << demsr_last_error();
    demsr_grid_info info{};
    demsr_grid_info_get(out, &info);
    EXPECT_EQ(info.rows, 16 * h);
    EXPECT_EQ(info.cols, 16 * w);
    EXPECT_DOUBLE_EQ(info.cell_size, 3.0);
    EXPECT_DOUBLE_EQ(info.origin_x, 100.0);
    EXPECT_DOUBLE_EQ(info.origin_y, 200.0);
    demsr_grid_free(in);
    demsr_grid_free(out);
  }

  std::vector<float> v(25, 1.0f);
  v[7] = -9999.0f;
  const demsr_grid_info info{5, 5, 1.0, 0, 0, -9999.0f, 0};
  demsr_grid* gap = nullptr;
  ASSERT_EQ(demsr_grid_create(&info, v.data(), &gap), DEMSR_OK);
  demsr_grid* out = nullptr;
  EXPECT_EQ(demsr_model_upscale(m, gap, &out), DEMSR_ERR_CONTRACT);
  EXPECT_NE(std::string(demsr_last_error()).find("nodata"), std::string::npos);
  demsr_grid_free(gap);
  demsr_model_free(m);
}

TEST(CApi, SynthWritesPairsDeterministically) {
  TempDir dir;
  for (const char* sub : {"a", "b"}) {
    Config cfg;
    cfg.set("out_dir", dir / sub);
    cfg.set("synth_count", "4");
    cfg.set("seed", "123");
    size_t n = 0;
    ASSERT_EQ(demsr_synth(cfg.c, &n), DEMSR_OK) << demsr_last_error();
    EXPECT_EQ(n, 4u);
  }
  size_t grids = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "a")) grids += e.path().extension() == ".demr";
  EXPECT_EQ(grids, 8u);
  EXPECT_EQ(count_lines(dir / "a/manifest.tsv"), 4u);
  for (int i = 0; i < 4; ++i) {
    const std::string name = "hr_" + std::to_string(i) + ".demr";
    std::ifstream a(dir / ("a/" + name), std::ios::binary), b(dir / ("b/" + name), std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b)));
  }
  Config bad;
  bad.set("out_dir", dir / "c");
  bad.set("synth_size", "500");
  EXPECT_EQ(demsr_synth(bad.c, nullptr), DEMSR_ERR_DIMENSION);
}

TEST(CApi, TileCleanPoisonedAndMismatched) {
  TempDir dir;
  demsr_grid* hr = make_grid(1600, 1600, 400.0f);
  demsr_grid* lr = make_grid(100, 100, 400.0f, 48.0);
  demsr_grid_write(hr, (dir / "hr.demr").c_str());
  demsr_grid_write(lr, (dir / "lr.demr").c_str());

  Config cfg;
  cfg.set("out_dir", dir / "clean");
  size_t kept = 0, dropped = 0;
  ASSERT_EQ(demsr_tile(cfg.c, (dir / "hr.demr").c_str(), (dir / "lr.demr").c_str(), &kept, &dropped), DEMSR_OK)
      << demsr_last_error();
  EXPECT_EQ(kept, 16u);
  EXPECT_EQ(dropped, 0u);
  EXPECT_EQ(count_lines(dir / "clean/manifest.tsv"), 16u);

  std::vector<float> v(demsr_grid_values(hr), demsr_grid_values(hr) + 1600 * 1600);
  v[5 * 1600 + 900] = -9999.0f;
  demsr_grid_info info{};
  demsr_grid_info_get(hr, &info);
  demsr_grid* poisoned = nullptr;
  ASSERT_EQ(demsr_grid_create(&info, v.data(), &poisoned), DEMSR_OK);
  demsr_grid_write(poisoned, (dir / "hr_p.demr").c_str());
  cfg.set("out_dir", dir / "poisoned");
  ASSERT_EQ(demsr_tile(cfg.c, (dir / "hr_p.demr").c_str(), (dir / "lr.demr").c_str(), &kept, &dropped), DEMSR_OK);
  EXPECT_EQ(kept, 15u);
  EXPECT_EQ(dropped, 1u);

  demsr_grid* wrong = make_grid(90, 100, 400.0f);
  demsr_grid_write(wrong, (dir / "lr_w.demr").c_str());
  EXPECT_EQ(demsr_tile(cfg.c, (dir / "hr.demr").c_str(), (dir / "lr_w.demr").c_str(), &kept, &dropped),
            DEMSR_ERR_DIMENSION);
  EXPECT_NE(std::string(demsr_last_error()).find("90"), std::string::npos);
  for (demsr_grid* g : {hr, lr, poisoned, wrong}) demsr_grid_free(g);
}

TEST(CApi, StatsMatchesSynthRangeAndRejectsEmpty) {
  TempDir dir;
  Config cfg;
  cfg.set("out_dir", dir / "syn");
  cfg.set("synth_count", "2");
  ASSERT_EQ(demsr_synth(cfg.c, nullptr), DEMSR_OK);
  demsr_stats st{};
  ASSERT_EQ(demsr_stats_compute((dir / "syn/manifest.tsv").c_str(), &st), DEMSR_OK);
  EXPECT_EQ(st.count, 2u * 400 * 400);
  EXPECT_NEAR(st.min, 205.0, 1e-3);
  EXPECT_NEAR(st.max, 985.0, 1e-3);
  EXPECT_LE(st.min, st.avg);
  EXPECT_LE(st.avg, st.max);
  std::ofstream(dir / "empty.tsv") << "";
  EXPECT_EQ(demsr_stats_compute((dir / "empty.tsv").c_str(), &st), DEMSR_ERR_CONTRACT);
  EXPECT_EQ(demsr_stats_compute((dir / "missing.tsv").c_str(), &st), DEMSR_ERR_IO);
}

struct LogSink {
  std::vector<std::string> lines;
  static void fn(const char* msg, void* user) { static_cast<LogSink*>(user)->lines.emplace_back(msg); }
};

TEST(CApi, TrainEvalUpscaleEndToEnd) {
  TempDir dir;
  Config cfg;
  cfg.set("model", "tiny");
  cfg.set("tile_size", "64");
  cfg.set("synth_size", "64");
  cfg.set("synth_count", "3");
  cfg.set("out_dir", dir / "syn");
  ASSERT_EQ(demsr_synth(cfg.c, nullptr), DEMSR_OK);

  LogSink sink;
  demsr_set_log_callback(&LogSink::fn, &sink);
  cfg.set("train_manifest", dir / "syn/manifest.tsv");
  cfg.set("out_dir", dir / "run");
  cfg.set("max_epochs", "3");
  cfg.set("batch_size", "2");
  demsr_train_summary sum{};
  ASSERT_EQ(demsr_train(cfg.c, &sum), DEMSR_OK) << demsr_last_error();
  demsr_set_log_callback(nullptr, nullptr);
  EXPECT_EQ(sum.epochs, 3);
  EXPECT_DOUBLE_EQ(sum.final_lr, 0.001);
  EXPECT_FALSE(sink.lines.empty());
  EXPECT_TRUE(fs::exists(dir / "run/history.csv"));

  demsr_report model{}, bic{}, bil{};
  ASSERT_EQ(demsr_eval(cfg.c, DEMSR_EVAL_MODEL, (dir / "run/best.ckpt").c_str(), (dir / "syn/manifest.tsv").c_str(),
                       (dir / "rep/model.csv").c_str(), &model),
            DEMSR_OK)
      << demsr_last_error();
  EXPECT_TRUE(fs::exists(dir / "rep/model.csv"));
  ASSERT_EQ(demsr_eval(cfg.c, DEMSR_EVAL_BICUBIC, nullptr, (dir / "syn/manifest.tsv").c_str(), nullptr, &bic),
            DEMSR_OK);
  ASSERT_EQ(demsr_eval(cfg.c, DEMSR_EVAL_BILINEAR, nullptr, (dir / "syn/manifest.tsv").c_str(), nullptr, &bil),
            DEMSR_OK);
  EXPECT_GT(bil.mse, bic.mse);
  EXPECT_EQ(model.pixel_count, 3u * 64 * 64);
  EXPECT_EQ(demsr_eval(cfg.c, DEMSR_EVAL_MODEL, (dir / "none.ckpt").c_str(), (dir / "syn/manifest.tsv").c_str(),
                       nullptr, &model),
            DEMSR_ERR_IO);
  EXPECT_EQ(demsr_eval(cfg.c, static_cast<demsr_eval_method>(7), nullptr, (dir / "syn/manifest.tsv").c_str(),
                       nullptr, &model),
            DEMSR_ERR_INVALID_ARGUMENT);

  ASSERT_EQ(demsr_upscale_file((dir / "run/best.ckpt").c_str(), (dir / "syn/lr_0.demr").c_str(),
                               (dir / "up/out.asc").c_str()),
            DEMSR_OK)
      << demsr_last_error();
  demsr_grid* up = nullptr;
  ASSERT_EQ(demsr_grid_read((dir / "up/out.asc").c_str(), &up), DEMSR_OK);
  demsr_grid_info info{};
  demsr_grid_info_get(up, &info);
  EXPECT_EQ(info.rows, 64);
  demsr_grid_free(up);

  cfg.set("train_manifest", dir / "missing.tsv");
  EXPECT_EQ(demsr_train(cfg.c, nullptr), DEMSR_ERR_IO);
}

TEST(CApi, GradcheckThreshold) {
  demsr_gradcheck_entry entries[32];
  size_t count = 0;
  ASSERT_EQ(demsr_gradcheck(1, 1e-5, entries, 32, &count), DEMSR_OK) << demsr_last_error();
  ASSERT_GT(count, 5u);
  for (size_t i = 0; i < count; ++i) EXPECT_LT(entries[i].max_rel_error, 1e-5) << entries[i].op;
  EXPECT_EQ(demsr_gradcheck(1, 1e-300, entries, 32, &count), DEMSR_ERR_VERIFICATION);
  EXPECT_NE(std::string(demsr_last_error()).find("above threshold"), std::string::npos);
  EXPECT_EQ(demsr_gradcheck(0, 1e-5, entries, 32, &count), DEMSR_ERR_CONFIG);
}

}  // namespace
