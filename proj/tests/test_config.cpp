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

#include <gtest/gtest.h>

#include <fstream>

#include "config.hpp"
#include "errors.hpp"
#include "test_util.hpp"

namespace demsr {
namespace {

using testing::TempDir;

TEST(RunConfig, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.get("learning_rate"), "0.001");
  EXPECT_EQ(c.get("batch_size"), "4");
  EXPECT_EQ(c.get("plateau_patience"), "10");
  EXPECT_EQ(c.get("plateau_factor"), "0.10000000000000001");
  EXPECT_EQ(c.get("scale_factor"), "16");
  EXPECT_EQ(c.get("tile_size"), "400");
  EXPECT_EQ(c.get("skip_interpolation"), "bicubic");
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, SetAcceptsDashesAndRejectsUnknown) {
  RunConfig c;
  c.set("learning-rate", "0.01");
  c.set("batch_size", " 8 ");
  c.set("deterministic", "false");
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.batch_size, 8);
  EXPECT_FALSE(c.train.deterministic);
  EXPECT_THROW(c.set("no_such_key", "1"), ConfigError);
  EXPECT_THROW(c.set("batch_size", "four"), ConfigError);
  EXPECT_THROW(c.set("batch_size", "4.5"), ConfigError);
  EXPECT_THROW(c.set("learning_rate", "inf"), ConfigError);
  EXPECT_THROW(c.set("model", "huge"), ConfigError);
  EXPECT_TRUE(RunConfig::is_flag_key("deterministic"));
  EXPECT_FALSE(RunConfig::is_flag_key("seed"));
}

TEST(RunConfig, EveryKeyRoundTripsThroughText) {
  RunConfig a;
  a.set("model", "tiny");
  a.set("seed", "18446744073709551615");
  a.set("roughness", "0.35");
  a.set("out_dir", "/tmp/x y");
  RunConfig b;
  for (const std::string& k : RunConfig::keys()) b.set(k, a.get(k));
  EXPECT_EQ(a.effective(), b.effective());
  EXPECT_EQ(b.train.seed, 18446744073709551615ULL);
}

TEST(RunConfig, FilePrecedenceAndComments) {
  TempDir dir;
  std::ofstream(dir / "c.conf") << "# run\nmodel = tiny   # small\n\nlearning_rate=0.002\nbatch_size = 2\n";
  RunConfig c;
  c.load_file(dir / "c.conf");
  c.set("batch_size", "6");  // flags come last
  EXPECT_EQ(c.model, "tiny");
  EXPECT_EQ(c.train.learning_rate, 0.002);
  EXPECT_EQ(c.train.batch_size, 6);
}

TEST(RunConfig, FileErrors) {
  TempDir dir;
  RunConfig c;
  EXPECT_THROW(c.load_file(dir / "missing.conf"), IoError);
  std::ofstream(dir / "a.conf") << "model = tiny\njust words\n";
  try {
    c.load_file(dir / "a.conf");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  std::ofstream(dir / "b.conf") << "seed = 1\nbogus = 3\n";
  try {
    c.load_file(dir / "b.conf");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(RunConfig, CrossFieldValidation) {
  RunConfig c;
  c.scale_factor = 8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.tile_size = 390;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.terrain.roughness = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.train.plateau_factor = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.scale_factor = 4;
  c.tile_size = 100;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model_config().up1_r, 2);
}

TEST(RunConfig, ModelConfigFollowsKeys) {
  RunConfig c;
  c.set("model", "tiny");
  c.set("seed", "77");
  c.set("skip_interpolation", "bilinear");
  const ModelConfig m = c.model_config();
  EXPECT_EQ(m.stem_channels, ModelConfig::tiny().stem_channels);
  EXPECT_EQ(m.seed, 77u);
  EXPECT_EQ(m.skip_interpolation, InterpMethod::kBilinear);
}

}  // namespace
}  // namespace demsr
