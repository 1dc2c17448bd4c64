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

#include <cstring>

#include "binary_io.hpp"
#include "checkpoint.hpp"
#include "errors.hpp"
#include "test_util.hpp"

namespace demsr {
namespace {

using testing::TempDir;

ModelConfig tiny(std::uint64_t seed) {
  ModelConfig c = ModelConfig::tiny();
  c.seed = seed;
  c.skip_interpolation = InterpMethod::kBilinear;
  return c;
}

void expect_same_params(const Model<float>& a, const Model<float>& b) {
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& [na, ta] = a.parameters()[i];
    const auto& [nb, tb] = b.parameters()[i];
    EXPECT_EQ(na, nb);
    ASSERT_EQ(ta.shape(), tb.shape());
    EXPECT_EQ(std::memcmp(ta.data().data(), tb.data().data(), ta.size() * sizeof(float)), 0) << na;
  }
}

TEST(Checkpoint, RoundTripIsBitwise) {
  TempDir dir;
  const Model<float> m(tiny(11));
  const Normalization norm{612.345678901, 87.6543210987};
  save_checkpoint(dir / "a.ckpt", m, norm);
  const LoadedCheckpoint back = load_checkpoint(dir / "a.ckpt");
  expect_same_params(m, back.model);
  EXPECT_EQ(back.norm.mean, norm.mean);
  EXPECT_EQ(back.norm.scale, norm.scale);
  EXPECT_FALSE(back.trainer.has_value());
  EXPECT_EQ(back.model.config().skip_interpolation, InterpMethod::kBilinear);
  EXPECT_EQ(back.model.config().stages.size(), m.config().stages.size());
  // Saving the loaded model again gives the same bytes.
  save_checkpoint(dir / "b.ckpt", back.model, back.norm);
  EXPECT_EQ(bin::read_file(dir / "a.ckpt"), bin::read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, HeaderLayout) {
  TempDir dir;
  save_checkpoint(dir / "a.ckpt", Model<float>(tiny(1)), Normalization{});
  const auto bytes = bin::read_file(dir / "a.ckpt");
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EV2D");
  EXPECT_EQ(bytes[4], ckpt::kVersion);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
}

TEST(Checkpoint, TrainerStateRoundTrip) {
  TempDir dir;
  Model<float> m(tiny(2));
  TrainerState st;
  st.epoch = 7;
  st.scheduler = PlateauScheduler(1e-3, 10, 0.1, 1e-4, 1e-6);
  for (double l : {1.0, 0.5, 0.6}) st.scheduler.step(l);
  st.rng.seed(99);
  st.rng.discard(13);
  st.history = {{1, 0.25, 1e-3}, {2, 0.125, 1e-3}};
  st.best_loss = 0.125;
  st.adam.t = 3;
  for (const auto& [name, t] : m.parameters()) {
    st.adam.m.emplace_back(t.size(), 0.5f);
    st.adam.v.emplace_back(t.size(), 0.25f);
  }
  save_checkpoint(dir / "t.ckpt", m, Normalization{1, 2}, &st);
  const LoadedCheckpoint back = load_checkpoint(dir / "t.ckpt");
  ASSERT_TRUE(back.trainer.has_value());
  const TrainerState& b = *back.trainer;
  EXPECT_EQ(b.epoch, 7);
  EXPECT_EQ(b.scheduler.lr(), st.scheduler.lr());
  EXPECT_EQ(b.scheduler.best(), st.scheduler.best());
  EXPECT_EQ(b.scheduler.num_bad_epochs(), 1);
  EXPECT_EQ(b.adam.t, 3);
  EXPECT_EQ(b.adam.m, st.adam.m);
  EXPECT_EQ(b.adam.v, st.adam.v);
  EXPECT_EQ(b.history.size(), 2u);
  EXPECT_EQ(b.history[1].train_loss, 0.125);
  EXPECT_EQ(b.best_loss, 0.125);
  std::mt19937_64 copy = st.rng;
  std::mt19937_64 restored = b.rng;
  for (int i = 0; i < 5; ++i) EXPECT_EQ(copy(), restored());
}

TEST(Checkpoint, CorruptionDetected) {
  TempDir dir;
  save_checkpoint(dir / "a.ckpt", Model<float>(tiny(3)), Normalization{});
  const auto bytes = bin::read_file(dir / "a.ckpt");
  auto with = [&](auto edit) {
    auto b = bytes;
    edit(b);
    bin::write_file(dir / "c.ckpt", b);
    return dir / "c.ckpt";
  };
  EXPECT_THROW(load_checkpoint(with([](auto& b) { b[0] = 'X'; })), FormatError);
  EXPECT_THROW(load_checkpoint(with([](auto& b) { b[b.size() / 2] ^= 0x40; })), FormatError);
  EXPECT_THROW(load_checkpoint(with([](auto& b) { b.resize(b.size() - 9); })), FormatError);
  EXPECT_THROW(load_checkpoint(with([](auto& b) { b[4] = 77; })), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST(Checkpoint, WeightsIntoMismatchedModelRejected) {
  TempDir dir;
  save_checkpoint(dir / "a.ckpt", Model<float>(tiny(4)), Normalization{});
  ModelConfig other = ModelConfig::tiny();
  other.up1_mid = 4;
  Model<float> m(other);
  EXPECT_ANY_THROW(load_weights(ckpt::load(dir / "a.ckpt"), m));
}

TEST(Checkpoint, RecordEncodingRoundTrip) {
  ckpt::Archive a;
  const std::vector<float> f{1.5f, -2.25f, 3.0f, 0.0f, 7.0f, 8.0f};
  a.tensors.push_back(ckpt::Record::f32("w", {1, 2, 3}, f));
  ckpt::Section s;
  s.tag = 'X';
  s.records.push_back(ckpt::Record::f64("d", 0.1));
  s.records.push_back(ckpt::Record::i64("i", -42));
  s.records.push_back(ckpt::Record::u64("u", 0xfedcba9876543210ULL));
  s.records.push_back(ckpt::Record::text("s", "tab\tand newline\n"));
  a.sections.push_back(s);
  const ckpt::Archive b = ckpt::decode(ckpt::encode(a), "memory");
  ASSERT_EQ(b.tensors.size(), 1u);
  EXPECT_EQ(b.tensors[0].as_f32(), f);
  EXPECT_EQ(b.tensors[0].dims, (std::vector<std::uint32_t>{1, 2, 3}));
  const ckpt::Section* bs = b.section('X');
  ASSERT_NE(bs, nullptr);
  EXPECT_EQ(bs->get("d").scalar_f64(), 0.1);
  EXPECT_EQ(bs->get("i").scalar_i64(), -42);
  EXPECT_EQ(bs->get("u").as_u64(), 0xfedcba9876543210ULL);
  EXPECT_EQ(bs->get("s").as_text(), "tab\tand newline\n");
  EXPECT_THROW(bs->get("nope"), FormatError);
  EXPECT_THROW(bs->get("d").as_f32(), FormatError);
}

TEST(Checkpoint, LoadedModelEvaluatesIdentically) {
  TempDir dir;
  const Model<float> m(tiny(6));
  save_checkpoint(dir / "a.ckpt", m, Normalization{});
  const LoadedCheckpoint back = load_checkpoint(dir / "a.ckpt");
  const auto x = testing::random_tensor<float>(Shape{1, 1, 7, 7}, 3);
  const auto ya = m.forward(x), yb = back.model.forward(x);
  EXPECT_EQ(std::memcmp(ya.data().data(), yb.data().data(), ya.size() * sizeof(float)), 0);
}

}  // namespace
}  // namespace demsr
