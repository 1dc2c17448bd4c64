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

#include "checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <sstream>

#include "binary_io.hpp"
#include "errors.hpp"

namespace demsr {
namespace ckpt {
namespace {

constexpr char kMagic[4] = {'E', 'V', '2', 'D'};

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64:
    case DType::kI64:
    case DType::kU64: return 8;
    case DType::kU8: return 1;
  }
  throw FormatError("checkpoint: unknown dtype tag " + std::to_string(static_cast<int>(t)));
}

DType parse_dtype(std::uint8_t tag) {
  if (tag < 1 || tag > 5) throw FormatError("checkpoint: unknown dtype tag " + std::to_string(tag));
  return static_cast<DType>(tag);
}

Record make(std::string name, DType dtype, std::vector<std::uint32_t> dims, const bin::Writer& w) {
  Record r;
  r.name = std::move(name);
  r.dtype = dtype;
  r.dims = std::move(dims);
  r.payload = w.buffer();
  return r;
}

void expect(const Record& r, DType t) {
  if (r.dtype != t)
    throw FormatError("checkpoint: record '" + r.name + "' has dtype " +
                      std::to_string(static_cast<int>(r.dtype)) + ", expected " +
                      std::to_string(static_cast<int>(t)));
}

void put_record(bin::Writer& w, const Record& r) {
  w.u32(static_cast<std::uint32_t>(r.name.size()));
  w.bytes(r.name);
  w.u8(static_cast<std::uint8_t>(r.dtype));
  w.u8(static_cast<std::uint8_t>(r.dims.size()));
  for (std::uint32_t d : r.dims) w.u32(d);
  w.buffer().insert(w.buffer().end(), r.payload.begin(), r.payload.end());
}

Record get_record(bin::Reader& in) {
  Record r;
  r.name = in.bytes(in.u32());
  r.dtype = parse_dtype(in.u8());
  const int ndim = in.u8();
  for (int i = 0; i < ndim; ++i) r.dims.push_back(in.u32());
  const std::string payload = in.bytes(r.element_count() * dtype_size(r.dtype));
  r.payload.assign(payload.begin(), payload.end());
  return r;
}

std::vector<Record> get_records(bin::Reader& in) {
  const std::uint32_t count = in.u32();
  std::vector<Record> out;
  out.reserve(std::min<std::uint32_t>(count, 4096));
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(get_record(in));
  return out;
}

}  // namespace

std::size_t Record::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

Record Record::f32(std::string name, std::vector<std::uint32_t> dims, std::span<const float> v) {
  bin::Writer w;
  for (float x : v) w.f32(x);
  return make(std::move(name), DType::kF32, std::move(dims), w);
}

Record Record::f64(std::string name, std::span<const double> v) {
  bin::Writer w;
  for (double x : v) w.f64(x);
  return make(std::move(name), DType::kF64, {static_cast<std::uint32_t>(v.size())}, w);
}

Record Record::f64(std::string name, double v) {
  bin::Writer w;
  w.f64(v);
  return make(std::move(name), DType::kF64, {}, w);
}

Record Record::i64(std::string name, std::vector<std::uint32_t> dims, std::span<const std::int64_t> v) {
  bin::Writer w;
  for (std::int64_t x : v) w.u64(static_cast<std::uint64_t>(x));
  return make(std::move(name), DType::kI64, std::move(dims), w);
}

Record Record::i64(std::string name, std::int64_t v) {
  bin::Writer w;
  w.u64(static_cast<std::uint64_t>(v));
  return make(std::move(name), DType::kI64, {}, w);
}

Record Record::u64(std::string name, std::uint64_t v) {
  bin::Writer w;
  w.u64(v);
  return make(std::move(name), DType::kU64, {}, w);
}

Record Record::text(std::string name, const std::string& s) {
  bin::Writer w;
  w.bytes(s);
  return make(std::move(name), DType::kU8, {static_cast<std::uint32_t>(s.size())}, w);
}

std::vector<float> Record::as_f32() const {
  expect(*this, DType::kF32);
  bin::Reader in(payload.data(), payload.size(), name);
  std::vector<float> v(element_count());
  for (float& x : v) x = in.f32();
  return v;
}

std::vector<double> Record::as_f64() const {
  expect(*this, DType::kF64);
  bin::Reader in(payload.data(), payload.size(), name);
  std::vector<double> v(element_count());
  for (double& x : v) x = in.f64();
  return v;
}

std::vector<std::int64_t> Record::as_i64() const {
  expect(*this, DType::kI64);
  bin::Reader in(payload.data(), payload.size(), name);
  std::vector<std::int64_t> v(element_count());
  for (std::int64_t& x : v) x = static_cast<std::int64_t>(in.u64());
  return v;
}

std::uint64_t Record::as_u64() const {
  expect(*this, DType::kU64);
  if (element_count() != 1) throw FormatError("checkpoint: record '" + name + "' is not a scalar");
  bin::Reader in(payload.data(), payload.size(), name);
  return in.u64();
}

double Record::scalar_f64() const {
  const auto v = as_f64();
  if (v.size() != 1) throw FormatError("checkpoint: record '" + name + "' is not a scalar");
  return v[0];
}

std::int64_t Record::scalar_i64() const {
  const auto v = as_i64();
  if (v.size() != 1) throw FormatError("checkpoint: record '" + name + "' is not a scalar");
  return v[0];
}

std::string Record::as_text() const {
  expect(*this, DType::kU8);
  return std::string(payload.begin(), payload.end());
}

const Record* Section::find(const std::string& name) const {
  for (const Record& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

const Record& Section::get(const std::string& name) const {
  if (const Record* r = find(name)) return *r;
  throw FormatError(std::string("checkpoint: section '") + tag + "' has no record '" + name + "'");
}

const Section* Archive::section(char tag) const {
  for (const Section& s : sections)
    if (s.tag == tag) return &s;
  return nullptr;
}

std::vector<std::uint8_t> encode(const Archive& archive) {
  bin::Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(archive.tensors.size()));
  for (const Record& r : archive.tensors) put_record(w, r);
  for (const Section& s : archive.sections) {
    w.u8(static_cast<std::uint8_t>(s.tag));
    w.u32(static_cast<std::uint32_t>(s.records.size()));
    for (const Record& r : s.records) put_record(w, r);
  }
  const auto& buf = w.buffer();
  w.u32(static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size()))));
  return w.buffer();
}

Archive decode(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < 12 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw FormatError(what + ": not a checkpoint (bad magic)");
  const std::size_t body = bytes.size() - 4;
  bin::Reader tail(bytes.data() + body, 4, what);
  const std::uint32_t stored = tail.u32();
  const auto actual = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (stored != actual) throw FormatError(what + ": checksum mismatch (file is corrupt)");

  bin::Reader in(bytes.data() + 4, body - 4, what);
  const std::uint32_t version = in.u32();
  if (version != kVersion)
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
  Archive a;
  a.tensors = get_records(in);
  while (in.remaining() > 0) {
    Section s;
    s.tag = static_cast<char>(in.u8());
    s.records = get_records(in);
    a.sections.push_back(std::move(s));
  }
  return a;
}

void save(const Archive& archive, const std::filesystem::path& path) {
  bin::write_file(path, encode(archive));
}

Archive load(const std::filesystem::path& path) {
  const auto bytes = bin::read_file(path);
  return decode(bytes, path.string());
}

}  // namespace ckpt

// ------------------------------------------------------------------ model level

namespace {

using ckpt::Record;
using ckpt::Section;

std::vector<std::uint32_t> dims_of(const Shape& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

Section config_section(const ModelConfig& c) {
  Section s{'C', {}};
  std::vector<std::int64_t> stages;
  std::vector<double> se;
  for (const StageSpec& st : c.stages) {
    stages.insert(stages.end(), {st.out_channels, st.expansion_ratio, st.num_layers, st.kernel, st.stride});
    se.push_back(st.se_ratio);
  }
  s.records.push_back(Record::i64("stem_channels", c.stem_channels));
  s.records.push_back(
      Record::i64("stages", {static_cast<std::uint32_t>(c.stages.size()), 5}, stages));
  s.records.push_back(Record::f64("se_ratio", se));
  s.records.push_back(Record::i64("up1_mid", c.up1_mid));
  s.records.push_back(Record::i64("up1_r", c.up1_r));
  s.records.push_back(Record::i64("up2_r", c.up2_r));
  s.records.push_back(Record::text("skip_interpolation", to_string(c.skip_interpolation)));
  s.records.push_back(Record::i64("final_kernel", c.final_kernel));
  s.records.push_back(Record::f64("leaky_slope", c.leaky_slope));
  s.records.push_back(Record::i64("scale_factor", c.scale_factor));
  s.records.push_back(Record::u64("seed", c.seed));
  return s;
}

ModelConfig parse_config(const Section& s) {
  ModelConfig c;
  c.stem_channels = static_cast<int>(s.get("stem_channels").scalar_i64());
  const Record& st = s.get("stages");
  const auto stages = st.as_i64();
  const auto se = s.get("se_ratio").as_f64();
  if (st.dims.size() != 2 || st.dims[1] != 5 || se.size() != st.dims[0])
    throw FormatError("checkpoint: malformed stage table");
  for (std::size_t i = 0; i < se.size(); ++i) {
    StageSpec spec;
    spec.out_channels = static_cast<int>(stages[i * 5]);
    spec.expansion_ratio = static_cast<int>(stages[i * 5 + 1]);
    spec.num_layers = static_cast<int>(stages[i * 5 + 2]);
    spec.kernel = static_cast<int>(stages[i * 5 + 3]);
    spec.stride = static_cast<int>(stages[i * 5 + 4]);
    spec.se_ratio = se[i];
    c.stages.push_back(spec);
  }
  c.up1_mid = static_cast<int>(s.get("up1_mid").scalar_i64());
  c.up1_r = static_cast<int>(s.get("up1_r").scalar_i64());
  c.up2_r = static_cast<int>(s.get("up2_r").scalar_i64());
  c.skip_interpolation = parse_interp_method(s.get("skip_interpolation").as_text());
  c.final_kernel = static_cast<int>(s.get("final_kernel").scalar_i64());
  c.leaky_slope = s.get("leaky_slope").scalar_f64();
  c.scale_factor = static_cast<int>(s.get("scale_factor").scalar_i64());
  c.seed = s.get("seed").as_u64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: stored configuration is invalid: ") + e.what());
  }
  return c;
}

Section trainer_section(const TrainerState& t) {
  Section s{'T', {}};
  const auto sched = t.scheduler.state();
  s.records.push_back(Record::i64("epoch", t.epoch));
  s.records.push_back(Record::f64("sched.lr", sched.lr));
  s.records.push_back(Record::f64("sched.best", sched.best));
  s.records.push_back(Record::i64("sched.num_bad", sched.num_bad));
  s.records.push_back(Record::i64("sched.reductions", sched.reductions));
  std::ostringstream rng;
  rng << t.rng;
  s.records.push_back(Record::text("rng", rng.str()));
  std::vector<double> loss, lr;
  for (const EpochRecord& e : t.history) {
    loss.push_back(e.train_loss);
    lr.push_back(e.lr);
  }
  s.records.push_back(Record::f64("history.train_loss", loss));
  s.records.push_back(Record::f64("history.lr", lr));
  s.records.push_back(Record::f64("best_loss", t.best_loss));
  return s;
}

Section optimizer_section(const Model<float>& model, const AdamState& a) {
  Section s{'O', {}};
  s.records.push_back(Record::i64("t", a.t));
  s.records.push_back(Record::f64("beta1", a.beta1));
  s.records.push_back(Record::f64("beta2", a.beta2));
  s.records.push_back(Record::f64("eps", a.eps));
  const auto& params = model.parameters();
  if (!a.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto dims = dims_of(params[i].second.shape());
      s.records.push_back(Record::f32("m." + params[i].first, dims, a.m[i]));
      s.records.push_back(Record::f32("v." + params[i].first, dims, a.v[i]));
    }
  }
  return s;
}

TrainerState parse_trainer(const Section& t, const Section& o, const Model<float>& model) {
  TrainerState st;
  st.epoch = static_cast<int>(t.get("epoch").scalar_i64());
  st.scheduler.restore({t.get("sched.lr").scalar_f64(), t.get("sched.best").scalar_f64(),
                        t.get("sched.num_bad").scalar_i64(), t.get("sched.reductions").scalar_i64()});
  std::istringstream rng(t.get("rng").as_text());
  rng >> st.rng;
  if (!rng) throw FormatError("checkpoint: malformed RNG state");
  const auto loss = t.get("history.train_loss").as_f64();
  const auto lr = t.get("history.lr").as_f64();
  if (loss.size() != lr.size()) throw FormatError("checkpoint: history columns differ in length");
  for (std::size_t i = 0; i < loss.size(); ++i)
    st.history.push_back({static_cast<int>(i + 1), loss[i], lr[i]});
  st.best_loss = t.get("best_loss").scalar_f64();

  st.adam.t = o.get("t").scalar_i64();
  st.adam.beta1 = o.get("beta1").scalar_f64();
  st.adam.beta2 = o.get("beta2").scalar_f64();
  st.adam.eps = o.get("eps").scalar_f64();
  if (o.find("m." + model.parameters().front().first)) {
    for (const auto& [name, p] : model.parameters()) {
      const Record& m = o.get("m." + name);
      const Record& v = o.get("v." + name);
      if (m.element_count() != p.size() || v.element_count() != p.size())
        throw FormatError("checkpoint: optimizer state for '" + name + "' has the wrong size");
      st.adam.m.push_back(m.as_f32());
      st.adam.v.push_back(v.as_f32());
    }
  }
  return st;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const Normalization& norm, const TrainerState* trainer) {
  ckpt::Archive a;
  for (const auto& [name, p] : model.parameters())
    a.tensors.push_back(Record::f32(name, dims_of(p.shape()), p.data()));
  a.sections.push_back(config_section(model.config()));
  a.sections.push_back({'N', {Record::f64("mean", norm.mean), Record::f64("scale", norm.scale)}});
  if (trainer) {
    a.sections.push_back(optimizer_section(model, trainer->adam));
    a.sections.push_back(trainer_section(*trainer));
  }
  ckpt::save(a, path);
}

void load_weights(const ckpt::Archive& archive, Model<float>& model) {
  auto& params = model.parameters();
  if (archive.tensors.size() != params.size())
    throw FormatError("checkpoint: " + std::to_string(archive.tensors.size()) +
                      " tensors stored, model has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Record& r = archive.tensors[i];
    auto& [name, p] = params[i];
    if (r.name != name) throw FormatError("checkpoint: expected tensor '" + name + "', found '" + r.name + "'");
    if (r.dims != dims_of(p.shape()))
      throw FormatError("checkpoint: tensor '" + name + "' does not match shape " + p.shape().str());
    const auto v = r.as_f32();
    std::copy(v.begin(), v.end(), p.mutable_data().begin());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const ckpt::Archive a = ckpt::load(path);
  const Section* c = a.section('C');
  const Section* n = a.section('N');
  if (!c || !n) throw FormatError(path.string() + ": checkpoint lacks configuration or normalization");
  LoadedCheckpoint out{Model<float>(parse_config(*c)), {}, std::nullopt};
  load_weights(a, out.model);
  out.norm.mean = n->get("mean").scalar_f64();
  out.norm.scale = n->get("scale").scalar_f64();
  const Section* t = a.section('T');
  const Section* o = a.section('O');
  if (t && o) out.trainer = parse_trainer(*t, *o, out.model);
  return out;
}

}  // namespace demsr
