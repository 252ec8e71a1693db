/* Copyright 2026 The rareseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "rareseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rareseg/error.hpp"

namespace rareseg {
namespace {

constexpr char kMagic[8] = {'R', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void F32(float f) { U32(std::bit_cast<std::uint32_t>(f)); }
  void Raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void Str(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Raw(s.data(), s.size());
  }
  void Tensor(const std::string& name, const rareseg::Tensor& t) {
    Str(name);
    U32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) U32(static_cast<std::uint32_t>(d));
    for (double v : t.data) F32(static_cast<float>(v));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  void Need(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw IoError("checkpoint", origin_ + ": truncated at byte " +
                                      std::to_string(pos_));
    }
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    const std::uint64_t lo = U32();
    const std::uint64_t hi = U32();
    return lo | (hi << 32);
  }
  float F32() { return std::bit_cast<float>(U32()); }
  std::string Str() {
    const std::uint32_t n = U32();
    Need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string RawStr(std::size_t n) {
    Need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::vector<char> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint", "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const ModelConfig& model,
                    const ParameterSet& params, const OptimizerState* optimizer,
                    nlohmann::json metadata) {
  if (!metadata.is_object()) {
    throw ValidationError("checkpoint", "metadata must be a JSON object");
  }
  metadata["model"] = model.ToJson();
  metadata["step"] = optimizer ? optimizer->step : 0;
  metadata["has_optimizer"] = optimizer != nullptr;

  Writer w;
  w.Raw(kMagic, sizeof(kMagic));
  w.U32(kCheckpointVersion);
  w.U64(model.Fingerprint());
  w.Str(metadata.dump());
  std::size_t count = params.size();
  if (optimizer) count += optimizer->m.size() + optimizer->v.size();
  w.U32(static_cast<std::uint32_t>(count));
  for (const auto& e : params.entries()) w.Tensor(e.name, e.tensor);
  if (optimizer) {
    for (const auto& e : optimizer->m.entries()) w.Tensor("optim.m/" + e.name, e.tensor);
    for (const auto& e : optimizer->v.entries()) w.Tensor("optim.v/" + e.name, e.tensor);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint", "cannot write " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("checkpoint", "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  Reader r(ReadAll(path), path.string());
  if (r.RawStr(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError("checkpoint", path.string() + ": bad magic");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint", path.string() + ": unsupported version " +
                                    std::to_string(version));
  }
  const std::uint64_t fingerprint = r.U64();

  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(r.Str());
    ck.model = ModelConfig::FromJson(ck.metadata.at("model"), ModelConfig{});
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint", path.string() + ": bad metadata: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("checkpoint", path.string() + ": bad model config: " + e.what());
  }
  if (ck.model.Fingerprint() != fingerprint) {
    throw IoError("checkpoint", path.string() + ": model fingerprint mismatch");
  }

  const bool has_optimizer = ck.metadata.value("has_optimizer", false);
  OptimizerState opt;
  opt.step = ck.metadata.value("step", std::int64_t{0});
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.Str();
    const std::uint32_t rank = r.U32();
    std::vector<int> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<int>(r.U32());
      n *= static_cast<std::size_t>(d);
    }
    r.Need(n * 4);
    ParameterSet* target = &ck.params;
    std::string key = name;
    if (name.starts_with("optim.m/")) {
      target = &opt.m;
      key = name.substr(8);
    } else if (name.starts_with("optim.v/")) {
      target = &opt.v;
      key = name.substr(8);
    }
    Tensor& t = target->Add(key, shape);
    for (std::size_t k = 0; k < n; ++k) t.data[k] = r.F32();
  }
  if (!r.AtEnd()) throw IoError("checkpoint", path.string() + ": trailing bytes");

  // The stored parameters must match what the config describes.
  const ParameterSet expected = init_parameters(ck.model, 0);
  if (expected.size() != ck.params.size()) {
    throw IoError("checkpoint", path.string() + ": parameter count mismatch");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& a = expected.entries()[i];
    const auto& b = ck.params.entries()[i];
    if (a.name != b.name || a.tensor.shape != b.tensor.shape) {
      throw IoError("checkpoint", path.string() + ": unexpected tensor " + b.name);
    }
  }
  if (has_optimizer) {
    if (opt.m.size() != ck.params.size() || opt.v.size() != ck.params.size()) {
      throw IoError("checkpoint", path.string() + ": incomplete optimizer state");
    }
    ck.optimizer = std::move(opt);
  }
  return ck;
}

}  // namespace rareseg
