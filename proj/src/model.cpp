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
#include "rareseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"
#include "rareseg/kernels.hpp"

namespace rareseg {

namespace k = kernels;

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::Validate() const {
  auto field = [](const char* name, int i) {
    return std::string("model.") + name + "[" + std::to_string(i) + "]";
  };
  if (num_classes < 1) throw ConfigError("model.num_classes", "must be >= 1");
  if (in_channels < 1 || in_channels > 3) {
    throw ConfigError("model.in_channels", "must be 1..3");
  }
  if (mlp_ratio < 1) throw ConfigError("model.mlp_ratio", "must be >= 1");
  if (decoder_dim < 1) throw ConfigError("model.decoder_dim", "must be >= 1");
  for (int i = 0; i < 4; ++i) {
    if (depths[i] < 0) throw ConfigError(field("depths", i), "must be >= 0");
    if (dims[i] < 1) throw ConfigError(field("dims", i), "must be > 0");
    if (heads[i] < 1 || dims[i] % heads[i] != 0) {
      throw ConfigError(field("heads", i),
                        "must divide the stage dim " + std::to_string(dims[i]));
    }
    if (sr_ratios[i] < 1) throw ConfigError(field("sr_ratios", i), "must be >= 1");
  }
  if (merges[0] != MergeSpec{7, 4, 3}) {
    throw ConfigError("model.merges[0]",
                      "first merge must be kernel 7 / stride 4 / padding 3");
  }
  for (int i = 1; i < 4; ++i) {
    if (merges[i] != MergeSpec{3, 2, 1}) {
      throw ConfigError(field("merges", i),
                        "later merges must be kernel 3 / stride 2 / padding 1");
    }
  }
  for (int c = 0; c < 3; ++c) {
    if (!(input_std[c] > 0)) throw ConfigError("model.input_std", "must be > 0");
  }
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& doc, ModelConfig base,
                                  const std::string& path) {
  using json_fields::Read;
  json_fields::CheckKeys(doc, path,
                         {"num_classes", "in_channels", "depths", "dims",
                          "heads", "sr_ratios", "merges", "mlp_ratio",
                          "decoder_dim", "input_mean", "input_std"});
  Read(doc, path, "num_classes", base.num_classes);
  Read(doc, path, "in_channels", base.in_channels);
  Read(doc, path, "depths", base.depths);
  Read(doc, path, "dims", base.dims);
  Read(doc, path, "heads", base.heads);
  Read(doc, path, "sr_ratios", base.sr_ratios);
  if (auto it = doc.find("merges"); it != doc.end()) {
    if (!it->is_array() || it->size() != 4) {
      throw ConfigError(path + ".merges", "expected 4 [kernel,stride,padding]");
    }
    for (int i = 0; i < 4; ++i) {
      std::array<int, 3> m{};
      try {
        m = (*it)[i].get<std::array<int, 3>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(path + ".merges[" + std::to_string(i) + "]",
                          "expected [kernel,stride,padding]");
      }
      base.merges[i] = {m[0], m[1], m[2]};
    }
  }
  Read(doc, path, "mlp_ratio", base.mlp_ratio);
  Read(doc, path, "decoder_dim", base.decoder_dim);
  Read(doc, path, "input_mean", base.input_mean);
  Read(doc, path, "input_std", base.input_std);
  base.Validate();
  return base;
}

nlohmann::json ModelConfig::ToJson() const {
  nlohmann::json merges_json = nlohmann::json::array();
  for (const auto& m : merges) {
    merges_json.push_back({m.kernel, m.stride, m.padding});
  }
  return {{"num_classes", num_classes}, {"in_channels", in_channels},
          {"depths", depths},           {"dims", dims},
          {"heads", heads},             {"sr_ratios", sr_ratios},
          {"merges", merges_json},      {"mlp_ratio", mlp_ratio},
          {"decoder_dim", decoder_dim}, {"input_mean", input_mean},
          {"input_std", input_std}};
}

std::uint64_t ModelConfig::Fingerprint() const {
  // FNV-1a over the canonical (key-sorted) JSON dump.
  const std::string s = ToJson().dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

std::string StageName(int s) { return "stage" + std::to_string(s + 1); }
std::string BlockName(int s, int b) {
  return StageName(s) + ".block" + std::to_string(b + 1);
}

void AddLinear(ParameterSet& ps, const std::string& name, int in, int out) {
  ps.Add(name + ".weight", {in, out});
  ps.Add(name + ".bias", {out});
}

void AddNorm(ParameterSet& ps, const std::string& name, int c) {
  ps.Add(name + ".gain", {c});
  ps.Add(name + ".bias", {c});
}

}  // namespace

int MergedSize(int in, const MergeSpec& spec) {
  return (in + 2 * spec.padding - spec.kernel) / spec.stride + 1;
}

ParameterSet init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.Validate();
  ParameterSet ps;
  int in_c = cfg.in_channels;
  for (int s = 0; s < 4; ++s) {
    const int c = cfg.dims[s];
    const int kk = cfg.merges[s].kernel;
    AddLinear(ps, StageName(s) + ".merge", kk * kk * in_c, c);
    AddNorm(ps, StageName(s) + ".merge_norm", c);
    for (int b = 0; b < cfg.depths[s]; ++b) {
      const std::string p = BlockName(s, b);
      const int hidden = c * cfg.mlp_ratio;
      AddNorm(ps, p + ".norm1", c);
      AddLinear(ps, p + ".attn.q", c, c);
      if (cfg.sr_ratios[s] > 1) {
        const int r = cfg.sr_ratios[s];
        AddLinear(ps, p + ".attn.sr", r * r * c, c);
        AddNorm(ps, p + ".attn.sr_norm", c);
      }
      AddLinear(ps, p + ".attn.kv", c, 2 * c);
      AddLinear(ps, p + ".attn.proj", c, c);
      AddNorm(ps, p + ".norm2", c);
      AddLinear(ps, p + ".ffn.fc1", c, hidden);
      ps.Add(p + ".ffn.dw.weight", {9, hidden});
      ps.Add(p + ".ffn.dw.bias", {hidden});
      AddLinear(ps, p + ".ffn.fc2", hidden, c);
    }
    AddNorm(ps, StageName(s) + ".norm", c);
    in_c = c;
  }
  for (int s = 0; s < 4; ++s) {
    AddLinear(ps, "decoder.proj" + std::to_string(s + 1), cfg.dims[s],
              cfg.decoder_dim);
  }
  AddLinear(ps, "decoder.fuse", 4 * cfg.decoder_dim, cfg.decoder_dim);
  AddLinear(ps, "decoder.classifier", cfg.decoder_dim, cfg.num_classes);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& e : ps.entries()) {
    const auto& n = e.name;
    if (n.ends_with(".gain")) {
      std::fill(e.tensor.data.begin(), e.tensor.data.end(), 1.0);
    } else if (n.ends_with(".weight")) {
      for (double& v : e.tensor.data) {
        double z;
        do {
          z = normal(rng);
        } while (std::abs(z) > 2.0);
        v = 0.02 * z;
      }
    }
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Layers with optional activation recording

namespace {

constexpr double kNormEps = 1e-6;

struct LinearCache {
  std::vector<double> x;
};
struct NormCache {
  std::vector<double> xhat, inv_std;
};
struct ConvCache {
  std::vector<double> cols;
  int h = 0, w = 0, c = 0;
};

struct AttnCache {
  int kv_h = 0, kv_w = 0;
  LinearCache q_lin;
  std::vector<double> q;
  ConvCache sr;
  NormCache sr_norm;
  LinearCache kv_lin;
  std::vector<double> k, v;
  std::vector<double> probs;
  LinearCache proj_lin;
};

struct BlockCache {
  NormCache norm1;
  AttnCache attn;
  NormCache norm2;
  LinearCache fc1;
  std::vector<double> dw_in;
  std::vector<double> gelu_in;
  LinearCache fc2;
};

struct StageCache {
  ConvCache merge;
  NormCache merge_norm;
  std::vector<BlockCache> blocks;
  NormCache norm;
  int h = 0, w = 0;
};

struct DecoderCache {
  std::array<LinearCache, 4> proj;
  LinearCache fuse;
  LinearCache classifier;
};

const Tensor& W(const ParameterSet& ps, const std::string& n) {
  return ps.at(n + ".weight");
}
const Tensor& B(const ParameterSet& ps, const std::string& n) {
  return ps.at(n + ".bias");
}

FeatureMap Linear(const FeatureMap& x, const ParameterSet& ps,
                  const std::string& name, LinearCache* cache) {
  const Tensor& w = W(ps, name);
  const int in = w.shape[0], out = w.shape[1];
  if (x.channels != in) {
    throw ShapeError("model", name + ": input has " +
                                  std::to_string(x.channels) +
                                  " channels, weight expects " +
                                  std::to_string(in));
  }
  FeatureMap y(x.height, x.width, out);
  k::LinearForward(x.data, x.tokens(), in, w.data, B(ps, name).data, out,
                   y.data);
  if (cache) cache->x = x.data;
  return y;
}

// Returns dx (empty map when need_dx is false).
FeatureMap LinearBack(const LinearCache& cache, const FeatureMap& dy,
                      const ParameterSet& ps, ParameterSet& grads,
                      const std::string& name, bool need_dx = true) {
  const Tensor& w = W(ps, name);
  const int in = w.shape[0], out = w.shape[1];
  FeatureMap dx;
  if (need_dx) dx = FeatureMap(dy.height, dy.width, in);
  k::LinearBackward(cache.x, dy.tokens(), in, w.data, out, dy.data, dx.data,
                    grads.at(name + ".weight").data,
                    grads.at(name + ".bias").data);
  return dx;
}

FeatureMap Norm(const FeatureMap& x, const ParameterSet& ps,
                const std::string& name, NormCache* cache) {
  FeatureMap y(x.height, x.width, x.channels);
  std::vector<double> xhat, inv;
  if (cache) {
    xhat.resize(x.data.size());
    inv.resize(x.tokens());
  }
  k::LayerNorm(x.data, x.tokens(), x.channels, ps.at(name + ".gain").data,
               ps.at(name + ".bias").data, kNormEps, y.data, xhat, inv);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

FeatureMap NormBack(const NormCache& cache, const FeatureMap& dy,
                    const ParameterSet& ps, ParameterSet& grads,
                    const std::string& name) {
  FeatureMap dx(dy.height, dy.width, dy.channels);
  k::LayerNormBackward(dy.data, cache.xhat, cache.inv_std, dy.tokens(),
                       dy.channels, ps.at(name + ".gain").data, dx.data,
                       grads.at(name + ".gain").data,
                       grads.at(name + ".bias").data);
  return dx;
}

FeatureMap Conv(const FeatureMap& x, const MergeSpec& spec,
                const ParameterSet& ps, const std::string& name,
                ConvCache* cache) {
  const Tensor& w = W(ps, name);
  const int kk = spec.kernel;
  if (w.shape[0] != kk * kk * x.channels) {
    throw ShapeError("model", name + ": weight rows " +
                                  std::to_string(w.shape[0]) + " != " +
                                  std::to_string(kk * kk * x.channels));
  }
  if (x.height + 2 * spec.padding < kk || x.width + 2 * spec.padding < kk) {
    throw ShapeError("model", name + ": input " + std::to_string(x.height) +
                                  "x" + std::to_string(x.width) +
                                  " is smaller than kernel " +
                                  std::to_string(kk) + "x" + std::to_string(kk));
  }
  const int oh = MergedSize(x.height, spec), ow = MergedSize(x.width, spec);
  FeatureMap cols(oh, ow, kk * kk * x.channels);
  k::Im2Col(x.data, x.height, x.width, x.channels, kk, spec.stride,
            spec.padding, oh, ow, cols.data);
  FeatureMap y = Linear(cols, ps, name, nullptr);
  if (cache) {
    cache->cols = std::move(cols.data);
    cache->h = x.height;
    cache->w = x.width;
    cache->c = x.channels;
  }
  return y;
}

FeatureMap ConvBack(const ConvCache& cache, const FeatureMap& dy,
                    const MergeSpec& spec, const ParameterSet& ps,
                    ParameterSet& grads, const std::string& name,
                    bool need_dx = true) {
  LinearCache lc{cache.cols};
  FeatureMap dcols = LinearBack(lc, dy, ps, grads, name, need_dx);
  if (!need_dx) return {};
  FeatureMap dx(cache.h, cache.w, cache.c);
  k::Col2Im(dcols.data, cache.h, cache.w, cache.c, spec.kernel, spec.stride,
            spec.padding, dy.height, dy.width, dx.data);
  return dx;
}

FeatureMap Attn(const FeatureMap& a, const ModelConfig& cfg, int s,
                const std::string& p, const ParameterSet& ps,
                AttnCache* cache) {
  const int c = cfg.dims[s], heads = cfg.heads[s], r = cfg.sr_ratios[s];
  FeatureMap q = Linear(a, ps, p + ".q", cache ? &cache->q_lin : nullptr);
  FeatureMap src;
  if (r > 1) {
    FeatureMap red = Conv(a, MergeSpec{r, r, 0}, ps, p + ".sr",
                          cache ? &cache->sr : nullptr);
    src = Norm(red, ps, p + ".sr_norm", cache ? &cache->sr_norm : nullptr);
  } else {
    src = a;
  }
  FeatureMap kv = Linear(src, ps, p + ".kv", cache ? &cache->kv_lin : nullptr);
  const int tk = kv.tokens(), tq = q.tokens();
  std::vector<double> kk(static_cast<std::size_t>(tk) * c), vv(kk.size());
  for (int j = 0; j < tk; ++j) {
    const double* row = kv.data.data() + static_cast<std::size_t>(j) * 2 * c;
    std::copy(row, row + c, kk.begin() + static_cast<std::ptrdiff_t>(j) * c);
    std::copy(row + c, row + 2 * c, vv.begin() + static_cast<std::ptrdiff_t>(j) * c);
  }
  FeatureMap out(a.height, a.width, c);
  std::vector<double> probs;
  if (cache) probs.resize(static_cast<std::size_t>(heads) * tq * tk);
  k::Attention(q.data, kk, vv, tq, tk, c, heads, out.data, probs);
  FeatureMap y = Linear(out, ps, p + ".proj",
                        cache ? &cache->proj_lin : nullptr);
  if (cache) {
    cache->kv_h = kv.height;
    cache->kv_w = kv.width;
    cache->q = std::move(q.data);
    cache->k = std::move(kk);
    cache->v = std::move(vv);
    cache->probs = std::move(probs);
  }
  return y;
}

FeatureMap AttnBack(const AttnCache& cache, const FeatureMap& dy,
                    const ModelConfig& cfg, int s, const std::string& p,
                    const ParameterSet& ps, ParameterSet& grads) {
  const int c = cfg.dims[s], heads = cfg.heads[s], r = cfg.sr_ratios[s];
  FeatureMap dout = LinearBack(cache.proj_lin, dy, ps, grads, p + ".proj");
  const int tq = dy.tokens();
  const int tk = cache.kv_h * cache.kv_w;
  FeatureMap dq(dy.height, dy.width, c);
  std::vector<double> dk(static_cast<std::size_t>(tk) * c), dv(dk.size());
  k::AttentionBackward(cache.q, cache.k, cache.v, cache.probs, dout.data, tq,
                       tk, c, heads, dq.data, dk, dv);
  FeatureMap dkv(cache.kv_h, cache.kv_w, 2 * c);
  for (int j = 0; j < tk; ++j) {
    double* row = dkv.data.data() + static_cast<std::size_t>(j) * 2 * c;
    std::copy(dk.begin() + static_cast<std::ptrdiff_t>(j) * c,
              dk.begin() + static_cast<std::ptrdiff_t>(j + 1) * c, row);
    std::copy(dv.begin() + static_cast<std::ptrdiff_t>(j) * c,
              dv.begin() + static_cast<std::ptrdiff_t>(j + 1) * c, row + c);
  }
  FeatureMap dsrc = LinearBack(cache.kv_lin, dkv, ps, grads, p + ".kv");
  FeatureMap da = LinearBack(cache.q_lin, dq, ps, grads, p + ".q");
  if (r > 1) {
    FeatureMap dred = NormBack(cache.sr_norm, dsrc, ps, grads, p + ".sr_norm");
    dsrc = ConvBack(cache.sr, dred, MergeSpec{r, r, 0}, ps, grads, p + ".sr");
  }
  for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] += dsrc.data[i];
  return da;
}

FeatureMap Block(const FeatureMap& x, const ModelConfig& cfg, int s, int b,
                 const ParameterSet& ps, BlockCache* cache) {
  const std::string p = BlockName(s, b);
  FeatureMap n1 = Norm(x, ps, p + ".norm1", cache ? &cache->norm1 : nullptr);
  FeatureMap att = Attn(n1, cfg, s, p + ".attn", ps,
                        cache ? &cache->attn : nullptr);
  FeatureMap x1 = x;
  for (std::size_t i = 0; i < x1.data.size(); ++i) x1.data[i] += att.data[i];
  FeatureMap n2 = Norm(x1, ps, p + ".norm2", cache ? &cache->norm2 : nullptr);
  FeatureMap f1 = Linear(n2, ps, p + ".ffn.fc1", cache ? &cache->fc1 : nullptr);
  FeatureMap d(f1.height, f1.width, f1.channels);
  k::DepthwiseConv3x3(f1.data, f1.height, f1.width, f1.channels,
                      ps.at(p + ".ffn.dw.weight").data,
                      ps.at(p + ".ffn.dw.bias").data, d.data);
  FeatureMap g(d.height, d.width, d.channels);
  k::Gelu(d.data, g.data);
  FeatureMap f2 = Linear(g, ps, p + ".ffn.fc2", cache ? &cache->fc2 : nullptr);
  for (std::size_t i = 0; i < x1.data.size(); ++i) x1.data[i] += f2.data[i];
  if (cache) {
    cache->dw_in = std::move(f1.data);
    cache->gelu_in = std::move(d.data);
  }
  return x1;
}

FeatureMap BlockBack(const BlockCache& cache, const FeatureMap& dy,
                     const ModelConfig& cfg, int s, int b,
                     const ParameterSet& ps, ParameterSet& grads) {
  const std::string p = BlockName(s, b);
  const int hidden = cfg.dims[s] * cfg.mlp_ratio;
  FeatureMap dg = LinearBack(cache.fc2, dy, ps, grads, p + ".ffn.fc2");
  FeatureMap dd(dy.height, dy.width, hidden);
  k::GeluBackward(cache.gelu_in, dg.data, dd.data);
  FeatureMap df1(dy.height, dy.width, hidden);
  k::DepthwiseConv3x3Backward(cache.dw_in, dy.height, dy.width, hidden,
                              ps.at(p + ".ffn.dw.weight").data, dd.data,
                              df1.data, grads.at(p + ".ffn.dw.weight").data,
                              grads.at(p + ".ffn.dw.bias").data);
  FeatureMap dn2 = LinearBack(cache.fc1, df1, ps, grads, p + ".ffn.fc1");
  FeatureMap dx1 = NormBack(cache.norm2, dn2, ps, grads, p + ".norm2");
  for (std::size_t i = 0; i < dx1.data.size(); ++i) dx1.data[i] += dy.data[i];
  FeatureMap dn1 = AttnBack(cache.attn, dx1, cfg, s, p + ".attn", ps, grads);
  FeatureMap dx = NormBack(cache.norm1, dn1, ps, grads, p + ".norm1");
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dx1.data[i];
  return dx;
}

FeatureMap Stage(const FeatureMap& x, const ModelConfig& cfg, int s,
                 const ParameterSet& ps, StageCache* cache) {
  const std::string p = StageName(s);
  FeatureMap m = Conv(x, cfg.merges[s], ps, p + ".merge",
                      cache ? &cache->merge : nullptr);
  m = Norm(m, ps, p + ".merge_norm", cache ? &cache->merge_norm : nullptr);
  if (cache) cache->blocks.resize(cfg.depths[s]);
  for (int b = 0; b < cfg.depths[s]; ++b) {
    m = Block(m, cfg, s, b, ps, cache ? &cache->blocks[b] : nullptr);
  }
  if (cache) {
    cache->h = m.height;
    cache->w = m.width;
  }
  return Norm(m, ps, p + ".norm", cache ? &cache->norm : nullptr);
}

FeatureMap StageBack(const StageCache& cache, const FeatureMap& dy,
                     const ModelConfig& cfg, int s, const ParameterSet& ps,
                     ParameterSet& grads, bool need_dx) {
  const std::string p = StageName(s);
  FeatureMap d = NormBack(cache.norm, dy, ps, grads, p + ".norm");
  for (int b = cfg.depths[s] - 1; b >= 0; --b) {
    d = BlockBack(cache.blocks[b], d, cfg, s, b, ps, grads);
  }
  d = NormBack(cache.merge_norm, d, ps, grads, p + ".merge_norm");
  return ConvBack(cache.merge, d, cfg.merges[s], ps, grads, p + ".merge",
                  need_dx);
}

FeatureMap Normalize(const Image& image, const ModelConfig& cfg) {
  if (image.channels != cfg.in_channels) {
    throw ShapeError("model", "image has " + std::to_string(image.channels) +
                                  " channels, model expects " +
                                  std::to_string(cfg.in_channels));
  }
  FeatureMap x(image.height, image.width, image.channels);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const int c = static_cast<int>(i % image.channels);
    x.data[i] = (image.data[i] - cfg.input_mean[c]) / cfg.input_std[c];
  }
  return x;
}

void CheckDivisible(const Image& image) {
  if (image.height % 32 != 0 || image.width % 32 != 0 || image.height == 0 ||
      image.width == 0) {
    throw ShapeError("model", "input " + std::to_string(image.height) + "x" +
                                  std::to_string(image.width) +
                                  " is not a positive multiple of 32");
  }
}

StageFeatures Encode(const Image& image, const ModelConfig& cfg,
                     const ParameterSet& ps,
                     std::array<StageCache, 4>* caches) {
  CheckDivisible(image);
  StageFeatures f;
  FeatureMap x = Normalize(image, cfg);
  for (int s = 0; s < 4; ++s) {
    f.maps[s] = Stage(s == 0 ? x : f.maps[s - 1], cfg, s, ps,
                      caches ? &(*caches)[s] : nullptr);
  }
  return f;
}

LogitMap Decode(const StageFeatures& f, const ModelConfig& cfg,
                const ParameterSet& ps, DecoderCache* cache) {
  const int h4 = f.maps[0].height, w4 = f.maps[0].width;
  const int d = cfg.decoder_dim;
  FeatureMap concat(h4, w4, 4 * d);
  FeatureMap up(h4, w4, d);
  for (int s = 0; s < 4; ++s) {
    FeatureMap proj = Linear(f.maps[s], ps, "decoder.proj" + std::to_string(s + 1),
                             cache ? &cache->proj[s] : nullptr);
    k::ResizeBilinear(proj.data, proj.height, proj.width, d, h4, w4, up.data);
    for (int t = 0; t < concat.tokens(); ++t) {
      std::copy(up.data.begin() + static_cast<std::ptrdiff_t>(t) * d,
                up.data.begin() + static_cast<std::ptrdiff_t>(t + 1) * d,
                concat.data.begin() + static_cast<std::ptrdiff_t>(t) * 4 * d + s * d);
    }
  }
  FeatureMap fused = Linear(concat, ps, "decoder.fuse",
                            cache ? &cache->fuse : nullptr);
  FeatureMap logits = Linear(fused, ps, "decoder.classifier",
                             cache ? &cache->classifier : nullptr);
  LogitMap out(h4, w4, cfg.num_classes);
  out.data = std::move(logits.data);
  return out;
}

std::array<FeatureMap, 4> DecodeBack(const DecoderCache& cache,
                                     const LogitMap& dlogits,
                                     const std::array<std::array<int, 2>, 4>& sizes,
                                     const ModelConfig& cfg,
                                     const ParameterSet& ps,
                                     ParameterSet& grads) {
  const int d = cfg.decoder_dim;
  FeatureMap dl(dlogits.height, dlogits.width, dlogits.num_classes);
  dl.data = dlogits.data;
  FeatureMap dfused = LinearBack(cache.classifier, dl, ps, grads,
                                 "decoder.classifier");
  FeatureMap dconcat = LinearBack(cache.fuse, dfused, ps, grads, "decoder.fuse");
  std::array<FeatureMap, 4> df;
  FeatureMap dup(dl.height, dl.width, d);
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t < dup.tokens(); ++t) {
      const auto src = dconcat.data.begin() + static_cast<std::ptrdiff_t>(t) * 4 * d + s * d;
      std::copy(src, src + d, dup.data.begin() + static_cast<std::ptrdiff_t>(t) * d);
    }
    FeatureMap dproj(sizes[s][0], sizes[s][1], d);
    k::ResizeBilinearBackward(dup.data, dup.height, dup.width, dproj.height,
                              dproj.width, d, dproj.data);
    df[s] = LinearBack(cache.proj[s], dproj, ps, grads,
                       "decoder.proj" + std::to_string(s + 1));
  }
  return df;
}

LogitMap Upsample(const LogitMap& low, int h, int w) {
  LogitMap out(h, w, low.num_classes);
  k::ResizeBilinear(low.data, low.height, low.width, low.num_classes, h, w,
                    out.data);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public forward API

FeatureMap overlapped_patch_merge(const FeatureMap& input,
                                  const MergeSpec& spec, const Tensor& weight,
                                  const Tensor& bias) {
  ParameterSet ps;
  ps.Add("merge.weight", weight.shape).data = weight.data;
  ps.Add("merge.bias", bias.shape).data = bias.data;
  return Conv(input, spec, ps, "merge", nullptr);
}

FeatureMap transformer_block(const FeatureMap& x, const ModelConfig& cfg,
                             int stage, int block, const ParameterSet& params) {
  if (x.channels != cfg.dims[stage]) {
    throw ShapeError("model", "stage " + std::to_string(stage + 1) +
                                  " expects " + std::to_string(cfg.dims[stage]) +
                                  " channels");
  }
  return Block(x, cfg, stage, block, params, nullptr);
}

FeatureMap transformer_stage(const FeatureMap& x, const ModelConfig& cfg,
                             int stage, const ParameterSet& params) {
  FeatureMap y = x;
  for (int b = 0; b < cfg.depths[stage]; ++b) {
    y = transformer_block(y, cfg, stage, b, params);
  }
  return y;
}

StageFeatures encoder_forward(const Image& image, const ModelConfig& cfg,
                              const ParameterSet& params) {
  return Encode(image, cfg, params, nullptr);
}

LogitMap decoder_forward(const StageFeatures& features, const ModelConfig& cfg,
                         const ParameterSet& params) {
  return Decode(features, cfg, params, nullptr);
}

LogitMap model_forward(const Image& image, const ModelConfig& cfg,
                       const ParameterSet& params) {
  LogitMap low = decoder_forward(encoder_forward(image, cfg, params), cfg, params);
  return Upsample(low, image.height, image.width);
}

// ---------------------------------------------------------------------------
// Training graph

struct Network::Tape {
  std::array<StageCache, 4> stages;
  DecoderCache decoder;
  std::array<std::array<int, 2>, 4> sizes{};
  int low_h = 0, low_w = 0;
  int height = 0, width = 0;
  bool valid = false;
};

Network::Network(ModelConfig cfg)
    : cfg_(std::move(cfg)), tape_(std::make_unique<Tape>()) {
  cfg_.Validate();
}
Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

LogitMap Network::Forward(const Image& image, const ParameterSet& params) {
  Tape& t = *tape_;
  t.valid = false;
  StageFeatures f = Encode(image, cfg_, params, &t.stages);
  for (int s = 0; s < 4; ++s) t.sizes[s] = {f.maps[s].height, f.maps[s].width};
  LogitMap low = Decode(f, cfg_, params, &t.decoder);
  t.low_h = low.height;
  t.low_w = low.width;
  t.height = image.height;
  t.width = image.width;
  t.valid = true;
  return Upsample(low, image.height, image.width);
}

void Network::Backward(const LogitMap& dlogits, const ParameterSet& params,
                       ParameterSet& grads) {
  const Tape& t = *tape_;
  if (!t.valid) throw ValidationError("model", "Backward without Forward");
  if (dlogits.height != t.height || dlogits.width != t.width ||
      dlogits.num_classes != cfg_.num_classes) {
    throw ShapeError("model", "logit gradient shape does not match forward");
  }
  LogitMap dlow(t.low_h, t.low_w, cfg_.num_classes);
  k::ResizeBilinearBackward(dlogits.data, t.height, t.width, t.low_h, t.low_w,
                            cfg_.num_classes, dlow.data);
  std::array<FeatureMap, 4> df =
      DecodeBack(t.decoder, dlow, t.sizes, cfg_, params, grads);
  FeatureMap carry;
  for (int s = 3; s >= 0; --s) {
    FeatureMap d = std::move(df[s]);
    if (!carry.data.empty()) {
      for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += carry.data[i];
    }
    carry = StageBack(t.stages[s], d, cfg_, s, params, grads, s > 0);
  }
}

}  // namespace rareseg
