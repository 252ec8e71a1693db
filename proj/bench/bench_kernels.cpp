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
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "rareseg/kernels.hpp"
#include "rareseg/metrics.hpp"

namespace rareseg {
namespace {

namespace k = kernels;

std::vector<double> Random(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

// Shapes follow the first stage on a 128x128 crop: 32x32 tokens, 16 channels.
constexpr int kSide = 32;
constexpr int kTokens = kSide * kSide;
constexpr int kIn = 16;
constexpr int kOut = 64;

template <bool kParallel>
void BM_Linear(benchmark::State& state) {
  const auto x = Random(kTokens * kIn, 1), w = Random(kIn * kOut, 2), b = Random(kOut, 3);
  std::vector<double> y(kTokens * kOut);
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::LinearForward(x, kTokens, kIn, w, b, kOut, y);
    } else {
      k::reference::LinearForward(x, kTokens, kIn, w, b, kOut, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kParallel>
void BM_Im2Col(benchmark::State& state) {
  const auto x = Random(128 * 128 * 3, 4);
  const int oh = 32, ow = 32;
  std::vector<double> cols(static_cast<std::size_t>(oh) * ow * 7 * 7 * 3);
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::Im2Col(x, 128, 128, 3, 7, 4, 3, oh, ow, cols);
    } else {
      k::reference::Im2Col(x, 128, 128, 3, 7, 4, 3, oh, ow, cols);
    }
    benchmark::DoNotOptimize(cols.data());
  }
}

template <bool kParallel>
void BM_DepthwiseConv(benchmark::State& state) {
  const int c = 64;
  const auto x = Random(kTokens * c, 5), w = Random(9 * c, 6), b = Random(c, 7);
  std::vector<double> y(kTokens * c);
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::DepthwiseConv3x3(x, kSide, kSide, c, w, b, y);
    } else {
      k::reference::DepthwiseConv3x3(x, kSide, kSide, c, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kParallel>
void BM_Attention(benchmark::State& state) {
  const int tk = 16, c = 16;
  const auto q = Random(kTokens * c, 8), kk = Random(tk * c, 9), v = Random(tk * c, 10);
  std::vector<double> out(kTokens * c), probs(kTokens * tk);
  for (auto _ : state) {
    if constexpr (kParallel) {
      k::Attention(q, kk, v, kTokens, tk, c, 1, out, probs);
    } else {
      k::reference::Attention(q, kk, v, kTokens, tk, c, 1, out, probs);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool kParallel>
void BM_Confusion(benchmark::State& state) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> cls(0, 10);
  LabelMask pred(1024, 1024), truth(1024, 1024);
  for (auto& v : pred.data) v = static_cast<std::uint8_t>(cls(rng));
  for (auto& v : truth.data) v = static_cast<std::uint8_t>(cls(rng));
  for (auto _ : state) {
    ConfusionMatrix cm(11);
    if constexpr (kParallel) {
      accumulate(cm, pred, truth);
    } else {
      accumulate_serial(cm, pred, truth);
    }
    benchmark::DoNotOptimize(cm.counts().data());
  }
}

BENCHMARK(BM_Linear<false>)->Name("Linear/serial");
BENCHMARK(BM_Linear<true>)->Name("Linear/parallel");
BENCHMARK(BM_Im2Col<false>)->Name("Im2Col/serial");
BENCHMARK(BM_Im2Col<true>)->Name("Im2Col/parallel");
BENCHMARK(BM_DepthwiseConv<false>)->Name("DepthwiseConv3x3/serial");
BENCHMARK(BM_DepthwiseConv<true>)->Name("DepthwiseConv3x3/parallel");
BENCHMARK(BM_Attention<false>)->Name("Attention/serial");
BENCHMARK(BM_Attention<true>)->Name("Attention/parallel");
BENCHMARK(BM_Confusion<false>)->Name("ConfusionMatrix/serial");
BENCHMARK(BM_Confusion<true>)->Name("ConfusionMatrix/parallel");

}  // namespace
}  // namespace rareseg

BENCHMARK_MAIN();
