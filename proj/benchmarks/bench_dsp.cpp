// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bwc/dsp.hpp"

namespace {

std::vector<float> two_tones(std::size_t n, std::uint32_t rate) {
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    s[i] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * 300 * t) +
                              0.2 * std::sin(2 * std::numbers::pi * 1200 * t));
  }
  return s;
}

void BM_BandSplit(benchmark::State& state) {
  const auto s = two_tones(static_cast<std::size_t>(state.range(0)), 16000);
  for (auto _ : state) benchmark::DoNotOptimize(bwc::dsp::band_split(s, 16000, 700.0));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * s.size()));
}
// 1 s, 30 s (one chunk) and a non-power-of-two length.
BENCHMARK(BM_BandSplit)->Arg(16000)->Arg(480000)->Arg(480007)->Unit(benchmark::kMillisecond);

void BM_Resample(benchmark::State& state) {
  const auto s = two_tones(44100 * 30, 44100);
  for (auto _ : state) benchmark::DoNotOptimize(bwc::dsp::resample_linear(s, 44100, 16000));
}
BENCHMARK(BM_Resample)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
