// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>

#include "bwc/corpus.hpp"

namespace {

bwc::AudioTrack track(double seconds) {
  bwc::AudioTrack t;
  t.asset_id = "bench";
  t.samples.resize(static_cast<std::size_t>(seconds * t.sample_rate));
  for (std::size_t i = 0; i < t.samples.size(); ++i) t.samples[i] = 0.1f * std::sin(0.05f * static_cast<float>(i));
  return t;
}

void BM_SplitAudio(benchmark::State& state) {
  const auto t = track(static_cast<double>(state.range(0)));
  const double overlap = static_cast<double>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(bwc::split_audio(t, 30.0, overlap));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * t.samples.size()));
}
BENCHMARK(BM_SplitAudio)->Args({300, 0})->Args({300, 5})->Args({3600, 0})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
