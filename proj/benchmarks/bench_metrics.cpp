// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "bwc/quality.hpp"

namespace {

const std::vector<std::string> kWords = {"officer", "license", "registration", "vehicle", "stop",  "sir",
                                         "ma'am",   "please",  "hands",        "step",    "out",   "car",
                                         "lisense", "regstration", "caf\xC3\xA9", "okay", "yeah", "uh"};

std::string transcript(std::size_t lines, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::uniform_int_distribution<int> len(3, 14);
  std::string out;
  for (std::size_t l = 0; l < lines; ++l) {
    const int n = len(rng);
    for (int w = 0; w < n; ++w) out += (w ? " " : "") + kWords[pick(rng)];
    out += l % 7 == 0 ? "!\n" : ".\n";
  }
  return out;
}

void BM_Tokenize(benchmark::State& state) {
  const auto text = transcript(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(bwc::quality::tokenize(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Tokenize)->Range(64, 8192);

void BM_Measure(benchmark::State& state) {
  const auto a = bwc::quality::tokenize(transcript(static_cast<std::size_t>(state.range(0)), 2));
  const auto b = bwc::quality::tokenize(transcript(static_cast<std::size_t>(state.range(0)), 3));
  const std::vector<std::string> dict(kWords.begin(), kWords.begin() + 12);
  const bwc::quality::Dictionary dictionary(dict);
  for (auto _ : state) benchmark::DoNotOptimize(bwc::quality::measure(a, b, dictionary));
}
BENCHMARK(BM_Measure)->Range(64, 8192);

}  // namespace

BENCHMARK_MAIN();
