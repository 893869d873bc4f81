// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "bwc/store.hpp"

namespace {

// In-memory store with n records spread over 40 themes and 4 indicators.
bwc::store::Store& populated(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<bwc::store::Store>> cache;
  auto& slot = cache[n];
  if (slot) return *slot;
  slot = std::make_unique<bwc::store::Store>();
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "asset-" + std::to_string(i);
    slot->put_asset({id, id + ".wav", 60.0, "INC-" + std::to_string(i % 97), {}});
    bwc::store::IncidentRecord r;
    r.asset_id = id;
    r.incident_ref = "INC-" + std::to_string(i % 97);
    r.themes = {"theme " + std::to_string(i % 40)};
    r.speaker_roles = {{0, bwc::Role::officer}, {1, i % 3 ? bwc::Role::civilian : bwc::Role::unknown}};
    for (const char* k : {"officer.politeness", "officer.aggression", "civilian.distress", "civilian.compliance"})
      r.indicator_scores[k] = score(rng);
    slot->put_record(r);
  }
  return *slot;
}

void BM_QueryTheme(benchmark::State& state) {
  auto& store = populated(static_cast<std::size_t>(state.range(0)));
  bwc::store::QueryFilter f;
  f.theme = "theme 7";
  for (auto _ : state) benchmark::DoNotOptimize(store.query(f));
}
BENCHMARK(BM_QueryTheme)->Range(1000, 16000);

void BM_QueryIndicatorRange(benchmark::State& state) {
  auto& store = populated(static_cast<std::size_t>(state.range(0)));
  bwc::store::QueryFilter f;
  f.indicator = bwc::store::IndicatorRange{"officer.politeness", 0.40, 0.45};
  for (auto _ : state) benchmark::DoNotOptimize(store.query(f));
}
BENCHMARK(BM_QueryIndicatorRange)->Range(1000, 16000);

void BM_QueryScan(benchmark::State& state) {
  auto& store = populated(static_cast<std::size_t>(state.range(0)));
  bwc::store::QueryFilter f;
  for (auto _ : state) benchmark::DoNotOptimize(store.query(f));
}
BENCHMARK(BM_QueryScan)->Range(1000, 16000);

void BM_PutRecord(benchmark::State& state) {
  bwc::store::Store store;
  store.put_asset({"a", "a.wav", 60.0, std::nullopt, {}});
  std::uint64_t rev = 0;
  for (auto _ : state) {
    bwc::store::IncidentRecord r;
    r.asset_id = "a";
    r.revision = rev++;
    r.themes = {"traffic stop"};
    r.indicator_scores = {{"officer.politeness", 0.5}};
    store.put_record(r);
  }
}
BENCHMARK(BM_PutRecord);

}  // namespace

BENCHMARK_MAIN();
