// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "bwc/store.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bwc;
using namespace bwc::store;
using bwc::testing::error_code;
using bwc::testing::ScratchDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

IncidentRecord record(const std::string& asset, std::uint64_t rev, std::vector<std::string> themes = {}) {
  IncidentRecord r;
  r.asset_id = asset;
  r.revision = rev;
  r.themes = std::move(themes);
  r.speaker_roles = {{0, Role::officer}};
  r.indicator_scores = {{"officer.politeness", 0.42}};
  return r;
}

VideoAsset asset(const std::string& id, std::optional<std::string> ref = std::nullopt) {
  return {id, id + ".wav", 10.0, std::move(ref), {}};
}

std::vector<std::string> ids(const QueryPage& page) {
  std::vector<std::string> out;
  for (const auto& r : page.records) out.push_back(r.id());
  return out;
}

}  // namespace

TEST(KvLog, PersistsAcrossReopen) {
  ScratchDir dir("kv");
  {
    KvLog log(dir / "s.log");
    log.commit({{false, "a", "1"}, {false, "b", "2"}});
    log.commit({{true, "a", ""}, {false, "c", "line\nbreak"}});
  }
  KvLog log(dir / "s.log");
  EXPECT_FALSE(log.get("a"));
  EXPECT_EQ(log.get("b"), "2");
  EXPECT_EQ(log.get("c"), "line\nbreak");
  EXPECT_EQ(log.recovered_bytes(), 0u);
}

TEST(KvLog, TornTailIsDiscardedAtomically) {
  ScratchDir dir("kv-torn");
  {
    KvLog log(dir / "s.log");
    log.commit({{false, "a", "1"}});
    log.commit({{false, "b", "2"}, {false, "c", "3"}});
  }
  const auto intact = slurp(dir / "s.log");
  // Simulate a crash halfway through writing the third batch.
  {
    std::ofstream out(dir / "s.log", std::ios::app | std::ios::binary);
    out << "deadbeef [[\"put\",\"d\",\"4\"],[\"put\",\"e\"";
  }
  {
    KvLog log(dir / "s.log");
    EXPECT_GT(log.recovered_bytes(), 0u);
    EXPECT_EQ(log.get("c"), "3");
    EXPECT_FALSE(log.get("d"));
    log.commit({{false, "f", "6"}});
  }
  KvLog again(dir / "s.log");
  EXPECT_EQ(again.recovered_bytes(), 0u);
  EXPECT_EQ(again.get("f"), "6");
  EXPECT_EQ(slurp(dir / "s.log").rfind(intact, 0), 0u);
}

TEST(KvLog, ChecksumMismatchDropsBatchAndEverythingAfter) {
  ScratchDir dir("kv-crc");
  {
    KvLog log(dir / "s.log");
    log.commit({{false, "a", "1"}});
    log.commit({{false, "b", "2"}});
    log.commit({{false, "c", "3"}});
  }
  auto content = slurp(dir / "s.log");
  const auto pos = content.find("\"b\",\"2\"");
  content[pos + 5] = '9';
  std::ofstream(dir / "s.log", std::ios::binary | std::ios::trunc) << content;
  KvLog log(dir / "s.log");
  EXPECT_EQ(log.get("a"), "1");
  EXPECT_FALSE(log.get("b"));
  EXPECT_FALSE(log.get("c"));
}

TEST(KvLog, RejectsForeignAndFutureFiles) {
  ScratchDir dir("kv-bad");
  std::ofstream(dir / "future.log") << "BWCSTORE 99\n";
  EXPECT_EQ(error_code([&] { KvLog log(dir / "future.log"); }), Errc::corrupt_data);
  std::ofstream(dir / "junk.log") << "hello\n";
  EXPECT_EQ(error_code([&] { KvLog log(dir / "junk.log"); }), Errc::corrupt_data);
  std::ofstream(dir / "file") << "x";
  EXPECT_EQ(error_code([&] { KvLog log(dir / "file" / "nested.log"); }), Errc::store_unavailable);
}

TEST(KvLog, CompactKeepsLiveMap) {
  ScratchDir dir("kv-compact");
  KvLog log(dir / "s.log");
  for (int i = 0; i < 100; ++i) log.commit({{false, "k", std::to_string(i)}});
  const auto before = std::filesystem::file_size(dir / "s.log");
  log.compact();
  EXPECT_LT(std::filesystem::file_size(dir / "s.log"), before);
  log.commit({{false, "z", "after"}});
  KvLog reopened(dir / "s.log");
  EXPECT_EQ(reopened.get("k"), "99");
  EXPECT_EQ(reopened.get("z"), "after");
}

TEST(Records, UpsertKeepsCreatedAndReindexes) {
  Store store;
  std::int64_t now = 1000;
  store.set_clock([&] { return now; });
  store.put_asset(asset("a"));
  store.put_record(record("a", 0, {"Traffic  Stop", "arrest", "traffic stop"}));
  auto r = *store.get_record("a", 0);
  EXPECT_EQ(r.themes, (std::vector<std::string>{"arrest", "traffic stop"}));
  EXPECT_EQ(r.created_ms, 1000);

  now = 2000;
  auto changed = r;
  changed.themes = {"pursuit"};
  store.put_record(changed);
  r = *store.get_record("a", 0);
  EXPECT_EQ(r.created_ms, 1000);
  EXPECT_EQ(r.updated_ms, 2000);

  QueryFilter old_theme;
  old_theme.theme = "arrest";
  EXPECT_EQ(store.query(old_theme).total, 0u);
  QueryFilter new_theme;
  new_theme.theme = "PURSUIT";
  EXPECT_EQ(store.query(new_theme).total, 1u);
}

TEST(Records, ReferentialAndNonFinite) {
  Store store;
  EXPECT_EQ(error_code([&] { store.put_record(record("ghost", 0)); }), Errc::referential);
  store.put_asset(asset("a"));
  auto r = record("a", 0);
  r.indicator_scores["officer.x"] = std::nan("");
  EXPECT_EQ(error_code([&] { store.put_record(r); }), Errc::invalid_argument);
}

TEST(Records, AssetIdsWithSlashesAndPercent) {
  Store store;
  store.put_asset(asset("cam/7/100%"));
  store.put_asset(asset("cam"));
  store.put_record(record("cam/7/100%", 3, {"x"}));
  store.put_record(record("cam", 1, {"x"}));
  EXPECT_EQ(store.latest_record("cam")->revision, 1u);
  EXPECT_EQ(store.latest_record("cam/7/100%")->revision, 3u);
  EXPECT_EQ(store.record_count(), 2u);
}

TEST(Records, JsonRoundTrip) {
  auto r = record("a", 2, {"x"});
  r.incident_ref = "INC";
  r.fused = {0.5, -1.0};
  r.created_ms = 5;
  r.updated_ms = 6;
  EXPECT_EQ(record_from_json(to_json(r)), r);
}

TEST(Query, MalformedFilters) {
  Store store;
  QueryFilter f;
  f.limit = 0;
  EXPECT_EQ(error_code([&] { store.query(f); }), Errc::malformed_filter);
  f.limit = 10;
  f.indicator = IndicatorRange{"officer.x", 0.8, 0.2};
  EXPECT_EQ(error_code([&] { store.query(f); }), Errc::malformed_filter);
  f.indicator = IndicatorRange{"officer.x", -0.1, 0.2};
  EXPECT_EQ(error_code([&] { store.query(f); }), Errc::malformed_filter);
  f.indicator = IndicatorRange{"", 0.0, 1.0};
  EXPECT_EQ(error_code([&] { store.query(f); }), Errc::malformed_filter);
  f.indicator.reset();
  f.theme = "   ";
  EXPECT_EQ(error_code([&] { store.query(f); }), Errc::malformed_filter);
}

TEST(Query, IndicatorBucketEdges) {
  EXPECT_EQ(indicator_bucket(0.0), 0u);
  EXPECT_EQ(indicator_bucket(0.0999), 0u);
  EXPECT_EQ(indicator_bucket(0.1), 1u);
  EXPECT_EQ(indicator_bucket(0.95), 9u);
  EXPECT_EQ(indicator_bucket(1.0), 9u);

  Store store;
  store.put_asset(asset("a"));
  for (int i = 0; i <= 10; ++i) {
    auto r = record("a", static_cast<std::uint64_t>(i));
    r.indicator_scores = {{"officer.politeness", i / 10.0}};
    store.put_record(r);
  }
  QueryFilter f;
  f.indicator = IndicatorRange{"officer.politeness", 0.3, 0.7};
  EXPECT_EQ(store.query(f).total, 5u);
  f.indicator = IndicatorRange{"officer.politeness", 1.0, 1.0};
  EXPECT_EQ(store.query(f).total, 1u);
  f.indicator = IndicatorRange{"officer.politeness", 0.0, 0.0};
  EXPECT_EQ(store.query(f).total, 1u);
}

TEST(Query, MatchesOracleAndPlansAreIndexed) {
  std::mt19937_64 rng(99);
  Store store;
  const auto records = bwc::testing::populate_store(store, 400, rng);
  for (int i = 0; i < 300; ++i) {
    const auto f = bwc::testing::random_filter(rng);
    const auto page = store.query(f);
    const auto expected = oracle::scan(records, f);
    ASSERT_EQ(ids(page), expected.ids) << i;
    ASSERT_EQ(page.total, expected.total);
    for (const auto& r : page.records) EXPECT_TRUE(matches(r, f));
    const bool filtered = f.theme || f.role || f.indicator || f.incident_ref;
    EXPECT_EQ(page.plan == "scan", !filtered) << page.plan;
  }
  QueryFilter none;
  none.limit = 1000;
  const auto all = store.query(none);
  EXPECT_EQ(all.plan, "scan");
  EXPECT_EQ(all.total, records.size());
}

TEST(Query, PaginationPartitionsTheResult) {
  std::mt19937_64 rng(4);
  Store store;
  bwc::testing::populate_store(store, 200, rng);
  QueryFilter f;
  f.role = Role::officer;
  f.limit = 1000;
  const auto full = ids(store.query(f));
  std::vector<std::string> paged;
  for (std::size_t off = 0; off < full.size(); off += 7) {
    f.offset = off;
    f.limit = 7;
    const auto page = ids(store.query(f));
    paged.insert(paged.end(), page.begin(), page.end());
  }
  EXPECT_EQ(paged, full);
  f.offset = full.size() + 5;
  EXPECT_TRUE(store.query(f).records.empty());
}

TEST(Query, ConcurrentReadersSeeCompleteBatches) {
  Store store;
  store.put_asset(asset("a"));
  std::atomic<bool> done{false};
  std::atomic<int> inconsistent{0};
  std::thread reader([&] {
    while (!done) {
      QueryFilter f;
      f.theme = "shared";
      f.limit = 1000;
      const auto page = store.query(f);
      if (page.records.size() != page.total) ++inconsistent;
      for (const auto& r : page.records)
        if (std::find(r.themes.begin(), r.themes.end(), "shared") == r.themes.end()) ++inconsistent;
    }
  });
  for (std::uint64_t rev = 0; rev < 300; ++rev)
    store.put_record(record("a", rev % 20, rev % 2 ? std::vector<std::string>{"shared"} : std::vector<std::string>{"other"}));
  done = true;
  reader.join();
  EXPECT_EQ(inconsistent.load(), 0);
}

TEST(Documents, TranscriptsSummariesCheckpointsAndDocs) {
  ScratchDir dir("store-docs");
  {
    Store store(dir / "s.store");
    store.put_asset(asset("a", "INC"));
    MergedTranscript t;
    t.asset_id = "a";
    store.put_transcript(t);
    t.revision = 1;
    t.correction_log = {"c1"};
    store.put_corrected_transcript(t, nlohmann::json::array({{{"id", "c1"}}}));
    store.put_summary("a", 1, {{"summary_text", "x"}});
    store.mark_stage("a", "transcript", "fp1");
    store.put_document("quality-report", {{"k", 1}});
  }
  Store store(dir / "s.store");
  EXPECT_EQ(store.get_asset("a")->incident_ref, "INC");
  EXPECT_EQ(store.get_transcript("a")->revision, 1u);
  EXPECT_EQ(store.get_transcript("a", 0)->revision, 0u);
  EXPECT_FALSE(store.get_transcript("a", 7));
  ASSERT_EQ(store.correction_batches("a").size(), 1u);
  EXPECT_EQ(store.correction_batches("a")[0].first, 1u);
  EXPECT_EQ((*store.get_summary("a", 1))["summary_text"], "x");
  EXPECT_TRUE(store.stage_done("a", "transcript", "fp1"));
  EXPECT_FALSE(store.stage_done("a", "transcript", "fp2"));
  EXPECT_FALSE(store.stage_done("a", "insights", "fp1"));
  EXPECT_EQ((*store.get_document("quality-report"))["k"], 1);
  EXPECT_FALSE(store.get_document("nope"));
}

TEST(Export, OneJsonRecordPerLine) {
  Store store;
  store.put_asset(asset("a"));
  store.put_asset(asset("b"));
  store.put_record(record("a", 0));
  store.put_record(record("b", 0));
  store.put_record(record("b", 1));
  std::ostringstream out;
  store.export_records(out);
  std::istringstream in(out.str());
  std::size_t n = 0;
  for (std::string line; std::getline(in, line); ++n) EXPECT_NO_THROW(record_from_json(nlohmann::json::parse(line)));
  EXPECT_EQ(n, 3u);
}
