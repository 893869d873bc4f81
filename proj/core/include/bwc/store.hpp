// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/corpus.hpp"
#include "bwc/transcription.hpp"

namespace bwc::store {

/// Ordered key-value map persisted as an append-only batch log.
///
/// File layout: a header line "BWCSTORE <version>" followed by one line per
/// batch, "<crc32 hex> <json ops>", where ops is an array of ["put", key,
/// value] / ["del", key]. A batch is applied in memory only after its line
/// has been written, and on open a torn or corrupt tail is discarded, so a
/// batch is visible entirely or not at all. Not internally synchronized.
class KvLog {
 public:
  static constexpr int kFormatVersion = 1;

  struct Op {
    bool erase = false;
    std::string key;
    std::string value;
  };
  using Map = std::map<std::string, std::string, std::less<>>;

  /// An empty path keeps everything in memory.
  explicit KvLog(std::filesystem::path path = {});

  void commit(const std::vector<Op>& batch);
  const Map& map() const noexcept { return map_; }
  std::optional<std::string> get(std::string_view key) const;

  /// Rewrites the log as a single batch holding the live map.
  void compact();

  /// Bytes dropped from a torn tail when the log was opened.
  std::size_t recovered_bytes() const noexcept { return recovered_bytes_; }

 private:
  void load();
  static void apply(Map& map, const std::vector<Op>& batch);

  std::filesystem::path path_;
  std::ofstream out_;
  Map map_;
  std::size_t recovered_bytes_ = 0;
};

struct IncidentRecord {
  std::string asset_id;
  std::optional<std::string> incident_ref;
  std::map<std::size_t, Role> speaker_roles;
  std::string summary_ref;
  std::map<std::string, double> indicator_scores;
  /// Lowercase and deduplicated on write.
  std::vector<std::string> themes;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
  std::uint64_t revision = 0;
  /// Fused ensemble vector computed for this revision, if any.
  std::vector<double> fused;

  std::string id() const { return asset_id + "@" + std::to_string(revision); }
  friend bool operator==(const IncidentRecord&, const IncidentRecord&) = default;
};

nlohmann::json to_json(const IncidentRecord& record);
IncidentRecord record_from_json(const nlohmann::json& j);

/// Lowercase, trim, collapse internal whitespace; sorted unique.
std::vector<std::string> normalize_themes(const std::vector<std::string>& themes);

struct IndicatorRange {
  std::string category;  ///< full key, e.g. "officer.politeness"
  double min = 0.0;
  double max = 1.0;
};

struct QueryFilter {
  std::optional<std::string> theme;
  std::optional<Role> role;
  std::optional<IndicatorRange> indicator;
  std::optional<std::string> incident_ref;
  std::size_t offset = 0;
  std::size_t limit = 50;
};

/// Throws Error(malformed_filter) unless 0 <= min <= max <= 1 and limit >= 1.
void validate(const QueryFilter& filter);

/// True when the record satisfies every present predicate (ignores paging).
bool matches(const IncidentRecord& record, const QueryFilter& filter);

struct QueryPage {
  std::vector<IncidentRecord> records;
  /// Matching records before pagination.
  std::size_t total = 0;
  /// Records decoded and tested while answering the query.
  std::size_t records_examined = 0;
  /// "theme", "incident", "indicator", "role" or "scan".
  std::string plan;
};

/// Incident persistence with secondary indexes over themes, speaker roles,
/// indicator buckets (10 per category) and incident_ref.
///
/// Key layout (components percent-encoded):
///   asset/<asset>                         VideoAsset
///   rec/<asset>/<rev>                     IncidentRecord
///   ix/theme/<theme>/<asset>/<rev>        index entries (empty value)
///   ix/role/<role>/<asset>/<rev>
///   ix/ind/<category>/<bucket>/<asset>/<rev>
///   ix/incident/<ref>/<asset>/<rev>
///   tx/<asset>/<rev>                      merged transcript (JSONL)
///   cj/<asset>/<rev>                      correction batch that produced <rev>
///   sum/<asset>/<rev>                     summary document
///   ckpt/<asset>/<stage>                  pipeline checkpoint fingerprint
///   doc/<name>                            free-form documents (quality reports, ...)
///
/// Readers share a lock; each mutation takes it exclusively and commits
/// its record and index changes as one batch.
class Store {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit Store(std::filesystem::path path = {});

  /// Milliseconds since epoch by default; tests inject a deterministic clock.
  void set_clock(Clock clock);

  void put_asset(const VideoAsset& asset);
  std::optional<VideoAsset> get_asset(std::string_view asset_id) const;
  std::vector<VideoAsset> assets() const;

  /// Upsert keyed by (asset_id, revision). Keeps created_ms of an existing
  /// record and stamps updated_ms. Throws Error(referential) for an
  /// unknown asset. Returns the record id.
  std::string put_record(IncidentRecord record);
  std::optional<IncidentRecord> get_record(std::string_view asset_id, std::uint64_t revision) const;
  std::optional<IncidentRecord> latest_record(std::string_view asset_id) const;
  std::vector<IncidentRecord> all_records() const;
  std::size_t record_count() const;

  /// Order: updated_ms desc, asset_id asc, revision desc.
  QueryPage query(const QueryFilter& filter) const;

  void put_transcript(const MergedTranscript& transcript);
  std::optional<MergedTranscript> get_transcript(std::string_view asset_id,
                                                 std::optional<std::uint64_t> revision = {}) const;

  /// Stores the transcript revision together with the correction batch that
  /// produced it, in one batch.
  void put_corrected_transcript(const MergedTranscript& transcript, const nlohmann::json& batch);
  /// (revision, batch) pairs in revision order.
  std::vector<std::pair<std::uint64_t, nlohmann::json>> correction_batches(std::string_view asset_id) const;

  void put_summary(std::string_view asset_id, std::uint64_t revision, const nlohmann::json& summary);
  std::optional<nlohmann::json> get_summary(std::string_view asset_id, std::uint64_t revision) const;

  void mark_stage(std::string_view asset_id, std::string_view stage, std::string_view fingerprint);
  bool stage_done(std::string_view asset_id, std::string_view stage, std::string_view fingerprint) const;

  void put_document(std::string_view name, const nlohmann::json& doc);
  std::optional<nlohmann::json> get_document(std::string_view name) const;

  /// One JSON record per line.
  void export_records(std::ostream& out) const;

  void compact();

 private:
  std::vector<KvLog::Op> index_ops(const IncidentRecord& record, bool erase) const;
  std::optional<IncidentRecord> load_record(const std::string& key) const;
  std::int64_t now() const;

  mutable std::shared_mutex mutex_;
  KvLog log_;
  Clock clock_;
};

/// Index bucket of an indicator score: floor(score * 10), 1.0 in bucket 9.
std::size_t indicator_bucket(double score) noexcept;

}  // namespace bwc::store
