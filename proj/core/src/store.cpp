// SPDX-License-Identifier: Apache-2.0
#include "bwc/store.hpp"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>

#include "bwc/error.hpp"

namespace bwc::store {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "BWCSTORE";

std::string header_line() { return std::string(kMagic) + " " + std::to_string(KvLog::kFormatVersion); }

std::uint32_t checksum(std::string_view text) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

std::string encode_ops(const std::vector<KvLog::Op>& batch) {
  json ops = json::array();
  for (const auto& op : batch) {
    if (op.erase) {
      ops.push_back(json::array({"del", op.key}));
    } else {
      ops.push_back(json::array({"put", op.key, op.value}));
    }
  }
  return ops.dump();
}

std::vector<KvLog::Op> decode_ops(const std::string& text) {
  std::vector<KvLog::Op> batch;
  for (const auto& op : json::parse(text)) {
    const auto kind = op.at(0).get<std::string>();
    if (kind == "put") {
      batch.push_back({false, op.at(1).get<std::string>(), op.at(2).get<std::string>()});
    } else if (kind == "del") {
      batch.push_back({true, op.at(1).get<std::string>(), {}});
    } else {
      throw Error(Errc::corrupt_data, "unknown op " + kind);
    }
  }
  return batch;
}

}  // namespace

KvLog::KvLog(fs::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::error_code ec;
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path(), ec);
  if (ec) throw Error(Errc::store_unavailable, "cannot create directory for " + path_.string() + ": " + ec.message(), true);
  if (fs::exists(path_, ec)) {
    load();
  } else {
    std::ofstream create(path_, std::ios::binary);
    if (!create) throw Error(Errc::store_unavailable, "cannot create store " + path_.string(), true);
    create << header_line() << '\n';
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(Errc::store_unavailable, "cannot open store " + path_.string(), true);
}

void KvLog::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(Errc::store_unavailable, "cannot read store " + path_.string(), true);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto first = content.find('\n');
  if (first == std::string::npos || content.substr(0, first) != header_line()) {
    if (content.rfind(kMagic, 0) == 0)
      throw Error(Errc::corrupt_data, "unsupported store format version in " + path_.string());
    throw Error(Errc::corrupt_data, "not a store file: " + path_.string());
  }

  std::size_t pos = first + 1;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string_view line(content.data() + pos, nl - pos);
    const auto space = line.find(' ');
    if (space == std::string_view::npos) break;
    const std::string_view payload = line.substr(space + 1);
    unsigned long expected = 0;
    if (std::sscanf(std::string(line.substr(0, space)).c_str(), "%lx", &expected) != 1) break;
    if (checksum(payload) != static_cast<std::uint32_t>(expected)) break;
    try {
      apply(map_, decode_ops(std::string(payload)));
    } catch (const std::exception&) {
      break;
    }
    pos = nl + 1;
  }
  if (pos < content.size()) {
    recovered_bytes_ = content.size() - pos;
    fs::resize_file(path_, pos);
  }
}

void KvLog::apply(Map& map, const std::vector<Op>& batch) {
  for (const auto& op : batch) {
    if (op.erase) {
      map.erase(op.key);
    } else {
      map.insert_or_assign(op.key, op.value);
    }
  }
}

void KvLog::commit(const std::vector<Op>& batch) {
  if (batch.empty()) return;
  if (!path_.empty()) {
    const std::string payload = encode_ops(batch);
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", checksum(payload));
    out_ << crc << ' ' << payload << '\n';
    out_.flush();
    if (!out_) throw Error(Errc::store_unavailable, "write to store failed: " + path_.string(), true);
  }
  apply(map_, batch);
}

std::optional<std::string> KvLog::get(std::string_view key) const {
  const auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void KvLog::compact() {
  if (path_.empty()) return;
  const fs::path tmp = path_.string() + ".compact";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << header_line() << '\n';
    std::vector<Op> all;
    all.reserve(map_.size());
    for (const auto& [k, v] : map_) all.push_back({false, k, v});
    if (!all.empty()) {
      const std::string payload = encode_ops(all);
      char crc[16];
      std::snprintf(crc, sizeof crc, "%08x", checksum(payload));
      out << crc << ' ' << payload << '\n';
    }
    if (!out) throw Error(Errc::store_unavailable, "compaction write failed", true);
  }
  out_.close();
  fs::rename(tmp, path_);
  out_.open(path_, std::ios::binary | std::ios::app);
}

// ---------------------------------------------------------------------------

namespace {

std::string enc(std::string_view component) {
  std::string out;
  out.reserve(component.size());
  for (char c : component) {
    if (c == '%') {
      out += "%25";
    } else if (c == '/') {
      out += "%2F";
    } else {
      out += c;
    }
  }
  return out;
}

std::string rev_key(std::uint64_t revision) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%020llu", static_cast<unsigned long long>(revision));
  return buf;
}

std::string record_key(std::string_view asset, std::uint64_t revision) {
  return "rec/" + enc(asset) + "/" + rev_key(revision);
}

std::string tail(std::string_view asset, std::uint64_t revision) {
  return enc(asset) + "/" + rev_key(revision);
}

// Maps an index key "<prefix><asset>/<rev>" to its record key.
std::string record_key_from_index(std::string_view key, std::size_t prefix_len) {
  return "rec/" + std::string(key.substr(prefix_len));
}

template <typename Fn>
void scan_prefix(const KvLog::Map& map, const std::string& prefix, Fn&& fn) {
  for (auto it = map.lower_bound(prefix); it != map.end() && it->first.starts_with(prefix); ++it)
    fn(it->first, it->second);
}

std::string theme_norm(std::string_view theme) {
  std::string out;
  bool pending_space = false;
  for (char c : theme) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

json asset_json(const VideoAsset& a) {
  return {{"id", a.id},
          {"path", a.path.string()},
          {"duration_s", a.duration},
          {"incident_ref", a.incident_ref ? json(*a.incident_ref) : json(nullptr)},
          {"flags", a.flags}};
}

VideoAsset asset_from_json(const json& j) {
  VideoAsset a;
  a.id = j.at("id").get<std::string>();
  a.path = j.at("path").get<std::string>();
  a.duration = j.at("duration_s").get<double>();
  if (j.contains("incident_ref") && j["incident_ref"].is_string())
    a.incident_ref = j["incident_ref"].get<std::string>();
  a.flags = j.value("flags", std::vector<std::string>{});
  return a;
}

}  // namespace

std::vector<std::string> normalize_themes(const std::vector<std::string>& themes) {
  std::set<std::string> unique;
  for (const auto& t : themes) {
    auto n = theme_norm(t);
    if (!n.empty()) unique.insert(std::move(n));
  }
  return {unique.begin(), unique.end()};
}

std::size_t indicator_bucket(double score) noexcept {
  if (!(score > 0.0)) return 0;
  const double b = std::floor(score * 10.0);
  return static_cast<std::size_t>(std::clamp(b, 0.0, 9.0));
}

json to_json(const IncidentRecord& r) {
  json roles = json::object();
  for (const auto& [speaker, role] : r.speaker_roles) roles[std::to_string(speaker)] = to_string(role);
  return {{"asset_id", r.asset_id},
          {"incident_ref", r.incident_ref ? json(*r.incident_ref) : json(nullptr)},
          {"speaker_roles", roles},
          {"summary_ref", r.summary_ref},
          {"indicator_scores", r.indicator_scores},
          {"themes", r.themes},
          {"created_ms", r.created_ms},
          {"updated_ms", r.updated_ms},
          {"revision", r.revision},
          {"fused", r.fused}};
}

IncidentRecord record_from_json(const json& j) {
  IncidentRecord r;
  r.asset_id = j.at("asset_id").get<std::string>();
  if (j.contains("incident_ref") && j["incident_ref"].is_string())
    r.incident_ref = j["incident_ref"].get<std::string>();
  for (const auto& [k, v] : j.at("speaker_roles").items())
    r.speaker_roles[std::stoul(k)] = role_from_string(v.get<std::string>());
  r.summary_ref = j.value("summary_ref", std::string());
  r.indicator_scores = j.value("indicator_scores", std::map<std::string, double>{});
  r.themes = j.value("themes", std::vector<std::string>{});
  r.created_ms = j.value("created_ms", std::int64_t{0});
  r.updated_ms = j.value("updated_ms", std::int64_t{0});
  r.revision = j.at("revision").get<std::uint64_t>();
  r.fused = j.value("fused", std::vector<double>{});
  return r;
}

void validate(const QueryFilter& f) {
  if (f.limit < 1) throw Error(Errc::malformed_filter, "limit must be at least 1");
  if (f.indicator) {
    const auto& r = *f.indicator;
    if (r.category.empty()) throw Error(Errc::malformed_filter, "indicator category is empty");
    if (!(r.min >= 0.0 && r.min <= r.max && r.max <= 1.0))
      throw Error(Errc::malformed_filter, "indicator range must satisfy 0 <= min <= max <= 1");
  }
  if (f.theme && theme_norm(*f.theme).empty()) throw Error(Errc::malformed_filter, "theme is blank");
}

bool matches(const IncidentRecord& r, const QueryFilter& f) {
  if (f.theme) {
    const auto t = theme_norm(*f.theme);
    if (std::find(r.themes.begin(), r.themes.end(), t) == r.themes.end()) return false;
  }
  if (f.role) {
    const bool any = std::any_of(r.speaker_roles.begin(), r.speaker_roles.end(),
                                 [&](const auto& kv) { return kv.second == *f.role; });
    if (!any) return false;
  }
  if (f.indicator) {
    const auto it = r.indicator_scores.find(f.indicator->category);
    if (it == r.indicator_scores.end()) return false;
    if (it->second < f.indicator->min || it->second > f.indicator->max) return false;
  }
  if (f.incident_ref && r.incident_ref != f.incident_ref) return false;
  return true;
}

// ---------------------------------------------------------------------------

Store::Store(fs::path path)
    : log_(std::move(path)), clock_([] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
      }) {}

void Store::set_clock(Clock clock) {
  std::unique_lock lock(mutex_);
  clock_ = std::move(clock);
}

std::int64_t Store::now() const { return clock_(); }

void Store::put_asset(const VideoAsset& asset) {
  std::unique_lock lock(mutex_);
  log_.commit({{false, "asset/" + enc(asset.id), asset_json(asset).dump()}});
}

std::optional<VideoAsset> Store::get_asset(std::string_view asset_id) const {
  std::shared_lock lock(mutex_);
  auto v = log_.get("asset/" + enc(asset_id));
  if (!v) return std::nullopt;
  return asset_from_json(json::parse(*v));
}

std::vector<VideoAsset> Store::assets() const {
  std::shared_lock lock(mutex_);
  std::vector<VideoAsset> out;
  scan_prefix(log_.map(), "asset/", [&](const std::string&, const std::string& v) {
    out.push_back(asset_from_json(json::parse(v)));
  });
  return out;
}

std::vector<KvLog::Op> Store::index_ops(const IncidentRecord& r, bool erase) const {
  std::vector<KvLog::Op> ops;
  const std::string t = tail(r.asset_id, r.revision);
  auto add = [&](std::string key) { ops.push_back({erase, std::move(key), {}}); };
  for (const auto& theme : r.themes) add("ix/theme/" + enc(theme) + "/" + t);
  std::set<Role> roles;
  for (const auto& [_, role] : r.speaker_roles) roles.insert(role);
  for (Role role : roles) add("ix/role/" + std::string(to_string(role)) + "/" + t);
  for (const auto& [category, score] : r.indicator_scores) {
    char bucket[8];
    std::snprintf(bucket, sizeof bucket, "%02zu", indicator_bucket(score));
    add("ix/ind/" + enc(category) + "/" + bucket + "/" + t);
  }
  if (r.incident_ref) add("ix/incident/" + enc(*r.incident_ref) + "/" + t);
  return ops;
}

std::optional<IncidentRecord> Store::load_record(const std::string& key) const {
  auto v = log_.get(key);
  if (!v) return std::nullopt;
  return record_from_json(json::parse(*v));
}

std::string Store::put_record(IncidentRecord record) {
  for (const auto& [category, score] : record.indicator_scores)
    if (!std::isfinite(score)) throw Error(Errc::invalid_argument, "non-finite indicator " + category);
  record.themes = normalize_themes(record.themes);

  std::unique_lock lock(mutex_);
  if (!log_.get("asset/" + enc(record.asset_id)))
    throw Error(Errc::referential, "unknown asset: " + record.asset_id);

  const std::string key = record_key(record.asset_id, record.revision);
  std::vector<KvLog::Op> batch;
  const std::int64_t ts = now();
  if (auto old = load_record(key)) {
    record.created_ms = old->created_ms;
    batch = index_ops(*old, /*erase=*/true);
  } else {
    record.created_ms = ts;
  }
  record.updated_ms = ts;
  batch.push_back({false, key, to_json(record).dump()});
  auto add = index_ops(record, /*erase=*/false);
  batch.insert(batch.end(), add.begin(), add.end());
  log_.commit(batch);
  return record.id();
}

std::optional<IncidentRecord> Store::get_record(std::string_view asset_id, std::uint64_t revision) const {
  std::shared_lock lock(mutex_);
  return load_record(record_key(asset_id, revision));
}

std::optional<IncidentRecord> Store::latest_record(std::string_view asset_id) const {
  std::shared_lock lock(mutex_);
  std::optional<std::string> last;
  scan_prefix(log_.map(), "rec/" + enc(asset_id) + "/",
              [&](const std::string& k, const std::string&) { last = k; });
  if (!last) return std::nullopt;
  return load_record(*last);
}

std::vector<IncidentRecord> Store::all_records() const {
  std::shared_lock lock(mutex_);
  std::vector<IncidentRecord> out;
  scan_prefix(log_.map(), "rec/", [&](const std::string&, const std::string& v) {
    out.push_back(record_from_json(json::parse(v)));
  });
  return out;
}

std::size_t Store::record_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  scan_prefix(log_.map(), "rec/", [&](const std::string&, const std::string&) { ++n; });
  return n;
}

QueryPage Store::query(const QueryFilter& filter) const {
  validate(filter);
  std::shared_lock lock(mutex_);
  const auto& map = log_.map();

  std::optional<std::vector<std::string>> candidates;
  std::string plan = "scan";
  auto consider = [&](std::string name, std::vector<std::string> keys) {
    if (!candidates || keys.size() < candidates->size()) {
      candidates = std::move(keys);
      plan = std::move(name);
    }
  };
  auto collect = [&](const std::string& prefix, std::vector<std::string>& keys) {
    scan_prefix(map, prefix, [&](const std::string& k, const std::string&) {
      keys.push_back(record_key_from_index(k, prefix.size()));
    });
  };

  if (filter.theme) {
    std::vector<std::string> keys;
    collect("ix/theme/" + enc(theme_norm(*filter.theme)) + "/", keys);
    consider("theme", std::move(keys));
  }
  if (filter.incident_ref) {
    std::vector<std::string> keys;
    collect("ix/incident/" + enc(*filter.incident_ref) + "/", keys);
    consider("incident", std::move(keys));
  }
  if (filter.indicator) {
    std::vector<std::string> keys;
    const std::size_t lo = indicator_bucket(filter.indicator->min);
    const std::size_t hi = indicator_bucket(filter.indicator->max);
    for (std::size_t b = lo; b <= hi; ++b) {
      char bucket[8];
      std::snprintf(bucket, sizeof bucket, "%02zu", b);
      collect("ix/ind/" + enc(filter.indicator->category) + "/" + bucket + "/", keys);
    }
    consider("indicator", std::move(keys));
  }
  if (filter.role) {
    std::vector<std::string> keys;
    collect("ix/role/" + std::string(to_string(*filter.role)) + "/", keys);
    consider("role", std::move(keys));
  }

  QueryPage page;
  page.plan = plan;
  std::vector<IncidentRecord> hits;
  auto test = [&](const std::string& value) {
    ++page.records_examined;
    auto r = record_from_json(json::parse(value));
    if (matches(r, filter)) hits.push_back(std::move(r));
  };
  if (candidates) {
    std::sort(candidates->begin(), candidates->end());
    candidates->erase(std::unique(candidates->begin(), candidates->end()), candidates->end());
    for (const auto& key : *candidates)
      if (auto v = log_.get(key)) test(*v);
  } else {
    scan_prefix(map, "rec/", [&](const std::string&, const std::string& v) { test(v); });
  }

  std::sort(hits.begin(), hits.end(), [](const IncidentRecord& a, const IncidentRecord& b) {
    if (a.updated_ms != b.updated_ms) return a.updated_ms > b.updated_ms;
    if (a.asset_id != b.asset_id) return a.asset_id < b.asset_id;
    return a.revision > b.revision;
  });
  page.total = hits.size();
  const std::size_t begin = std::min(filter.offset, hits.size());
  const std::size_t end = std::min(begin + filter.limit, hits.size());
  page.records.assign(std::make_move_iterator(hits.begin() + static_cast<std::ptrdiff_t>(begin)),
                      std::make_move_iterator(hits.begin() + static_cast<std::ptrdiff_t>(end)));
  return page;
}

void Store::put_transcript(const MergedTranscript& t) {
  std::unique_lock lock(mutex_);
  log_.commit({{false, "tx/" + tail(t.asset_id, t.revision), transcript_to_jsonl(t)}});
}

std::optional<MergedTranscript> Store::get_transcript(std::string_view asset_id,
                                                      std::optional<std::uint64_t> revision) const {
  std::shared_lock lock(mutex_);
  std::optional<std::string> value;
  if (revision) {
    value = log_.get("tx/" + tail(asset_id, *revision));
  } else {
    scan_prefix(log_.map(), "tx/" + enc(asset_id) + "/",
                [&](const std::string&, const std::string& v) { value = v; });
  }
  if (!value) return std::nullopt;
  return transcript_from_jsonl(*value);
}

void Store::put_corrected_transcript(const MergedTranscript& t, const json& batch) {
  std::unique_lock lock(mutex_);
  log_.commit({{false, "tx/" + tail(t.asset_id, t.revision), transcript_to_jsonl(t)},
               {false, "cj/" + tail(t.asset_id, t.revision), batch.dump()}});
}

std::vector<std::pair<std::uint64_t, json>> Store::correction_batches(std::string_view asset_id) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<std::uint64_t, json>> out;
  const std::string prefix = "cj/" + enc(asset_id) + "/";
  scan_prefix(log_.map(), prefix, [&](const std::string& k, const std::string& v) {
    out.emplace_back(std::stoull(k.substr(prefix.size())), json::parse(v));
  });
  return out;
}

void Store::put_summary(std::string_view asset_id, std::uint64_t revision, const json& summary) {
  std::unique_lock lock(mutex_);
  log_.commit({{false, "sum/" + tail(asset_id, revision), summary.dump()}});
}

std::optional<json> Store::get_summary(std::string_view asset_id, std::uint64_t revision) const {
  std::shared_lock lock(mutex_);
  auto v = log_.get("sum/" + tail(asset_id, revision));
  if (!v) return std::nullopt;
  return json::parse(*v);
}

void Store::mark_stage(std::string_view asset_id, std::string_view stage, std::string_view fingerprint) {
  std::unique_lock lock(mutex_);
  log_.commit({{false, "ckpt/" + enc(asset_id) + "/" + enc(stage), std::string(fingerprint)}});
}

bool Store::stage_done(std::string_view asset_id, std::string_view stage, std::string_view fingerprint) const {
  std::shared_lock lock(mutex_);
  auto v = log_.get("ckpt/" + enc(asset_id) + "/" + enc(stage));
  return v && *v == fingerprint;
}

void Store::put_document(std::string_view name, const json& doc) {
  std::unique_lock lock(mutex_);
  log_.commit({{false, "doc/" + enc(name), doc.dump()}});
}

std::optional<json> Store::get_document(std::string_view name) const {
  std::shared_lock lock(mutex_);
  auto v = log_.get("doc/" + enc(name));
  if (!v) return std::nullopt;
  return json::parse(*v);
}

void Store::export_records(std::ostream& out) const {
  for (const auto& r : all_records()) out << to_json(r).dump() << '\n';
}

void Store::compact() {
  std::unique_lock lock(mutex_);
  log_.compact();
}

}  // namespace bwc::store
