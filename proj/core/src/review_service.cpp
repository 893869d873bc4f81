// SPDX-License-Identifier: Apache-2.0
#include "bwc/review_service.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include "bwc/ensemble.hpp"
#include "bwc/error.hpp"
#include "bwc/pipeline.hpp"

namespace bwc {
using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

HttpResponse reply(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_reply(int status, std::string_view code, std::string_view message) {
  return reply(status, {{"error", code}, {"message", message}});
}

int status_for(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::malformed_filter: return 400;
    case Errc::referential: return 404;
    case Errc::conflict:
    case Errc::nothing_applied: return 409;
    case Errc::store_unavailable: return 503;
    default: return 500;
  }
}

std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(Errc::invalid_argument, std::string(what) + " must be a non-negative integer");
  return v;
}

double parse_double(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::invalid_argument, std::string(what) + " must be a number");
}

json record_json(const store::IncidentRecord& r) {
  json j = store::to_json(r);
  j["id"] = r.id();
  return j;
}

json transcript_json(const MergedTranscript& t) {
  json roles = json::object();
  for (const auto& [speaker, role] : t.roles) roles[std::to_string(speaker)] = to_string(role);
  json segments = json::array();
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& s = t.segments[i];
    segments.push_back({{"index", i},
                        {"chunk", s.chunk_index},
                        {"speaker", s.global_speaker},
                        {"local_speaker", s.local_speaker},
                        {"start_s", s.start},
                        {"end_s", s.end},
                        {"text", s.text},
                        {"backend", s.backend_name}});
  }
  return {{"asset_id", t.asset_id},
          {"revision", t.revision},
          {"roles", roles},
          {"human_roles", t.human_roles},
          {"correction_log", t.correction_log},
          {"segments", segments}};
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json parse_body(const HttpRequest& request) {
  try {
    return json::parse(request.body);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("body is not valid JSON: ") + e.what());
  }
}

std::uint64_t base_revision_of(const json& body) {
  if (!body.contains("base_revision") || !body["base_revision"].is_number_unsigned())
    throw Error(Errc::invalid_argument, "base_revision is required");
  return body["base_revision"].get<std::uint64_t>();
}

}  // namespace

std::string HttpRequest::header(std::string_view name) const {
  const auto want = lower(name);
  for (const auto& [k, v] : headers)
    if (lower(k) == want) return v;
  return {};
}

ReviewService::ReviewService(store::Store& store, const RunConfig& config)
    : store_(store),
      config_(config),
      lexicon_(load_lexicon(config)),
      summarizer_(make_summarization_backend(
          config.summarization, config.themes_path.empty() ? Lexicon{} : Lexicon::load(config.themes_path))) {}

HttpResponse ReviewService::handle(const HttpRequest& request) {
  try {
    const std::string& path = request.path;
    const bool get = request.method == "GET";
    const bool post = request.method == "POST";
    if (path == "/v1/health" && get) return reply(200, {{"status", "ok"}});
    if (path == "/v1/quality-report" && get) return get_quality_report();
    if (path == "/v1/incidents" && get) return list_incidents(request);

    constexpr std::string_view prefix = "/v1/incidents/";
    if (!path.starts_with(prefix) || path.size() == prefix.size())
      return error_reply(404, "not_found", "no route for " + path);
    const std::string rest = path.substr(prefix.size());

    auto suffix = [&](std::string_view s) -> std::optional<std::string> {
      if (rest.size() > s.size() && rest.ends_with(s)) return rest.substr(0, rest.size() - s.size());
      return std::nullopt;
    };

    if (post) {
      if (request.header("X-Reviewer-Id").empty())
        return error_reply(400, "missing_reviewer", "X-Reviewer-Id header is required");
      if (auto asset = suffix("/corrections")) return post_corrections(*asset, request);
      if (auto asset = suffix("/roles")) return post_role(*asset, request);
      if (auto asset = suffix("/themes")) return post_themes(*asset, request);
      return error_reply(404, "not_found", "no route for POST " + path);
    }
    if (!get) return error_reply(405, "method_not_allowed", request.method + " not allowed");

    if (auto asset = suffix("/transcript")) return get_transcript(*asset, request);
    if (auto asset = suffix("/history")) return get_history(*asset);
    if (auto asset = suffix("/audio")) return get_audio_refs(*asset);

    // <asset>/audio/<chunk>/<speaker>
    const auto s2 = rest.rfind('/');
    if (s2 != std::string::npos && s2 > 0) {
      const auto s1 = rest.rfind('/', s2 - 1);
      if (s1 != std::string::npos) {
        const std::string head = rest.substr(0, s1);
        if (head.size() > 6 && head.ends_with("/audio")) {
          return get_audio_file(head.substr(0, head.size() - 6),
                                parse_uint(rest.substr(s1 + 1, s2 - s1 - 1), "chunk"),
                                parse_uint(rest.substr(s2 + 1), "speaker"));
        }
      }
    }
    return get_incident(rest);
  } catch (const Error& e) {
    return error_reply(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    spdlog::error("review request {} {} failed: {}", request.method, request.path, e.what());
    return error_reply(500, "internal", e.what());
  }
}

HttpResponse ReviewService::list_incidents(const HttpRequest& request) {
  store::QueryFilter filter;
  const auto& q = request.query;
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = q.find(key);
    if (it == q.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("theme")) filter.theme = *v;
  if (auto v = get("role")) filter.role = role_from_string(*v);
  if (auto v = get("incident_ref")) filter.incident_ref = *v;
  if (auto v = get("indicator")) {
    store::IndicatorRange range;
    range.category = *v;
    if (auto m = get("min")) range.min = parse_double(*m, "min");
    if (auto m = get("max")) range.max = parse_double(*m, "max");
    filter.indicator = range;
  } else if (get("min") || get("max")) {
    throw Error(Errc::malformed_filter, "min/max require indicator");
  }
  if (auto v = get("offset")) filter.offset = parse_uint(*v, "offset");
  if (auto v = get("limit")) filter.limit = parse_uint(*v, "limit");

  const auto page = store_.query(filter);
  json records = json::array();
  for (const auto& r : page.records) records.push_back(record_json(r));
  return reply(200, {{"records", records},
                     {"total", page.total},
                     {"offset", filter.offset},
                     {"limit", filter.limit}});
}

HttpResponse ReviewService::get_incident(const std::string& asset_id) {
  const auto record = store_.latest_record(asset_id);
  if (!record) return error_reply(404, "not_found", "no incident " + asset_id);
  json body = {{"record", record_json(*record)}};
  if (auto summary = store_.get_summary(asset_id, record->revision)) body["summary"] = *summary;
  return reply(200, body);
}

HttpResponse ReviewService::get_transcript(const std::string& asset_id, const HttpRequest& request) {
  std::optional<std::uint64_t> revision;
  if (auto it = request.query.find("revision"); it != request.query.end())
    revision = parse_uint(it->second, "revision");
  const auto t = store_.get_transcript(asset_id, revision);
  if (!t) return error_reply(404, "not_found", "no transcript for " + asset_id);
  return reply(200, transcript_json(*t));
}

HttpResponse ReviewService::get_history(const std::string& asset_id) {
  if (!store_.get_transcript(asset_id, 0)) return error_reply(404, "not_found", "no transcript for " + asset_id);
  json batches = json::array();
  for (const auto& [revision, batch] : store_.correction_batches(asset_id))
    batches.push_back({{"revision", revision}, {"corrections", batch}});
  return reply(200, {{"asset_id", asset_id}, {"batches", batches}});
}

HttpResponse ReviewService::get_audio_refs(const std::string& asset_id) {
  const auto refs = store_.get_document("audio/" + asset_id);
  if (!refs) return error_reply(404, "not_found", "no stream audio recorded for " + asset_id);
  json out = json::array();
  for (auto ref : *refs) {
    ref["url"] = "/v1/incidents/" + asset_id + "/audio/" + std::to_string(ref.at("chunk_index").get<std::size_t>()) +
                 "/" + std::to_string(ref.at("global_speaker").get<std::size_t>());
    out.push_back(std::move(ref));
  }
  return reply(200, {{"asset_id", asset_id}, {"streams", out}});
}

HttpResponse ReviewService::get_audio_file(const std::string& asset_id, std::size_t chunk, std::size_t speaker) {
  const auto refs = store_.get_document("audio/" + asset_id);
  if (refs) {
    for (const auto& ref : *refs) {
      if (ref.at("chunk_index").get<std::size_t>() != chunk || ref.at("global_speaker").get<std::size_t>() != speaker)
        continue;
      std::ifstream in(ref.at("path").get<std::string>(), std::ios::binary);
      if (!in) break;
      std::ostringstream ss;
      ss << in.rdbuf();
      return {200, "audio/wav", ss.str()};
    }
  }
  return error_reply(404, "not_found", "no stream audio for that chunk and speaker");
}

HttpResponse ReviewService::get_quality_report() {
  auto doc = store_.get_document(kQualityReportDocument);
  if (!doc) return error_reply(404, "not_found", "no quality report stored");
  return reply(200, *doc);
}

HttpResponse ReviewService::post_corrections(const std::string& asset_id, const HttpRequest& request) {
  const json body = parse_body(request);
  const auto base = base_revision_of(body);
  if (!body.contains("corrections") || !body["corrections"].is_array())
    throw Error(Errc::invalid_argument, "corrections must be an array");

  const std::string author = request.header("X-Reviewer-Id");
  const auto ts = now_ms();
  std::vector<Correction> batch;
  std::size_t n = 0;
  for (const auto& item : body["corrections"]) {
    Correction c;
    c.asset_id = asset_id;
    c.id = item.value("id", asset_id + "@" + std::to_string(base + 1) + "#" + std::to_string(n));
    if (item.contains("speaker")) {
      c.kind = Correction::Kind::role;
      c.speaker = item.at("speaker").get<std::size_t>();
    } else {
      c.kind = Correction::Kind::segment_text;
      c.segment_index = item.at("segment_index").get<std::size_t>();
    }
    c.before = item.at("before").get<std::string>();
    c.after = item.at("after").get<std::string>();
    c.author = author;
    c.timestamp_ms = ts;
    batch.push_back(std::move(c));
    ++n;
  }
  return commit_batch(asset_id, base, std::move(batch));
}

HttpResponse ReviewService::post_role(const std::string& asset_id, const HttpRequest& request) {
  const json body = parse_body(request);
  const auto base = base_revision_of(body);
  Correction c;
  c.asset_id = asset_id;
  c.kind = Correction::Kind::role;
  c.speaker = body.at("speaker").get<std::size_t>();
  c.after = body.at("role").get<std::string>();
  (void)role_from_string(c.after);
  c.id = body.value("id", asset_id + "@" + std::to_string(base + 1) + "#role" + std::to_string(c.speaker));
  c.author = request.header("X-Reviewer-Id");
  c.timestamp_ms = now_ms();
  if (body.contains("before")) {
    c.before = body["before"].get<std::string>();
  } else {
    const auto current = store_.get_transcript(asset_id, base);
    if (current) {
      const auto it = current->roles.find(c.speaker);
      if (it != current->roles.end()) c.before = std::string(to_string(it->second));
    }
  }
  return commit_batch(asset_id, base, {std::move(c)});
}

HttpResponse ReviewService::commit_batch(const std::string& asset_id, std::uint64_t base_revision,
                                         std::vector<Correction> batch) {
  std::lock_guard lock(write_mutex_);
  const auto current = store_.get_transcript(asset_id);
  if (!current) return error_reply(404, "not_found", "no transcript for " + asset_id);
  if (current->revision != base_revision)
    return reply(409, {{"error", "conflict"},
                       {"message", "transcript is at revision " + std::to_string(current->revision)},
                       {"current_revision", current->revision}});
  if (batch.empty()) return reply(200, {{"revision", current->revision}, {"applied", json::array()},
                                        {"rejected", json::array()}});

  CorrectionOutcome outcome;
  try {
    outcome = apply_corrections(*current, batch);
  } catch (const Error& e) {
    if (e.code() != Errc::nothing_applied) throw;
    return reply(409, {{"error", "nothing_applied"},
                       {"message", e.what()},
                       {"current_revision", current->revision}});
  }
  store_.put_corrected_transcript(outcome.transcript, batch_to_json(batch));
  const std::string record_id = refresh_insights(outcome.transcript);

  json rejected = json::array();
  for (const auto& r : outcome.rejected) rejected.push_back({{"id", r.id}, {"reason", r.reason}});
  return reply(200, {{"revision", outcome.transcript.revision},
                     {"applied", outcome.applied},
                     {"rejected", rejected},
                     {"record_id", record_id}});
}

std::string ReviewService::refresh_insights(const MergedTranscript& transcript) {
  const auto previous = store_.latest_record(transcript.asset_id);

  IncidentSummary summary;
  summary.asset_id = transcript.asset_id;
  summary.transcript_revision = transcript.revision;
  summary.backend_name = "none";
  if (!transcript.segments.empty()) {
    try {
      summary = summarize(transcript, *summarizer_);
    } catch (const Error& e) {
      if (!e.retryable()) throw;
      spdlog::warn("summarizer failed for {}; keeping previous summary: {}", transcript.asset_id, e.what());
      if (previous) {
        if (auto old = store_.get_summary(transcript.asset_id, previous->revision)) {
          summary.summary_text = old->value("summary_text", std::string());
          summary.backend_name = old->value("backend", std::string());
        }
      }
    }
  }
  summary.indicator_scores = extract_indicators(transcript, lexicon_);
  if (previous) summary.themes.insert(summary.themes.end(), previous->themes.begin(), previous->themes.end());
  summary.themes = store::normalize_themes(summary.themes);

  std::vector<double> fused;
  const auto audio = store_.get_document(std::string(kAudioFeaturesPrefix) + transcript.asset_id);
  const auto asset = store_.get_asset(transcript.asset_id);
  if (audio && asset && !transcript.segments.empty()) {
    ensemble::EnsembleWeights weights = config_.weights.normalized();
    ensemble::FusionConfig fusion;
    fusion.length = config_.fusion_length;
    if (const auto doc = store_.get_document(kWeightsDocument)) {
      weights = {doc->at("alpha").get<double>(), doc->at("beta").get<double>(), doc->at("gamma").get<double>()};
      fusion.length = doc->value("fusion_length", fusion.length);
    }
    ensemble::ModalityTriple triple;
    triple.audio = {ensemble::Modality::audio, audio->get<std::vector<double>>(), ensemble::default_audio_chain(), {}};
    triple.text = ensemble::extract_text_features(transcript, lexicon_);
    triple.image = ensemble::extract_image_features(*asset, fusion.length);
    fused = ensemble::fuse(triple, weights, fusion);
  }
  return save_insights(summary, transcript, store_, std::move(fused));
}

HttpResponse ReviewService::post_themes(const std::string& asset_id, const HttpRequest& request) {
  const json body = parse_body(request);
  const auto base = base_revision_of(body);
  if (!body.contains("themes") || !body["themes"].is_array())
    throw Error(Errc::invalid_argument, "themes must be an array of strings");
  const auto themes = body["themes"].get<std::vector<std::string>>();
  const std::string mode = body.value("mode", std::string("add"));
  if (mode != "add" && mode != "replace") throw Error(Errc::invalid_argument, "mode must be add or replace");

  std::lock_guard lock(write_mutex_);
  auto record = store_.latest_record(asset_id);
  if (!record) return error_reply(404, "not_found", "no incident " + asset_id);
  if (record->revision != base)
    return reply(409, {{"error", "conflict"},
                       {"message", "incident is at revision " + std::to_string(record->revision)},
                       {"current_revision", record->revision}});
  if (mode == "replace") record->themes.clear();
  record->themes.insert(record->themes.end(), themes.begin(), themes.end());
  record->themes = store::normalize_themes(record->themes);
  store_.put_record(*record);
  spdlog::info("reviewer {} set themes of {}", request.header("X-Reviewer-Id"), record->id());
  return reply(200, {{"revision", record->revision}, {"themes", record->themes}});
}

}  // namespace bwc
