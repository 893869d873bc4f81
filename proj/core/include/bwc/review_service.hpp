// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "bwc/config.hpp"
#include "bwc/insights.hpp"
#include "bwc/store.hpp"

// Review API under /v1, independent of any HTTP library:
//
//   GET  /v1/health
//   GET  /v1/incidents?theme=&role=&indicator=&min=&max=&incident_ref=&offset=&limit=
//   GET  /v1/incidents/<asset>                       latest record and summary
//   GET  /v1/incidents/<asset>/transcript[?revision=N]
//   GET  /v1/incidents/<asset>/history               correction journal
//   GET  /v1/incidents/<asset>/audio                 per-speaker stream references
//   GET  /v1/incidents/<asset>/audio/<chunk>/<speaker>   stream WAV
//   POST /v1/incidents/<asset>/corrections           {"base_revision", "corrections": [...]}
//   POST /v1/incidents/<asset>/roles                 {"base_revision", "speaker", "role"}
//   POST /v1/incidents/<asset>/themes                {"base_revision", "themes", "mode"}
//   GET  /v1/quality-report
//
// Mutations require an X-Reviewer-Id header. A base_revision other than the
// current one yields 409 with the current revision and changes nothing.
namespace bwc {

struct HttpRequest {
  std::string method;
  /// Decoded path; asset ids may contain '/'.
  std::string path;
  std::map<std::string, std::string> query;
  /// Header names are matched case-insensitively.
  std::map<std::string, std::string> headers;
  std::string body;

  std::string header(std::string_view name) const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Document name under which `quality compare --store` saves its report.
inline constexpr std::string_view kQualityReportDocument = "quality-report";

class ReviewService {
 public:
  /// Lexicon, summarizer and fusion settings come from `config`; the fusion
  /// weights of the last pipeline run are preferred when stored.
  ReviewService(store::Store& store, const RunConfig& config);

  HttpResponse handle(const HttpRequest& request);

 private:
  HttpResponse list_incidents(const HttpRequest& request);
  HttpResponse get_incident(const std::string& asset_id);
  HttpResponse get_transcript(const std::string& asset_id, const HttpRequest& request);
  HttpResponse get_history(const std::string& asset_id);
  HttpResponse get_audio_refs(const std::string& asset_id);
  HttpResponse get_audio_file(const std::string& asset_id, std::size_t chunk, std::size_t speaker);
  HttpResponse post_corrections(const std::string& asset_id, const HttpRequest& request);
  HttpResponse post_role(const std::string& asset_id, const HttpRequest& request);
  HttpResponse post_themes(const std::string& asset_id, const HttpRequest& request);
  HttpResponse get_quality_report();

  /// Applies a batch against base_revision and refreshes the stored insights.
  HttpResponse commit_batch(const std::string& asset_id, std::uint64_t base_revision,
                            std::vector<Correction> batch);
  std::string refresh_insights(const MergedTranscript& transcript);

  store::Store& store_;
  RunConfig config_;
  Lexicon lexicon_;
  std::unique_ptr<SummarizationBackend> summarizer_;
  /// Serializes mutations (single writer per transcript).
  std::mutex write_mutex_;
};

}  // namespace bwc
