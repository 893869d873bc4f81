// SPDX-License-Identifier: Apache-2.0
#include "bwc/insights.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "bwc/error.hpp"
#include "bwc/process.hpp"
#include "bwc/quality.hpp"
#include "mock_spec.hpp"

namespace bwc {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view kind_name(Correction::Kind kind) {
  return kind == Correction::Kind::role ? "role" : "segment_text";
}

class FailingSummarizer final : public SummarizationBackend {
 public:
  std::string_view name() const noexcept override { return "mock-fail"; }
  SummaryText run(const MergedTranscript& transcript) override {
    count_invocation();
    throw Error(Errc::backend_failure, "summarizer failed on " + transcript.asset_id, true);
  }
};

}  // namespace

json to_json(const IncidentSummary& s) {
  return {{"asset_id", s.asset_id},
          {"summary_text", s.summary_text},
          {"backend", s.backend_name},
          {"indicator_scores", s.indicator_scores},
          {"transcript_revision", s.transcript_revision},
          {"themes", s.themes}};
}

IncidentSummary summary_from_json(const json& j) {
  IncidentSummary s;
  s.asset_id = j.at("asset_id").get<std::string>();
  s.summary_text = j.at("summary_text").get<std::string>();
  s.backend_name = j.value("backend", std::string());
  s.indicator_scores = j.value("indicator_scores", std::map<std::string, double>{});
  s.transcript_revision = j.at("transcript_revision").get<std::uint64_t>();
  s.themes = j.value("themes", std::vector<std::string>{});
  return s;
}

std::string first_sentence(std::string_view text) {
  text = trim(text);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    if (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\t' || text[i + 1] == '\n')
      return std::string(text.substr(0, i + 1));
  }
  return std::string(text);
}

SummaryText ExtractiveSummarizer::run(const MergedTranscript& t) {
  count_invocation();
  SummaryText out;
  const auto& segs = t.segments;
  for (std::size_t i = 0; i < segs.size();) {
    std::size_t j = i;
    std::string block;
    while (j < segs.size() && segs[j].global_speaker == segs[i].global_speaker) {
      const auto text = trim(segs[j].text);
      if (!text.empty()) {
        if (!block.empty()) block += ' ';
        block += text;
      }
      ++j;
    }
    const auto sentence = first_sentence(block);
    if (!sentence.empty()) {
      if (!out.text.empty()) out.text += ' ';
      out.text += sentence;
    }
    i = j;
  }

  if (!themes_.empty()) {
    std::set<std::string> found;
    for (const auto& seg : segs) {
      const auto tokens = quality::tokenize(seg.text).tokens;
      for (const auto& category : themes_.category_names())
        if (!found.contains(category) && themes_.count_hits(category, tokens) > 0) found.insert(category);
    }
    out.themes.assign(found.begin(), found.end());
  }
  return out;
}

SummaryText ProcessSummarizer::run(const MergedTranscript& t) {
  count_invocation();
  process::TempDir work("bwc-sum");
  const fs::path input = work.path() / "transcript.jsonl";
  const fs::path output = work.path() / "summary.txt";
  {
    std::ofstream out(input, std::ios::binary);
    write_transcript(out, t);
  }
  const auto argv = process::expand(descriptor_.invocation, {{"input", input.string()},
                                                             {"output", output.string()},
                                                             {"asset_id", t.asset_id},
                                                             {"revision", std::to_string(t.revision)}});
  const auto result = process::run(argv, descriptor_.timeout);
  if (result.timed_out)
    throw Error(Errc::backend_timeout, "summarization backend timed out on " + t.asset_id, true);
  if (!result.ok())
    throw Error(Errc::backend_failure,
                "summarization backend exited with status " + std::to_string(result.exit_code) +
                    " on " + t.asset_id + ": " + result.stderr_text,
                true);

  std::ifstream in(output, std::ios::binary);
  if (!in) throw Error(Errc::backend_failure, "summarization backend wrote no output", true);
  std::ostringstream ss;
  ss << in.rdbuf();
  SummaryText out{std::string(trim(ss.str())), {}};
  std::ifstream themes(output.string() + ".themes");
  for (std::string line; std::getline(themes, line);) {
    const auto theme = trim(line);
    if (!theme.empty()) out.themes.emplace_back(theme);
  }
  return out;
}

std::unique_ptr<SummarizationBackend> make_summarization_backend(
    const SummarizationBackendDescriptor& descriptor, Lexicon theme_keywords) {
  if (auto mock = detail::parse_mock(descriptor.invocation)) {
    if (mock->kind == "extractive") return std::make_unique<ExtractiveSummarizer>(std::move(theme_keywords));
    if (mock->kind == "fail") return std::make_unique<FailingSummarizer>();
    throw Error(Errc::invalid_argument, "unknown summarization mock: " + mock->kind);
  }
  return std::make_unique<ProcessSummarizer>(descriptor);
}

std::map<std::string, double> extract_indicators(const MergedTranscript& transcript,
                                                 const Lexicon& lexicon) {
  if (lexicon.empty()) throw Error(Errc::invalid_argument, "indicator lexicon is empty");
  return indicator_rates(transcript, lexicon);
}

IncidentSummary summarize(const MergedTranscript& transcript, SummarizationBackend& backend) {
  if (transcript.segments.empty())
    throw Error(Errc::invalid_argument, "cannot summarize an empty transcript: " + transcript.asset_id);
  auto text = backend.run(transcript);
  IncidentSummary s;
  s.asset_id = transcript.asset_id;
  s.summary_text = std::move(text.text);
  s.backend_name = std::string(backend.name());
  s.transcript_revision = transcript.revision;
  s.themes = store::normalize_themes(text.themes);
  return s;
}

// ---------------------------------------------------------------------------

json to_json(const Correction& c) {
  json j = {{"id", c.id},
            {"asset_id", c.asset_id},
            {"kind", kind_name(c.kind)},
            {"before", c.before},
            {"after", c.after},
            {"author", c.author},
            {"timestamp_ms", c.timestamp_ms}};
  if (c.kind == Correction::Kind::role) {
    j["speaker"] = c.speaker;
  } else {
    j["segment_index"] = c.segment_index;
  }
  return j;
}

Correction correction_from_json(const json& j) {
  Correction c;
  c.id = j.at("id").get<std::string>();
  c.asset_id = j.at("asset_id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "role") {
    c.kind = Correction::Kind::role;
    c.speaker = j.at("speaker").get<std::size_t>();
  } else if (kind == "segment_text") {
    c.kind = Correction::Kind::segment_text;
    c.segment_index = j.at("segment_index").get<std::size_t>();
  } else {
    throw Error(Errc::invalid_argument, "unknown correction kind: " + kind);
  }
  c.before = j.at("before").get<std::string>();
  c.after = j.at("after").get<std::string>();
  c.author = j.value("author", std::string());
  c.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  return c;
}

json batch_to_json(std::span<const Correction> batch) {
  json out = json::array();
  for (const auto& c : batch) out.push_back(to_json(c));
  return out;
}

std::vector<Correction> batch_from_json(const json& j) {
  std::vector<Correction> out;
  for (const auto& c : j) out.push_back(correction_from_json(c));
  return out;
}

CorrectionOutcome apply_corrections(MergedTranscript transcript,
                                    std::span<const Correction> corrections) {
  CorrectionOutcome outcome;
  if (corrections.empty()) {
    outcome.transcript = std::move(transcript);
    return outcome;
  }
  for (const auto& c : corrections) {
    if (c.asset_id != transcript.asset_id)
      throw Error(Errc::invalid_argument,
                  "correction " + c.id + " targets " + c.asset_id + ", not " + transcript.asset_id);
  }

  for (const auto& c : corrections) {
    if (c.kind == Correction::Kind::segment_text) {
      if (c.segment_index >= transcript.segments.size()) {
        outcome.rejected.push_back({c.id, "no segment " + std::to_string(c.segment_index)});
        continue;
      }
      auto& seg = transcript.segments[c.segment_index];
      if (seg.text != c.before) {
        outcome.rejected.push_back({c.id, "stale: segment text is \"" + seg.text + "\""});
        continue;
      }
      seg.text = c.after;
    } else {
      const auto it = transcript.roles.find(c.speaker);
      if (it == transcript.roles.end()) {
        outcome.rejected.push_back({c.id, "no speaker " + std::to_string(c.speaker)});
        continue;
      }
      if (to_string(it->second) != c.before) {
        outcome.rejected.push_back({c.id, "stale: role is " + std::string(to_string(it->second))});
        continue;
      }
      Role after;
      try {
        after = role_from_string(c.after);
      } catch (const Error&) {
        outcome.rejected.push_back({c.id, "unknown role " + c.after});
        continue;
      }
      it->second = after;
      transcript.human_roles.insert(c.speaker);
    }
    outcome.applied.push_back(c.id);
  }

  if (outcome.applied.empty()) {
    std::string reasons;
    for (const auto& r : outcome.rejected) reasons += (reasons.empty() ? "" : "; ") + r.id + ": " + r.reason;
    throw Error(Errc::nothing_applied, "nothing applied (" + reasons + ")");
  }
  transcript.revision += 1;
  transcript.correction_log.insert(transcript.correction_log.end(), outcome.applied.begin(),
                                   outcome.applied.end());
  outcome.transcript = std::move(transcript);
  return outcome;
}

std::vector<MergedTranscript> replay(const MergedTranscript& base,
                                     std::span<const std::vector<Correction>> batches) {
  if (base.revision != 0 || !base.correction_log.empty())
    throw Error(Errc::invalid_argument, "replay must start from revision 0");
  std::vector<MergedTranscript> revisions{base};
  for (const auto& batch : batches) {
    if (batch.empty()) continue;
    revisions.push_back(apply_corrections(revisions.back(), batch).transcript);
  }
  return revisions;
}

std::vector<MergedTranscript> replay_from_store(const store::Store& store, std::string_view asset_id) {
  auto base = store.get_transcript(asset_id, 0);
  if (!base) throw Error(Errc::referential, "no transcript for " + std::string(asset_id));
  std::vector<std::vector<Correction>> batches;
  for (const auto& [revision, batch] : store.correction_batches(asset_id)) batches.push_back(batch_from_json(batch));
  return replay(*base, batches);
}

// ---------------------------------------------------------------------------

std::string save_insights(const IncidentSummary& summary, const MergedTranscript& transcript,
                          store::Store& store, std::vector<double> fused) {
  if (transcript.asset_id != summary.asset_id || transcript.revision != summary.transcript_revision)
    throw Error(Errc::invalid_argument, "summary was computed from " + summary.asset_id + "@" +
                                            std::to_string(summary.transcript_revision) + ", not " +
                                            transcript.asset_id + "@" +
                                            std::to_string(transcript.revision));
  const auto asset = store.get_asset(summary.asset_id);
  if (!asset) throw Error(Errc::referential, "unknown asset: " + summary.asset_id);

  store::IncidentRecord record;
  record.asset_id = summary.asset_id;
  record.incident_ref = asset->incident_ref;
  record.speaker_roles = transcript.roles;
  record.summary_ref = "sum/" + summary.asset_id + "/" + std::to_string(summary.transcript_revision);
  record.indicator_scores = summary.indicator_scores;
  record.themes = store::normalize_themes(summary.themes);
  record.revision = summary.transcript_revision;
  record.fused = std::move(fused);

  if (auto existing = store.get_record(record.asset_id, record.revision)) {
    record.created_ms = existing->created_ms;
    record.updated_ms = existing->updated_ms;
    const auto stored_summary = store.get_summary(record.asset_id, record.revision);
    if (*existing == record && stored_summary && summary_from_json(*stored_summary) == summary)
      return record.id();
  }
  if (!store.get_transcript(transcript.asset_id, transcript.revision)) store.put_transcript(transcript);
  store.put_summary(summary.asset_id, summary.transcript_revision, to_json(summary));
  return store.put_record(std::move(record));
}

}  // namespace bwc
