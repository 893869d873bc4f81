// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/lexicon.hpp"
#include "bwc/store.hpp"
#include "bwc/transcription.hpp"

namespace bwc {

struct IncidentSummary {
  std::string asset_id;
  std::string summary_text;
  std::string backend_name;
  /// "<scope>.<category>" -> rate in [0, 1].
  std::map<std::string, double> indicator_scores;
  std::uint64_t transcript_revision = 0;
  std::vector<std::string> themes;

  friend bool operator==(const IncidentSummary&, const IncidentSummary&) = default;
};

nlohmann::json to_json(const IncidentSummary& summary);
IncidentSummary summary_from_json(const nlohmann::json& j);

/// Summarizer output before indicators are attached.
struct SummaryText {
  std::string text;
  std::vector<std::string> themes;
};

/// `invocation` is "mock:extractive", "mock:fail" or a command template with
/// {input}, {output}, {asset_id} and {revision} placeholders. The command
/// reads the transcript JSONL at {input} and writes the summary text to
/// {output}; an optional {output}.themes file holds one theme per line.
struct SummarizationBackendDescriptor {
  std::string name = "mock-extractive";
  std::string invocation = "mock:extractive";
  std::chrono::milliseconds timeout{120'000};
};

class SummarizationBackend {
 public:
  virtual ~SummarizationBackend() = default;
  virtual std::string_view name() const noexcept = 0;
  virtual SummaryText run(const MergedTranscript& transcript) = 0;

  std::size_t invocations() const noexcept { return invocations_.load(); }

 protected:
  void count_invocation() noexcept { ++invocations_; }

 private:
  std::atomic<std::size_t> invocations_{0};
};

/// First sentence of each turn block (maximal run of consecutive segments by
/// one speaker), joined with single spaces. Themes are the categories of
/// `theme_keywords` with at least one hit anywhere in the transcript.
class ExtractiveSummarizer final : public SummarizationBackend {
 public:
  explicit ExtractiveSummarizer(Lexicon theme_keywords = {}) : themes_(std::move(theme_keywords)) {}
  std::string_view name() const noexcept override { return "mock-extractive"; }
  SummaryText run(const MergedTranscript& transcript) override;

 private:
  Lexicon themes_;
};

class ProcessSummarizer final : public SummarizationBackend {
 public:
  explicit ProcessSummarizer(SummarizationBackendDescriptor descriptor)
      : descriptor_(std::move(descriptor)) {}
  std::string_view name() const noexcept override { return descriptor_.name; }
  SummaryText run(const MergedTranscript& transcript) override;

 private:
  SummarizationBackendDescriptor descriptor_;
};

std::unique_ptr<SummarizationBackend> make_summarization_backend(
    const SummarizationBackendDescriptor& descriptor, Lexicon theme_keywords = {});

/// Text up to and including the first '.', '?' or '!' that ends the text or
/// is followed by whitespace; the whole (trimmed) text when there is none.
std::string first_sentence(std::string_view text);

/// Throws Error(invalid_argument) for an empty transcript; backend failures
/// propagate as retryable errors.
IncidentSummary summarize(const MergedTranscript& transcript, SummarizationBackend& backend);

/// indicator_rates() with a non-empty lexicon; throws Error(invalid_argument)
/// for an empty one.
std::map<std::string, double> extract_indicators(const MergedTranscript& transcript,
                                                 const Lexicon& lexicon);

struct Correction {
  enum class Kind { segment_text, role };

  std::string id;
  std::string asset_id;
  Kind kind = Kind::segment_text;
  /// Position in MergedTranscript::segments (segment_text).
  std::size_t segment_index = 0;
  /// Global speaker label (role).
  std::size_t speaker = 0;
  /// Segment text or role name ("officer", "civilian", "unknown").
  std::string before;
  std::string after;
  std::string author;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const Correction&, const Correction&) = default;
};

nlohmann::json to_json(const Correction& correction);
Correction correction_from_json(const nlohmann::json& j);

struct RejectedCorrection {
  std::string id;
  std::string reason;
};

struct CorrectionOutcome {
  MergedTranscript transcript;
  std::vector<std::string> applied;
  std::vector<RejectedCorrection> rejected;
};

/// Applies the batch in order. A correction whose `before` differs from the
/// current content (or whose target does not exist) is rejected and the rest
/// still apply. A non-empty outcome bumps the revision once and appends the
/// applied ids to correction_log; role corrections mark the speaker as
/// reviewer-owned. An empty batch is the identity. Throws
/// Error(nothing_applied) when every correction is rejected and
/// Error(invalid_argument) for a correction aimed at another asset.
CorrectionOutcome apply_corrections(MergedTranscript transcript,
                                    std::span<const Correction> corrections);

/// Rebuilds revisions 0..n from revision 0 and the recorded batches.
/// Element k of the result is revision k.
std::vector<MergedTranscript> replay(const MergedTranscript& base,
                                     std::span<const std::vector<Correction>> batches);

nlohmann::json batch_to_json(std::span<const Correction> batch);
std::vector<Correction> batch_from_json(const nlohmann::json& j);

/// replay() over the asset's stored revision 0 and correction journal.
/// Throws Error(referential) when the asset has no stored transcript.
std::vector<MergedTranscript> replay_from_store(const store::Store& store, std::string_view asset_id);

/// Persists the summary, its transcript revision and an indexed incident
/// record. Idempotent per (asset_id, transcript_revision): a repeat with the
/// same content writes nothing and returns the same id. Throws
/// Error(referential) for an unknown asset and Error(invalid_argument) when
/// the transcript is not the revision the summary was computed from.
std::string save_insights(const IncidentSummary& summary, const MergedTranscript& transcript,
                          store::Store& store, std::vector<double> fused = {});

}  // namespace bwc
