// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/separation.hpp"

namespace bwc {

struct TranscriptSegment {
  std::string asset_id;
  std::size_t chunk_index = 0;
  std::size_t local_speaker = 0;
  std::size_t global_speaker = 0;
  /// Seconds, absolute within the track.
  double start = 0.0;
  double end = 0.0;
  std::string text;
  std::string backend_name;

  friend bool operator==(const TranscriptSegment&, const TranscriptSegment&) = default;
};

enum class Role { officer, civilian, unknown };

std::string_view to_string(Role role) noexcept;
Role role_from_string(std::string_view text);

struct MergedTranscript {
  std::string asset_id;
  /// Sorted by (start, global_speaker, ...); see merge_transcripts.
  std::vector<TranscriptSegment> segments;
  std::map<std::size_t, Role> roles;
  /// Speakers whose role was set by a reviewer; the heuristic never touches them.
  std::set<std::size_t> human_roles;
  std::uint64_t revision = 0;
  std::vector<std::string> correction_log;

  friend bool operator==(const MergedTranscript&, const MergedTranscript&) = default;
};

/// One utterance reported by a transcription backend, relative to the stream start.
struct LocalUtterance {
  double start = 0.0;
  double end = 0.0;
  std::string text;
};

/// `invocation` is "mock:lexicon" (optionally "?fail_chunk=N") or an external
/// command template with {input}, {output}, {asset_id}, {chunk_index} and
/// {speaker} placeholders. The command reads the stream WAV at {input} and
/// writes one JSON object per line to {output}: {"start", "end", "text"}.
struct TranscriptionBackendDescriptor {
  std::string name = "mock-lexicon";
  std::string invocation = "mock:lexicon";
  /// Directory holding <asset_id>.truth.jsonl files for the mock backend.
  std::filesystem::path sidecar_root;
  std::chrono::milliseconds timeout{120'000};
};

class TranscriptionBackend {
 public:
  virtual ~TranscriptionBackend() = default;
  virtual std::string_view name() const noexcept = 0;
  virtual std::vector<LocalUtterance> run(const SpeakerStream& stream) = 0;

  std::size_t invocations() const noexcept { return invocations_.load(); }

 protected:
  void count_invocation() noexcept { ++invocations_; }

 private:
  std::atomic<std::size_t> invocations_{0};
};

/// Ground-truth utterance in a fixture sidecar (<asset_id>.truth.jsonl).
/// Each fixture speaker is a pure tone; `tone_hz` identifies the voice.
struct SidecarUtterance {
  std::string speaker;
  double tone_hz = 0.0;
  double start = 0.0;
  double end = 0.0;
  std::string text;
};

std::vector<SidecarUtterance> read_sidecar(const std::filesystem::path& path);
void write_sidecar(const std::filesystem::path& path, std::span<const SidecarUtterance> utterances);

/// Deterministic stand-in for a speech model. Reads the asset's sidecar,
/// identifies the stream's voice as the sidecar speaker whose tone is nearest
/// the stream's spectral centroid and reports that speaker's utterances whose
/// midpoint falls inside the stream's window, clipped to it. Streams with RMS
/// below 1e-4 are treated as silence.
class MockLexiconTranscriber final : public TranscriptionBackend {
 public:
  explicit MockLexiconTranscriber(std::filesystem::path sidecar_root,
                                  std::optional<std::size_t> fail_chunk = std::nullopt)
      : root_(std::move(sidecar_root)), fail_chunk_(fail_chunk) {}
  std::string_view name() const noexcept override { return "mock-lexicon"; }
  std::vector<LocalUtterance> run(const SpeakerStream& stream) override;

 private:
  std::filesystem::path root_;
  std::optional<std::size_t> fail_chunk_;
};

class ProcessTranscriber final : public TranscriptionBackend {
 public:
  explicit ProcessTranscriber(TranscriptionBackendDescriptor descriptor)
      : descriptor_(std::move(descriptor)) {}
  std::string_view name() const noexcept override { return descriptor_.name; }
  std::vector<LocalUtterance> run(const SpeakerStream& stream) override;

 private:
  TranscriptionBackendDescriptor descriptor_;
};

std::unique_ptr<TranscriptionBackend> make_transcription_backend(
    const TranscriptionBackendDescriptor& descriptor);

/// Adds the chunk offset to backend timestamps. Utterances are clipped to the
/// stream window and dropped when nothing remains. Silence yields no segments.
std::vector<TranscriptSegment> transcribe(const SpeakerStream& stream, TranscriptionBackend& backend);

/// Relabels segments to global speakers (where the linkage knows the chunk)
/// and sorts them canonically. Throws Error(invalid_argument) on mixed assets.
MergedTranscript merge_transcripts(std::vector<TranscriptSegment> segments,
                                   const SpeakerLinkage& linkage);

/// Labels the speaker with the largest mean stream energy x speaking time as
/// officer and every other speaker civilian. Ties go to the lower label.
/// Reviewer-assigned roles are kept; if a reviewer already named an officer,
/// the remaining speakers become civilians.
MergedTranscript attribute_roles(MergedTranscript transcript,
                                 std::span<const SpeakerStream> streams);

void write_transcript(std::ostream& out, const MergedTranscript& transcript);
std::string transcript_to_jsonl(const MergedTranscript& transcript);
MergedTranscript read_transcript(std::istream& in);
MergedTranscript transcript_from_jsonl(const std::string& text);

}  // namespace bwc
