// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/corpus.hpp"
#include "bwc/error.hpp"

namespace bwc {

/// How to reach a speaker-separation model. `invocation` is either a built-in
/// mock ("mock:passthrough", "mock:band-split", optionally suffixed with
/// "?fail_chunk=N" for fault injection) or an external command template with
/// {input}, {max_speakers}, {out_dir}, {asset_id} and {chunk_index} placeholders.
struct SeparationBackendDescriptor {
  std::string name = "band-split";
  std::size_t max_speakers = 2;
  std::string invocation = "mock:band-split";
  std::chrono::milliseconds timeout{120'000};
};

struct SpeakerStream {
  ChunkRef chunk_ref;
  double chunk_start = 0.0;
  std::uint32_t sample_rate = kCanonicalSampleRate;
  std::size_t local_speaker = 0;
  std::optional<std::size_t> global_speaker;
  std::vector<float> samples;
  /// Mean squared amplitude.
  double energy = 0.0;

  double duration() const noexcept {
    return sample_rate == 0 ? 0.0 : static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Encoder/separator/decoder behind one call: a mixed chunk in, one waveform
/// per detected speaker out, each the length of the chunk.
class SeparationBackend {
 public:
  virtual ~SeparationBackend() = default;

  virtual std::string_view name() const noexcept = 0;
  virtual std::vector<std::vector<float>> run(const AudioChunk& chunk,
                                              std::size_t max_speakers) = 0;

  std::size_t invocations() const noexcept { return invocations_.load(); }

 protected:
  void count_invocation() noexcept { ++invocations_; }

 private:
  std::atomic<std::size_t> invocations_{0};
};

/// Returns the input unchanged as a single stream.
class PassthroughSeparator final : public SeparationBackend {
 public:
  explicit PassthroughSeparator(std::optional<std::size_t> fail_chunk = std::nullopt)
      : fail_chunk_(fail_chunk) {}
  std::string_view name() const noexcept override { return "passthrough"; }
  std::vector<std::vector<float>> run(const AudioChunk& chunk, std::size_t max_speakers) override;

 private:
  std::optional<std::size_t> fail_chunk_;
};

/// Splits the chunk spectrum at its power-weighted centroid into a low and a
/// high band. Bands carrying less than 1e-6 of the chunk energy are dropped,
/// so single-tone and silent chunks yield one stream.
class BandSplitSeparator final : public SeparationBackend {
 public:
  explicit BandSplitSeparator(std::optional<std::size_t> fail_chunk = std::nullopt)
      : fail_chunk_(fail_chunk) {}
  std::string_view name() const noexcept override { return "band-split"; }
  std::vector<std::vector<float>> run(const AudioChunk& chunk, std::size_t max_speakers) override;

 private:
  std::optional<std::size_t> fail_chunk_;
};

/// Runs an external separation command. The command reads the chunk WAV at
/// {input} and writes N mono WAV files plus {out_dir}/streams.jsonl, one line
/// per stream: {"index": i, "energy": e, "wav": "<file name in out_dir>"}.
class ProcessSeparator final : public SeparationBackend {
 public:
  explicit ProcessSeparator(SeparationBackendDescriptor descriptor)
      : descriptor_(std::move(descriptor)) {}
  std::string_view name() const noexcept override { return descriptor_.name; }
  std::vector<std::vector<float>> run(const AudioChunk& chunk, std::size_t max_speakers) override;

 private:
  SeparationBackendDescriptor descriptor_;
};

std::unique_ptr<SeparationBackend> make_separation_backend(
    const SeparationBackendDescriptor& descriptor);

/// Runs the backend and packages its output: streams ordered by descending
/// energy (stable on ties), local_speaker renumbered in that order. Backend
/// crashes surface as BackendError; an empty result as
/// BackendError(nothing_separated); more than max_speakers streams or a
/// length mismatch as BackendError(backend_failure).
std::vector<SpeakerStream> separate(const AudioChunk& chunk, SeparationBackend& backend,
                                    std::size_t max_speakers);

enum class LinkageMethod { signature, index_order };

/// (RMS, zero-crossing rate, spectral centroid) averaged over the stream.
struct StreamSignature {
  double rms = 0.0;
  double zero_crossing_rate = 0.0;
  double centroid_hz = 0.0;
};

StreamSignature signature_of(const SpeakerStream& stream);

/// Distance in the normalized signature space (centroid scaled by Nyquist).
double signature_distance(const StreamSignature& a, const StreamSignature& b,
                          std::uint32_t sample_rate) noexcept;

struct ChunkLinks {
  std::size_t chunk_index = 0;
  /// local_speaker -> global label.
  std::vector<std::size_t> global;
  /// Per local speaker, in [0, 1].
  std::vector<double> confidence;
};

struct SpeakerLinkage {
  std::vector<ChunkLinks> chunks;
  std::size_t global_count = 0;

  std::optional<std::size_t> global_for(std::size_t chunk_index, std::size_t local) const;
};

/// Assigns incident-level speaker labels across chunks. `chunks` holds the
/// streams of each chunk, ordered by chunk index. The signature method
/// matches each chunk against the most recent signature of every known
/// label with an exhaustive minimum-cost injective assignment; exact ties
/// resolve to local index order. Surplus streams open new labels in local order.
SpeakerLinkage link_speakers(std::span<const std::vector<SpeakerStream>> chunks,
                             LinkageMethod method = LinkageMethod::signature);

/// Writes the linkage's global labels into the streams.
void apply_linkage(std::span<std::vector<SpeakerStream>> chunks, const SpeakerLinkage& linkage);

}  // namespace bwc
