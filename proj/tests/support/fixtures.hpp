// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic fixtures shared by unit and acceptance tests. Every generator is
// deterministic and reports the quantities it fixed, so tests can compare
// pipeline output against the generator rather than against the pipeline.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bwc/error.hpp"
#include "bwc/store.hpp"
#include "bwc/transcription.hpp"

namespace bwc::testing {

namespace fs = std::filesystem;

/// Code of the bwc::Error thrown by fn, or nullopt when it returns normally.
std::optional<Errc> error_code(const std::function<void()>& fn);

/// Fresh directory under the build tree's temp area, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name);
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& child) const { return path_ / child; }

 private:
  fs::path path_;
};

std::vector<float> sine(double hz, double seconds, std::uint32_t rate, double amplitude);

/// RMS of amplitude * sin over a whole number of periods: amplitude / sqrt(2).
double sine_rms(double amplitude);

/// Writes 16-bit PCM; `samples` are interleaved when channels > 1.
void write_wav(const fs::path& path, std::uint32_t rate, std::uint16_t channels,
               const std::vector<float>& samples);

/// A canonical WAV header declaring `seconds` of 16 kHz mono audio, with the
/// data region left as a sparse hole (no disk cost for hour-long fixtures).
void write_sparse_wav(const fs::path& path, double seconds);

/// Interleaves the channels, each of equal length.
std::vector<float> interleave(const std::vector<std::vector<float>>& channels);

/// Values of a 16-bit PCM round trip (what a reader of write_wav sees).
std::vector<float> quantized(const std::vector<float>& samples);

// ---------------------------------------------------------------------------
// Pipeline corpus: two voices per asset, each a gated pure tone.

struct VoiceSpec {
  std::string name;
  double tone_hz;
  double amplitude;
};

inline const VoiceSpec kOfficerVoice{"officer", 300.0, 0.5};
inline const VoiceSpec kCivilianVoice{"civilian", 1200.0, 0.2};

struct AssetSpec {
  std::string id;
  double seconds;
  std::uint32_t rate;
  std::uint16_t channels;
  std::string incident_ref;  // empty: none
};

struct CorpusFixture {
  fs::path root;
  std::vector<AssetSpec> assets;
  /// Utterances per asset id, absolute times.
  std::map<std::string, std::vector<SidecarUtterance>> utterances;
  std::size_t expected_chunks = 0;
  std::size_t expected_streams = 0;
  std::size_t expected_segments = 0;
  /// Chunks per asset id.
  std::map<std::string, std::size_t> chunks_per_asset;
};

/// Three assets (35 s and 62 s canonical mono sharing an incident_ref, 95 s
/// stereo at 44.1 kHz). Every 30 s chunk holds one officer utterance followed
/// by one civilian utterance, both strictly inside the chunk, so with 30 s
/// chunks: streams = 2 x chunks and segments = 2 x chunks.
CorpusFixture make_pipeline_corpus(const fs::path& root, double chunk_len = 30.0);

/// Theme keyword file for the extractive summarizer used with the corpus.
void write_theme_keywords(const fs::path& path);

/// Minimal dictionary and lexicon files.
void write_dictionary(const fs::path& path, const std::vector<std::string>& words);

// ---------------------------------------------------------------------------
// Random text for the metric oracles.

/// Multi-line transcript mixing dictionary words, misspellings, case and
/// whitespace variants, standard punctuation, non-ASCII characters (including
/// mojibake and curly apostrophes) and deliberately repeated lines.
std::string random_transcript(std::mt19937_64& rng);

/// A perturbed copy of `text`: some lines dropped, words substituted, lines repeated.
std::string perturb_transcript(const std::string& text, std::mt19937_64& rng);

/// Vocabulary used by the generators; dictionary_words() is its correctly
/// spelled part (the misspellings are the expected OOV words).
const std::vector<std::string>& vocabulary();
std::vector<std::string> dictionary_words();

// ---------------------------------------------------------------------------
// Store fixtures.

std::vector<std::string> theme_pool();

/// `n` records over n/5 assets, revisions 0..4, random themes (0-3 from a
/// pool of 40), roles, indicator scores and incident refs. Assets are
/// registered in `store` before the records are written.
std::vector<store::IncidentRecord> populate_store(store::Store& store, std::size_t n, std::mt19937_64& rng);

store::QueryFilter random_filter(std::mt19937_64& rng);

/// Segments of one asset with overlapping starts and ties, for merge tests.
std::vector<TranscriptSegment> merge_fixture_segments();

}  // namespace bwc::testing
