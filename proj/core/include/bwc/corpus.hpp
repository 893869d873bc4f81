// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bwc {

/// Canonical extracted audio: mono, 16 kHz, 16-bit linear PCM.
inline constexpr std::uint32_t kCanonicalSampleRate = 16000;
inline constexpr double kDefaultChunkSeconds = 30.0;

/// One recording in the dataset. Multi-officer footage of the same incident
/// shares an incident_ref.
struct VideoAsset {
  std::string id;
  std::filesystem::path path;
  double duration = 0.0;
  std::optional<std::string> incident_ref;
  /// Non-empty when probing failed; the asset is kept but excluded from stats.
  std::vector<std::string> flags;

  bool flagged() const noexcept { return !flags.empty(); }
  friend bool operator==(const VideoAsset&, const VideoAsset&) = default;
};

using Manifest = std::vector<VideoAsset>;

struct AudioTrack {
  std::string asset_id;
  std::uint32_t sample_rate = kCanonicalSampleRate;
  std::uint16_t channels = 1;
  std::vector<float> samples;

  double duration() const noexcept {
    return sample_rate == 0 || channels == 0
               ? 0.0
               : static_cast<double>(samples.size()) / (static_cast<double>(sample_rate) * channels);
  }
};

struct AudioChunk {
  std::string asset_id;
  std::size_t index = 0;
  double start = 0.0;
  double end = 0.0;
  std::uint32_t sample_rate = kCanonicalSampleRate;
  std::vector<float> samples;

  double duration() const noexcept { return end - start; }
};

struct DatasetSummary {
  std::size_t total_videos = 0;
  double shortest = 0.0;
  double longest = 0.0;
  double mean_length = 0.0;
  double total_time = 0.0;
};

/// Extensions treated as media. Only RIFF/WAVE is probed and decoded; other
/// containers are listed and flagged as unprobeable.
bool is_media_file(const std::filesystem::path& path);

/// Recursively lists media under `root`, sorted lexicographically by path.
/// Throws Error(io) when root is missing or unreadable.
Manifest scan_dataset(const std::filesystem::path& root, std::size_t parallelism = 1);

/// Min/max/mean/sum over unflagged assets. Throws Error(empty_dataset).
DatasetSummary dataset_stats(std::span<const VideoAsset> manifest);

/// Decodes the asset and normalizes to mono at the canonical rate. A source
/// that is already canonical passes through unchanged.
AudioTrack extract_audio(const VideoAsset& asset);

std::vector<AudioChunk> split_audio(const AudioTrack& track,
                                    double chunk_len = kDefaultChunkSeconds,
                                    double overlap = 0.0);

/// "HH:MM:SS" with at least two hour digits; seconds rounded to nearest.
std::string format_hms(double seconds);

/// Table-shaped text block: total, shortest, longest, average, total time.
std::string format_summary_table(const DatasetSummary& summary);

void write_manifest(std::ostream& out, std::span<const VideoAsset> manifest);
void save_manifest(const std::filesystem::path& path, std::span<const VideoAsset> manifest);
Manifest read_manifest(std::istream& in);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace bwc
