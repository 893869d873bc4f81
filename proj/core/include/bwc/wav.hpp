// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bwc::wav {

struct Format {
  std::uint32_t sample_rate = 0;
  std::uint16_t channels = 0;
  std::uint16_t bits_per_sample = 0;
  bool is_float = false;
};

/// Header-level view of a RIFF/WAVE file, obtained without reading samples.
struct Info {
  Format format;
  std::uint64_t frames = 0;
  std::uint64_t data_offset = 0;

  double duration_seconds() const {
    return format.sample_rate == 0 ? 0.0
                                   : static_cast<double>(frames) / format.sample_rate;
  }
};

struct Audio {
  Format format;
  /// Interleaved samples normalized to [-1, 1). 16-bit PCM decodes as v / 32768.
  std::vector<float> samples;
};

/// Parses the RIFF header. Throws bwc::Error(corrupt_data) on malformed or
/// truncated files and bwc::Error(io) when the file cannot be opened.
Info probe(const std::filesystem::path& path);

Audio read(const std::filesystem::path& path);

/// Writes 16-bit linear PCM. Samples are rounded and clamped to int16.
void write_pcm16(const std::filesystem::path& path, std::uint32_t sample_rate,
                 std::uint16_t channels, std::span<const float> samples);

std::int16_t to_pcm16(float sample) noexcept;

}  // namespace bwc::wav
