// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Small signal helpers shared by extraction, separation and feature stages.
namespace bwc::dsp {

double mean_square(std::span<const float> samples) noexcept;
double rms(std::span<const float> samples) noexcept;
double peak(std::span<const float> samples) noexcept;

/// Fraction of adjacent sample pairs whose sign differs, in [0, 1].
double zero_crossing_rate(std::span<const float> samples) noexcept;

/// Power-weighted mean frequency (Hz) of the Hann-windowed, frame-averaged
/// power spectrum. Returns 0 for silence.
double spectral_centroid(std::span<const float> samples, std::uint32_t sample_rate,
                         std::size_t frame = 2048);

/// Power-weighted mean frequency of the whole-signal spectrum (single FFT, no window).
double global_spectral_centroid(std::span<const float> samples, std::uint32_t sample_rate);

struct BandSplit {
  std::vector<float> low;
  std::vector<float> high;
};

/// Brick-wall split in the frequency domain: bins strictly below `cutoff_hz`
/// go to `low`, the rest to `high`. low + high reconstructs the input.
BandSplit band_split(std::span<const float> samples, std::uint32_t sample_rate,
                     double cutoff_hz);

/// Averages interleaved channels into one.
std::vector<float> downmix(std::span<const float> interleaved, std::uint16_t channels);

/// Linear-interpolation resampler; output length is round(n * to / from).
std::vector<float> resample_linear(std::span<const float> samples, std::uint32_t from_rate,
                                   std::uint32_t to_rate);

}  // namespace bwc::dsp
