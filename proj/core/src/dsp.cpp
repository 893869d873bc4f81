// SPDX-License-Identifier: Apache-2.0
#include "bwc/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "bwc/error.hpp"

namespace bwc::dsp {
namespace {

// FFTW planner calls are not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan plan) : plan_(plan) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

Plan make_r2c(int n, double* in, fftw_complex* out) {
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE));
}

Plan make_c2r(int n, fftw_complex* in, double* out) {
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE));
}

}  // namespace

double mean_square(std::span<const float> samples) noexcept {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return acc / static_cast<double>(samples.size());
}

double rms(std::span<const float> samples) noexcept { return std::sqrt(mean_square(samples)); }

double peak(std::span<const float> samples) noexcept {
  double p = 0.0;
  for (float s : samples) p = std::max(p, std::abs(static_cast<double>(s)));
  return p;
}

double zero_crossing_rate(std::span<const float> samples) noexcept {
  if (samples.size() < 2) return 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if ((samples[i - 1] >= 0.0f) != (samples[i] >= 0.0f)) ++crossings;
  return static_cast<double>(crossings) / static_cast<double>(samples.size() - 1);
}

double spectral_centroid(std::span<const float> samples, std::uint32_t sample_rate,
                         std::size_t frame) {
  if (samples.empty() || sample_rate == 0 || frame < 2) return 0.0;
  const std::size_t bins = frame / 2 + 1;
  auto in = fftw_buffer<double>(frame);
  auto out = fftw_buffer<fftw_complex>(bins);
  Plan plan = make_r2c(static_cast<int>(frame), in.get(), out.get());

  std::vector<double> window(frame);
  for (std::size_t i = 0; i < frame; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(frame - 1));

  std::vector<double> power(bins, 0.0);
  for (std::size_t start = 0; start < samples.size(); start += frame) {
    const std::size_t len = std::min(frame, samples.size() - start);
    for (std::size_t i = 0; i < frame; ++i)
      in[i] = i < len ? samples[start + i] * window[i] : 0.0;
    plan.execute();
    for (std::size_t k = 0; k < bins; ++k)
      power[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
  }

  double weighted = 0.0;
  double total = 0.0;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(frame);
  for (std::size_t k = 0; k < bins; ++k) {
    weighted += static_cast<double>(k) * bin_hz * power[k];
    total += power[k];
  }
  return total > 0.0 ? weighted / total : 0.0;
}

double global_spectral_centroid(std::span<const float> samples, std::uint32_t sample_rate) {
  const std::size_t n = samples.size();
  if (n < 2 || sample_rate == 0) return 0.0;
  const std::size_t bins = n / 2 + 1;
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(bins);
  Plan plan = make_r2c(static_cast<int>(n), in.get(), out.get());
  std::copy(samples.begin(), samples.end(), in.get());
  plan.execute();
  double weighted = 0.0;
  double total = 0.0;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n);
  for (std::size_t k = 0; k < bins; ++k) {
    const double p = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    weighted += static_cast<double>(k) * bin_hz * p;
    total += p;
  }
  return total > 0.0 ? weighted / total : 0.0;
}

BandSplit band_split(std::span<const float> samples, std::uint32_t sample_rate,
                     double cutoff_hz) {
  const std::size_t n = samples.size();
  BandSplit split;
  if (n == 0) return split;
  if (sample_rate == 0) throw Error(Errc::invalid_argument, "band_split: zero sample rate");

  const std::size_t bins = n / 2 + 1;
  auto time = fftw_buffer<double>(n);
  auto spectrum = fftw_buffer<fftw_complex>(bins);
  auto masked = fftw_buffer<fftw_complex>(bins);
  Plan forward = make_r2c(static_cast<int>(n), time.get(), spectrum.get());
  Plan inverse = make_c2r(static_cast<int>(n), masked.get(), time.get());

  std::copy(samples.begin(), samples.end(), time.get());
  forward.execute();

  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n);
  auto synthesize = [&](bool low) {
    for (std::size_t k = 0; k < bins; ++k) {
      const bool in_low = static_cast<double>(k) * bin_hz < cutoff_hz;
      const bool keep = in_low == low;
      masked[k][0] = keep ? spectrum[k][0] : 0.0;
      masked[k][1] = keep ? spectrum[k][1] : 0.0;
    }
    inverse.execute();
    std::vector<float> result(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) result[i] = static_cast<float>(time[i] * scale);
    return result;
  };
  split.low = synthesize(true);
  split.high = synthesize(false);
  return split;
}

std::vector<float> downmix(std::span<const float> interleaved, std::uint16_t channels) {
  if (channels <= 1) return {interleaved.begin(), interleaved.end()};
  const std::size_t frames = interleaved.size() / channels;
  std::vector<float> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += interleaved[f * channels + c];
    mono[f] = static_cast<float>(acc / channels);
  }
  return mono;
}

std::vector<float> resample_linear(std::span<const float> samples, std::uint32_t from_rate,
                                   std::uint32_t to_rate) {
  if (from_rate == 0 || to_rate == 0)
    throw Error(Errc::invalid_argument, "resample: zero sample rate");
  if (from_rate == to_rate || samples.empty()) return {samples.begin(), samples.end()};

  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(samples.size()) * to_rate / from_rate));
  std::vector<float> out(out_len);
  const double step = static_cast<double>(from_rate) / static_cast<double>(to_rate);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto left = static_cast<std::size_t>(pos);
    if (left + 1 >= samples.size()) {
      out[i] = samples.back();
      continue;
    }
    const double frac = pos - static_cast<double>(left);
    out[i] = static_cast<float>(samples[left] * (1.0 - frac) + samples[left + 1] * frac);
  }
  return out;
}

}  // namespace bwc::dsp
