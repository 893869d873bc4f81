// SPDX-License-Identifier: Apache-2.0
#include "bwc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>

#include "bwc/dsp.hpp"
#include "bwc/error.hpp"
#include "bwc/parallel.hpp"

namespace bwc::ensemble {

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::audio: return "audio";
    case Modality::text: return "text";
    case Modality::image: return "image";
  }
  return "unknown";
}

EnsembleWeights EnsembleWeights::normalized() const {
  for (double w : {alpha, beta, gamma})
    if (!std::isfinite(w) || w < 0.0)
      throw Error(Errc::invalid_argument, "ensemble weights must be finite and non-negative");
  const double sum = alpha + beta + gamma;
  if (sum <= 0.0) throw Error(Errc::invalid_argument, "ensemble weights sum to zero");
  EnsembleWeights w{alpha / sum, beta / sum, 0.0};
  w.gamma = 1.0 - (w.alpha + w.beta);
  if (w.gamma < 0.0) w.gamma = 0.0;
  return w;
}

namespace {

std::vector<double> identity_stage(const AudioFeatureInput& in) {
  return {in.track.duration(), dsp::rms(in.track.samples), dsp::peak(in.track.samples)};
}

std::vector<double> energy_profile_stage(const AudioFeatureInput& in) {
  const auto& s = in.track.samples;
  std::vector<double> bins(kEnergyProfileBins, 0.0);
  for (std::size_t b = 0; b < kEnergyProfileBins; ++b) {
    const std::size_t lo = s.size() * b / kEnergyProfileBins;
    const std::size_t hi = s.size() * (b + 1) / kEnergyProfileBins;
    bins[b] = dsp::mean_square(std::span<const float>(s).subspan(lo, hi - lo));
  }
  return bins;
}

std::vector<double> zcr_stage(const AudioFeatureInput& in) {
  return {dsp::zero_crossing_rate(in.track.samples)};
}

std::vector<double> centroid_stage(const AudioFeatureInput& in) {
  return {dsp::spectral_centroid(in.track.samples, in.track.sample_rate)};
}

std::vector<double> speaker_share_stage(const AudioFeatureInput& in) {
  std::vector<double> out(kSpeakerShareSlots, 0.0);
  if (in.streams.empty()) {
    if (dsp::mean_square(in.track.samples) > 0.0) out[0] = 1.0;
    return out;
  }
  std::map<std::size_t, double> weight;
  for (const auto& s : in.streams)
    weight[s.global_speaker.value_or(s.local_speaker)] += s.energy * s.duration();
  double total = 0.0;
  std::vector<double> shares;
  for (const auto& [_, w] : weight) {
    shares.push_back(w);
    total += w;
  }
  if (total <= 0.0) return out;
  std::sort(shares.begin(), shares.end(), std::greater<>());
  for (std::size_t i = 0; i < std::min(shares.size(), kSpeakerShareSlots); ++i)
    out[i] = shares[i] / total;
  return out;
}

}  // namespace

AudioStageRegistry::AudioStageRegistry() {
  add("identity", identity_stage, 3);
  add("energy-profile", energy_profile_stage, kEnergyProfileBins);
  add("zcr", zcr_stage, 1);
  add("spectral-centroid", centroid_stage, 1);
  add("speaker-energy-share", speaker_share_stage, kSpeakerShareSlots);
}

void AudioStageRegistry::add(std::string name, AudioStage stage, std::size_t width) {
  stages_[std::move(name)] = Entry{std::move(stage), width};
}

bool AudioStageRegistry::contains(std::string_view name) const { return stages_.find(name) != stages_.end(); }

std::size_t AudioStageRegistry::width(std::string_view name) const {
  const auto it = stages_.find(name);
  if (it == stages_.end()) throw Error(Errc::unknown_stage, "unknown audio stage: " + std::string(name));
  return it->second.width;
}

std::vector<double> AudioStageRegistry::apply(std::string_view name, const AudioFeatureInput& input) const {
  const auto it = stages_.find(name);
  if (it == stages_.end()) throw Error(Errc::unknown_stage, "unknown audio stage: " + std::string(name));
  auto out = it->second.stage(input);
  if (out.size() != it->second.width)
    throw Error(Errc::invalid_argument, "stage " + std::string(name) + " produced wrong width");
  return out;
}

const AudioStageRegistry& default_audio_stages() {
  static const AudioStageRegistry registry;
  return registry;
}

FeatureVector extract_audio_features(const AudioFeatureInput& input, std::span<const std::string> chain,
                                     const AudioStageRegistry& registry) {
  if (chain.empty()) throw Error(Errc::invalid_argument, "audio feature chain is empty");
  for (const auto& name : chain)
    if (!registry.contains(name)) throw Error(Errc::unknown_stage, "unknown audio stage: " + name);

  FeatureVector fv;
  fv.modality = Modality::audio;
  for (const auto& name : chain) {
    const auto part = registry.apply(name, input);
    for (std::size_t i = 0; i < part.size(); ++i) {
      fv.values.push_back(part[i]);
      fv.component_names.push_back(name + "[" + std::to_string(i) + "]");
    }
    fv.extractor_chain.push_back(name);
  }
  return fv;
}

FeatureVector extract_text_features(const MergedTranscript& transcript, const Lexicon& lexicon) {
  if (lexicon.empty()) throw Error(Errc::invalid_argument, "indicator lexicon is empty");
  if (transcript.segments.empty())
    throw Error(Errc::invalid_argument, "transcript has no segments: " + transcript.asset_id);

  const auto rates = indicator_rates(transcript, lexicon);
  FeatureVector fv;
  fv.modality = Modality::text;
  fv.extractor_chain = {"transcribe", "lexicon-indicators"};
  for (std::string_view scope : {kOfficerScope, kCivilianScope}) {
    for (const auto& category : lexicon.category_names()) {
      const std::string key = std::string(scope) + "." + category;
      fv.values.push_back(rates.at(key));
      fv.component_names.push_back(key);
    }
  }
  return fv;
}

FeatureVector extract_image_features(const VideoAsset&, std::size_t length) {
  FeatureVector fv;
  fv.modality = Modality::image;
  fv.values.assign(length, 0.0);
  fv.extractor_chain = {"image-stub"};
  for (std::size_t i = 0; i < length; ++i) fv.component_names.push_back("image-stub[" + std::to_string(i) + "]");
  return fv;
}

std::vector<double> project(const FeatureVector& v, std::size_t length,
                            const std::optional<ProjectionMatrix>& matrix) {
  if (!matrix) {
    std::vector<double> out(length, 0.0);
    std::copy_n(v.values.begin(), std::min(length, v.values.size()), out.begin());
    return out;
  }
  if (matrix->size() != length)
    throw Error(Errc::invalid_argument, "projection for " + std::string(to_string(v.modality)) +
                                            " has wrong row count");
  std::vector<double> out(length, 0.0);
  for (std::size_t r = 0; r < length; ++r) {
    const auto& row = (*matrix)[r];
    if (row.size() != v.values.size())
      throw Error(Errc::invalid_argument, "projection for " + std::string(to_string(v.modality)) +
                                              " has wrong column count");
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * v.values[c];
    out[r] = acc;
  }
  return out;
}

namespace {

void require_finite(const FeatureVector& v) {
  for (double x : v.values)
    if (!std::isfinite(x))
      throw Error(Errc::non_finite, "non-finite " + std::string(to_string(v.modality)) + " feature");
}

}  // namespace

std::vector<double> fuse(const ModalityTriple& f, const EnsembleWeights& w, const FusionConfig& config) {
  require_finite(f.audio);
  require_finite(f.text);
  require_finite(f.image);
  for (double x : {w.alpha, w.beta, w.gamma})
    if (!std::isfinite(x)) throw Error(Errc::non_finite, "non-finite ensemble weight");

  const auto a = project(f.audio, config.length, config.audio_projection);
  const auto t = project(f.text, config.length, config.text_projection);
  const auto i = project(f.image, config.length, config.image_projection);
  std::vector<double> out(config.length);
  for (std::size_t k = 0; k < config.length; ++k) out[k] = w.alpha * a[k] + w.beta * t[k] + w.gamma * i[k];
  return out;
}

std::vector<EnsembleWeights> simplex_grid(double step) {
  if (!(step > 0.0 && step <= 0.5)) throw Error(Errc::invalid_argument, "grid_step must lie in (0, 0.5]");
  const double inverse = 1.0 / step;
  const auto n = static_cast<long>(std::llround(inverse));
  if (std::abs(inverse - static_cast<double>(n)) > 1e-9)
    throw Error(Errc::invalid_argument, "grid_step must divide 1");

  std::vector<EnsembleWeights> grid;
  grid.reserve(static_cast<std::size_t>((n + 1) * (n + 2) / 2));
  for (long i = 0; i <= n; ++i) {
    for (long j = 0; j <= n - i; ++j) {
      EnsembleWeights w;
      w.alpha = static_cast<double>(i) / static_cast<double>(n);
      w.beta = static_cast<double>(j) / static_cast<double>(n);
      w.gamma = i + j == n ? 0.0 : 1.0 - (w.alpha + w.beta);
      grid.push_back(w);
    }
  }
  return grid;
}

std::size_t nearest_centroid_correct(std::span<const std::vector<double>> vectors,
                                     std::span<const std::string> labels) {
  if (vectors.size() != labels.size()) throw Error(Errc::invalid_argument, "vector/label count mismatch");
  if (vectors.empty()) return 0;
  const std::size_t dim = vectors.front().size();

  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& [sum, count] = sums[labels[i]];
    sum.resize(dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) sum[k] += vectors[i][k];
    ++count;
  }
  std::vector<std::pair<const std::string*, std::vector<double>>> centroids;
  for (auto& [label, entry] : sums) {
    auto& [sum, count] = entry;
    for (auto& x : sum) x /= static_cast<double>(count);
    centroids.emplace_back(&label, sum);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const std::string* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [label, c] : centroids) {
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = vectors[i][k] - c[k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = label;
      }
    }
    if (best != nullptr && *best == labels[i]) ++correct;
  }
  return correct;
}

CalibrationResult calibrate(std::span<const LabeledExample> examples, double grid_step,
                            const FusionConfig& config, std::size_t parallelism) {
  if (examples.empty()) throw Error(Errc::invalid_argument, "no calibration examples");
  std::vector<std::string> labels;
  labels.reserve(examples.size());
  for (const auto& e : examples) labels.push_back(e.label);
  {
    auto distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2)
      throw Error(Errc::degenerate_labels, "degenerate labels: need at least two classes");
  }

  const auto grid = simplex_grid(grid_step);
  std::vector<std::size_t> correct(grid.size(), 0);
  parallel_for(grid.size(), parallelism, [&](std::size_t g) {
    std::vector<std::vector<double>> fused;
    fused.reserve(examples.size());
    for (const auto& e : examples) fused.push_back(fuse(e.features, grid[g], config));
    correct[g] = nearest_centroid_correct(fused, labels);
  });

  // Grid is in ascending lexicographic order, so the first maximum wins ties.
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (correct[g] > correct[best]) best = g;

  CalibrationResult result;
  result.weights = grid[best];
  result.correct = correct[best];
  result.total = examples.size();
  result.grid_points = grid.size();
  return result;
}

EnsembleWeights calibrate_weights(std::span<const LabeledExample> examples, double grid_step,
                                  const FusionConfig& config) {
  return calibrate(examples, grid_step, config).weights;
}

std::vector<LabeledExample> load_labeled_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read examples " + path.string());
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledExample ex;
      ex.label = j.at("label").get<std::string>();
      ex.features.audio = {Modality::audio, j.at("audio").get<std::vector<double>>(), {"file"}, {}};
      ex.features.text = {Modality::text, j.at("text").get<std::vector<double>>(), {"file"}, {}};
      ex.features.image = {Modality::image, j.value("image", std::vector<double>{}), {"file"}, {}};
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_argument,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace bwc::ensemble
