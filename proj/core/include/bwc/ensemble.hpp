// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/corpus.hpp"
#include "bwc/lexicon.hpp"
#include "bwc/separation.hpp"
#include "bwc/transcription.hpp"

// Modality feature extraction and weighted late fusion:
//   fused = alpha * audio + beta * text + gamma * image
namespace bwc::ensemble {

enum class Modality { audio, text, image };

std::string_view to_string(Modality m) noexcept;

struct FeatureVector {
  Modality modality = Modality::audio;
  std::vector<double> values;
  /// Stage names that produced `values`, in application order.
  std::vector<std::string> extractor_chain;
  /// One name per value, e.g. "officer.politeness".
  std::vector<std::string> component_names;
};

struct ModalityTriple {
  FeatureVector audio;
  FeatureVector text;
  FeatureVector image;
};

struct EnsembleWeights {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double gamma = 1.0 / 3.0;

  /// Rescaled to sum to 1. Throws Error(invalid_argument) when negative,
  /// non-finite or all zero.
  EnsembleWeights normalized() const;

  friend bool operator==(const EnsembleWeights&, const EnsembleWeights&) = default;
};

/// Input of the audio stages: the track plus, when available, its separated streams.
struct AudioFeatureInput {
  const AudioTrack& track;
  std::span<const SpeakerStream> streams = {};
};

using AudioStage = std::function<std::vector<double>(const AudioFeatureInput&)>;

inline constexpr std::size_t kEnergyProfileBins = 8;
inline constexpr std::size_t kSpeakerShareSlots = 4;

/// Named audio stages. Built-ins:
///   identity              [duration_s, rms, peak]
///   energy-profile        mean square over kEnergyProfileBins equal spans
///   zcr                   [zero-crossing rate]
///   spectral-centroid     [centroid Hz]
///   speaker-energy-share  per-speaker energy x time share, descending,
///                         padded to kSpeakerShareSlots
class AudioStageRegistry {
 public:
  AudioStageRegistry();

  void add(std::string name, AudioStage stage, std::size_t width);
  bool contains(std::string_view name) const;
  std::size_t width(std::string_view name) const;
  std::vector<double> apply(std::string_view name, const AudioFeatureInput& input) const;

 private:
  struct Entry {
    AudioStage stage;
    std::size_t width = 0;
  };
  std::map<std::string, Entry, std::less<>> stages_;
};

const AudioStageRegistry& default_audio_stages();

inline const std::vector<std::string>& default_audio_chain() {
  static const std::vector<std::string> chain{"energy-profile", "zcr", "spectral-centroid",
                                              "speaker-energy-share"};
  return chain;
}

/// Applies the chain left to right and concatenates stage outputs.
/// Throws Error(invalid_argument) for an empty chain and
/// Error(unknown_stage) for an unregistered stage.
FeatureVector extract_audio_features(const AudioFeatureInput& input,
                                     std::span<const std::string> chain,
                                     const AudioStageRegistry& registry = default_audio_stages());

/// Lexicon hit rates for the officer and civilian scopes, components ordered
/// by category name ("officer.<cat>"..., then "civilian.<cat>"...).
FeatureVector extract_text_features(const MergedTranscript& transcript, const Lexicon& lexicon);

/// Scene/object features are not implemented; returns a zero vector of
/// `length`, chain ["image-stub"].
FeatureVector extract_image_features(const VideoAsset& asset, std::size_t length);

using ProjectionMatrix = std::vector<std::vector<double>>;

/// Common fusion length plus optional per-modality projections (rows =
/// fusion length, columns = modality length). Without a matrix a vector is
/// truncated or zero-padded.
struct FusionConfig {
  std::size_t length = 8;
  std::optional<ProjectionMatrix> audio_projection;
  std::optional<ProjectionMatrix> text_projection;
  std::optional<ProjectionMatrix> image_projection;
};

std::vector<double> project(const FeatureVector& v, std::size_t length,
                            const std::optional<ProjectionMatrix>& matrix = std::nullopt);

/// alpha * audio + beta * text + gamma * image after projection. Weights are
/// used as given (no normalization). Throws Error(non_finite).
std::vector<double> fuse(const ModalityTriple& features, const EnsembleWeights& weights,
                         const FusionConfig& config);

struct LabeledExample {
  ModalityTriple features;
  std::string label;
};

/// Simplex grid {(a, b, g) >= 0, a + b + g = 1, multiples of step} in
/// ascending lexicographic order. step must lie in (0, 0.5] and divide 1.
std::vector<EnsembleWeights> simplex_grid(double step);

/// Number of examples whose nearest class centroid (Euclidean, centroids
/// from the same vectors, ties to the smaller label) is their own class.
std::size_t nearest_centroid_correct(std::span<const std::vector<double>> vectors,
                                     std::span<const std::string> labels);

struct CalibrationResult {
  EnsembleWeights weights;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t grid_points = 0;

  double accuracy() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Exhaustive grid search maximizing nearest-centroid accuracy of the fused
/// vectors; ties go to the lexicographically smallest (alpha, beta, gamma).
/// Throws Error(degenerate_labels) with fewer than two classes.
CalibrationResult calibrate(std::span<const LabeledExample> examples, double grid_step,
                            const FusionConfig& config, std::size_t parallelism = 1);

EnsembleWeights calibrate_weights(std::span<const LabeledExample> examples, double grid_step,
                                  const FusionConfig& config);

/// JSONL, one example per line: {"label": ..., "audio": [...], "text": [...], "image": [...]}.
std::vector<LabeledExample> load_labeled_examples(const std::filesystem::path& path);

}  // namespace bwc::ensemble
