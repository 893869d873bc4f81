// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "bwc/ensemble.hpp"
#include "bwc/insights.hpp"
#include "bwc/separation.hpp"
#include "bwc/transcription.hpp"

namespace bwc {

/// Environment variable that overrides the store path (and nothing else).
inline constexpr const char* kStoreEnvVar = "BWC_STORE";

/// Everything a pipeline run needs. Loaded from YAML:
///
///   dataset_root: corpus/
///   chunk_len: 30
///   overlap: 0
///   parallelism: 2
///   store: bwc.store
///   artifacts_dir: artifacts/        # per-speaker stream WAVs for review
///   dictionary: words.txt
///   lexicon: indicators.txt          # builtin when absent
///   themes: themes.txt               # theme keywords for the mock summarizer
///   retries: 1
///   separation:    {name: band-split, invocation: "mock:band-split", max_speakers: 2, timeout_s: 120}
///   transcription: {name: mock-lexicon, invocation: "mock:lexicon", sidecar_root: corpus/, timeout_s: 120}
///   summarization: {name: mock-extractive, invocation: "mock:extractive", timeout_s: 120}
///   ensemble:      {alpha: 0.4, beta: 0.4, gamma: 0.2, fusion_length: 8,
///                   calibration_examples: labeled.jsonl, grid_step: 0.1}
///
/// Relative paths resolve against the config file's directory.
struct RunConfig {
  std::filesystem::path dataset_root;
  double chunk_len = kDefaultChunkSeconds;
  double overlap = 0.0;
  std::size_t parallelism = 1;
  std::filesystem::path store_path = "bwc.store";
  std::filesystem::path artifacts_dir;
  std::filesystem::path dictionary_path;
  std::filesystem::path lexicon_path;
  std::filesystem::path themes_path;
  std::size_t retries = 1;
  SeparationBackendDescriptor separation;
  TranscriptionBackendDescriptor transcription;
  SummarizationBackendDescriptor summarization;
  ensemble::EnsembleWeights weights;
  std::size_t fusion_length = 8;
  /// When set, weights are calibrated from this labeled-example file.
  std::filesystem::path calibration_examples;
  double grid_step = 0.1;
};

/// Throws Error(invalid_argument) naming the first violated constraint.
void validate(const RunConfig& config);

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir = {});

/// Replaces store_path with $BWC_STORE when it is set and non-empty.
void apply_environment(RunConfig& config);

/// Stable hex digest of the settings that determine pipeline outputs.
std::string fingerprint(const RunConfig& config);

/// Reads the lexicon file, or the builtin lexicon when no path is set.
Lexicon load_lexicon(const RunConfig& config);

}  // namespace bwc
