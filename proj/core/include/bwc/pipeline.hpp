// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/config.hpp"
#include "bwc/error.hpp"
#include "bwc/store.hpp"

namespace bwc {

/// Store document holding the fusion weights of the latest run.
inline constexpr std::string_view kWeightsDocument = "ensemble/weights";
/// Store document prefix for per-asset audio feature vectors.
inline constexpr std::string_view kAudioFeaturesPrefix = "audio-features/";

struct ChunkFailure {
  ChunkRef chunk;
  /// "separate" or "transcribe".
  std::string stage;
  std::string message;
};

struct AssetFailure {
  std::string asset_id;
  std::string message;
};

struct PipelineRunReport {
  std::size_t assets = 0;
  /// Assets whose checkpoint matched and were not reprocessed.
  std::size_t assets_skipped = 0;
  std::size_t chunks = 0;
  std::size_t streams = 0;
  std::size_t segments = 0;
  /// Assets holding a stored record after the run (saved now or skipped).
  std::size_t records = 0;
  std::vector<ChunkFailure> quarantined;
  std::vector<AssetFailure> failed_assets;
  /// Wall-clock seconds summed over assets, per stage.
  std::map<std::string, double> stage_seconds;
  /// "<asset>@<revision>" per record, in manifest order.
  std::vector<std::string> record_ids;
  std::size_t separation_invocations = 0;
  std::size_t transcription_invocations = 0;
  std::size_t summarization_invocations = 0;
  ensemble::EnsembleWeights weights;

  std::size_t backend_invocations() const noexcept {
    return separation_invocations + transcription_invocations + summarization_invocations;
  }
};

nlohmann::json to_json(const PipelineRunReport& report);

/// Runs the dataset end to end: ingest, then per asset extract, chunk,
/// separate, link, transcribe, merge, attribute roles, summarize, score
/// indicators, fuse features and save. Assets run in parallel, and chunks and
/// streams within an asset too, up to config.parallelism.
///
/// Backend failures are retried config.retries times, then the chunk is
/// quarantined and the asset completes without it. An asset that cannot be
/// decoded or summarized is reported as failed. Completed assets are
/// checkpointed in the store under a digest of the config and the source
/// file, so a re-run over unchanged inputs invokes no backend. Assets with
/// quarantined chunks are saved but not checkpointed, so a re-run retries them.
///
/// Throws Error(invalid_argument) for an invalid config before any work.
PipelineRunReport run_pipeline(const RunConfig& config, store::Store& store);

}  // namespace bwc
