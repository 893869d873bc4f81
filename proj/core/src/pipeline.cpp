// SPDX-License-Identifier: Apache-2.0
#include "bwc/pipeline.hpp"

#include <spdlog/spdlog.h>
#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <tuple>

#include "bwc/corpus.hpp"
#include "bwc/ensemble.hpp"
#include "bwc/insights.hpp"
#include "bwc/parallel.hpp"
#include "bwc/wav.hpp"

namespace bwc {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kTranscriptStage = "transcript";
constexpr std::string_view kInsightsStage = "insights";

std::string audio_features_doc(std::string_view asset_id) {
  return std::string(kAudioFeaturesPrefix) + std::string(asset_id);
}

// Config digest plus the source file identity.
std::string asset_fingerprint(const std::string& config_digest, const VideoAsset& asset) {
  std::error_code ec;
  const auto size = fs::file_size(asset.path, ec);
  const auto mtime = fs::last_write_time(asset.path, ec);
  const std::string text = config_digest + "|" + asset.path.string() + "|" + std::to_string(ec ? 0 : size) +
                           "|" + std::to_string(mtime.time_since_epoch().count());
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx",
                ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
  return config_digest + "-" + buf;
}

std::string artifact_dir_name(std::string_view asset_id) {
  std::string out;
  for (char c : asset_id) out += c == '/' ? std::string("__") : std::string(1, c);
  return out;
}

template <typename Fn>
auto with_retries(std::size_t retries, Fn&& fn) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= retries) throw;
      spdlog::warn("retrying after: {}", e.what());
    }
  }
}

class RunState {
 public:
  RunState(const RunConfig& config, store::Store& store)
      : config(config),
        store(store),
        digest(fingerprint(config)),
        lexicon(load_lexicon(config)),
        separator(make_separation_backend(config.separation)),
        transcriber(make_transcription_backend(config.transcription)),
        summarizer(make_summarization_backend(
            config.summarization, config.themes_path.empty() ? Lexicon{} : Lexicon::load(config.themes_path))) {
    fusion.length = config.fusion_length;
  }

  void add_time(std::string_view stage, std::chrono::steady_clock::time_point since) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
    std::lock_guard lock(mutex);
    report.stage_seconds[std::string(stage)] += s;
  }

  void quarantine(ChunkFailure failure) {
    spdlog::warn("quarantined {} at {}: {}", to_string(failure.chunk), failure.stage, failure.message);
    std::lock_guard lock(mutex);
    report.quarantined.push_back(std::move(failure));
  }

  const RunConfig& config;
  store::Store& store;
  std::string digest;
  Lexicon lexicon;
  std::unique_ptr<SeparationBackend> separator;
  std::unique_ptr<TranscriptionBackend> transcriber;
  std::unique_ptr<SummarizationBackend> summarizer;
  ensemble::EnsembleWeights weights;
  ensemble::FusionConfig fusion;
  std::mutex mutex;
  PipelineRunReport report;
};

struct AssetOutcome {
  std::optional<std::string> record_id;
  bool skipped = false;
  std::size_t chunks = 0;
  std::size_t streams = 0;
  std::size_t segments = 0;
};

struct TranscriptStage {
  MergedTranscript transcript;
  std::vector<double> audio_features;
  bool complete = true;
};

TranscriptStage build_transcript(RunState& run, const VideoAsset& asset, AssetOutcome& outcome) {
  using clock = std::chrono::steady_clock;
  const auto degree = run.config.parallelism;

  auto t0 = clock::now();
  const AudioTrack track = extract_audio(asset);
  const auto chunks = split_audio(track, run.config.chunk_len, run.config.overlap);
  run.add_time("extract", t0);
  outcome.chunks = chunks.size();

  t0 = clock::now();
  std::vector<std::optional<std::vector<SpeakerStream>>> separated(chunks.size());
  parallel_for(chunks.size(), degree, [&](std::size_t i) {
    try {
      separated[i] = with_retries(run.config.retries, [&] {
        return separate(chunks[i], *run.separator, run.config.separation.max_speakers);
      });
    } catch (const Error& e) {
      run.quarantine({{asset.id, chunks[i].index}, "separate", e.what()});
    }
  });
  run.add_time("separate", t0);

  TranscriptStage stage;
  t0 = clock::now();
  std::vector<std::vector<SpeakerStream>> ok;
  for (auto& s : separated) {
    if (s) {
      ok.push_back(std::move(*s));
    } else {
      stage.complete = false;
    }
  }
  const auto linkage = link_speakers(ok);
  apply_linkage(ok, linkage);
  run.add_time("link", t0);

  std::vector<const SpeakerStream*> streams;
  std::vector<SpeakerStream> flat;
  for (const auto& chunk_streams : ok)
    for (const auto& s : chunk_streams) streams.push_back(&s);
  outcome.streams = streams.size();

  t0 = clock::now();
  std::vector<std::vector<TranscriptSegment>> per_stream(streams.size());
  std::vector<char> stream_failed(streams.size(), 0);
  parallel_for(streams.size(), degree, [&](std::size_t i) {
    try {
      per_stream[i] = with_retries(run.config.retries, [&] { return transcribe(*streams[i], *run.transcriber); });
    } catch (const Error& e) {
      stream_failed[i] = 1;
      run.quarantine({streams[i]->chunk_ref, "transcribe", e.what()});
    }
  });
  run.add_time("transcribe", t0);
  for (char f : stream_failed)
    if (f) stage.complete = false;

  t0 = clock::now();
  std::vector<TranscriptSegment> segments;
  for (auto& v : per_stream) segments.insert(segments.end(), v.begin(), v.end());
  flat.reserve(streams.size());
  for (const auto* s : streams) flat.push_back(*s);
  auto merged = merge_transcripts(std::move(segments), linkage);
  merged.asset_id = asset.id;
  stage.transcript = attribute_roles(std::move(merged), flat);
  outcome.segments = stage.transcript.segments.size();
  run.add_time("merge", t0);

  t0 = clock::now();
  const ensemble::AudioFeatureInput input{track, flat};
  stage.audio_features = ensemble::extract_audio_features(input, ensemble::default_audio_chain()).values;
  run.add_time("features", t0);

  if (!run.config.artifacts_dir.empty()) {
    const fs::path dir = run.config.artifacts_dir / artifact_dir_name(asset.id);
    fs::create_directories(dir);
    json refs = json::array();
    for (const auto& s : flat) {
      const std::size_t speaker = s.global_speaker.value_or(s.local_speaker);
      const fs::path file = dir / ("c" + std::to_string(s.chunk_ref.chunk_index) + "_s" +
                                   std::to_string(speaker) + ".wav");
      wav::write_pcm16(file, s.sample_rate, 1, s.samples);
      refs.push_back({{"chunk_index", s.chunk_ref.chunk_index},
                      {"local_speaker", s.local_speaker},
                      {"global_speaker", speaker},
                      {"start_s", s.chunk_start},
                      {"end_s", s.chunk_start + s.duration()},
                      {"energy", s.energy},
                      {"path", fs::absolute(file).string()}});
    }
    run.store.put_document("audio/" + asset.id, refs);
  }
  return stage;
}

AssetOutcome process_asset(RunState& run, const VideoAsset& asset) {
  using clock = std::chrono::steady_clock;
  AssetOutcome outcome;
  const std::string fp = asset_fingerprint(run.digest, asset);

  if (run.store.stage_done(asset.id, kInsightsStage, fp)) {
    if (auto record = run.store.latest_record(asset.id)) {
      outcome.skipped = true;
      outcome.record_id = record->id();
      return outcome;
    }
  }
  if (asset.flagged()) throw Error(Errc::silent_asset, "asset is flagged: " + asset.flags.front());

  TranscriptStage stage;
  std::optional<MergedTranscript> stored;
  std::optional<json> features;
  if (run.store.stage_done(asset.id, kTranscriptStage, fp)) {
    stored = run.store.get_transcript(asset.id, 0);
    features = run.store.get_document(audio_features_doc(asset.id));
  }
  if (stored && features) {
    stage.transcript = std::move(*stored);
    stage.audio_features = features->get<std::vector<double>>();
  } else {
    stage = build_transcript(run, asset, outcome);
    run.store.put_transcript(stage.transcript);
    run.store.put_document(audio_features_doc(asset.id), stage.audio_features);
    if (stage.complete) run.store.mark_stage(asset.id, kTranscriptStage, fp);
  }
  const MergedTranscript& transcript = stage.transcript;

  auto t0 = clock::now();
  IncidentSummary summary;
  if (transcript.segments.empty()) {
    summary.asset_id = asset.id;
    summary.backend_name = "none";
    summary.transcript_revision = transcript.revision;
  } else {
    summary = with_retries(run.config.retries, [&] { return summarize(transcript, *run.summarizer); });
  }
  run.add_time("summarize", t0);

  t0 = clock::now();
  summary.indicator_scores = extract_indicators(transcript, run.lexicon);
  run.add_time("indicators", t0);

  t0 = clock::now();
  ensemble::ModalityTriple triple;
  triple.audio = {ensemble::Modality::audio, stage.audio_features, ensemble::default_audio_chain(), {}};
  if (transcript.segments.empty()) {
    triple.text = {ensemble::Modality::text,
                   std::vector<double>(2 * run.lexicon.category_names().size(), 0.0),
                   {"lexicon-indicators"},
                   {}};
  } else {
    triple.text = ensemble::extract_text_features(transcript, run.lexicon);
  }
  triple.image = ensemble::extract_image_features(asset, run.fusion.length);
  auto fused = ensemble::fuse(triple, run.weights, run.fusion);
  run.add_time("fuse", t0);

  t0 = clock::now();
  outcome.record_id = save_insights(summary, transcript, run.store, std::move(fused));
  if (stage.complete) run.store.mark_stage(asset.id, kInsightsStage, fp);
  run.add_time("save", t0);
  return outcome;
}

}  // namespace

json to_json(const PipelineRunReport& r) {
  json quarantined = json::array();
  for (const auto& q : r.quarantined)
    quarantined.push_back({{"chunk", to_string(q.chunk)}, {"stage", q.stage}, {"message", q.message}});
  json failed = json::array();
  for (const auto& f : r.failed_assets) failed.push_back({{"asset_id", f.asset_id}, {"message", f.message}});
  return {{"assets", r.assets},
          {"assets_skipped", r.assets_skipped},
          {"chunks", r.chunks},
          {"streams", r.streams},
          {"segments", r.segments},
          {"records", r.records},
          {"quarantined", quarantined},
          {"failed_assets", failed},
          {"stage_seconds", r.stage_seconds},
          {"record_ids", r.record_ids},
          {"backend_invocations",
           {{"separation", r.separation_invocations},
            {"transcription", r.transcription_invocations},
            {"summarization", r.summarization_invocations}}},
          {"weights", {{"alpha", r.weights.alpha}, {"beta", r.weights.beta}, {"gamma", r.weights.gamma}}}};
}

PipelineRunReport run_pipeline(const RunConfig& config, store::Store& store) {
  validate(config);
  RunState run(config, store);

  auto t0 = std::chrono::steady_clock::now();
  if (!config.calibration_examples.empty()) {
    const auto examples = ensemble::load_labeled_examples(config.calibration_examples);
    run.weights = ensemble::calibrate(examples, config.grid_step, run.fusion, config.parallelism).weights;
  } else {
    run.weights = config.weights.normalized();
  }
  run.report.weights = run.weights;
  store.put_document(std::string(kWeightsDocument),
                     {{"alpha", run.weights.alpha}, {"beta", run.weights.beta}, {"gamma", run.weights.gamma},
                      {"fusion_length", config.fusion_length}});
  run.add_time("calibrate", t0);

  t0 = std::chrono::steady_clock::now();
  const Manifest manifest = scan_dataset(config.dataset_root, config.parallelism);
  for (const auto& asset : manifest) {
    const auto existing = store.get_asset(asset.id);
    if (!existing || existing->path != asset.path || existing->duration != asset.duration ||
        existing->incident_ref != asset.incident_ref || existing->flags != asset.flags)
      store.put_asset(asset);
  }
  run.add_time("ingest", t0);
  run.report.assets = manifest.size();

  std::vector<AssetOutcome> outcomes(manifest.size());
  parallel_for(manifest.size(), config.parallelism, [&](std::size_t i) {
    try {
      outcomes[i] = process_asset(run, manifest[i]);
    } catch (const std::exception& e) {
      spdlog::error("asset {} failed: {}", manifest[i].id, e.what());
      std::lock_guard lock(run.mutex);
      run.report.failed_assets.push_back({manifest[i].id, e.what()});
    }
  });

  auto& report = run.report;
  for (const auto& o : outcomes) {
    report.chunks += o.chunks;
    report.streams += o.streams;
    report.segments += o.segments;
    if (o.skipped) ++report.assets_skipped;
    if (o.record_id) {
      ++report.records;
      report.record_ids.push_back(*o.record_id);
    }
  }
  std::sort(report.quarantined.begin(), report.quarantined.end(),
            [](const ChunkFailure& a, const ChunkFailure& b) {
              return std::tie(a.chunk, a.stage) < std::tie(b.chunk, b.stage);
            });
  std::sort(report.failed_assets.begin(), report.failed_assets.end(),
            [](const AssetFailure& a, const AssetFailure& b) { return a.asset_id < b.asset_id; });
  report.separation_invocations = run.separator->invocations();
  report.transcription_invocations = run.transcriber->invocations();
  report.summarization_invocations = run.summarizer->invocations();
  return report;
}

}  // namespace bwc
