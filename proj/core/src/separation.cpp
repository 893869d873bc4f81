// SPDX-License-Identifier: Apache-2.0
#include "bwc/separation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "bwc/dsp.hpp"
#include "bwc/process.hpp"
#include "bwc/wav.hpp"
#include "mock_spec.hpp"

namespace bwc {
namespace fs = std::filesystem;

namespace {

constexpr double kDropBandRatio = 1e-6;

ChunkRef ref_of(const AudioChunk& chunk) { return {chunk.asset_id, chunk.index}; }

void maybe_fail(const std::optional<std::size_t>& fail_chunk, const AudioChunk& chunk) {
  if (fail_chunk && *fail_chunk == chunk.index)
    throw BackendError(Errc::backend_failure, ref_of(chunk), "injected separation failure");
}

}  // namespace

std::vector<std::vector<float>> PassthroughSeparator::run(const AudioChunk& chunk, std::size_t) {
  count_invocation();
  maybe_fail(fail_chunk_, chunk);
  return {chunk.samples};
}

std::vector<std::vector<float>> BandSplitSeparator::run(const AudioChunk& chunk,
                                                        std::size_t max_speakers) {
  count_invocation();
  maybe_fail(fail_chunk_, chunk);
  const double total = dsp::mean_square(chunk.samples);
  if (max_speakers < 2 || total <= 0.0) return {chunk.samples};

  const double cutoff = dsp::global_spectral_centroid(chunk.samples, chunk.sample_rate);
  auto bands = dsp::band_split(chunk.samples, chunk.sample_rate, cutoff);
  const double low = dsp::mean_square(bands.low);
  const double high = dsp::mean_square(bands.high);
  if (low < kDropBandRatio * total || high < kDropBandRatio * total) return {chunk.samples};
  return {std::move(bands.low), std::move(bands.high)};
}

std::vector<std::vector<float>> ProcessSeparator::run(const AudioChunk& chunk,
                                                      std::size_t max_speakers) {
  count_invocation();
  const ChunkRef ref = ref_of(chunk);
  process::TempDir work("bwc-sep");
  const fs::path input = work.path() / "chunk.wav";
  const fs::path out_dir = work.path() / "out";
  fs::create_directories(out_dir);
  wav::write_pcm16(input, chunk.sample_rate, 1, chunk.samples);

  const auto argv = process::expand(descriptor_.invocation,
                                    {{"input", input.string()},
                                     {"max_speakers", std::to_string(max_speakers)},
                                     {"out_dir", out_dir.string()},
                                     {"asset_id", chunk.asset_id},
                                     {"chunk_index", std::to_string(chunk.index)}});
  const auto result = process::run(argv, descriptor_.timeout);
  if (result.timed_out) throw BackendError(Errc::backend_timeout, ref, "separation backend timed out");
  if (!result.ok())
    throw BackendError(Errc::backend_failure, ref,
                       "separation backend exited with status " +
                           std::to_string(result.exit_code) + ": " + result.stderr_text);

  std::ifstream manifest(out_dir / "streams.jsonl");
  if (!manifest) throw BackendError(Errc::backend_failure, ref, "separation backend wrote no streams.jsonl");
  std::vector<std::pair<std::size_t, std::vector<float>>> indexed;
  std::string line;
  try {
    while (std::getline(manifest, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const auto file = j.at("wav").get<std::string>();
      if (file.find('/') != std::string::npos)
        throw BackendError(Errc::backend_failure, ref, "stream path escapes out_dir: " + file);
      auto audio = wav::read(out_dir / file);
      if (audio.format.channels != 1 || audio.format.sample_rate != chunk.sample_rate)
        throw BackendError(Errc::backend_failure, ref, "stream " + file + " is not mono at the chunk rate");
      indexed.emplace_back(j.at("index").get<std::size_t>(), std::move(audio.samples));
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(Errc::backend_failure, ref, std::string("bad streams.jsonl: ") + e.what());
  } catch (const BackendError&) {
    throw;
  } catch (const Error& e) {
    throw BackendError(Errc::backend_failure, ref, e.what());
  }
  std::stable_sort(indexed.begin(), indexed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::vector<float>> streams;
  streams.reserve(indexed.size());
  for (auto& [_, samples] : indexed) streams.push_back(std::move(samples));
  return streams;
}

std::unique_ptr<SeparationBackend> make_separation_backend(
    const SeparationBackendDescriptor& descriptor) {
  if (descriptor.max_speakers < 1)
    throw Error(Errc::invalid_argument, "max_speakers must be at least 1");
  if (auto mock = detail::parse_mock(descriptor.invocation)) {
    if (mock->kind == "passthrough") return std::make_unique<PassthroughSeparator>(mock->fail_chunk);
    if (mock->kind == "band-split") return std::make_unique<BandSplitSeparator>(mock->fail_chunk);
    throw Error(Errc::invalid_argument, "unknown separation mock: " + mock->kind);
  }
  if (process::split_command(descriptor.invocation).empty())
    throw Error(Errc::invalid_argument, "empty separation invocation");
  return std::make_unique<ProcessSeparator>(descriptor);
}

std::vector<SpeakerStream> separate(const AudioChunk& chunk, SeparationBackend& backend,
                                    std::size_t max_speakers) {
  const ChunkRef ref = ref_of(chunk);
  if (chunk.samples.empty()) throw Error(Errc::invalid_argument, "empty chunk " + to_string(ref));
  if (max_speakers < 1) throw Error(Errc::invalid_argument, "max_speakers must be at least 1");

  auto raw = backend.run(chunk, max_speakers);
  if (raw.empty()) throw BackendError(Errc::nothing_separated, ref, "separation produced nothing");
  if (raw.size() > max_speakers)
    throw BackendError(Errc::backend_failure, ref,
                       "backend returned " + std::to_string(raw.size()) +
                           " streams, cap is " + std::to_string(max_speakers));

  std::vector<SpeakerStream> streams;
  streams.reserve(raw.size());
  for (auto& samples : raw) {
    if (samples.size() != chunk.samples.size())
      throw BackendError(Errc::backend_failure, ref, "stream length differs from chunk length");
    SpeakerStream s;
    s.chunk_ref = ref;
    s.chunk_start = chunk.start;
    s.sample_rate = chunk.sample_rate;
    s.energy = dsp::mean_square(samples);
    s.samples = std::move(samples);
    streams.push_back(std::move(s));
  }
  std::stable_sort(streams.begin(), streams.end(),
                   [](const SpeakerStream& a, const SpeakerStream& b) { return a.energy > b.energy; });
  for (std::size_t i = 0; i < streams.size(); ++i) streams[i].local_speaker = i;
  return streams;
}

StreamSignature signature_of(const SpeakerStream& stream) {
  return {dsp::rms(stream.samples), dsp::zero_crossing_rate(stream.samples),
          dsp::spectral_centroid(stream.samples, stream.sample_rate)};
}

double signature_distance(const StreamSignature& a, const StreamSignature& b,
                          std::uint32_t sample_rate) noexcept {
  const double nyquist = sample_rate > 0 ? sample_rate / 2.0 : 1.0;
  const double d0 = a.rms - b.rms;
  const double d1 = a.zero_crossing_rate - b.zero_crossing_rate;
  const double d2 = (a.centroid_hz - b.centroid_hz) / nyquist;
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

std::optional<std::size_t> SpeakerLinkage::global_for(std::size_t chunk_index,
                                                      std::size_t local) const {
  for (const auto& links : chunks) {
    if (links.chunk_index != chunk_index) continue;
    if (local < links.global.size()) return links.global[local];
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

constexpr std::size_t kNewLabel = std::numeric_limits<std::size_t>::max();

// Exhaustive search over injective assignments of streams to known labels.
// Streams are visited in local order and labels in ascending order, and only
// a strictly cheaper assignment replaces the incumbent, so exact ties keep
// the first (index-ordered) assignment.
class Assigner {
 public:
  Assigner(const std::vector<std::vector<double>>& cost, std::size_t known, std::size_t fresh)
      : cost_(cost), known_(known), fresh_needed_(fresh), used_(known, false),
        current_(cost.size(), kNewLabel) {}

  std::vector<std::size_t> solve() {
    visit(0, 0.0, 0);
    return best_;
  }

 private:
  void visit(std::size_t stream, double acc, std::size_t fresh_used) {
    if (acc >= best_cost_) return;
    if (stream == cost_.size()) {
      if (fresh_used != fresh_needed_) return;
      best_cost_ = acc;
      best_ = current_;
      return;
    }
    for (std::size_t g = 0; g < known_; ++g) {
      if (used_[g]) continue;
      used_[g] = true;
      current_[stream] = g;
      visit(stream + 1, acc + cost_[stream][g], fresh_used);
      used_[g] = false;
    }
    if (fresh_used < fresh_needed_) {
      current_[stream] = kNewLabel;
      visit(stream + 1, acc, fresh_used + 1);
    }
    current_[stream] = kNewLabel;
  }

  const std::vector<std::vector<double>>& cost_;
  std::size_t known_;
  std::size_t fresh_needed_;
  std::vector<bool> used_;
  std::vector<std::size_t> current_;
  std::vector<std::size_t> best_;
  double best_cost_ = std::numeric_limits<double>::infinity();
};

}  // namespace

SpeakerLinkage link_speakers(std::span<const std::vector<SpeakerStream>> chunks,
                             LinkageMethod method) {
  SpeakerLinkage linkage;
  linkage.chunks.reserve(chunks.size());

  if (method == LinkageMethod::index_order) {
    for (const auto& streams : chunks) {
      ChunkLinks links;
      links.chunk_index = streams.empty() ? 0 : streams.front().chunk_ref.chunk_index;
      for (std::size_t i = 0; i < streams.size(); ++i) {
        links.global.push_back(i);
        links.confidence.push_back(1.0);
      }
      linkage.global_count = std::max(linkage.global_count, streams.size());
      linkage.chunks.push_back(std::move(links));
    }
    return linkage;
  }

  std::vector<StreamSignature> reference;  // most recent signature per label
  std::uint32_t rate = kCanonicalSampleRate;
  for (const auto& streams : chunks) {
    ChunkLinks links;
    links.chunk_index = streams.empty() ? 0 : streams.front().chunk_ref.chunk_index;
    if (!streams.empty()) rate = streams.front().sample_rate;

    std::vector<StreamSignature> sigs;
    sigs.reserve(streams.size());
    for (const auto& s : streams) sigs.push_back(signature_of(s));

    const std::size_t known = reference.size();
    const std::size_t fresh = streams.size() > known ? streams.size() - known : 0;
    std::vector<std::vector<double>> cost(streams.size(), std::vector<double>(known));
    for (std::size_t i = 0; i < streams.size(); ++i)
      for (std::size_t g = 0; g < known; ++g)
        cost[i][g] = signature_distance(sigs[i], reference[g], rate);

    const auto assignment = Assigner(cost, known, fresh).solve();
    links.global.resize(streams.size());
    links.confidence.resize(streams.size());
    for (std::size_t i = 0; i < streams.size(); ++i) {
      if (assignment[i] == kNewLabel) {
        links.global[i] = reference.size();
        links.confidence[i] = 1.0;
        reference.push_back(sigs[i]);
        continue;
      }
      const std::size_t g = assignment[i];
      const double own = cost[i][g];
      double alternative = 1.0;
      if (known > 1) {
        alternative = std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < known; ++h)
          if (h != g) alternative = std::min(alternative, cost[i][h]);
      }
      links.global[i] = g;
      links.confidence[i] = own + alternative > 0.0 ? alternative / (own + alternative) : 0.5;
    }
    for (std::size_t i = 0; i < streams.size(); ++i)
      if (assignment[i] != kNewLabel) reference[assignment[i]] = sigs[i];
    linkage.chunks.push_back(std::move(links));
  }
  linkage.global_count = reference.size();
  return linkage;
}

void apply_linkage(std::span<std::vector<SpeakerStream>> chunks, const SpeakerLinkage& linkage) {
  for (auto& streams : chunks)
    for (auto& s : streams) s.global_speaker = linkage.global_for(s.chunk_ref.chunk_index, s.local_speaker);
}

}  // namespace bwc
