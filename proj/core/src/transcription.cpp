// SPDX-License-Identifier: Apache-2.0
#include "bwc/transcription.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

#include "bwc/dsp.hpp"
#include "bwc/process.hpp"
#include "bwc/wav.hpp"
#include "mock_spec.hpp"

namespace bwc {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::officer: return "officer";
    case Role::civilian: return "civilian";
    case Role::unknown: return "unknown";
  }
  return "unknown";
}

Role role_from_string(std::string_view text) {
  if (text == "officer") return Role::officer;
  if (text == "civilian") return Role::civilian;
  if (text == "unknown") return Role::unknown;
  throw Error(Errc::invalid_argument, "unknown role: " + std::string(text));
}

std::vector<SidecarUtterance> read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read sidecar " + path.string());
  std::vector<SidecarUtterance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      SidecarUtterance u;
      u.speaker = j.at("speaker").get<std::string>();
      u.tone_hz = j.at("tone_hz").get<double>();
      u.start = j.at("start").get<double>();
      u.end = j.at("end").get<double>();
      u.text = j.at("text").get<std::string>();
      out.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw Error(Errc::corrupt_data, path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_sidecar(const fs::path& path, std::span<const SidecarUtterance> utterances) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write sidecar " + path.string());
  for (const auto& u : utterances)
    out << json{{"speaker", u.speaker}, {"tone_hz", u.tone_hz}, {"start", u.start},
                {"end", u.end}, {"text", u.text}}
               .dump()
        << '\n';
}

std::vector<LocalUtterance> MockLexiconTranscriber::run(const SpeakerStream& stream) {
  count_invocation();
  if (fail_chunk_ && *fail_chunk_ == stream.chunk_ref.chunk_index)
    throw BackendError(Errc::backend_failure, stream.chunk_ref, "injected transcription failure");
  if (dsp::rms(stream.samples) < 1e-4) return {};

  const auto truth = read_sidecar(root_ / (stream.chunk_ref.asset_id + ".truth.jsonl"));
  if (truth.empty()) return {};
  const double centroid = dsp::spectral_centroid(stream.samples, stream.sample_rate);
  const SidecarUtterance* nearest = &truth.front();
  for (const auto& u : truth)
    if (std::abs(u.tone_hz - centroid) < std::abs(nearest->tone_hz - centroid)) nearest = &u;
  const std::string& voice = nearest->speaker;

  const double window_start = stream.chunk_start;
  const double window_end = stream.chunk_start + stream.duration();
  std::vector<LocalUtterance> out;
  for (const auto& u : truth) {
    if (u.speaker != voice) continue;
    const double mid = 0.5 * (u.start + u.end);
    if (mid < window_start || mid >= window_end) continue;
    out.push_back({std::max(u.start, window_start) - window_start,
                   std::min(u.end, window_end) - window_start, u.text});
  }
  return out;
}

std::vector<LocalUtterance> ProcessTranscriber::run(const SpeakerStream& stream) {
  count_invocation();
  process::TempDir work("bwc-asr");
  const fs::path input = work.path() / "stream.wav";
  const fs::path output = work.path() / "segments.jsonl";
  wav::write_pcm16(input, stream.sample_rate, 1, stream.samples);

  const auto argv = process::expand(
      descriptor_.invocation,
      {{"input", input.string()},
       {"output", output.string()},
       {"asset_id", stream.chunk_ref.asset_id},
       {"chunk_index", std::to_string(stream.chunk_ref.chunk_index)},
       {"speaker", std::to_string(stream.global_speaker.value_or(stream.local_speaker))}});
  const auto result = process::run(argv, descriptor_.timeout);
  if (result.timed_out)
    throw BackendError(Errc::backend_timeout, stream.chunk_ref, "transcription backend timed out");
  if (!result.ok())
    throw BackendError(Errc::backend_failure, stream.chunk_ref,
                       "transcription backend exited with status " +
                           std::to_string(result.exit_code) + ": " + result.stderr_text);

  std::ifstream in(output);
  if (!in) return {};
  std::vector<LocalUtterance> out;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      out.push_back({j.at("start").get<double>(), j.at("end").get<double>(),
                     j.at("text").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw BackendError(Errc::backend_failure, stream.chunk_ref,
                       std::string("bad transcription output: ") + e.what());
  }
  return out;
}

std::unique_ptr<TranscriptionBackend> make_transcription_backend(
    const TranscriptionBackendDescriptor& descriptor) {
  if (auto mock = detail::parse_mock(descriptor.invocation)) {
    if (mock->kind == "lexicon")
      return std::make_unique<MockLexiconTranscriber>(descriptor.sidecar_root, mock->fail_chunk);
    throw Error(Errc::invalid_argument, "unknown transcription mock: " + mock->kind);
  }
  if (process::split_command(descriptor.invocation).empty())
    throw Error(Errc::invalid_argument, "empty transcription invocation");
  return std::make_unique<ProcessTranscriber>(descriptor);
}

std::vector<TranscriptSegment> transcribe(const SpeakerStream& stream, TranscriptionBackend& backend) {
  if (stream.samples.empty())
    throw Error(Errc::invalid_argument, "empty stream " + to_string(stream.chunk_ref));

  const auto utterances = backend.run(stream);
  const double duration = stream.duration();
  std::vector<TranscriptSegment> segments;
  segments.reserve(utterances.size());
  for (const auto& u : utterances) {
    const double start = std::max(0.0, u.start);
    const double end = std::min(duration, u.end);
    if (!(start < end)) continue;
    TranscriptSegment seg;
    seg.asset_id = stream.chunk_ref.asset_id;
    seg.chunk_index = stream.chunk_ref.chunk_index;
    seg.local_speaker = stream.local_speaker;
    seg.global_speaker = stream.global_speaker.value_or(stream.local_speaker);
    seg.start = stream.chunk_start + start;
    seg.end = stream.chunk_start + end;
    seg.text = u.text;
    seg.backend_name = std::string(backend.name());
    segments.push_back(std::move(seg));
  }
  return segments;
}

namespace {

auto canonical_key(const TranscriptSegment& s) {
  return std::tie(s.start, s.global_speaker, s.end, s.chunk_index, s.local_speaker, s.text,
                  s.backend_name);
}

}  // namespace

MergedTranscript merge_transcripts(std::vector<TranscriptSegment> segments,
                                   const SpeakerLinkage& linkage) {
  MergedTranscript merged;
  if (!segments.empty()) merged.asset_id = segments.front().asset_id;
  for (auto& seg : segments) {
    if (seg.asset_id != merged.asset_id)
      throw Error(Errc::invalid_argument,
                  "merge_transcripts: mixed asset ids " + merged.asset_id + " and " + seg.asset_id);
    if (auto g = linkage.global_for(seg.chunk_index, seg.local_speaker)) seg.global_speaker = *g;
  }
  std::sort(segments.begin(), segments.end(),
            [](const TranscriptSegment& a, const TranscriptSegment& b) {
              return canonical_key(a) < canonical_key(b);
            });
  for (const auto& seg : segments) merged.roles.emplace(seg.global_speaker, Role::unknown);
  merged.segments = std::move(segments);
  return merged;
}

MergedTranscript attribute_roles(MergedTranscript transcript, std::span<const SpeakerStream> streams) {
  struct Tally {
    double energy_sum = 0.0;
    std::size_t stream_count = 0;
    double speaking_time = 0.0;
  };
  std::map<std::size_t, Tally> tally;
  for (const auto& s : streams) {
    auto& t = tally[s.global_speaker.value_or(s.local_speaker)];
    t.energy_sum += s.energy;
    ++t.stream_count;
  }
  for (const auto& seg : transcript.segments) tally[seg.global_speaker].speaking_time += seg.end - seg.start;
  for (const auto& [speaker, role] : transcript.roles) tally.try_emplace(speaker);

  bool human_officer = false;
  for (std::size_t speaker : transcript.human_roles)
    if (transcript.roles[speaker] == Role::officer) human_officer = true;

  std::optional<std::size_t> officer;
  double best = -1.0;
  bool tied = false;
  for (const auto& [speaker, t] : tally) {
    if (transcript.human_roles.contains(speaker)) continue;
    const double mean_energy = t.stream_count > 0 ? t.energy_sum / t.stream_count : 0.0;
    const double score = mean_energy * t.speaking_time;
    if (score > best) {
      best = score;
      officer = speaker;
      tied = false;
    } else if (score == best) {
      tied = true;
    }
  }
  if (tied && officer && !human_officer)
    spdlog::info("attribute_roles[{}]: energy x time tie at {}, officer = lowest label {}",
                 transcript.asset_id, best, *officer);

  for (const auto& [speaker, t] : tally) {
    if (transcript.human_roles.contains(speaker)) continue;
    transcript.roles[speaker] =
        (!human_officer && officer && speaker == *officer) ? Role::officer : Role::civilian;
  }
  return transcript;
}

namespace {

json segment_json(const TranscriptSegment& s) {
  return json{{"kind", "segment"},          {"asset_id", s.asset_id},
              {"chunk", s.chunk_index},     {"speaker", s.global_speaker},
              {"local_speaker", s.local_speaker}, {"start_s", s.start},
              {"end_s", s.end},             {"text", s.text},
              {"backend", s.backend_name}};
}

}  // namespace

void write_transcript(std::ostream& out, const MergedTranscript& t) {
  json roles = json::object();
  for (const auto& [speaker, role] : t.roles) roles[std::to_string(speaker)] = to_string(role);
  const json header{{"kind", "transcript"},
                    {"asset_id", t.asset_id},
                    {"revision", t.revision},
                    {"roles", roles},
                    {"human_roles", t.human_roles},
                    {"correction_log", t.correction_log}};
  out << header.dump() << '\n';
  for (const auto& s : t.segments) out << segment_json(s).dump() << '\n';
}

std::string transcript_to_jsonl(const MergedTranscript& transcript) {
  std::ostringstream out;
  write_transcript(out, transcript);
  return out.str();
}

MergedTranscript read_transcript(std::istream& in) {
  MergedTranscript t;
  std::string line;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const auto kind = j.value("kind", std::string("segment"));
      if (kind == "transcript") {
        t.asset_id = j.at("asset_id").get<std::string>();
        t.revision = j.at("revision").get<std::uint64_t>();
        for (const auto& [key, value] : j.at("roles").items())
          t.roles[std::stoul(key)] = role_from_string(value.get<std::string>());
        t.human_roles = j.value("human_roles", std::set<std::size_t>{});
        t.correction_log = j.value("correction_log", std::vector<std::string>{});
        have_header = true;
        continue;
      }
      TranscriptSegment s;
      s.asset_id = j.at("asset_id").get<std::string>();
      s.chunk_index = j.at("chunk").get<std::size_t>();
      s.global_speaker = j.at("speaker").get<std::size_t>();
      s.local_speaker = j.value("local_speaker", s.global_speaker);
      s.start = j.at("start_s").get<double>();
      s.end = j.at("end_s").get<double>();
      s.text = j.at("text").get<std::string>();
      s.backend_name = j.value("backend", std::string());
      if (!have_header && t.asset_id.empty()) t.asset_id = s.asset_id;
      t.segments.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt_data, std::string("transcript: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(Errc::corrupt_data, std::string("transcript: ") + e.what());
  }
  return t;
}

MergedTranscript transcript_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  return read_transcript(in);
}

}  // namespace bwc
