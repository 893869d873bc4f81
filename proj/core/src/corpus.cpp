// SPDX-License-Identifier: Apache-2.0
#include "bwc/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "bwc/dsp.hpp"
#include "bwc/error.hpp"
#include "bwc/parallel.hpp"
#include "bwc/wav.hpp"

namespace bwc {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_wav(const fs::path& path) {
  const auto ext = lower(path.extension().string());
  return ext == ".wav" || ext == ".wave";
}

std::string asset_id_for(const fs::path& root, const fs::path& file) {
  fs::path rel = fs::relative(file, root);
  rel.replace_extension();
  return rel.generic_string();
}

// Optional ingestion metadata next to the media file: <stem>.meta.json.
std::optional<std::string> read_incident_ref(const fs::path& media) {
  fs::path meta = media;
  meta.replace_extension(".meta.json");
  std::ifstream in(meta);
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    if (j.contains("incident_ref") && j["incident_ref"].is_string())
      return j["incident_ref"].get<std::string>();
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

VideoAsset probe_asset(const fs::path& root, const fs::path& file) {
  VideoAsset asset;
  asset.id = asset_id_for(root, file);
  asset.path = file;
  asset.incident_ref = read_incident_ref(file);
  if (!is_wav(file)) {
    asset.flags.push_back("unprobeable: container has no supported demuxer");
    return asset;
  }
  try {
    asset.duration = wav::probe(file).duration_seconds();
  } catch (const Error& e) {
    asset.flags.push_back(std::string("unprobeable: ") + e.what());
  }
  return asset;
}

}  // namespace

bool is_media_file(const fs::path& path) {
  static constexpr std::array kExtensions{".wav", ".wave", ".mp4", ".m4v", ".mov", ".avi", ".mkv"};
  const auto ext = lower(path.extension().string());
  return std::find(kExtensions.begin(), kExtensions.end(), ext) != kExtensions.end();
}

Manifest scan_dataset(const fs::path& root, std::size_t parallelism) {
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw Error(Errc::io, "dataset root is not a readable directory: " + root.string());

  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw Error(Errc::io, "cannot read dataset root " + root.string() + ": " + ec.message());
  for (const auto& entry : it) {
    if (entry.is_regular_file() && is_media_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Manifest manifest(files.size());
  parallel_for(files.size(), parallelism,
               [&](std::size_t i) { manifest[i] = probe_asset(root, files[i]); });
  return manifest;
}

DatasetSummary dataset_stats(std::span<const VideoAsset> manifest) {
  DatasetSummary s;
  for (const auto& asset : manifest) {
    if (asset.flagged()) continue;
    if (s.total_videos == 0) {
      s.shortest = s.longest = asset.duration;
    } else {
      s.shortest = std::min(s.shortest, asset.duration);
      s.longest = std::max(s.longest, asset.duration);
    }
    s.total_time += asset.duration;
    ++s.total_videos;
  }
  if (s.total_videos == 0) throw Error(Errc::empty_dataset, "empty dataset");
  s.mean_length = s.total_time / static_cast<double>(s.total_videos);
  // Summation order can push the mean a rounding step outside [min, max].
  s.mean_length = std::clamp(s.mean_length, s.shortest, s.longest);
  return s;
}

AudioTrack extract_audio(const VideoAsset& asset) {
  if (!is_wav(asset.path))
    throw Error(Errc::silent_asset, "silent asset: no decodable audio stream in " +
                                        asset.path.string());
  wav::Audio audio = wav::read(asset.path);
  if (audio.samples.empty())
    throw Error(Errc::silent_asset, "silent asset: empty audio stream in " + asset.path.string());

  AudioTrack track;
  track.asset_id = asset.id;
  track.channels = 1;
  track.sample_rate = kCanonicalSampleRate;
  if (audio.format.channels == 1 && audio.format.sample_rate == kCanonicalSampleRate) {
    track.samples = std::move(audio.samples);
    return track;
  }
  auto mono = dsp::downmix(audio.samples, audio.format.channels);
  track.samples = dsp::resample_linear(mono, audio.format.sample_rate, kCanonicalSampleRate);
  return track;
}

std::vector<AudioChunk> split_audio(const AudioTrack& track, double chunk_len, double overlap) {
  if (!(chunk_len > 0.0)) throw Error(Errc::invalid_argument, "chunk_len must be positive");
  if (!(overlap >= 0.0 && overlap < chunk_len))
    throw Error(Errc::invalid_argument, "overlap must satisfy 0 <= overlap < chunk_len");
  if (track.channels != 1) throw Error(Errc::invalid_argument, "split_audio expects mono audio");
  if (track.samples.empty())
    throw Error(Errc::invalid_argument, "track shorter than one sample: " + track.asset_id);

  const double rate = track.sample_rate;
  const auto len = static_cast<std::size_t>(std::llround(chunk_len * rate));
  const auto hop = len - static_cast<std::size_t>(std::llround(overlap * rate));
  if (len == 0 || hop == 0)
    throw Error(Errc::invalid_argument, "chunk_len/overlap resolve to zero samples");

  const std::size_t n = track.samples.size();
  std::vector<AudioChunk> chunks;
  chunks.reserve(n / hop + 1);
  for (std::size_t begin = 0;; begin += hop) {
    const std::size_t end = std::min(begin + len, n);
    AudioChunk chunk;
    chunk.asset_id = track.asset_id;
    chunk.index = chunks.size();
    chunk.start = static_cast<double>(begin) / rate;
    chunk.end = static_cast<double>(end) / rate;
    chunk.sample_rate = track.sample_rate;
    chunk.samples.assign(track.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                         track.samples.begin() + static_cast<std::ptrdiff_t>(end));
    chunks.push_back(std::move(chunk));
    if (end == n) break;
  }
  return chunks;
}

std::string format_hms(double seconds) {
  const auto total = static_cast<long long>(std::llround(std::max(0.0, seconds)));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", total / 3600, (total / 60) % 60,
                total % 60);
  return buf;
}

std::string format_summary_table(const DatasetSummary& s) {
  std::ostringstream out;
  char line[96];
  auto row = [&](const char* measure, const std::string& value) {
    std::snprintf(line, sizeof line, "%-22s %s\n", measure, value.c_str());
    out << line;
  };
  row("Measure", "Value");
  row("Total Videos", std::to_string(s.total_videos));
  row("Shortest Video", format_hms(s.shortest));
  row("Longest Video", format_hms(s.longest));
  row("Average Video Length", format_hms(s.mean_length));
  row("Total Video Time", format_hms(s.total_time));
  return out.str();
}

void write_manifest(std::ostream& out, std::span<const VideoAsset> manifest) {
  for (const auto& a : manifest) {
    json j{{"id", a.id},
           {"path", a.path.string()},
           {"duration_s", a.duration},
           {"incident_ref", a.incident_ref ? json(*a.incident_ref) : json(nullptr)},
           {"flags", a.flags}};
    out << j.dump() << '\n';
  }
}

void save_manifest(const fs::path& path, std::span<const VideoAsset> manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write manifest " + path.string());
  write_manifest(out, manifest);
}

Manifest read_manifest(std::istream& in) {
  Manifest manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      VideoAsset a;
      a.id = j.at("id").get<std::string>();
      a.path = j.at("path").get<std::string>();
      a.duration = j.at("duration_s").get<double>();
      if (j.contains("incident_ref") && j["incident_ref"].is_string())
        a.incident_ref = j["incident_ref"].get<std::string>();
      if (j.contains("flags")) a.flags = j["flags"].get<std::vector<std::string>>();
      if (a.duration < 0.0) throw Error(Errc::corrupt_data, "negative duration");
      manifest.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw Error(Errc::corrupt_data,
                  "manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return manifest;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read manifest " + path.string());
  return read_manifest(in);
}

}  // namespace bwc
