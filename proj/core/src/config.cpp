// SPDX-License-Identifier: Apache-2.0
#include "bwc/config.hpp"

#include <yaml-cpp/yaml.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "bwc/error.hpp"

namespace bwc {
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::chrono::milliseconds seconds_node(const YAML::Node& node, std::chrono::milliseconds fallback) {
  if (!node) return fallback;
  const double s = node.as<double>();
  if (!(s > 0.0)) throw Error(Errc::invalid_argument, "timeout_s must be positive");
  return std::chrono::milliseconds(static_cast<long long>(std::llround(s * 1000.0)));
}

std::string file_digest(const fs::path& path) {
  if (path.empty()) return "builtin";
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing:" + path.string();
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  return std::to_string(::crc32(0L, reinterpret_cast<const Bytef*>(text.data()),
                                static_cast<uInt>(text.size())));
}

}  // namespace

void validate(const RunConfig& c) {
  if (!(c.chunk_len > 0.0) || !std::isfinite(c.chunk_len))
    throw Error(Errc::invalid_argument, "chunk_len must be positive");
  if (!(c.overlap >= 0.0) || !(c.overlap < c.chunk_len))
    throw Error(Errc::invalid_argument, "overlap must satisfy 0 <= overlap < chunk_len");
  if (c.parallelism < 1) throw Error(Errc::invalid_argument, "parallelism must be at least 1");
  if (c.separation.max_speakers < 1) throw Error(Errc::invalid_argument, "max_speakers must be at least 1");
  if (c.separation.invocation.empty() || c.transcription.invocation.empty() ||
      c.summarization.invocation.empty())
    throw Error(Errc::invalid_argument, "every backend needs an invocation");
  if (c.store_path.empty()) throw Error(Errc::invalid_argument, "store path is empty");
  if (!(c.grid_step > 0.0 && c.grid_step <= 0.5))
    throw Error(Errc::invalid_argument, "grid_step must lie in (0, 0.5]");
  (void)c.weights.normalized();
}

RunConfig parse_config(const std::string& yaml, const fs::path& base) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  RunConfig c;
  try {
    if (auto n = root["dataset_root"]) c.dataset_root = resolve(base, n.as<std::string>());
    if (auto n = root["chunk_len"]) c.chunk_len = n.as<double>();
    if (auto n = root["overlap"]) c.overlap = n.as<double>();
    if (auto n = root["parallelism"]) c.parallelism = n.as<std::size_t>();
    if (auto n = root["store"]) c.store_path = resolve(base, n.as<std::string>());
    if (auto n = root["artifacts_dir"]) c.artifacts_dir = resolve(base, n.as<std::string>());
    if (auto n = root["dictionary"]) c.dictionary_path = resolve(base, n.as<std::string>());
    if (auto n = root["lexicon"]) c.lexicon_path = resolve(base, n.as<std::string>());
    if (auto n = root["themes"]) c.themes_path = resolve(base, n.as<std::string>());
    if (auto n = root["retries"]) c.retries = n.as<std::size_t>();

    if (auto s = root["separation"]) {
      if (s["name"]) c.separation.name = s["name"].as<std::string>();
      if (s["invocation"]) c.separation.invocation = s["invocation"].as<std::string>();
      if (s["max_speakers"]) c.separation.max_speakers = s["max_speakers"].as<std::size_t>();
      c.separation.timeout = seconds_node(s["timeout_s"], c.separation.timeout);
    }
    if (auto t = root["transcription"]) {
      if (t["name"]) c.transcription.name = t["name"].as<std::string>();
      if (t["invocation"]) c.transcription.invocation = t["invocation"].as<std::string>();
      if (t["sidecar_root"]) c.transcription.sidecar_root = resolve(base, t["sidecar_root"].as<std::string>());
      c.transcription.timeout = seconds_node(t["timeout_s"], c.transcription.timeout);
    }
    if (auto s = root["summarization"]) {
      if (s["name"]) c.summarization.name = s["name"].as<std::string>();
      if (s["invocation"]) c.summarization.invocation = s["invocation"].as<std::string>();
      c.summarization.timeout = seconds_node(s["timeout_s"], c.summarization.timeout);
    }
    if (auto e = root["ensemble"]) {
      if (e["alpha"]) c.weights.alpha = e["alpha"].as<double>();
      if (e["beta"]) c.weights.beta = e["beta"].as<double>();
      if (e["gamma"]) c.weights.gamma = e["gamma"].as<double>();
      if (e["fusion_length"]) c.fusion_length = e["fusion_length"].as<std::size_t>();
      if (e["calibration_examples"])
        c.calibration_examples = resolve(base, e["calibration_examples"].as<std::string>());
      if (e["grid_step"]) c.grid_step = e["grid_step"].as<double>();
    }
  } catch (const YAML::Exception& e) {
    throw Error(Errc::invalid_argument, std::string("config: ") + e.what());
  }
  if (c.transcription.sidecar_root.empty()) c.transcription.sidecar_root = c.dataset_root;
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_argument, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void apply_environment(RunConfig& config) {
  if (const char* v = std::getenv(kStoreEnvVar); v != nullptr && *v != '\0') config.store_path = v;
}

std::string fingerprint(const RunConfig& c) {
  const nlohmann::json j = {
      {"chunk_len", c.chunk_len},
      {"overlap", c.overlap},
      {"separation", {c.separation.name, c.separation.invocation, c.separation.max_speakers}},
      {"transcription", {c.transcription.name, c.transcription.invocation,
                         c.transcription.sidecar_root.string()}},
      {"summarization", {c.summarization.name, c.summarization.invocation}},
      {"lexicon", file_digest(c.lexicon_path)},
      {"themes", c.themes_path.empty() ? std::string("none") : file_digest(c.themes_path)},
      {"weights", {c.weights.alpha, c.weights.beta, c.weights.gamma}},
      {"fusion_length", c.fusion_length},
      {"calibration", c.calibration_examples.empty() ? std::string("none")
                                                     : file_digest(c.calibration_examples)},
      {"grid_step", c.grid_step},
  };
  const auto text = j.dump();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx",
                ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
  return buf;
}

Lexicon load_lexicon(const RunConfig& config) {
  return config.lexicon_path.empty() ? Lexicon::builtin() : Lexicon::load(config.lexicon_path);
}

}  // namespace bwc
