// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "bwc/config.hpp"
#include "bwc/error.hpp"
#include "fixtures.hpp"

using namespace bwc;
using bwc::testing::error_code;
using bwc::testing::ScratchDir;

namespace {

const char* kFull = R"(
dataset_root: corpus/
chunk_len: 20
overlap: 2.5
parallelism: 3
store: out/bwc.store
artifacts_dir: /abs/artifacts
retries: 2
separation: {name: ext, invocation: "sep {input}", max_speakers: 3, timeout_s: 1.5}
transcription: {invocation: "mock:lexicon", sidecar_root: truth}
summarization: {name: s, invocation: "mock:extractive"}
ensemble: {alpha: 0.2, beta: 0.5, gamma: 0.3, fusion_length: 4, grid_step: 0.05}
)";

}  // namespace

TEST(Config, ParsesAllFieldsAndResolvesRelativePaths) {
  const auto c = parse_config(kFull, "/base");
  EXPECT_EQ(c.dataset_root, "/base/corpus/");
  EXPECT_DOUBLE_EQ(c.chunk_len, 20.0);
  EXPECT_DOUBLE_EQ(c.overlap, 2.5);
  EXPECT_EQ(c.parallelism, 3u);
  EXPECT_EQ(c.store_path, "/base/out/bwc.store");
  EXPECT_EQ(c.artifacts_dir, "/abs/artifacts");
  EXPECT_EQ(c.retries, 2u);
  EXPECT_EQ(c.separation.name, "ext");
  EXPECT_EQ(c.separation.max_speakers, 3u);
  EXPECT_EQ(c.separation.timeout.count(), 1500);
  EXPECT_EQ(c.transcription.sidecar_root, "/base/truth");
  EXPECT_DOUBLE_EQ(c.weights.beta, 0.5);
  EXPECT_EQ(c.fusion_length, 4u);
  EXPECT_DOUBLE_EQ(c.grid_step, 0.05);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, DefaultsAndSidecarFallback) {
  const auto c = parse_config("dataset_root: data\n", "/b");
  EXPECT_EQ(c.transcription.sidecar_root, "/b/data");
  EXPECT_DOUBLE_EQ(c.chunk_len, 30.0);
  EXPECT_DOUBLE_EQ(c.overlap, 0.0);
  EXPECT_EQ(c.separation.invocation, "mock:band-split");
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, ValidationRejectsBadValues) {
  for (const char* yaml : {"chunk_len: 0", "chunk_len: 10\noverlap: 10", "overlap: -1", "parallelism: 0",
                           "separation: {max_speakers: 0}", "ensemble: {grid_step: 0.7}",
                           "ensemble: {alpha: 0, beta: 0, gamma: 0}", "summarization: {invocation: ''}"}) {
    EXPECT_EQ(error_code([&] { validate(parse_config(yaml)); }), Errc::invalid_argument) << yaml;
  }
  EXPECT_EQ(error_code([] { parse_config("chunk_len: [1, 2"); }), Errc::invalid_argument);
  EXPECT_EQ(error_code([] { parse_config("chunk_len: abc"); }), Errc::invalid_argument);
  EXPECT_EQ(error_code([] { parse_config("separation: {timeout_s: 0}"); }), Errc::invalid_argument);
  EXPECT_EQ(error_code([] { load_config("/nonexistent/bwc.yaml"); }), Errc::invalid_argument);
}

TEST(Config, LoadResolvesAgainstFileDirectory) {
  ScratchDir dir("config");
  std::ofstream(dir / "run.yaml") << "dataset_root: corpus\nstore: s.store\n";
  const auto c = load_config(dir / "run.yaml");
  EXPECT_EQ(c.dataset_root, dir / "corpus");
  EXPECT_EQ(c.store_path, dir / "s.store");
}

TEST(Config, EnvironmentOverridesOnlyTheStore) {
  auto c = parse_config(kFull, "/base");
  ::setenv(kStoreEnvVar, "", 1);
  apply_environment(c);
  EXPECT_EQ(c.store_path, "/base/out/bwc.store");
  ::setenv(kStoreEnvVar, "/env/x.store", 1);
  apply_environment(c);
  ::unsetenv(kStoreEnvVar);
  EXPECT_EQ(c.store_path, "/env/x.store");
  EXPECT_EQ(c.dataset_root, "/base/corpus/");
}

TEST(Config, FingerprintTracksOutputRelevantSettingsOnly) {
  ScratchDir dir("fingerprint");
  const auto base = parse_config(kFull, dir.path());
  const auto fp = fingerprint(base);
  EXPECT_EQ(fp, fingerprint(parse_config(kFull, dir.path())));

  auto c = base;
  c.parallelism = 9;
  c.store_path = "/elsewhere";
  c.retries = 5;
  EXPECT_EQ(fingerprint(c), fp);

  c = base;
  c.chunk_len = 25;
  EXPECT_NE(fingerprint(c), fp);
  c = base;
  c.weights.alpha = 0.9;
  EXPECT_NE(fingerprint(c), fp);
  c = base;
  c.separation.invocation = "mock:passthrough";
  EXPECT_NE(fingerprint(c), fp);

  c = base;
  c.lexicon_path = dir / "lex.txt";
  std::ofstream(c.lexicon_path) << "officer.politeness: please\n";
  const auto with_lexicon = fingerprint(c);
  EXPECT_NE(with_lexicon, fp);
  std::ofstream(c.lexicon_path) << "officer.politeness: please, thanks\n";
  EXPECT_NE(fingerprint(c), with_lexicon);
}

TEST(Config, LexiconBuiltinOrFile) {
  RunConfig c;
  EXPECT_NO_THROW(load_lexicon(c));
  ScratchDir dir("lexicon");
  c.lexicon_path = dir / "missing.txt";
  EXPECT_TRUE(error_code([&] { load_lexicon(c); }).has_value());
}
