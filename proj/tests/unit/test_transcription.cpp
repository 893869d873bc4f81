// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "bwc/corpus.hpp"
#include "bwc/transcription.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bwc;
using bwc::testing::error_code;
using bwc::testing::ScratchDir;

namespace {

SpeakerStream stream_for(const AudioChunk& chunk, std::vector<float> samples, std::size_t local) {
  SpeakerStream s;
  s.chunk_ref = {chunk.asset_id, chunk.index};
  s.chunk_start = chunk.start;
  s.local_speaker = local;
  s.samples = std::move(samples);
  s.energy = oracle::mean_square(s.samples);
  return s;
}

}  // namespace

TEST(Sidecar, RoundTrip) {
  ScratchDir dir("sidecar");
  const std::vector<SidecarUtterance> u{{"officer", 300, 1.0, 2.0, "Hello."}, {"civilian", 1200, 2.5, 3.0, "Hi \"there\""}};
  write_sidecar(dir / "a.truth.jsonl", u);
  const auto back = read_sidecar(dir / "a.truth.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].text, "Hi \"there\"");
  EXPECT_DOUBLE_EQ(back[1].tone_hz, 1200);
  EXPECT_EQ(error_code([&] { read_sidecar(dir / "missing.jsonl"); }), Errc::io);
}

TEST(MockLexicon, TranscribesEachVoiceOfThePipelineCorpus) {
  ScratchDir dir("mock-lex");
  const auto corpus = bwc::testing::make_pipeline_corpus(dir.path());
  const auto manifest = scan_dataset(dir.path());
  ASSERT_EQ(manifest.size(), 3u);
  MockLexiconTranscriber transcriber(dir.path());
  BandSplitSeparator band;

  for (const auto& asset : manifest) {
    const auto chunks = split_audio(extract_audio(asset), 30.0);
    ASSERT_EQ(chunks.size(), corpus.chunks_per_asset.at(asset.id));
    std::vector<TranscriptSegment> all;
    for (const auto& chunk : chunks) {
      const auto streams = separate(chunk, band, 2);
      ASSERT_EQ(streams.size(), 2u) << asset.id << " chunk " << chunk.index;
      for (const auto& s : streams) {
        const auto segs = transcribe(s, transcriber);
        ASSERT_EQ(segs.size(), 1u);
        EXPECT_GE(segs[0].start, chunk.start);
        EXPECT_LE(segs[0].end, chunk.end + 1e-9);
        all.insert(all.end(), segs.begin(), segs.end());
      }
    }
    // Every sidecar utterance is recovered with its absolute timing.
    const auto& truth = corpus.utterances.at(asset.id);
    ASSERT_EQ(all.size(), truth.size());
    for (const auto& u : truth) {
      const bool found = std::any_of(all.begin(), all.end(), [&](const TranscriptSegment& s) {
        return s.text == u.text && std::abs(s.start - u.start) < 1e-6 && std::abs(s.end - u.end) < 1e-6;
      });
      EXPECT_TRUE(found) << asset.id << ": " << u.text;
    }
  }
}

TEST(MockLexicon, SilenceAndInjectedFailure) {
  ScratchDir dir("mock-lex-2");
  write_sidecar(dir / "x.truth.jsonl", std::vector<SidecarUtterance>{{"a", 300, 0.1, 0.4, "words"}});
  AudioChunk chunk;
  chunk.asset_id = "x";
  chunk.index = 2;
  MockLexiconTranscriber t(dir.path(), 2);
  const auto s = stream_for(chunk, std::vector<float>(8000, 0.0f), 0);
  EXPECT_EQ(error_code([&] { transcribe(s, t); }), Errc::backend_failure);
  MockLexiconTranscriber ok(dir.path());
  EXPECT_TRUE(transcribe(s, ok).empty());
}

TEST(Transcribe, OffsetsAndClipsBackendTimes) {
  class Fixed final : public TranscriptionBackend {
   public:
    std::string_view name() const noexcept override { return "fixed"; }
    std::vector<LocalUtterance> run(const SpeakerStream&) override {
      count_invocation();
      return {{0.5, 1.0, "inside"}, {0.9, 5.0, "clipped"}, {3.0, 4.0, "outside"}, {1.2, 1.2, ""}};
    }
  } backend;
  AudioChunk chunk;
  chunk.asset_id = "a";
  chunk.index = 4;
  chunk.start = 120.0;
  const auto segs = transcribe(stream_for(chunk, bwc::testing::sine(300, 2.0, 16000, 0.5), 1), backend);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_DOUBLE_EQ(segs[0].start, 120.5);
  EXPECT_DOUBLE_EQ(segs[0].end, 121.0);
  EXPECT_DOUBLE_EQ(segs[1].end, 122.0);
  EXPECT_EQ(segs[1].chunk_index, 4u);
  EXPECT_EQ(segs[1].local_speaker, 1u);
  EXPECT_EQ(segs[1].backend_name, "fixed");
}

TEST(ProcessTranscriber, RunsExternalCommand) {
  TranscriptionBackendDescriptor d;
  d.name = "ext";
  d.invocation = std::string(BWC_MOCK_BACKEND) + " transcribe {input} {output} {asset_id} {chunk_index} {speaker}";
  auto backend = make_transcription_backend(d);
  AudioChunk chunk;
  chunk.asset_id = "cam/7";
  chunk.index = 3;
  chunk.start = 90.0;
  const auto segs = transcribe(stream_for(chunk, bwc::testing::sine(300, 1.0, 16000, 0.5), 1), *backend);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].text, "external cam/7 chunk 3 speaker 1.");
  EXPECT_DOUBLE_EQ(segs[0].start, 90.0);
  EXPECT_NEAR(segs[0].end, 91.0, 1e-9);

  d.invocation = std::string(BWC_MOCK_BACKEND) + " exit 2 boom";
  auto failing = make_transcription_backend(d);
  EXPECT_EQ(error_code([&] { transcribe(stream_for(chunk, std::vector<float>(16000, 0.1f), 0), *failing); }),
            Errc::backend_failure);
}

TEST(Merge, CanonicalOrderForAllPermutations) {
  const auto base = bwc::testing::merge_fixture_segments();
  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<MergedTranscript> first;
  do {
    std::vector<TranscriptSegment> segs;
    for (auto i : order) segs.push_back(base[i]);
    auto merged = merge_transcripts(segs, {});
    if (!first) first = merged;
    ASSERT_EQ(merged, *first);
  } while (std::next_permutation(order.begin(), order.end()));
  for (std::size_t i = 1; i < first->segments.size(); ++i)
    EXPECT_LE(first->segments[i - 1].start, first->segments[i].start);
  EXPECT_EQ(first->segments[0].global_speaker, 0u);  // equal start: lower speaker first
}

TEST(Merge, AppliesLinkageAndRejectsMixedAssets) {
  auto segs = bwc::testing::merge_fixture_segments();
  SpeakerLinkage linkage;
  linkage.chunks.push_back({0, {1, 0}, {1.0, 1.0}});
  linkage.global_count = 2;
  const auto merged = merge_transcripts(segs, linkage);
  for (const auto& s : merged.segments)
    if (s.chunk_index == 0) {
      EXPECT_EQ(s.global_speaker, 1 - s.local_speaker);
    }
  segs[2].asset_id = "other";
  EXPECT_EQ(error_code([&] { merge_transcripts(segs, linkage); }), Errc::invalid_argument);
}

TEST(Roles, LoudestLongestSpeakerIsOfficer) {
  MergedTranscript t;
  t.asset_id = "a";
  auto seg = [](std::size_t spk, double s, double e) {
    TranscriptSegment x;
    x.asset_id = "a";
    x.global_speaker = spk;
    x.start = s;
    x.end = e;
    x.text = "t";
    return x;
  };
  t.segments = {seg(0, 0, 1), seg(1, 1, 5), seg(2, 5, 6)};
  t.roles = {{0, Role::unknown}, {1, Role::unknown}, {2, Role::unknown}};
  std::vector<SpeakerStream> streams(3);
  for (std::size_t i = 0; i < 3; ++i) streams[i].global_speaker = i;
  streams[0].energy = 1.0;
  streams[1].energy = 0.5;  // 0.5 x 4 s beats 1.0 x 1 s
  streams[2].energy = 0.1;
  const auto out = attribute_roles(t, streams);
  EXPECT_EQ(out.roles.at(1), Role::officer);
  EXPECT_EQ(out.roles.at(0), Role::civilian);
  EXPECT_EQ(out.roles.at(2), Role::civilian);

  // A reviewer's choice survives re-attribution.
  auto reviewed = out;
  reviewed.roles[2] = Role::officer;
  reviewed.human_roles.insert(2);
  const auto again = attribute_roles(reviewed, streams);
  EXPECT_EQ(again.roles.at(2), Role::officer);
  EXPECT_EQ(again.roles.at(1), Role::civilian);
}

TEST(Roles, StringConversions) {
  for (Role r : {Role::officer, Role::civilian, Role::unknown}) EXPECT_EQ(role_from_string(to_string(r)), r);
  EXPECT_EQ(error_code([] { role_from_string("detective"); }), Errc::invalid_argument);
}

TEST(TranscriptJsonl, RoundTripPreservesEverything) {
  auto t = merge_transcripts(bwc::testing::merge_fixture_segments(), {});
  t.roles[0] = Role::officer;
  t.human_roles.insert(0);
  t.revision = 4;
  t.correction_log = {"c1", "c2"};
  t.segments[1].text = "quote \" and newline \n and unicode ’";
  const auto text = transcript_to_jsonl(t);
  EXPECT_EQ(transcript_from_jsonl(text), t);
  EXPECT_EQ(transcript_to_jsonl(transcript_from_jsonl(text)), text);
  EXPECT_EQ(error_code([] { transcript_from_jsonl("{not json"); }), Errc::corrupt_data);
}
