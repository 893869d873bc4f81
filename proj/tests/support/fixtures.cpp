// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "bwc/wav.hpp"

namespace bwc::testing {

namespace {

std::atomic<int> scratch_counter{0};

void put_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

const std::vector<std::string> kOfficerLines = {
    "Good evening, sir. I stopped you for speeding.",
    "Please step out of the vehicle. Thank you.",
    "Can I see your license and registration, please?",
    "Calm down, no one is in trouble. Take your time.",
};

const std::vector<std::string> kCivilianLines = {
    "Sorry officer. I did not see the sign.",
    "Here is my license. Whatever.",
    "Am I under arrest? I do not understand.",
    "Okay. Thank you, sir.",
};

}  // namespace

std::optional<Errc> error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

ScratchDir::ScratchDir(const std::string& name) {
  path_ = fs::temp_directory_path() /
          ("bwc-test-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(scratch_counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<float> sine(double hz, double seconds, std::uint32_t rate, double amplitude) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate));
  return out;
}

double sine_rms(double amplitude) { return amplitude / std::numbers::sqrt2; }

void write_wav(const fs::path& path, std::uint32_t rate, std::uint16_t channels,
               const std::vector<float>& samples) {
  wav::write_pcm16(path, rate, channels, samples);
}

void write_sparse_wav(const fs::path& path, double seconds) {
  constexpr std::uint32_t rate = 16000;
  const auto frames = static_cast<std::uint32_t>(std::llround(seconds * rate));
  const std::uint32_t data_bytes = frames * 2;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("RIFF", 4);
    put_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, rate);
    put_u32(out, rate * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.write("data", 4);
    put_u32(out, data_bytes);
  }
  fs::resize_file(path, 44 + static_cast<std::uintmax_t>(data_bytes));
}

std::vector<float> interleave(const std::vector<std::vector<float>>& channels) {
  std::vector<float> out;
  if (channels.empty()) return out;
  const std::size_t n = channels.front().size();
  out.reserve(n * channels.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& ch : channels) out.push_back(ch[i]);
  return out;
}

std::vector<float> quantized(const std::vector<float>& samples) {
  std::vector<float> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = std::clamp(std::nearbyint(static_cast<double>(samples[i]) * 32768.0), -32768.0, 32767.0);
    out[i] = static_cast<float>(v / 32768.0);
  }
  return out;
}

CorpusFixture make_pipeline_corpus(const fs::path& root, double chunk_len) {
  CorpusFixture fx;
  fx.root = root;
  fs::create_directories(root);
  fx.assets = {
      {"a_short", 35.0, 16000, 1, "INC-7"},
      {"b_medium", 62.0, 16000, 1, "INC-7"},
      {"c_long", 95.0, 44100, 2, ""},
  };

  std::size_t line = 0;
  for (const auto& spec : fx.assets) {
    const auto n = static_cast<std::size_t>(std::llround(spec.seconds * spec.rate));
    std::vector<float> mono(n, 0.0f);
    std::vector<SidecarUtterance> utterances;

    const auto chunks = static_cast<std::size_t>(std::ceil(spec.seconds / chunk_len));
    for (std::size_t k = 0; k < chunks; ++k) {
      const double s = static_cast<double>(k) * chunk_len;
      const double len = std::min(spec.seconds, s + chunk_len) - s;
      const SidecarUtterance officer{kOfficerVoice.name, kOfficerVoice.tone_hz, s + 0.10 * len, s + 0.45 * len,
                                     kOfficerLines[line % kOfficerLines.size()]};
      const SidecarUtterance civilian{kCivilianVoice.name, kCivilianVoice.tone_hz, s + 0.55 * len,
                                      s + 0.90 * len, kCivilianLines[line % kCivilianLines.size()]};
      ++line;
      for (const auto& [u, voice] : {std::pair{officer, kOfficerVoice}, std::pair{civilian, kCivilianVoice}}) {
        const auto b = static_cast<std::size_t>(std::llround(u.start * spec.rate));
        const auto e = std::min(n, static_cast<std::size_t>(std::llround(u.end * spec.rate)));
        for (std::size_t i = b; i < e; ++i)
          mono[i] += static_cast<float>(voice.amplitude *
                                        std::sin(2.0 * std::numbers::pi * voice.tone_hz * static_cast<double>(i) /
                                                 spec.rate));
        utterances.push_back(u);
      }
    }
    fx.chunks_per_asset[spec.id] = chunks;
    fx.expected_chunks += chunks;
    fx.expected_streams += 2 * chunks;
    fx.expected_segments += utterances.size();

    const fs::path wav_path = root / (spec.id + ".wav");
    if (spec.channels == 1) {
      write_wav(wav_path, spec.rate, 1, mono);
    } else {
      write_wav(wav_path, spec.rate, spec.channels, interleave(std::vector<std::vector<float>>(spec.channels, mono)));
    }
    write_sidecar(root / (spec.id + ".truth.jsonl"), utterances);
    if (!spec.incident_ref.empty()) {
      std::ofstream meta(root / (spec.id + ".meta.json"));
      meta << nlohmann::json{{"incident_ref", spec.incident_ref}}.dump() << "\n";
    }
    fx.utterances[spec.id] = std::move(utterances);
  }
  return fx;
}

void write_theme_keywords(const fs::path& path) {
  std::ofstream out(path);
  out << "# theme: keywords\n"
         "traffic stop: license, registration, speeding, vehicle\n"
         "arrest: under arrest, handcuffs\n"
         "domestic dispute: argument, neighbor\n";
}

void write_dictionary(const fs::path& path, const std::vector<std::string>& words) {
  std::ofstream out(path);
  for (const auto& w : words) out << w << "\n";
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      // dictionary words
      "stop", "right", "there", "license", "vehicle", "officer", "sir", "please", "thank", "you", "don't",
      "move", "hands", "up", "car", "step", "out", "what", "why", "calm", "down", "ma'am", "registration",
      "insurance", "speeding", "ticket", "warning", "okay", "yes", "no", "suspect", "ran", "stopped", "the",
      "a", "is", "are", "we", "they", "here", "help", "safe", "911", "i'm", "get", "on", "ground",
      // misspellings and transcription debris (not in the dictionary)
      "lisense", "vehicl", "registation", "offcer", "speedin", "ticet", "uhh", "mmhm", "xyzzy",
  };
  return words;
}

std::vector<std::string> dictionary_words() {
  const auto& v = vocabulary();
  const auto it = std::find(v.begin(), v.end(), "lisense");
  return {v.begin(), it};
}

std::string random_transcript(std::mt19937_64& rng) {
  static const std::vector<std::string> specials = {"é", "â€œ", "â€", "§", "’", "\xE2\x80\x94", "😀", "#", "@", "%", "ñ", "*"};
  static const std::string punctuation = ".,;:'\"?!-()";
  const auto& words = vocabulary();
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  std::vector<std::string> lines;
  const std::size_t n_lines = 1 + pick(40);
  for (std::size_t l = 0; l < n_lines; ++l) {
    if (!lines.empty() && chance(0.3)) {
      std::string repeat = lines[pick(lines.size())];
      if (chance(0.3)) repeat = "  " + repeat + " ";
      if (chance(0.3))
        std::transform(repeat.begin(), repeat.end(), repeat.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
      lines.push_back(repeat);
      continue;
    }
    if (chance(0.05)) {
      lines.emplace_back(chance(0.5) ? "" : "   ");
      continue;
    }
    std::string text;
    const std::size_t n_words = 1 + pick(10);
    for (std::size_t w = 0; w < n_words; ++w) {
      if (!text.empty()) text += chance(0.1) ? "\t" : " ";
      std::string word = words[pick(words.size())];
      if (chance(0.2)) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
      if (chance(0.1)) word = "'" + word;
      text += word;
      if (chance(0.15)) text += punctuation[pick(punctuation.size())];
      if (chance(0.08)) text += specials[pick(specials.size())];
    }
    lines.push_back(text);
  }
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < lines.size()) out += chance(0.1) ? "\r\n" : "\n";
  }
  if (chance(0.5)) out += "\n";
  return out;
}

std::string perturb_transcript(const std::string& text, std::mt19937_64& rng) {
  const auto& words = vocabulary();
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  std::string out;
  std::string line;
  auto emit = [&](const std::string& l) {
    if (chance(0.15)) return;
    std::string changed;
    std::size_t i = 0;
    while (i < l.size()) {
      const auto sp = l.find(' ', i);
      const std::string word = l.substr(i, sp == std::string::npos ? std::string::npos : sp - i);
      changed += chance(0.2) ? words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)] : word;
      if (sp == std::string::npos) break;
      changed += ' ';
      i = sp + 1;
    }
    out += changed + "\n";
    if (chance(0.1)) out += changed + "\n" + changed + "\n";
  };
  for (char c : text) {
    if (c == '\n') {
      emit(line);
      line.clear();
    } else {
      line += c;
    }
  }
  if (!line.empty()) emit(line);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> theme_pool() {
  std::vector<std::string> pool = {"traffic stop", "domestic dispute", "arrest", "welfare check", "noise complaint",
                                   "trespass", "pursuit", "medical", "shoplifting", "dui"};
  for (int i = static_cast<int>(pool.size()) + 1; pool.size() < 40; ++i) pool.push_back("theme " + std::to_string(i));
  return pool;
}

namespace {

const std::vector<std::string> kIndicatorKeys = {"officer.politeness", "civilian.politeness", "officer.escalation",
                                                 "overall.de-escalation"};

double random_score(std::mt19937_64& rng) {
  static const double edges[] = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 0.29999999999999999, 0.05};
  if (std::uniform_int_distribution<int>(0, 4)(rng) == 0)
    return edges[std::uniform_int_distribution<std::size_t>(0, std::size(edges) - 1)(rng)];
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::vector<std::string> random_themes(std::mt19937_64& rng) {
  const auto pool = theme_pool();
  std::vector<std::string> themes;
  const int n = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int i = 0; i < n; ++i) {
    std::string t = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    if (std::uniform_int_distribution<int>(0, 4)(rng) == 0) t = "  " + t;
    if (std::uniform_int_distribution<int>(0, 4)(rng) == 0) t[0] = static_cast<char>(std::toupper(t[0]));
    themes.push_back(t);
  }
  return themes;
}

}  // namespace

std::vector<store::IncidentRecord> populate_store(store::Store& store, std::size_t n, std::mt19937_64& rng) {
  auto tick = std::make_shared<std::int64_t>(0);
  store.set_clock([tick] { return 1'700'000'000'000 + (*tick)++ / 3; });

  const std::size_t assets = std::max<std::size_t>(1, (n + 4) / 5);
  for (std::size_t a = 0; a < assets; ++a) {
    VideoAsset asset;
    char id[32];
    std::snprintf(id, sizeof id, "asset-%04zu", a);
    asset.id = id;
    asset.path = std::string(id) + ".wav";
    asset.duration = 60.0;
    if (a % 4 != 3) asset.incident_ref = "INC-" + std::to_string(a % 37);
    store.put_asset(asset);
  }

  for (std::size_t i = 0; i < n; ++i) {
    store::IncidentRecord r;
    const auto asset = store.get_asset([&] {
      char id[32];
      std::snprintf(id, sizeof id, "asset-%04zu", i / 5);
      return std::string(id);
    }());
    r.asset_id = asset->id;
    r.incident_ref = asset->incident_ref;
    r.revision = i % 5;
    const int speakers = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int s = 0; s < speakers; ++s)
      r.speaker_roles[static_cast<std::size_t>(s)] = static_cast<Role>(std::uniform_int_distribution<int>(0, 2)(rng));
    for (const auto& key : kIndicatorKeys)
      if (std::uniform_int_distribution<int>(0, 5)(rng) != 0) r.indicator_scores[key] = random_score(rng);
    r.themes = random_themes(rng);
    r.summary_ref = "sum/" + r.asset_id + "/" + std::to_string(r.revision);
    store.put_record(r);
  }
  // Re-save a tenth of the records with new themes and scores: the indexes
  // must forget the old values.
  for (std::size_t i = 0; i < n; i += 10) {
    char id[32];
    std::snprintf(id, sizeof id, "asset-%04zu", i / 5);
    auto r = *store.get_record(id, i % 5);
    r.themes = random_themes(rng);
    for (auto& [_, v] : r.indicator_scores) v = random_score(rng);
    store.put_record(r);
  }
  return store.all_records();
}

store::QueryFilter random_filter(std::mt19937_64& rng) {
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  const auto pool = theme_pool();
  store::QueryFilter f;
  if (chance(0.5)) {
    std::string t = chance(0.05) ? "no such theme" : pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    if (chance(0.2)) t = " " + t + "  ";
    if (chance(0.2)) std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
    f.theme = t;
  }
  if (chance(0.3)) f.role = static_cast<Role>(std::uniform_int_distribution<int>(0, 2)(rng));
  if (chance(0.35)) {
    store::IndicatorRange range;
    range.category = chance(0.05) ? "officer.unknown-category"
                                  : kIndicatorKeys[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
    double a = random_score(rng);
    double b = random_score(rng);
    if (a > b) std::swap(a, b);
    range.min = a;
    range.max = b;
    f.indicator = range;
  }
  if (chance(0.2)) f.incident_ref = "INC-" + std::to_string(std::uniform_int_distribution<int>(0, 40)(rng));
  f.offset = chance(0.5) ? 0 : std::uniform_int_distribution<std::size_t>(0, 60)(rng);
  f.limit = std::uniform_int_distribution<std::size_t>(1, 120)(rng);
  return f;
}

std::vector<TranscriptSegment> merge_fixture_segments() {
  auto seg = [](std::size_t chunk, std::size_t local, double start, double end, std::string text) {
    TranscriptSegment s;
    s.asset_id = "merge-asset";
    s.chunk_index = chunk;
    s.local_speaker = local;
    s.global_speaker = local;
    s.start = start;
    s.end = end;
    s.text = std::move(text);
    s.backend_name = "fixture";
    return s;
  };
  return {
      seg(0, 1, 1.0, 2.0, "equal start, speaker one"),
      seg(0, 0, 1.0, 3.0, "equal start, speaker zero"),
      seg(0, 0, 4.0, 5.0, "later"),
      seg(1, 0, 31.0, 32.0, "next chunk"),
      seg(1, 1, 31.0, 31.5, "next chunk, other speaker"),
      seg(1, 1, 31.0, 31.5, "same time, same speaker, different text"),
  };
}

}  // namespace bwc::testing
