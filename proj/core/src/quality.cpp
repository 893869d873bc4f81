// SPDX-License-Identifier: Apache-2.0
#include "bwc/quality.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "bwc/error.hpp"
#include "bwc/parallel.hpp"

namespace bwc::quality {
namespace fs = std::filesystem;

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point starting at text[i]; advances i. Malformed input
// consumes a single byte and yields kInvalid.
char32_t next_code_point(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + len > text.size()) {
    ++i;
    return kInvalid;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMinForLength[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++i;
    return kInvalid;
  }
  i += len;
  return cp;
}

bool is_ascii_alnum(char32_t c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char fold(char32_t c) noexcept {
  return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
}

bool is_ascii_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string normalize_line(std::string_view line) {
  std::size_t b = 0;
  std::size_t e = line.size();
  while (b < e && is_ascii_space(line[b])) ++b;
  while (e > b && is_ascii_space(line[e - 1])) --e;
  std::string out(line.substr(b, e - b));
  for (auto& c : out) c = fold(static_cast<unsigned char>(c));
  return out;
}

void flush_token(std::string& current, std::vector<std::string>& tokens) {
  const auto first = current.find_first_not_of('\'');
  if (first != std::string::npos) {
    const auto last = current.find_last_not_of('\'');
    tokens.push_back(current.substr(first, last - first + 1));
  }
  current.clear();
}

}  // namespace

TokenizedTranscript tokenize(std::string_view text, std::string source_id) {
  TokenizedTranscript t;
  t.source_id = std::move(source_id);

  std::size_t line_start = 0;
  while (line_start < text.size()) {
    auto nl = text.find('\n', line_start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(line_start, nl - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    t.lines.emplace_back(line);
    line_start = nl + 1;
  }

  std::string current;
  for (std::size_t i = 0; i < text.size();) {
    const char32_t cp = next_code_point(text, i);
    if (is_ascii_alnum(cp)) {
      current += fold(cp);
    } else if (cp == U'\'' || cp == U'’') {
      if (!current.empty()) current += '\'';
    } else if (!current.empty()) {
      flush_token(current, t.tokens);
    }
  }
  if (!current.empty()) flush_token(current, t.tokens);
  return t;
}

double coverage_gap(const TokenizedTranscript& a, const TokenizedTranscript& b, GapCounting counting) {
  if (a.tokens.empty()) return 0.0;
  const std::unordered_set<std::string> other(b.tokens.begin(), b.tokens.end());
  if (counting == GapCounting::tokens) {
    const auto missing = std::count_if(a.tokens.begin(), a.tokens.end(),
                                       [&](const std::string& w) { return !other.contains(w); });
    return static_cast<double>(missing) / static_cast<double>(a.tokens.size());
  }
  const std::unordered_set<std::string> own(a.tokens.begin(), a.tokens.end());
  const auto missing = std::count_if(own.begin(), own.end(),
                                     [&](const std::string& w) { return !other.contains(w); });
  return static_cast<double>(missing) / static_cast<double>(own.size());
}

std::size_t repeated_lines(const TokenizedTranscript& t, std::size_t threshold) {
  if (threshold < 2) throw Error(Errc::invalid_argument, "repeat threshold must be at least 2");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& line : t.lines) {
    auto norm = normalize_line(line);
    if (!norm.empty()) ++counts[std::move(norm)];
  }
  std::size_t total = 0;
  for (const auto& [_, n] : counts)
    if (n >= threshold) total += n;
  return total;
}

bool is_standard_char(char32_t c) noexcept {
  if (c >= 0x80) return false;
  if (is_ascii_alnum(c)) return true;
  if (is_ascii_space(static_cast<char>(c))) return true;
  return kStandardPunctuation.find(static_cast<char>(c)) != std::string_view::npos;
}

std::size_t nonstandard_chars(std::string_view text) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size();) {
    const char32_t cp = next_code_point(text, i);
    if (cp == kInvalid || !is_standard_char(cp)) ++count;
  }
  return count;
}

std::size_t nonstandard_chars(const TokenizedTranscript& t) {
  std::size_t count = 0;
  for (const auto& line : t.lines) count += nonstandard_chars(line);
  return count;
}

Dictionary::Dictionary(std::span<const std::string> words) {
  for (const auto& w : words) {
    auto norm = normalize_line(w);
    if (!norm.empty()) words_.insert(std::move(norm));
  }
}

Dictionary Dictionary::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read dictionary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) words.push_back(line);
  return Dictionary(words);
}

bool Dictionary::contains(std::string_view word) const {
  std::string key(word);
  for (auto& c : key) c = fold(static_cast<unsigned char>(c));
  return words_.contains(key);
}

std::vector<std::string> oov_words(const TokenizedTranscript& t, const Dictionary& dictionary) {
  if (dictionary.empty()) throw Error(Errc::no_dictionary, "no dictionary loaded");
  std::set<std::string> missing;
  for (const auto& token : t.tokens)
    if (!dictionary.contains(token)) missing.insert(token);
  return {missing.begin(), missing.end()};
}

QualityMetrics measure(const TokenizedTranscript& t, const TokenizedTranscript& counterpart,
                       const Dictionary& dictionary, const CompareOptions& options) {
  QualityMetrics m;
  m.coverage_gap_vs_counterpart = coverage_gap(t, counterpart, options.counting);
  m.repeated_line_count = repeated_lines(t, options.repeat_threshold);
  m.nonstandard_char_count = nonstandard_chars(t);
  m.oov_words = oov_words(t, dictionary);
  m.word_count = t.tokens.size();
  return m;
}

ComparisonReport compare_models(std::span<const TokenizedTranscript> corpus_a,
                                std::span<const TokenizedTranscript> corpus_b,
                                const Dictionary& dictionary, const CompareOptions& options) {
  if (dictionary.empty()) throw Error(Errc::no_dictionary, "no dictionary loaded");

  std::map<std::string, const TokenizedTranscript*> by_id_a;
  std::map<std::string, const TokenizedTranscript*> by_id_b;
  std::vector<std::string> problems;
  for (const auto& t : corpus_a)
    if (!by_id_a.emplace(t.source_id, &t).second) problems.push_back("duplicate in A: " + t.source_id);
  for (const auto& t : corpus_b)
    if (!by_id_b.emplace(t.source_id, &t).second) problems.push_back("duplicate in B: " + t.source_id);
  for (const auto& [id, _] : by_id_a)
    if (!by_id_b.contains(id)) problems.push_back("only in A: " + id);
  for (const auto& [id, _] : by_id_b)
    if (!by_id_a.contains(id)) problems.push_back("only in B: " + id);
  if (!problems.empty()) {
    std::string msg = "unpaired transcripts:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(Errc::pairing, msg);
  }
  if (by_id_a.empty()) throw Error(Errc::pairing, "no transcript pairs to compare");

  ComparisonReport report;
  report.model_a_name = options.model_a_name;
  report.model_b_name = options.model_b_name;
  report.repeat_threshold = options.repeat_threshold;
  report.counting = options.counting;
  report.sample_size = by_id_a.size();

  std::vector<std::pair<const TokenizedTranscript*, const TokenizedTranscript*>> pairs;
  for (const auto& [id, a] : by_id_a) pairs.emplace_back(a, by_id_b.at(id));
  report.pairs.resize(pairs.size());
  parallel_for(pairs.size(), options.parallelism, [&](std::size_t i) {
    const auto& [a, b] = pairs[i];
    report.pairs[i].source_id = a->source_id;
    report.pairs[i].a = measure(*a, *b, dictionary, options);
    report.pairs[i].b = measure(*b, *a, dictionary, options);
  });

  auto accumulate = [](ModelAverages& avg, const QualityMetrics& m) {
    avg.word_count += static_cast<double>(m.word_count);
    avg.nonstandard_chars += static_cast<double>(m.nonstandard_char_count);
    avg.repeated_lines += static_cast<double>(m.repeated_line_count);
    avg.coverage_gap += m.coverage_gap_vs_counterpart;
    avg.oov_words += static_cast<double>(m.oov_words.size());
  };
  for (const auto& p : report.pairs) {
    accumulate(report.mean_a, p.a);
    accumulate(report.mean_b, p.b);
  }
  const auto n = static_cast<double>(report.sample_size);
  for (ModelAverages* avg : {&report.mean_a, &report.mean_b}) {
    avg->word_count /= n;
    avg->nonstandard_chars /= n;
    avg->repeated_lines /= n;
    avg->coverage_gap /= n;
    avg->oov_words /= n;
  }
  return report;
}

namespace {

nlohmann::json metrics_json(const QualityMetrics& m) {
  return {{"coverage_gap_vs_counterpart", m.coverage_gap_vs_counterpart},
          {"repeated_line_count", m.repeated_line_count},
          {"nonstandard_char_count", m.nonstandard_char_count},
          {"oov_words", m.oov_words},
          {"word_count", m.word_count}};
}

nlohmann::json averages_json(const ModelAverages& a) {
  return {{"word_count", a.word_count},
          {"nonstandard_chars", a.nonstandard_chars},
          {"repeated_lines", a.repeated_lines},
          {"coverage_gap", a.coverage_gap},
          {"oov_words", a.oov_words}};
}

}  // namespace

nlohmann::json report_to_json(const ComparisonReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"source_id", p.source_id}, {"a", metrics_json(p.a)}, {"b", metrics_json(p.b)}});
  return {{"model_a", r.model_a_name},
          {"model_b", r.model_b_name},
          {"sample_size", r.sample_size},
          {"repeat_threshold", r.repeat_threshold},
          {"gap_counting", r.counting == GapCounting::unique_types ? "unique_types" : "tokens"},
          {"charset_version", kStandardCharsetVersion},
          {"means", {{"a", averages_json(r.mean_a)}, {"b", averages_json(r.mean_b)}}},
          {"pairs", pairs}};
}

std::string plot_table(const ComparisonReport& r) {
  std::ostringstream out;
  out << "panel\t" << r.model_a_name << '\t' << r.model_b_name << '\n';
  char buf[128];
  auto row = [&](const char* panel, double a, double b) {
    std::snprintf(buf, sizeof buf, "%s\t%.3f\t%.3f\n", panel, a, b);
    out << buf;
  };
  row("avg_word_count", r.mean_a.word_count, r.mean_b.word_count);
  row("avg_nonstandard_chars", r.mean_a.nonstandard_chars, r.mean_b.nonstandard_chars);
  row("avg_repeated_lines", r.mean_a.repeated_lines, r.mean_b.repeated_lines);
  return out.str();
}

std::vector<TokenizedTranscript> load_corpus(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<TokenizedTranscript> corpus;
  corpus.reserve(files.size());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    corpus.push_back(tokenize(ss.str(), f.stem().string()));
  }
  return corpus;
}

}  // namespace bwc::quality
