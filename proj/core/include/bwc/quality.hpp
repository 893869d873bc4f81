// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

// Transcript quality metrics used to compare two transcription models:
// content coverage gap, repeated-line artifacts, non-standard characters
// and out-of-dictionary words.
namespace bwc::quality {

/// Version tag of the standard character set below; bump on any change.
inline constexpr std::string_view kStandardCharsetVersion = "ascii-alnum-ws-punct/1";
/// Punctuation accepted as standard besides ASCII letters, digits and whitespace.
inline constexpr std::string_view kStandardPunctuation = ".,;:'\"?!-()";
inline constexpr std::size_t kDefaultRepeatThreshold = 3;

struct TokenizedTranscript {
  std::string source_id;
  /// Lowercase ASCII letters/digits with internal apostrophes only.
  std::vector<std::string> tokens;
  /// Original lines, without terminators.
  std::vector<std::string> lines;
};

/// Splits on any character outside [A-Za-z0-9'] and case-folds. U+2019 is
/// read as an apostrophe; other non-ASCII characters separate tokens. Leading
/// and trailing apostrophes are stripped from each token.
TokenizedTranscript tokenize(std::string_view text, std::string source_id = {});

enum class GapCounting {
  unique_types,  ///< |types(a) \ types(b)| / |types(a)|
  tokens,        ///< share of a's tokens whose type is absent from b
};

/// Fraction of a's words absent from b; 0 when a has no tokens. Directional.
double coverage_gap(const TokenizedTranscript& a, const TokenizedTranscript& b,
                    GapCounting counting = GapCounting::unique_types);

/// Total occurrences of lines whose normalized form (trimmed, ASCII
/// case-folded, blank lines ignored) occurs at least `threshold` times.
std::size_t repeated_lines(const TokenizedTranscript& t,
                           std::size_t threshold = kDefaultRepeatThreshold);

bool is_standard_char(char32_t c) noexcept;

/// Code points outside the standard set. Invalid UTF-8 bytes count once each.
std::size_t nonstandard_chars(std::string_view text);
std::size_t nonstandard_chars(const TokenizedTranscript& t);

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(std::span<const std::string> words);

  /// One word per line; entries are trimmed and lowercased.
  static Dictionary load(const std::filesystem::path& path);

  bool contains(std::string_view word) const;
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Unique tokens absent from the dictionary, sorted. Throws
/// Error(no_dictionary) when the dictionary is empty.
std::vector<std::string> oov_words(const TokenizedTranscript& t, const Dictionary& dictionary);

struct QualityMetrics {
  double coverage_gap_vs_counterpart = 0.0;
  std::size_t repeated_line_count = 0;
  std::size_t nonstandard_char_count = 0;
  std::vector<std::string> oov_words;
  std::size_t word_count = 0;
};

struct PairMetrics {
  std::string source_id;
  QualityMetrics a;
  QualityMetrics b;
};

struct ModelAverages {
  double word_count = 0.0;
  double nonstandard_chars = 0.0;
  double repeated_lines = 0.0;
  /// Mean of coverage_gap(this model, counterpart).
  double coverage_gap = 0.0;
  double oov_words = 0.0;
};

struct ComparisonReport {
  std::string model_a_name;
  std::string model_b_name;
  std::vector<PairMetrics> pairs;
  ModelAverages mean_a;
  ModelAverages mean_b;
  std::size_t sample_size = 0;
  std::size_t repeat_threshold = kDefaultRepeatThreshold;
  GapCounting counting = GapCounting::unique_types;
};

struct CompareOptions {
  std::string model_a_name = "model_a";
  std::string model_b_name = "model_b";
  std::size_t repeat_threshold = kDefaultRepeatThreshold;
  GapCounting counting = GapCounting::unique_types;
  std::size_t parallelism = 1;
};

QualityMetrics measure(const TokenizedTranscript& t, const TokenizedTranscript& counterpart,
                       const Dictionary& dictionary, const CompareOptions& options = {});

/// Pairs the corpora by source_id and averages per-pair metrics in id order.
/// Throws Error(pairing) naming every orphan or duplicate id.
ComparisonReport compare_models(std::span<const TokenizedTranscript> corpus_a,
                                std::span<const TokenizedTranscript> corpus_b,
                                const Dictionary& dictionary, const CompareOptions& options = {});

nlohmann::json report_to_json(const ComparisonReport& report);

/// Three panels (average word count, non-standard characters, repeated
/// lines) as a tab-separated table with one column per model.
std::string plot_table(const ComparisonReport& report);

/// Loads every *.txt file in `dir` (non-recursive); source_id is the file stem.
std::vector<TokenizedTranscript> load_corpus(const std::filesystem::path& dir);

}  // namespace bwc::quality
