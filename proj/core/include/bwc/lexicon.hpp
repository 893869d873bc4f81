// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bwc/transcription.hpp"

namespace bwc {

/// Behavioral indicator lexicon: category -> words and phrases.
///
/// Text format, one category per line (repeated categories accumulate):
///
///   # comment
///   politeness: please, thank you, sir, ma'am
///   de-escalation: calm down, take a breath
///
/// Entries are tokenized with the quality tokenizer, so matching is
/// case-insensitive and punctuation-blind.
class Lexicon {
 public:
  using Phrase = std::vector<std::string>;

  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::filesystem::path& path);
  /// politeness, de-escalation, reassurance, escalation, disrespect.
  static Lexicon builtin();

  void add(std::string category, std::string_view phrase);

  bool empty() const noexcept { return categories_.empty(); }
  /// Category names in sorted order.
  std::vector<std::string> category_names() const;
  const std::map<std::string, std::vector<Phrase>>& categories() const noexcept { return categories_; }

  /// Non-overlapping matches of the category's phrases in `tokens`, scanning
  /// left to right and preferring the longest phrase at each position.
  std::size_t count_hits(const std::string& category, const std::vector<std::string>& tokens) const;

 private:
  std::map<std::string, std::vector<Phrase>> categories_;
};

/// Scope names used as key prefixes in indicator maps.
inline constexpr std::string_view kOfficerScope = "officer";
inline constexpr std::string_view kCivilianScope = "civilian";
inline constexpr std::string_view kOverallScope = "overall";

/// Per-category hit rate (hits / tokens, 0 when a scope has no tokens) for
/// the officer, civilian and overall scopes, keyed "<scope>.<category>".
/// Phrases never span segments. Speakers with an unknown role count only
/// toward the overall scope. Every value lies in [0, 1].
std::map<std::string, double> indicator_rates(const MergedTranscript& transcript,
                                              const Lexicon& lexicon);

}  // namespace bwc
