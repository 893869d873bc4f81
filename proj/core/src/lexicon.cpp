// SPDX-License-Identifier: Apache-2.0
#include "bwc/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "bwc/error.hpp"
#include "bwc/quality.hpp"

namespace bwc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

constexpr std::string_view kBuiltin = R"(politeness: please, thank you, thanks, sir, ma'am, excuse me, appreciate, sorry
de-escalation: calm down, take a breath, it's okay, relax, no one is in trouble, let's talk, slow down, take your time
reassurance: you're safe, you are safe, we're here to help, we are here to help, don't worry, you'll be fine, it's alright
escalation: get down, hands up, stop resisting, get on the ground, shut up, don't move, last warning
disrespect: idiot, stupid, shut your mouth, whatever, moron, loser
)";

}  // namespace

void Lexicon::add(std::string category, std::string_view phrase) {
  auto tokens = quality::tokenize(phrase).tokens;
  if (tokens.empty()) return;
  auto& phrases = categories_[std::move(category)];
  if (std::find(phrases.begin(), phrases.end(), tokens) == phrases.end())
    phrases.push_back(std::move(tokens));
}

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lexicon;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++lineno;
    std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw Error(Errc::corrupt_data, "lexicon line " + std::to_string(lineno) + ": missing ':'");
    std::string category(trim(line.substr(0, colon)));
    if (category.empty())
      throw Error(Errc::corrupt_data, "lexicon line " + std::to_string(lineno) + ": empty category");
    std::transform(category.begin(), category.end(), category.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::string_view rest = line.substr(colon + 1);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      if (comma == std::string_view::npos) comma = rest.size();
      lexicon.add(category, trim(rest.substr(0, comma)));
      rest = comma < rest.size() ? rest.substr(comma + 1) : std::string_view{};
    }
  }
  return lexicon;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read lexicon " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Lexicon Lexicon::builtin() { return parse(kBuiltin); }

std::vector<std::string> Lexicon::category_names() const {
  std::vector<std::string> names;
  names.reserve(categories_.size());
  for (const auto& [name, _] : categories_) names.push_back(name);
  return names;
}

std::size_t Lexicon::count_hits(const std::string& category,
                                const std::vector<std::string>& tokens) const {
  const auto it = categories_.find(category);
  if (it == categories_.end()) return 0;
  const auto& phrases = it->second;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t longest = 0;
    for (const auto& phrase : phrases) {
      if (phrase.size() <= longest || i + phrase.size() > tokens.size()) continue;
      if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
        longest = phrase.size();
    }
    if (longest > 0) {
      ++hits;
      i += longest;
    } else {
      ++i;
    }
  }
  return hits;
}

std::map<std::string, double> indicator_rates(const MergedTranscript& transcript,
                                              const Lexicon& lexicon) {
  struct Scope {
    std::size_t tokens = 0;
    std::map<std::string, std::size_t> hits;
  };
  Scope officer, civilian, overall;
  const auto categories = lexicon.category_names();

  for (const auto& seg : transcript.segments) {
    const auto tokens = quality::tokenize(seg.text).tokens;
    const auto role_it = transcript.roles.find(seg.global_speaker);
    const Role role = role_it == transcript.roles.end() ? Role::unknown : role_it->second;
    Scope* by_role = role == Role::officer ? &officer : role == Role::civilian ? &civilian : nullptr;
    overall.tokens += tokens.size();
    if (by_role) by_role->tokens += tokens.size();
    for (const auto& category : categories) {
      const std::size_t h = lexicon.count_hits(category, tokens);
      overall.hits[category] += h;
      if (by_role) by_role->hits[category] += h;
    }
  }

  std::map<std::string, double> rates;
  auto emit = [&](std::string_view scope, Scope& s) {
    for (const auto& category : categories) {
      const double rate = s.tokens == 0 ? 0.0
                                        : static_cast<double>(s.hits[category]) /
                                              static_cast<double>(s.tokens);
      rates[std::string(scope) + "." + category] = rate;
    }
  };
  emit(kOfficerScope, officer);
  emit(kCivilianScope, civilian);
  emit(kOverallScope, overall);
  return rates;
}

}  // namespace bwc
