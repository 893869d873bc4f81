// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace bwc::oracle {

namespace {

bool ascii_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string ascii_lower(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

}  // namespace

std::vector<std::string> tokens(const std::string& text) {
  // U+2019 counts as an apostrophe; every other byte outside [A-Za-z0-9']
  // (including all non-ASCII bytes) separates words.
  std::string t;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "\xE2\x80\x99") == 0) {
      t += '\'';
      i += 2;
    } else {
      t += text[i];
    }
  }
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    while (!word.empty() && word.front() == '\'') word.erase(word.begin());
    while (!word.empty() && word.back() == '\'') word.pop_back();
    if (!word.empty()) out.push_back(ascii_lower(word));
    word.clear();
  };
  for (char c : t) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && (std::isalnum(u) || c == '\''))
      word += c;
    else
      flush();
  }
  flush();
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

double coverage_gap(const std::string& a, const std::string& b, bool unique) {
  const auto ta = tokens(a);
  if (ta.empty()) return 0.0;
  auto tb = tokens(b);
  std::sort(tb.begin(), tb.end());
  if (unique) {
    auto sa = ta;
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::vector<std::string> missing;
    std::set_difference(sa.begin(), sa.end(), tb.begin(), tb.end(), std::back_inserter(missing));
    return static_cast<double>(missing.size()) / static_cast<double>(sa.size());
  }
  std::size_t missing = 0;
  for (const auto& w : ta)
    if (!std::binary_search(tb.begin(), tb.end(), w)) ++missing;
  return static_cast<double>(missing) / static_cast<double>(ta.size());
}

std::size_t repeated_lines(const std::string& text, std::size_t threshold) {
  std::vector<std::string> norm;
  for (auto line : lines(text)) {
    std::size_t b = 0;
    std::size_t e = line.size();
    while (b < e && ascii_space(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && ascii_space(static_cast<unsigned char>(line[e - 1]))) --e;
    if (b < e) norm.push_back(ascii_lower(line.substr(b, e - b)));
  }
  std::sort(norm.begin(), norm.end());
  std::size_t total = 0;
  for (std::size_t i = 0; i < norm.size();) {
    std::size_t j = i;
    while (j < norm.size() && norm[j] == norm[i]) ++j;
    if (j - i >= threshold) total += j - i;
    i = j;
  }
  return total;
}

std::size_t nonstandard_chars(const std::string& text) {
  // Valid UTF-8 assumed: each non-ASCII code point has exactly one lead byte.
  static const std::string punct = ".,;:'\"?!-()";
  std::size_t count = 0;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80) {
      if ((u & 0xC0) != 0x80) ++count;
    } else if (!(std::isalnum(u) || ascii_space(u) || punct.find(c) != std::string::npos)) {
      ++count;
    }
  }
  return count;
}

std::vector<std::string> oov_words(const std::string& text, const std::set<std::string>& dictionary) {
  std::set<std::string> missing;
  for (const auto& w : tokens(text))
    if (!dictionary.count(w)) missing.insert(w);
  return {missing.begin(), missing.end()};
}

std::vector<Span> chunk_spans(std::size_t n, std::uint32_t rate, double chunk_len, double overlap) {
  const auto len = static_cast<std::size_t>(std::llround(chunk_len * rate));
  const auto hop = len - static_cast<std::size_t>(std::llround(overlap * rate));
  const std::size_t count = n <= len ? 1 : 1 + (n - len + hop - 1) / hop;
  std::vector<Span> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = {k * hop, std::min(n, k * hop + len)};
  return out;
}

GridOptimum exhaustive_calibration(const std::vector<ensemble::LabeledExample>& examples, int steps,
                                   std::size_t length) {
  auto fit = [&](const std::vector<double>& v, std::size_t k) { return k < v.size() ? v[k] : 0.0; };
  GridOptimum best;
  bool first = true;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const int k = steps - i - j;
      const double a = static_cast<double>(i) / steps;
      const double b = static_cast<double>(j) / steps;
      const double g = static_cast<double>(k) / steps;
      std::vector<std::vector<double>> fused;
      for (const auto& e : examples) {
        std::vector<double> v(length);
        for (std::size_t d = 0; d < length; ++d)
          v[d] = a * fit(e.features.audio.values, d) + b * fit(e.features.text.values, d) +
                 g * fit(e.features.image.values, d);
        fused.push_back(v);
      }
      std::map<std::string, std::vector<double>> means;
      std::map<std::string, int> counts;
      for (std::size_t e = 0; e < examples.size(); ++e) {
        auto& m = means[examples[e].label];
        m.resize(length, 0.0);
        for (std::size_t d = 0; d < length; ++d) m[d] += fused[e][d];
        ++counts[examples[e].label];
      }
      for (auto& [label, m] : means)
        for (auto& x : m) x /= counts[label];
      std::size_t correct = 0;
      for (std::size_t e = 0; e < examples.size(); ++e) {
        std::string nearest;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (const auto& [label, m] : means) {  // ascending labels: strict < keeps the smaller
          double d = 0.0;
          for (std::size_t x = 0; x < length; ++x) d += (fused[e][x] - m[x]) * (fused[e][x] - m[x]);
          if (d < nearest_d) {
            nearest_d = d;
            nearest = label;
          }
        }
        if (nearest == examples[e].label) ++correct;
      }
      if (first || correct > best.correct) {
        best = {i, j, k, correct, 1};
        first = false;
      } else if (correct == best.correct) {
        ++best.ties;
      }
    }
  }
  return best;
}

ScanResult scan(const std::vector<store::IncidentRecord>& records, const store::QueryFilter& filter) {
  auto norm = [](const std::string& s) {
    std::istringstream in(ascii_lower(s));
    std::string word;
    std::string out;
    while (in >> word) out += (out.empty() ? "" : " ") + word;
    return out;
  };
  std::vector<const store::IncidentRecord*> hits;
  for (const auto& r : records) {
    if (filter.theme) {
      bool found = false;
      for (const auto& t : r.themes) found = found || norm(t) == norm(*filter.theme);
      if (!found) continue;
    }
    if (filter.role) {
      bool found = false;
      for (const auto& [_, role] : r.speaker_roles) found = found || role == *filter.role;
      if (!found) continue;
    }
    if (filter.indicator) {
      const auto it = r.indicator_scores.find(filter.indicator->category);
      if (it == r.indicator_scores.end()) continue;
      if (!(filter.indicator->min <= it->second && it->second <= filter.indicator->max)) continue;
    }
    if (filter.incident_ref && (!r.incident_ref || *r.incident_ref != *filter.incident_ref)) continue;
    hits.push_back(&r);
  }
  std::sort(hits.begin(), hits.end(), [](const auto* x, const auto* y) {
    if (x->updated_ms != y->updated_ms) return x->updated_ms > y->updated_ms;
    if (x->asset_id != y->asset_id) return x->asset_id < y->asset_id;
    return x->revision > y->revision;
  });
  ScanResult out;
  out.total = hits.size();
  for (std::size_t i = filter.offset; i < hits.size() && i < filter.offset + filter.limit; ++i)
    out.ids.push_back(hits[i]->id());
  return out;
}

double band_energy_fraction(const std::vector<float>& samples, std::uint32_t rate, double lo_hz, double hi_hz) {
  const std::size_t n = samples.size();
  if (n == 0) return 0.0;
  std::vector<double> cos_table(n);
  std::vector<double> sin_table(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n);
    cos_table[t] = std::cos(phase);
    sin_table[t] = std::sin(phase);
  }
  double in_band = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0;
    double im = 0.0;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < n; ++t) {
      re += samples[t] * cos_table[idx];
      im -= samples[t] * sin_table[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    const double power = re * re + im * im;
    const double hz = static_cast<double>(std::min(k, n - k)) * rate / static_cast<double>(n);
    total += power;
    if (hz >= lo_hz && hz < hi_hz) in_band += power;
  }
  return total == 0.0 ? 0.0 : in_band / total;
}

double mean_square(const std::vector<float>& samples) {
  if (samples.empty()) return 0.0;
  long double acc = 0.0L;
  for (float s : samples) acc += static_cast<long double>(s) * s;
  return static_cast<double>(acc / samples.size());
}

}  // namespace bwc::oracle
