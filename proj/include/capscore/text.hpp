// Copyright 2026 The Capscore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "capscore/error.hpp"

namespace capscore {

/// A reference or candidate description: the raw text as given plus the
/// normalized token sequence every metric consumes.
struct Caption {
  std::string raw;
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  friend bool operator==(const Caption&, const Caption&) = default;
};

namespace detail {

inline bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) ||
         (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e);
}

// Length in bytes of a whitespace code point starting at s[i], or 0.
inline std::size_t whitespace_length(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  if (i + 1 < s.size() && c == 0xc2) {
    const auto c1 = static_cast<unsigned char>(s[i + 1]);
    if (c1 == 0x85 || c1 == 0xa0) return 2;  // NEL, NBSP
  }
  if (i + 2 < s.size()) {
    const auto c1 = static_cast<unsigned char>(s[i + 1]);
    const auto c2 = static_cast<unsigned char>(s[i + 2]);
    if (c == 0xe1 && c1 == 0x9a && c2 == 0x80) return 3;  // U+1680
    if (c == 0xe2 && c1 == 0x80 &&
        (c2 <= 0x8a || c2 == 0xa8 || c2 == 0xa9 || c2 == 0xaf))
      return 3;  // U+2000..U+200A, U+2028, U+2029, U+202F
    if (c == 0xe2 && c1 == 0x81 && c2 == 0x9f) return 3;  // U+205F
    if (c == 0xe3 && c1 == 0x80 && c2 == 0x80) return 3;  // U+3000
  }
  return 0;
}

inline void flush_token(std::string& word, std::vector<std::string>& out) {
  // Apostrophes and hyphens survive only between word characters.
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && is_ascii_punct(static_cast<unsigned char>(word[begin])))
    ++begin;
  while (end > begin && is_ascii_punct(static_cast<unsigned char>(word[end - 1])))
    --end;
  if (begin < end) out.emplace_back(word.substr(begin, end - begin));
  word.clear();
}

}  // namespace detail

/// Splits raw text into lowercase tokens. Whitespace separates tokens,
/// punctuation other than intra-word apostrophes and hyphens acts as a
/// boundary, and leading/trailing punctuation is dropped.
inline std::vector<std::string> tokenize(std::string_view raw) {
  std::vector<std::string> tokens;
  std::string word;
  for (std::size_t i = 0; i < raw.size();) {
    if (const std::size_t ws = detail::whitespace_length(raw, i); ws > 0) {
      detail::flush_token(word, tokens);
      i += ws;
      continue;
    }
    auto c = static_cast<unsigned char>(raw[i]);
    if (detail::is_ascii_punct(c) && c != '\'' && c != '-') {
      detail::flush_token(word, tokens);
    } else {
      if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      word.push_back(static_cast<char>(c));
    }
    ++i;
  }
  detail::flush_token(word, tokens);
  return tokens;
}

inline Caption normalize_and_tokenize(std::string_view raw) {
  Caption caption{std::string(raw), tokenize(raw)};
  if (caption.tokens.empty()) {
    throw Error(ErrorCode::kEmptyCaption,
                "no tokens survive normalization of \"" + caption.raw + "\"");
  }
  return caption;
}

/// N-grams are keyed by their tokens joined with single spaces; tokens
/// never contain whitespace so the key is unambiguous.
using NGram = std::string;

inline NGram make_ngram(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t n) {
  NGram key;
  for (std::size_t k = 0; k < n; ++k) {
    if (k) key.push_back(' ');
    key += tokens[begin + k];
  }
  return key;
}

/// Sparse n-gram weight vector of a single order. Zero weights are never
/// stored.
struct NGramVector {
  int order = 1;
  std::map<NGram, double> weights;

  bool empty() const noexcept { return weights.empty(); }

  double total() const {
    double sum = 0.0;
    for (const auto& [gram, w] : weights) sum += w;
    return sum;
  }

  double norm() const;
};

inline double NGramVector::norm() const {
  double sq = 0.0;
  for (const auto& [gram, w] : weights) sq += w * w;
  return std::sqrt(sq);
}

inline NGramVector extract_ngrams(const std::vector<std::string>& tokens, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  NGramVector out{n, {}};
  const auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return out;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    out.weights[make_ngram(tokens, i, order)] += 1.0;
  }
  return out;
}

inline NGramVector extract_ngrams(const Caption& c, int n) {
  return extract_ngrams(c.tokens, n);
}

}  // namespace capscore
