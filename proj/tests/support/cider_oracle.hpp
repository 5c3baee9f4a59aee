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

// Dense CIDEr: every n-gram of the corpus and candidate gets an explicit
// coordinate, document frequencies are counted by scanning raw token
// windows, and cosines are taken over full vectors.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace capscore::testing {

using Tokens = std::vector<std::string>;

struct ToyItem {
  std::vector<Tokens> captions;
};

inline bool contains_window(const Tokens& sentence, const Tokens& gram) {
  if (sentence.size() < gram.size()) return false;
  for (std::size_t i = 0; i + gram.size() <= sentence.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < gram.size() && eq; ++k) eq = sentence[i + k] == gram[k];
    if (eq) return true;
  }
  return false;
}

inline std::size_t count_window(const Tokens& sentence, const Tokens& gram) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + gram.size() <= sentence.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < gram.size() && eq; ++k) eq = sentence[i + k] == gram[k];
    n += eq;
  }
  return n;
}

inline double dense_cider_raw(const std::vector<ToyItem>& corpus, const Tokens& candidate,
                              const std::vector<Tokens>& references) {
  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    // Coordinates: all n-grams of corpus captions, candidate and references.
    std::map<Tokens, std::size_t> coord;
    auto collect = [&](const Tokens& s) {
      for (std::size_t i = 0; i + n <= s.size(); ++i)
        coord.emplace(Tokens(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n)),
                      coord.size());
    };
    for (const auto& item : corpus)
      for (const auto& c : item.captions) collect(c);
    collect(candidate);
    for (const auto& r : references) collect(r);

    std::vector<Tokens> grams(coord.size());
    for (const auto& [g, idx] : coord) grams[idx] = g;
    std::vector<double> idf(grams.size());
    for (std::size_t g = 0; g < grams.size(); ++g) {
      std::size_t df = 0;
      for (const auto& item : corpus) {
        bool hit = false;
        for (const auto& c : item.captions) hit = hit || contains_window(c, grams[g]);
        df += hit;
      }
      idf[g] = std::log(static_cast<double>(corpus.size()) / static_cast<double>(df < 1 ? 1 : df));
    }
    auto dense = [&](const Tokens& s) {
      std::vector<double> v(grams.size(), 0.0);
      if (s.size() < n) return v;
      const double windows = static_cast<double>(s.size() - n + 1);
      for (std::size_t g = 0; g < grams.size(); ++g)
        v[g] = static_cast<double>(count_window(s, grams[g])) / windows * idf[g];
      return v;
    };
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      if (na == 0 || nb == 0) return 0.0;
      return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    const auto cv = dense(candidate);
    double sum = 0.0;
    for (const auto& r : references) sum += cosine(cv, dense(r));
    total += sum / static_cast<double>(references.size());
  }
  return total / 4.0;
}

}  // namespace capscore::testing
