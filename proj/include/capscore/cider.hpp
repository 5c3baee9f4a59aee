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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capscore/corpus.hpp"
#include "capscore/error.hpp"
#include "capscore/text.hpp"

namespace capscore {

inline constexpr int kCiderMaxN = 4;
inline constexpr double kCiderScale = 10.0;

/// Number of corpus items whose reference set contains each n-gram.
struct DocumentFrequencyTable {
  int order = 1;
  std::map<NGram, std::size_t> df;
  std::size_t num_items = 0;

  std::size_t lookup(const NGram& gram) const {
    auto it = df.find(gram);
    return it == df.end() ? 0 : it->second;
  }

  /// log(N / max(df, 1)); unseen n-grams get the maximum IDF.
  double idf(const NGram& gram) const {
    const std::size_t d = std::max<std::size_t>(lookup(gram), 1);
    return std::log(static_cast<double>(num_items) / static_cast<double>(d));
  }

  friend bool operator==(const DocumentFrequencyTable&,
                         const DocumentFrequencyTable&) = default;
};

using DocumentFrequencyTables = std::vector<DocumentFrequencyTable>;

inline DocumentFrequencyTables build_df(const Corpus& corpus, int max_n = kCiderMaxN) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "cannot build DF from empty corpus");
  if (max_n < 1) throw Error(ErrorCode::kInvalidArgument, "max_n must be >= 1");
  DocumentFrequencyTables tables;
  for (int n = 1; n <= max_n; ++n) {
    DocumentFrequencyTable table{n, {}, corpus.size()};
    for (const auto& item : corpus) {
      std::set<NGram> seen;
      for (const auto& caption : item.captions) {
        for (const auto& [gram, count] : extract_ngrams(caption, n).weights)
          seen.insert(gram);
      }
      for (const auto& gram : seen) ++table.df[gram];
    }
    tables.push_back(std::move(table));
  }
  return tables;
}

/// TF-IDF vector with term frequency normalized by the sentence's n-gram
/// count.
inline NGramVector tfidf_vector(const Caption& c, int n, const DocumentFrequencyTable& dft) {
  if (dft.order != n)
    throw Error(ErrorCode::kMissingDFOrder, "DF table order does not match n");
  NGramVector counts = extract_ngrams(c, n);
  const double total = counts.total();
  NGramVector out{n, {}};
  for (const auto& [gram, count] : counts.weights) {
    const double w = (count / total) * dft.idf(gram);
    if (w > 0) out.weights.emplace(gram, w);
  }
  return out;
}

/// Cosine of two sparse vectors; zero when either has zero norm.
inline double sparse_cosine(const NGramVector& a, const NGramVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  double dot = 0.0;
  auto ia = a.weights.begin();
  auto ib = b.weights.begin();
  while (ia != a.weights.end() && ib != b.weights.end()) {
    if (ia->first == ib->first) {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    } else if (ia->first < ib->first) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return dot / (na * nb);
}

struct CiderOptions {
  // Scale the mean per-order similarity by 10.
  bool scale = true;
  // CIDEr-D: count clipping and a Gaussian length penalty.
  bool cider_d = false;
  double sigma = 6.0;
};

struct CiderScore {
  double raw = 0.0;     // mean over orders of the mean reference cosine
  double scaled = 0.0;  // raw * 10

  double value(const CiderOptions& opts) const { return opts.scale ? scaled : raw; }
};

/// Precomputes TF-IDF vectors so one caption can be scored many times.
class CiderScorer {
 public:
  struct Vectors {
    std::array<NGramVector, kCiderMaxN> tfidf;   // TF-normalized weights
    std::array<NGramVector, kCiderMaxN> counts;  // raw count x idf, CIDEr-D only
    std::size_t length = 0;
  };

  CiderScorer(DocumentFrequencyTables dfts, CiderOptions opts = {})
      : dfts_(std::move(dfts)), opts_(opts) {
    for (int n = 1; n <= kCiderMaxN; ++n) {
      const bool present = std::any_of(dfts_.begin(), dfts_.end(),
                                       [n](const auto& t) { return t.order == n; });
      if (!present)
        throw Error(ErrorCode::kMissingDFOrder,
                    "CIDEr needs a DF table of order " + std::to_string(n));
    }
    std::sort(dfts_.begin(), dfts_.end(),
              [](const auto& a, const auto& b) { return a.order < b.order; });
  }

  const CiderOptions& options() const noexcept { return opts_; }

  Vectors vectorize(const Caption& c) const {
    Vectors v;
    v.length = c.size();
    for (int n = 1; n <= kCiderMaxN; ++n) {
      const auto& dft = table(n);
      auto idx = static_cast<std::size_t>(n - 1);
      v.tfidf[idx] = tfidf_vector(c, n, dft);
      if (opts_.cider_d) {
        NGramVector raw{n, {}};
        for (const auto& [gram, count] : extract_ngrams(c, n).weights) {
          const double w = count * dft.idf(gram);
          if (w > 0) raw.weights.emplace(gram, w);
        }
        v.counts[idx] = std::move(raw);
      }
    }
    return v;
  }

  CiderScore score(const Vectors& candidate, const std::vector<const Vectors*>& refs) const {
    if (refs.empty()) throw Error(ErrorCode::kNoReferences, "CIDEr needs a reference");
    double sum_orders = 0.0;
    for (std::size_t idx = 0; idx < kCiderMaxN; ++idx) {
      double sum_refs = 0.0;
      for (const Vectors* ref : refs) {
        sum_refs += opts_.cider_d ? clipped_similarity(candidate, *ref, idx)
                                  : sparse_cosine(candidate.tfidf[idx], ref->tfidf[idx]);
      }
      sum_orders += sum_refs / static_cast<double>(refs.size());
    }
    CiderScore out;
    out.raw = sum_orders / kCiderMaxN;
    out.scaled = out.raw * kCiderScale;
    return out;
  }

 private:
  const DocumentFrequencyTable& table(int n) const {
    return dfts_[static_cast<std::size_t>(n - 1)];
  }

  double clipped_similarity(const Vectors& cand, const Vectors& ref, std::size_t idx) const {
    const NGramVector& a = cand.counts[idx];
    const NGramVector& b = ref.counts[idx];
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0 || nb == 0) return 0.0;
    double dot = 0.0;
    for (const auto& [gram, w] : a.weights) {
      if (auto it = b.weights.find(gram); it != b.weights.end())
        dot += std::min(w, it->second) * it->second;
    }
    const double delta =
        static_cast<double>(cand.length) - static_cast<double>(ref.length);
    return dot / (na * nb) * std::exp(-(delta * delta) / (2.0 * opts_.sigma * opts_.sigma));
  }

  DocumentFrequencyTables dfts_;
  CiderOptions opts_;
};

inline CiderScore cider(const Caption& candidate, const std::vector<Caption>& references,
                        const DocumentFrequencyTables& dfts, const CiderOptions& opts = {}) {
  if (references.empty()) throw Error(ErrorCode::kNoReferences, "CIDEr needs a reference");
  const CiderScorer scorer(dfts, opts);
  const auto cand = scorer.vectorize(candidate);
  std::vector<CiderScorer::Vectors> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(scorer.vectorize(r));
  std::vector<const CiderScorer::Vectors*> ptrs;
  for (const auto& r : refs) ptrs.push_back(&r);
  return scorer.score(cand, ptrs);
}

// ---------------------------------------------------------------------------
// DF table persistence

inline nlohmann::json df_tables_to_json(const DocumentFrequencyTables& tables) {
  nlohmann::json records = nlohmann::json::array();
  std::size_t num_items = tables.empty() ? 0 : tables.front().num_items;
  for (const auto& t : tables) {
    for (const auto& [gram, df] : t.df) {
      records.push_back({{"order", t.order}, {"ngram", gram}, {"df", df}});
    }
  }
  return {{"format", "capscore-df"}, {"version", 1}, {"num_items", num_items},
          {"max_n", tables.size()}, {"records", records}};
}

inline DocumentFrequencyTables df_tables_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "capscore-df")
      throw Error(ErrorCode::kFormatError, "not a capscore DF dump");
    const auto num_items = j.at("num_items").get<std::size_t>();
    const int max_n = j.at("max_n").get<int>();
    if (num_items == 0 || max_n < 1)
      throw Error(ErrorCode::kFormatError, "DF dump has no items or orders");
    DocumentFrequencyTables tables;
    for (int n = 1; n <= max_n; ++n) tables.push_back({n, {}, num_items});
    for (const auto& rec : j.at("records")) {
      const int order = rec.at("order").get<int>();
      const auto df = rec.at("df").get<std::size_t>();
      if (order < 1 || order > max_n || df < 1 || df > num_items)
        throw Error(ErrorCode::kFormatError, "DF record out of range");
      auto gram = rec.at("ngram").get<std::string>();
      if (!tables[static_cast<std::size_t>(order - 1)].df.emplace(std::move(gram), df).second)
        throw Error(ErrorCode::kDuplicateKey, "duplicate DF record");
    }
    return tables;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("bad DF dump: ") + e.what());
  }
}

inline void save_df_tables(const DocumentFrequencyTables& tables, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << df_tables_to_json(tables).dump(1) << '\n';
}

inline DocumentFrequencyTables load_df_tables(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, path + ": " + e.what());
  }
  return df_tables_from_json(j);
}

}  // namespace capscore
