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

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "capscore/cider.hpp"
#include "capscore/corpus.hpp"
#include "capscore/embedding.hpp"
#include "capscore/overlap.hpp"
#include "capscore/wmd.hpp"

namespace capscore {

enum class Orientation { kHigherBetter, kLowerBetter };

/// A caption addressed by its position in a corpus.
struct CaptionRef {
  const CorpusItem* item = nullptr;
  std::size_t item_index = 0;
  std::size_t caption_index = 0;
  std::size_t flat_index = 0;  // position in flatten(corpus)

  const Caption& caption() const { return item->captions[caption_index]; }
  std::string key() const { return caption_key(item->item_id, caption_index); }
};

/// All captions of a corpus in item order, then caption order.
inline std::vector<CaptionRef> flatten(const Corpus& corpus) {
  std::vector<CaptionRef> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t c = 0; c < corpus[i].captions.size(); ++c)
      out.push_back({&corpus[i], i, c, out.size()});
  }
  return out;
}

/// A metric scored on one (candidate, reference) caption pair. nullopt
/// marks a missing score. Symmetric metrics are evaluated once per
/// unordered pair, asymmetric ones in both directions and averaged.
struct PairMetric {
  std::string name;
  Orientation orientation = Orientation::kHigherBetter;
  bool symmetric = false;
  std::function<std::optional<double>(const CaptionRef& candidate, const CaptionRef& reference)>
      score;
};

inline PairMetric make_bleu_pair_metric(int order, BleuSmoothing smoothing = BleuSmoothing::kNone) {
  if (order < 1 || order > 4)
    throw Error(ErrorCode::kInvalidArgument, "BLEU order must be 1..4");
  return {"BLEU_" + std::to_string(order), Orientation::kHigherBetter, false,
          [order, smoothing](const CaptionRef& c, const CaptionRef& r) -> std::optional<double> {
            return bleu(c.caption(), {r.caption()}, order, smoothing).back();
          }};
}

inline PairMetric make_rouge_pair_metric() {
  return {"ROUGE_L", Orientation::kHigherBetter, false,
          [](const CaptionRef& c, const CaptionRef& r) -> std::optional<double> {
            return rouge_l(c.caption(), {r.caption()});
          }};
}

inline PairMetric make_meteor_pair_metric(std::shared_ptr<const SynonymTable> syn) {
  if (!syn) syn = std::make_shared<SynonymTable>();
  return {"METEOR", Orientation::kHigherBetter, false,
          [syn](const CaptionRef& c, const CaptionRef& r) -> std::optional<double> {
            return meteor(c.caption(), {r.caption()}, *syn);
          }};
}

/// CIDEr with TF-IDF vectors of every corpus caption precomputed. The DF
/// tables default to the corpus itself.
inline PairMetric make_cider_pair_metric(const Corpus& corpus, CiderOptions opts = {},
                                         std::optional<DocumentFrequencyTables> dfts = {}) {
  auto scorer = std::make_shared<CiderScorer>(dfts ? std::move(*dfts) : build_df(corpus), opts);
  auto vectors = std::make_shared<std::vector<CiderScorer::Vectors>>();
  for (const auto& ref : flatten(corpus)) vectors->push_back(scorer->vectorize(ref.caption()));
  return {"CIDEr", Orientation::kHigherBetter, false,
          [scorer, vectors](const CaptionRef& c, const CaptionRef& r) -> std::optional<double> {
            return scorer->score((*vectors)[c.flat_index], {&(*vectors)[r.flat_index]})
                .value(scorer->options());
          }};
}

/// Sentence-embedding cosine; embeddings are looked up by `<item_id>#<index>`.
inline PairMetric make_sbert_pair_metric(std::shared_ptr<const EmbeddingStore> sentences) {
  return {"SBERT_sc", Orientation::kHigherBetter, true,
          [sentences](const CaptionRef& c, const CaptionRef& r) -> std::optional<double> {
            return cosine_similarity(sentences->at(c.key()), sentences->at(r.key()));
          }};
}

inline PairMetric make_wmd_pair_metric(std::shared_ptr<const EmbeddingStore> words,
                                       WmdOptions opts = {}) {
  return {"WMD", Orientation::kLowerBetter, true,
          [words, opts](const CaptionRef& c, const CaptionRef& r) -> std::optional<double> {
            return wmd(c.caption(), r.caption(), *words, opts);
          }};
}

}  // namespace capscore
