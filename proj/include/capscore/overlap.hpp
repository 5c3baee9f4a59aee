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
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "capscore/error.hpp"
#include "capscore/stem.hpp"
#include "capscore/text.hpp"

namespace capscore {

// ---------------------------------------------------------------------------
// BLEU

enum class BleuSmoothing {
  kNone,
  // Add one to numerator and denominator of orders >= 2.
  kAddOne,
};

/// Sufficient statistics for BLEU. Sentence statistics add up to corpus
/// statistics.
struct BleuStats {
  std::vector<double> matches;  // clipped n-gram matches per order
  std::vector<double> totals;   // candidate n-gram count per order
  double candidate_length = 0;
  double reference_length = 0;

  explicit BleuStats(int max_n = 4)
      : matches(static_cast<std::size_t>(max_n), 0.0),
        totals(static_cast<std::size_t>(max_n), 0.0) {}

  BleuStats& operator+=(const BleuStats& other) {
    for (std::size_t i = 0; i < matches.size(); ++i) {
      matches[i] += other.matches[i];
      totals[i] += other.totals[i];
    }
    candidate_length += other.candidate_length;
    reference_length += other.reference_length;
    return *this;
  }
};

/// Reference length closest to the candidate length; ties go to the
/// shorter reference.
inline std::size_t closest_reference_length(std::size_t candidate_length,
                                            const std::vector<Caption>& references) {
  std::size_t best = references.front().size();
  auto dist = [&](std::size_t r) {
    return r > candidate_length ? r - candidate_length : candidate_length - r;
  };
  for (const auto& ref : references) {
    const std::size_t r = ref.size();
    if (dist(r) < dist(best) || (dist(r) == dist(best) && r < best)) best = r;
  }
  return best;
}

inline BleuStats bleu_stats(const Caption& candidate,
                            const std::vector<Caption>& references, int max_n) {
  if (max_n < 1) throw Error(ErrorCode::kInvalidArgument, "max_n must be >= 1");
  if (references.empty()) throw Error(ErrorCode::kNoReferences, "BLEU needs a reference");
  BleuStats stats(max_n);
  for (int n = 1; n <= max_n; ++n) {
    const NGramVector cand = extract_ngrams(candidate, n);
    // Clip each candidate n-gram at its maximum count in any one reference.
    std::map<NGram, double> max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : extract_ngrams(ref, n).weights) {
        double& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    double matched = 0.0;
    for (const auto& [gram, count] : cand.weights) {
      if (auto it = max_ref.find(gram); it != max_ref.end())
        matched += std::min(count, it->second);
    }
    const auto idx = static_cast<std::size_t>(n - 1);
    stats.matches[idx] = matched;
    stats.totals[idx] = cand.total();
  }
  stats.candidate_length = static_cast<double>(candidate.size());
  stats.reference_length =
      static_cast<double>(closest_reference_length(candidate.size(), references));
  return stats;
}

/// BLEU-1..BLEU-max_n from accumulated statistics.
inline std::vector<double> bleu_from_stats(const BleuStats& stats,
                                           BleuSmoothing smoothing = BleuSmoothing::kNone) {
  const std::size_t max_n = stats.matches.size();
  std::vector<double> scores(max_n, 0.0);
  if (stats.candidate_length <= 0) return scores;
  const double bp =
      std::exp(std::min(0.0, 1.0 - stats.reference_length / stats.candidate_length));
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t i = 0; i < max_n; ++i) {
    double num = stats.matches[i];
    double den = stats.totals[i];
    if (smoothing == BleuSmoothing::kAddOne && i > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (den <= 0 || num <= 0) zero = true;
    if (!zero) log_sum += std::log(num / den);
    scores[i] = zero ? 0.0 : bp * std::exp(log_sum / static_cast<double>(i + 1));
  }
  return scores;
}

/// Sentence-level BLEU-1..BLEU-max_n of a candidate against its references.
inline std::vector<double> bleu(const Caption& candidate,
                                const std::vector<Caption>& references, int max_n = 4,
                                BleuSmoothing smoothing = BleuSmoothing::kNone) {
  return bleu_from_stats(bleu_stats(candidate, references, max_n), smoothing);
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline constexpr double kRougeBeta = 1.2;

inline double rouge_l(const Caption& candidate, const std::vector<Caption>& references,
                      double beta = kRougeBeta) {
  if (references.empty()) throw Error(ErrorCode::kNoReferences, "ROUGE-L needs a reference");
  const double beta2 = beta * beta;
  double best = 0.0;
  for (const auto& ref : references) {
    const auto lcs = static_cast<double>(lcs_length(candidate.tokens, ref.tokens));
    if (lcs == 0) continue;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(ref.size());
    best = std::max(best, (1.0 + beta2) * p * r / (r + beta2 * p));
  }
  return best;
}

// ---------------------------------------------------------------------------
// METEOR

/// Synonym classes. A token may belong to several groups; two tokens are
/// synonyms when some group contains both.
class SynonymTable {
 public:
  SynonymTable() = default;

  explicit SynonymTable(std::vector<std::set<std::string>> groups) {
    for (auto& g : groups) add_group(std::move(g));
  }

  void add_group(std::set<std::string> group) {
    if (group.empty()) return;
    const std::size_t id = groups_.size();
    for (const auto& token : group) membership_[token].push_back(id);
    groups_.push_back(std::move(group));
  }

  bool synonyms(const std::string& a, const std::string& b) const {
    auto ia = membership_.find(a);
    auto ib = membership_.find(b);
    if (ia == membership_.end() || ib == membership_.end()) return false;
    for (std::size_t ga : ia->second)
      for (std::size_t gb : ib->second)
        if (ga == gb) return true;
    return false;
  }

  const std::vector<std::set<std::string>>& groups() const noexcept { return groups_; }
  bool empty() const noexcept { return groups_.empty(); }

  /// One group per line, whitespace-separated tokens, `#` starts a comment.
  /// Tokens are lowercased like caption tokens.
  static SynonymTable parse(std::istream& in) {
    SynonymTable table;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::set<std::string> group;
      std::istringstream words(line);
      std::string word;
      while (words >> word) {
        for (auto& t : tokenize(word)) group.insert(std::move(t));
      }
      table.add_group(std::move(group));
    }
    return table;
  }

  static SynonymTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open synonym table " + path);
    return parse(in);
  }

 private:
  std::vector<std::set<std::string>> groups_;
  std::unordered_map<std::string, std::vector<std::size_t>> membership_;
};

enum class MatchStage { kExact, kStem, kSynonym };

/// One-to-one alignment between candidate and reference positions.
struct MatchAlignment {
  struct Pair {
    std::size_t candidate;
    std::size_t reference;
    MatchStage stage;
  };
  std::vector<Pair> pairs;  // sorted by candidate index

  std::size_t matches() const noexcept { return pairs.size(); }

  /// Runs of pairs adjacent in both sentences.
  std::size_t chunks() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (i == 0 || pairs[i].candidate != pairs[i - 1].candidate + 1 ||
          pairs[i].reference != pairs[i - 1].reference + 1)
        ++n;
    }
    return n;
  }
};

struct MeteorParams {
  double recall_weight = 9.0;  // Fmean = 10PR / (R + 9P)
  double penalty_gamma = 0.5;
  double penalty_beta = 3.0;
  // Exact search bound; longer sentences fall back to greedy alignment.
  std::size_t exact_max_tokens = 25;
  // Per-stage search node budget before falling back to greedy.
  std::size_t node_budget = 2'000'000;
};

namespace detail {

constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);

inline std::size_t chunks_of(const std::vector<std::size_t>& cand_to_ref,
                             std::size_t upto) {
  std::size_t n = 0;
  bool prev_matched = false;
  std::size_t prev_ref = 0;
  for (std::size_t c = 0; c < upto; ++c) {
    const std::size_t r = cand_to_ref[c];
    if (r == kUnmatched) {
      prev_matched = false;
      continue;
    }
    if (!prev_matched || r != prev_ref + 1) ++n;
    prev_matched = true;
    prev_ref = r;
  }
  return n;
}

// Maximum bipartite matching size via augmenting paths.
inline std::size_t max_matching(const std::vector<std::vector<std::size_t>>& options,
                                std::size_t num_refs) {
  std::vector<std::size_t> ref_owner(num_refs, kUnmatched);
  std::size_t size = 0;
  for (std::size_t c = 0; c < options.size(); ++c) {
    std::vector<char> seen(num_refs, 0);
    auto augment = [&](auto&& self, std::size_t cand) -> bool {
      for (std::size_t r : options[cand]) {
        if (seen[r]) continue;
        seen[r] = 1;
        if (ref_owner[r] == kUnmatched || self(self, ref_owner[r])) {
          ref_owner[r] = cand;
          return true;
        }
      }
      return false;
    };
    if (augment(augment, c)) ++size;
  }
  return size;
}

// Adds one stage of matches to cand_to_ref / ref_used. Among alignments with
// the maximum number of new matches, picks the one minimizing total chunks;
// ties resolve to the first found in lexicographic search order.
class StageAligner {
 public:
  StageAligner(std::vector<std::vector<std::size_t>> options,
               std::vector<std::size_t>& cand_to_ref, std::vector<char>& ref_used)
      : options_(std::move(options)), cand_to_ref_(cand_to_ref), ref_used_(ref_used) {}

  void run_exact(std::size_t node_budget) {
    target_ = max_matching(options_, ref_used_.size());
    if (target_ == 0) return;
    remaining_with_options_.assign(options_.size() + 1, 0);
    for (std::size_t c = options_.size(); c-- > 0;)
      remaining_with_options_[c] =
          remaining_with_options_[c + 1] + (options_[c].empty() ? 0 : 1);
    budget_ = node_budget;
    best_chunks_ = kUnmatched;
    std::vector<std::size_t> working = cand_to_ref_;
    search(0, 0, working);
    if (best_.empty()) {
      run_greedy();
      return;
    }
    for (std::size_t c = 0; c < best_.size(); ++c) {
      if (best_[c] != kUnmatched && cand_to_ref_[c] == kUnmatched) ref_used_[best_[c]] = 1;
    }
    cand_to_ref_ = best_;
  }

  bool exhausted() const noexcept { return exhausted_; }

  // Left to right; prefers a reference position continuing the previous
  // match, else the first free one.
  void run_greedy() {
    for (std::size_t c = 0; c < options_.size(); ++c) {
      if (options_[c].empty()) continue;
      std::size_t pick = kUnmatched;
      const bool has_prev = c > 0 && cand_to_ref_[c - 1] != kUnmatched;
      for (std::size_t r : options_[c]) {
        if (ref_used_[r]) continue;
        if (has_prev && r == cand_to_ref_[c - 1] + 1) {
          pick = r;
          break;
        }
        if (pick == kUnmatched) pick = r;
      }
      if (pick != kUnmatched) {
        cand_to_ref_[c] = pick;
        ref_used_[pick] = 1;
      }
    }
  }

 private:
  void search(std::size_t c, std::size_t added, std::vector<std::size_t>& working) {
    if (budget_ == 0) {
      exhausted_ = true;
      return;
    }
    --budget_;
    if (added + remaining_with_options_[c] < target_) return;
    if (best_chunks_ != kUnmatched && chunks_of(working, c) >= best_chunks_) return;
    if (c == options_.size()) {
      if (added == target_) {
        best_chunks_ = chunks_of(working, c);
        best_ = working;
      }
      return;
    }
    for (std::size_t r : options_[c]) {
      if (ref_used_[r]) continue;
      ref_used_[r] = 1;
      working[c] = r;
      search(c + 1, added + 1, working);
      working[c] = kUnmatched;
      ref_used_[r] = 0;
      if (exhausted_) return;
    }
    search(c + 1, added, working);
  }

  std::vector<std::vector<std::size_t>> options_;
  std::vector<std::size_t>& cand_to_ref_;
  std::vector<char>& ref_used_;
  std::vector<std::size_t> remaining_with_options_;
  std::vector<std::size_t> best_;
  std::size_t best_chunks_ = kUnmatched;
  std::size_t target_ = 0;
  std::size_t budget_ = 0;
  bool exhausted_ = false;
};

}  // namespace detail

/// Staged METEOR alignment: exact, then stem, then synonym matches, each
/// stage restricted to positions left unmatched by earlier stages.
inline MatchAlignment meteor_align(const Caption& candidate, const Caption& reference,
                                   const SynonymTable& syn,
                                   const MeteorParams& params = {}) {
  const std::size_t nc = candidate.size();
  const std::size_t nr = reference.size();
  std::vector<std::size_t> cand_to_ref(nc, detail::kUnmatched);
  std::vector<MatchStage> stage_of(nc, MatchStage::kExact);
  std::vector<char> ref_used(nr, 0);
  const bool exact_search =
      std::max(nc, nr) <= params.exact_max_tokens;

  std::vector<std::string> cand_stems, ref_stems;
  for (const auto& t : candidate.tokens) cand_stems.push_back(stem(t));
  for (const auto& t : reference.tokens) ref_stems.push_back(stem(t));

  const MatchStage stages[] = {MatchStage::kExact, MatchStage::kStem, MatchStage::kSynonym};
  for (const MatchStage stage : stages) {
    if (stage == MatchStage::kSynonym && syn.empty()) break;
    std::vector<std::vector<std::size_t>> options(nc);
    bool any = false;
    for (std::size_t c = 0; c < nc; ++c) {
      if (cand_to_ref[c] != detail::kUnmatched) continue;
      for (std::size_t r = 0; r < nr; ++r) {
        if (ref_used[r]) continue;
        bool ok = false;
        switch (stage) {
          case MatchStage::kExact: ok = candidate.tokens[c] == reference.tokens[r]; break;
          case MatchStage::kStem: ok = cand_stems[c] == ref_stems[r]; break;
          case MatchStage::kSynonym:
            ok = syn.synonyms(candidate.tokens[c], reference.tokens[r]);
            break;
        }
        if (ok) {
          options[c].push_back(r);
          any = true;
        }
      }
    }
    if (!any) continue;
    const std::vector<std::size_t> before = cand_to_ref;
    {
      detail::StageAligner aligner(std::move(options), cand_to_ref, ref_used);
      if (exact_search) {
        aligner.run_exact(params.node_budget);
      } else {
        aligner.run_greedy();
      }
    }
    for (std::size_t c = 0; c < nc; ++c) {
      if (before[c] == detail::kUnmatched && cand_to_ref[c] != detail::kUnmatched)
        stage_of[c] = stage;
    }
  }

  MatchAlignment alignment;
  for (std::size_t c = 0; c < nc; ++c) {
    if (cand_to_ref[c] != detail::kUnmatched)
      alignment.pairs.push_back({c, cand_to_ref[c], stage_of[c]});
  }
  return alignment;
}

inline double meteor_score(const MatchAlignment& alignment, std::size_t candidate_length,
                           std::size_t reference_length, const MeteorParams& params = {}) {
  const auto m = static_cast<double>(alignment.matches());
  if (m == 0) return 0.0;
  const double p = m / static_cast<double>(candidate_length);
  const double r = m / static_cast<double>(reference_length);
  const double fmean = (params.recall_weight + 1.0) * p * r / (r + params.recall_weight * p);
  const double frag = static_cast<double>(alignment.chunks()) / m;
  const double penalty = params.penalty_gamma * std::pow(frag, params.penalty_beta);
  return fmean * (1.0 - penalty);
}

/// Best METEOR score of the candidate over its references.
inline double meteor(const Caption& candidate, const std::vector<Caption>& references,
                     const SynonymTable& syn = {}, const MeteorParams& params = {}) {
  if (references.empty()) throw Error(ErrorCode::kNoReferences, "METEOR needs a reference");
  double best = 0.0;
  for (const auto& ref : references) {
    const auto alignment = meteor_align(candidate, ref, syn, params);
    best = std::max(best, meteor_score(alignment, candidate.size(), ref.size(), params));
  }
  return best;
}

}  // namespace capscore
