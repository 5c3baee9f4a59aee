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
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "capscore/corpus.hpp"
#include "capscore/error.hpp"
#include "capscore/pair_metrics.hpp"

namespace capscore {

/// Scores of every unordered pair of distinct captions in a corpus, stored
/// as a strict upper triangle over the flattened caption order.
class PairScoreMatrix {
 public:
  struct Slot {
    std::string key;  // `<item_id>#<caption_index>`
    std::size_t item_index;
  };

  PairScoreMatrix() = default;

  PairScoreMatrix(std::string metric_name, const Corpus& corpus)
      : metric_name_(std::move(metric_name)) {
    for (const auto& ref : flatten(corpus)) {
      index_.emplace(ref.key(), slots_.size());
      slots_.push_back({ref.key(), ref.item_index});
    }
    scores_.assign(num_pairs(), std::nullopt);
  }

  const std::string& metric_name() const noexcept { return metric_name_; }
  std::size_t num_captions() const noexcept { return slots_.size(); }
  std::size_t num_pairs() const noexcept { return slots_.size() * (slots_.size() - 1) / 2; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }

  /// Position of pair (i, j), i != j, in either order.
  std::size_t pair_index(std::size_t i, std::size_t j) const {
    if (i == j) throw Error(ErrorCode::kInvalidArgument, "a caption is never paired with itself");
    if (i > j) std::swap(i, j);
    const std::size_t n = slots_.size();
    return i * (2 * n - i - 1) / 2 + (j - i - 1);
  }

  std::optional<double>& at(std::size_t i, std::size_t j) { return scores_[pair_index(i, j)]; }
  const std::optional<double>& at(std::size_t i, std::size_t j) const {
    return scores_[pair_index(i, j)];
  }

  const std::optional<double>& at(const std::string& key_a, const std::string& key_b) const {
    return at(slot_of(key_a), slot_of(key_b));
  }

  std::size_t slot_of(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown caption " + key);
    return it->second;
  }

  const std::vector<std::optional<double>>& scores() const noexcept { return scores_; }
  std::vector<std::optional<double>>& scores() noexcept { return scores_; }

  /// Calls f(i, j, score) for every pair with i < j, row by row.
  template <typename F>
  void for_each_pair(F&& f) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i)
      for (std::size_t j = i + 1; j < slots_.size(); ++j) f(i, j, scores_[k++]);
  }

 private:
  std::string metric_name_;
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::optional<double>> scores_;
};

inline std::size_t default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Scores all caption pairs. Rows are dealt round-robin to `threads`
/// workers; every pair has its own slot so the result does not depend on
/// scheduling.
inline PairScoreMatrix pairwise_scores(const Corpus& corpus, const PairMetric& metric,
                                       std::size_t threads = 1) {
  const auto refs = flatten(corpus);
  if (refs.size() < 2)
    throw Error(ErrorCode::kInsufficientCorpus, "need at least two captions to form a pair");
  PairScoreMatrix m(metric.name, corpus);
  threads = std::clamp<std::size_t>(threads, 1, refs.size());

  auto score_pair = [&](std::size_t i, std::size_t j) -> std::optional<double> {
    if (metric.symmetric) return metric.score(refs[i], refs[j]);
    const auto ab = metric.score(refs[i], refs[j]);
    const auto ba = metric.score(refs[j], refs[i]);
    if (!ab || !ba) return std::nullopt;
    return 0.5 * (*ab + *ba);
  };

  // First failure in row order wins, independent of scheduling.
  std::vector<std::exception_ptr> row_errors(refs.size());
  auto worker = [&](std::size_t t) {
    for (std::size_t i = t; i < refs.size(); i += threads) {
      try {
        for (std::size_t j = i + 1; j < refs.size(); ++j) m.at(i, j) = score_pair(i, j);
      } catch (...) {
        row_errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  for (const auto& err : row_errors)
    if (err) std::rethrow_exception(err);
  return m;
}

/// Min-max rescaling to [0, 1] over all finite scores. Lower-is-better
/// metrics are negated first so 1 is always best.
inline PairScoreMatrix normalize_scores(const PairScoreMatrix& m, Orientation orientation) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const double sign = orientation == Orientation::kLowerBetter ? -1.0 : 1.0;
  for (const auto& s : m.scores()) {
    if (!s || !std::isfinite(*s)) continue;
    lo = std::min(lo, sign * *s);
    hi = std::max(hi, sign * *s);
  }
  if (!(hi > lo))
    throw Error(ErrorCode::kDegenerateRange,
                m.metric_name() + ": fewer than two distinct finite scores");
  PairScoreMatrix out = m;
  for (auto& s : out.scores()) {
    if (!s) continue;
    if (!std::isfinite(*s)) {
      s.reset();
      continue;
    }
    s = (sign * *s - lo) / (hi - lo);
  }
  return out;
}

struct Issue {
  ErrorCode code;
  std::string message;
};

/// AS / ADs / ADf aggregates of one metric. A bucket without finite pairs
/// leaves its mean empty and records an EmptyBucket issue.
struct DiscriminabilityReport {
  struct Counts {
    std::size_t similar = 0;
    std::size_t distinct = 0;
    std::size_t different = 0;
  };

  std::string metric_name;
  std::optional<double> as_score;
  std::optional<double> ads_score;
  std::optional<double> adf_score;
  std::optional<double> separation;  // as_score - adf_score
  Counts pair_counts;                // pairs per bucket
  Counts missing_counts;             // of which missing
  std::vector<Issue> issues;
};

namespace detail {

// Sum of the values in ascending order with Neumaier compensation, so the
// result does not depend on the order values were collected in.
inline double stable_mean(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0, comp = 0.0;
  for (const double v : values) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(values.size());
}

}  // namespace detail

inline DiscriminabilityReport aggregate(const PairScoreMatrix& m, const Corpus& corpus) {
  DiscriminabilityReport report;
  report.metric_name = m.metric_name();
  std::vector<double> similar, distinct, different;
  const auto& slots = m.slots();
  m.for_each_pair([&](std::size_t i, std::size_t j, const std::optional<double>& s) {
    const std::size_t a = slots[i].item_index;
    const std::size_t b = slots[j].item_index;
    const bool ok = s && std::isfinite(*s);
    if (a == b) {
      ++report.pair_counts.similar;
      if (ok) similar.push_back(*s); else ++report.missing_counts.similar;
      return;
    }
    ++report.pair_counts.distinct;
    if (ok) distinct.push_back(*s); else ++report.missing_counts.distinct;
    if (!tags_overlap(corpus[a], corpus[b])) {
      ++report.pair_counts.different;
      if (ok) different.push_back(*s); else ++report.missing_counts.different;
    }
  });
  auto mean_or_issue = [&](std::vector<double>& values, const char* bucket) {
    std::optional<double> out;
    if (values.empty()) {
      report.issues.push_back({ErrorCode::kEmptyBucket, report.metric_name + ": " + bucket +
                                                            " bucket has no finite pairs"});
    } else {
      out = detail::stable_mean(values);
    }
    return out;
  };
  report.as_score = mean_or_issue(similar, "AS");
  report.ads_score = mean_or_issue(distinct, "ADs");
  report.adf_score = mean_or_issue(different, "ADf");
  if (report.as_score && report.adf_score) report.separation = *report.as_score - *report.adf_score;
  return report;
}

/// Descending separation, then descending AS, then metric name. Reports
/// without a separation go last.
inline std::vector<DiscriminabilityReport> rank_metrics(std::vector<DiscriminabilityReport> reports) {
  auto key = [](const std::optional<double>& v) {
    return v ? *v : -std::numeric_limits<double>::infinity();
  };
  std::stable_sort(reports.begin(), reports.end(), [&](const auto& a, const auto& b) {
    if (a.separation.has_value() != b.separation.has_value()) return a.separation.has_value();
    if (key(a.separation) != key(b.separation)) return key(a.separation) > key(b.separation);
    if (key(a.as_score) != key(b.as_score)) return key(a.as_score) > key(b.as_score);
    return a.metric_name < b.metric_name;
  });
  return reports;
}

/// Raw and normalized protocol results for one metric.
struct MetricEvaluation {
  std::string metric_name;
  Orientation orientation = Orientation::kHigherBetter;
  DiscriminabilityReport raw;
  std::optional<DiscriminabilityReport> normalized;
  std::vector<Issue> issues;  // DegenerateRange and friends
};

inline MetricEvaluation evaluate_metric(const Corpus& corpus, const PairMetric& metric,
                                        std::size_t threads = 1) {
  MetricEvaluation ev;
  ev.metric_name = metric.name;
  ev.orientation = metric.orientation;
  const PairScoreMatrix raw = pairwise_scores(corpus, metric, threads);
  ev.raw = aggregate(raw, corpus);
  try {
    ev.normalized = aggregate(normalize_scores(raw, metric.orientation), corpus);
    ev.issues = ev.normalized->issues;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateRange) throw;
    ev.issues.push_back({e.code(), e.message()});
    for (const auto& issue : ev.raw.issues) ev.issues.push_back(issue);
  }
  return ev;
}

}  // namespace capscore
