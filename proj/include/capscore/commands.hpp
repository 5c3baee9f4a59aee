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
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "capscore/cider.hpp"
#include "capscore/corpus.hpp"
#include "capscore/discriminability.hpp"
#include "capscore/embedding.hpp"
#include "capscore/error.hpp"
#include "capscore/ingest.hpp"
#include "capscore/overlap.hpp"
#include "capscore/pair_metrics.hpp"
#include "capscore/report.hpp"
#include "capscore/wmd.hpp"

namespace capscore {

enum class Command { kScore, kPairwise, kEvaluateMetrics };
enum class OutputFormat { kJson, kCsv };

// Column order of the per-split score table.
enum class MetricId { kBleu1, kBleu2, kBleu3, kBleu4, kRougeL, kMeteor, kCider, kSbert, kWmd };

inline std::string metric_name(MetricId id) {
  switch (id) {
    case MetricId::kBleu1: return "BLEU_1";
    case MetricId::kBleu2: return "BLEU_2";
    case MetricId::kBleu3: return "BLEU_3";
    case MetricId::kBleu4: return "BLEU_4";
    case MetricId::kRougeL: return "ROUGE_L";
    case MetricId::kMeteor: return "METEOR";
    case MetricId::kCider: return "CIDEr";
    case MetricId::kSbert: return "SBERT_sc";
    case MetricId::kWmd: return "WMD";
  }
  return "?";
}

inline std::string command_name(Command c) {
  switch (c) {
    case Command::kScore: return "score";
    case Command::kPairwise: return "pairwise";
    case Command::kEvaluateMetrics: return "evaluate-metrics";
  }
  return "?";
}

struct RunConfig {
  Command command = Command::kEvaluateMetrics;
  std::string corpus_path;
  std::optional<CorpusFormat> corpus_format;
  std::string candidates_path;
  std::string word_emb_path;
  std::string sent_emb_path;
  std::vector<std::string> metrics;  // empty selects the defaults
  std::string synonyms_path;
  std::string stopwords_path;
  std::string df_table_path;
  std::string dump_df_path;
  bool cider_scale = true;
  bool cider_d = false;
  BleuSmoothing bleu_smoothing = BleuSmoothing::kNone;
  SbertAggregation sbert_agg = SbertAggregation::kMean;
  std::size_t threads = 0;  // 0: CAPSCORE_THREADS, then hardware concurrency
  std::string out_path;  // empty: stdout
  OutputFormat format = OutputFormat::kJson;
  bool per_item = false;
  bool normalized = false;  // pairwise: also emit normalized scores
};

struct CommandResult {
  std::string output;
  std::vector<std::string> warnings;
};

/// Parses a comma-separated metric selection. Names are case-insensitive;
/// `bleu` expands to BLEU_1..BLEU_4.
inline std::vector<MetricId> parse_metric_list(const std::vector<std::string>& names) {
  std::vector<MetricId> out;
  auto add = [&](MetricId id) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  };
  for (const auto& entry : names) {
    std::stringstream ss(entry);
    std::string name;
    while (std::getline(ss, name, ',')) {
      std::string n;
      for (const char ch : name)
        if (!std::isspace(static_cast<unsigned char>(ch)))
          n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      if (n.empty()) continue;
      if (n == "bleu") {
        for (auto id : {MetricId::kBleu1, MetricId::kBleu2, MetricId::kBleu3, MetricId::kBleu4})
          add(id);
      } else if (n == "bleu_1" || n == "bleu1") { add(MetricId::kBleu1);
      } else if (n == "bleu_2" || n == "bleu2") { add(MetricId::kBleu2);
      } else if (n == "bleu_3" || n == "bleu3") { add(MetricId::kBleu3);
      } else if (n == "bleu_4" || n == "bleu4") { add(MetricId::kBleu4);
      } else if (n == "rouge" || n == "rouge_l" || n == "rougel") { add(MetricId::kRougeL);
      } else if (n == "meteor") { add(MetricId::kMeteor);
      } else if (n == "cider") { add(MetricId::kCider);
      } else if (n == "sbert" || n == "sbert_sc") { add(MetricId::kSbert);
      } else if (n == "wmd") { add(MetricId::kWmd);
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + name + "'");
      }
    }
  }
  return out;
}

/// Selected metrics after validating their requirements. Runs before any
/// file is read.
inline std::vector<MetricId> resolve_metrics(const RunConfig& cfg) {
  if (cfg.corpus_path.empty())
    throw Error(ErrorCode::kInvalidArgument, "--corpus is required");
  if (cfg.command == Command::kScore && cfg.candidates_path.empty())
    throw Error(ErrorCode::kInvalidArgument, "score needs --candidates");
  std::vector<MetricId> ids = parse_metric_list(cfg.metrics);
  if (cfg.metrics.empty()) {
    ids = {MetricId::kBleu1, MetricId::kBleu2, MetricId::kBleu3, MetricId::kBleu4,
           MetricId::kRougeL, MetricId::kMeteor, MetricId::kCider};
    if (!cfg.sent_emb_path.empty()) ids.push_back(MetricId::kSbert);
    if (!cfg.word_emb_path.empty()) ids.push_back(MetricId::kWmd);
  }
  if (ids.empty()) throw Error(ErrorCode::kInvalidArgument, "no metrics selected");
  for (const auto id : ids) {
    if (id == MetricId::kSbert && cfg.sent_emb_path.empty())
      throw Error(ErrorCode::kInvalidArgument, "SBERT_sc requires --sent-emb");
    if (id == MetricId::kWmd && cfg.word_emb_path.empty())
      throw Error(ErrorCode::kInvalidArgument, "WMD requires --word-emb");
  }
  return ids;
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CAPSCORE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return default_thread_count();
}

inline std::set<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    for (auto& t : tokenize(line)) words.insert(std::move(t));
  }
  return words;
}

namespace detail {

struct Inputs {
  CorpusFile corpus;
  std::shared_ptr<const EmbeddingStore> words;
  std::shared_ptr<const EmbeddingStore> sentences;
  std::shared_ptr<const SynonymTable> synonyms;
  WmdOptions wmd;
  std::optional<DocumentFrequencyTables> dfts;
};

inline std::shared_ptr<const EmbeddingStore> load_store(const std::string& path,
                                                        EmbeddingKind expected) {
  auto store = std::make_shared<EmbeddingStore>(load_embeddings(path));
  if (store->kind() != expected)
    throw Error(ErrorCode::kFormatError, path + ": expected " +
                                             std::string(embedding_kind_name(expected)) +
                                             " embeddings");
  return store;
}

inline Inputs load_inputs(const RunConfig& cfg, const std::vector<MetricId>& ids) {
  Inputs in;
  in.corpus = cfg.corpus_format ? load_corpus(cfg.corpus_path, *cfg.corpus_format)
                                : load_corpus(cfg.corpus_path);
  auto uses = [&](MetricId id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
  if (uses(MetricId::kWmd)) in.words = load_store(cfg.word_emb_path, EmbeddingKind::kWord);
  if (uses(MetricId::kSbert))
    in.sentences = load_store(cfg.sent_emb_path, EmbeddingKind::kSentence);
  in.synonyms = cfg.synonyms_path.empty()
                    ? std::make_shared<SynonymTable>()
                    : std::make_shared<SynonymTable>(SynonymTable::load(cfg.synonyms_path));
  if (!cfg.stopwords_path.empty()) in.wmd.stopwords = load_word_list(cfg.stopwords_path);
  if (!cfg.df_table_path.empty()) in.dfts = load_df_tables(cfg.df_table_path);
  if (!cfg.dump_df_path.empty())
    save_df_tables(in.dfts ? *in.dfts : build_df(in.corpus.items), cfg.dump_df_path);
  return in;
}

inline CiderOptions cider_options(const RunConfig& cfg) {
  CiderOptions o;
  o.scale = cfg.cider_scale;
  o.cider_d = cfg.cider_d;
  return o;
}

inline PairMetric make_pair_metric(MetricId id, const RunConfig& cfg, const Inputs& in) {
  switch (id) {
    case MetricId::kBleu1: return make_bleu_pair_metric(1, cfg.bleu_smoothing);
    case MetricId::kBleu2: return make_bleu_pair_metric(2, cfg.bleu_smoothing);
    case MetricId::kBleu3: return make_bleu_pair_metric(3, cfg.bleu_smoothing);
    case MetricId::kBleu4: return make_bleu_pair_metric(4, cfg.bleu_smoothing);
    case MetricId::kRougeL: return make_rouge_pair_metric();
    case MetricId::kMeteor: return make_meteor_pair_metric(in.synonyms);
    case MetricId::kCider: return make_cider_pair_metric(in.corpus.items, cider_options(cfg), in.dfts);
    case MetricId::kSbert: return make_sbert_pair_metric(in.sentences);
    case MetricId::kWmd: return make_wmd_pair_metric(in.words, in.wmd);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown metric");
}

// Thread count is deliberately absent: reports must not depend on it.
inline ordered_json config_echo(const RunConfig& cfg, const std::vector<MetricId>& ids) {
  ordered_json metrics = ordered_json::array();
  for (const auto id : ids) metrics.push_back(metric_name(id));
  ordered_json j;
  j["command"] = command_name(cfg.command);
  j["corpus"] = cfg.corpus_path;
  if (!cfg.candidates_path.empty()) j["candidates"] = cfg.candidates_path;
  if (!cfg.word_emb_path.empty()) j["word_emb"] = cfg.word_emb_path;
  if (!cfg.sent_emb_path.empty()) j["sent_emb"] = cfg.sent_emb_path;
  j["metrics"] = metrics;
  j["synonyms"] = cfg.synonyms_path.empty() ? ordered_json(nullptr) : ordered_json(cfg.synonyms_path);
  j["stopwords"] = cfg.stopwords_path.empty() ? ordered_json(nullptr) : ordered_json(cfg.stopwords_path);
  j["df_table"] = cfg.df_table_path.empty() ? ordered_json(nullptr) : ordered_json(cfg.df_table_path);
  j["cider_scale"] = cfg.cider_scale;
  j["cider_d"] = cfg.cider_d;
  j["bleu_smoothing"] = cfg.bleu_smoothing == BleuSmoothing::kNone ? "none" : "add1";
  j["sbert_agg"] = cfg.sbert_agg == SbertAggregation::kMean ? "mean" : "max";
  return j;
}

inline ordered_json aggregates_json(const DiscriminabilityReport& r) {
  ordered_json j;
  j["AS"] = optional_number(r.as_score);
  j["ADs"] = optional_number(r.ads_score);
  j["ADf"] = optional_number(r.adf_score);
  j["AS-ADf"] = optional_number(r.separation);
  return j;
}

inline ordered_json counts_json(const DiscriminabilityReport::Counts& c) {
  ordered_json j;
  j["similar"] = c.similar;
  j["distinct"] = c.distinct;
  j["different"] = c.different;
  return j;
}

// Mean that ignores missing entries.
struct MeanAccumulator {
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t missing = 0;

  void add(const std::optional<double>& v) {
    if (v && std::isfinite(*v)) {
      sum += *v;
      ++count;
    } else {
      ++missing;
    }
  }
  std::optional<double> mean() const {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------

/// Per-split scores of one candidate caption per item against that item's
/// references. BLEU pools n-gram statistics over the split; the other
/// metrics average per-item scores.
inline CommandResult cmd_score(const RunConfig& cfg) {
  const auto ids = resolve_metrics(cfg);
  CommandResult result;
  const auto in = detail::load_inputs(cfg, ids);
  const Corpus& corpus = in.corpus.items;
  const CandidateSet candidates = load_candidates(cfg.candidates_path);
  const CandidateCoverage coverage = cross_validate(candidates, corpus);
  if (!coverage.missing.empty())
    result.warnings.push_back(std::to_string(coverage.missing.size()) +
                              " corpus items have no candidate and are not scored");
  if (coverage.covered == 0)
    throw Error(ErrorCode::kInvalidArgument, "no candidate matches a corpus item");

  auto uses = [&](MetricId id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
  std::optional<CiderScorer> cider_scorer;
  if (uses(MetricId::kCider))
    cider_scorer.emplace(in.dfts ? *in.dfts : build_df(corpus), detail::cider_options(cfg));

  BleuStats pooled(4);
  std::map<MetricId, detail::MeanAccumulator> means;
  ordered_json per_item = ordered_json::array();
  for (const auto& item : corpus) {
    auto cand_it = candidates.entries.find(item.item_id);
    if (cand_it == candidates.entries.end()) continue;
    const Caption& cand = cand_it->second;
    const auto& refs = item.captions;
    std::map<MetricId, std::optional<double>> row;

    const BleuStats stats = bleu_stats(cand, refs, 4);
    pooled += stats;
    const auto sentence_bleu = bleu_from_stats(stats, cfg.bleu_smoothing);
    for (int k = 0; k < 4; ++k) row[static_cast<MetricId>(k)] = sentence_bleu[static_cast<std::size_t>(k)];
    if (uses(MetricId::kRougeL)) row[MetricId::kRougeL] = rouge_l(cand, refs);
    if (uses(MetricId::kMeteor)) row[MetricId::kMeteor] = meteor(cand, refs, *in.synonyms);
    if (cider_scorer) {
      const auto cv = cider_scorer->vectorize(cand);
      std::vector<CiderScorer::Vectors> rv;
      for (const auto& r : refs) rv.push_back(cider_scorer->vectorize(r));
      std::vector<const CiderScorer::Vectors*> ptrs;
      for (const auto& r : rv) ptrs.push_back(&r);
      row[MetricId::kCider] = cider_scorer->score(cv, ptrs).value(cider_scorer->options());
    }
    if (uses(MetricId::kSbert)) {
      const auto& ce = in.sentences->at(candidate_key(item.item_id));
      std::vector<const EmbeddingVector*> re;
      for (std::size_t c = 0; c < refs.size(); ++c)
        re.push_back(&in.sentences->at(caption_key(item.item_id, c)));
      row[MetricId::kSbert] = sbert_sc(ce, re, cfg.sbert_agg);
    }
    if (uses(MetricId::kWmd)) {
      detail::MeanAccumulator acc;
      for (const auto& r : refs) acc.add(wmd(cand, r, *in.words, in.wmd));
      row[MetricId::kWmd] = acc.mean();
    }

    ordered_json item_json;
    item_json["item_id"] = item.item_id;
    item_json["candidate"] = cand.raw;
    for (const auto id : ids) {
      if (id != MetricId::kBleu1 && id != MetricId::kBleu2 && id != MetricId::kBleu3 &&
          id != MetricId::kBleu4)
        means[id].add(row[id]);
      item_json[metric_name(id)] = optional_number(row[id]);
    }
    per_item.push_back(std::move(item_json));
  }

  const auto corpus_bleu = bleu_from_stats(pooled, cfg.bleu_smoothing);
  std::vector<MetricId> ordered = ids;
  std::sort(ordered.begin(), ordered.end());
  std::map<MetricId, std::optional<double>> final_scores;
  for (const auto id : ordered) {
    const int k = static_cast<int>(id);
    final_scores[id] = k < 4 ? std::optional<double>(corpus_bleu[static_cast<std::size_t>(k)])
                             : means[id].mean();
  }
  if (uses(MetricId::kWmd) && means[MetricId::kWmd].missing > 0)
    result.warnings.push_back(std::to_string(means[MetricId::kWmd].missing) +
                              " items have no WMD (all tokens out of vocabulary)");

  if (cfg.format == OutputFormat::kCsv) {
    std::string header, values;
    for (const auto id : ordered) {
      header += (header.empty() ? "" : ",") + metric_name(id);
      values += (values.empty() ? "" : ",") + csv_number(final_scores[id]);
    }
    result.output = header + "\n" + values + "\n";
    return result;
  }

  ordered_json j;
  j["config"] = detail::config_echo(cfg, ids);
  j["coverage"] = {{"items", corpus.size()},
                   {"scored", coverage.covered},
                   {"missing", coverage.missing}};
  ordered_json scores;
  for (const auto id : ordered) scores[metric_name(id)] = optional_number(final_scores[id]);
  j["scores"] = scores;
  if (uses(MetricId::kWmd))
    j["wmd_items"] = {{"scored", means[MetricId::kWmd].count},
                      {"missing", means[MetricId::kWmd].missing}};
  if (cfg.per_item) j["per_item"] = per_item;
  j["warnings"] = result.warnings;
  result.output = dump_report(j);
  return result;
}

/// Runs the discriminability protocol for every selected metric and emits
/// the ranked AS / ADs / ADf table.
inline CommandResult cmd_evaluate_metrics(const RunConfig& cfg) {
  const auto ids = resolve_metrics(cfg);
  CommandResult result;
  const auto in = detail::load_inputs(cfg, ids);
  const Corpus& corpus = in.corpus.items;
  const std::size_t threads = resolve_threads(cfg.threads);

  std::vector<MetricEvaluation> evals;
  for (const auto id : ids)
    evals.push_back(evaluate_metric(corpus, detail::make_pair_metric(id, cfg, in), threads));

  std::vector<DiscriminabilityReport> for_ranking;
  for (const auto& ev : evals) {
    DiscriminabilityReport r = ev.normalized ? *ev.normalized : DiscriminabilityReport{};
    r.metric_name = ev.metric_name;
    for_ranking.push_back(std::move(r));
    for (const auto& issue : ev.issues) result.warnings.push_back(issue.message);
  }
  const auto ranked = rank_metrics(for_ranking);
  auto find_eval = [&](const std::string& name) -> const MetricEvaluation& {
    return *std::find_if(evals.begin(), evals.end(),
                         [&](const auto& e) { return e.metric_name == name; });
  };

  if (cfg.format == OutputFormat::kCsv) {
    std::string out = "Metric,AS,ADs,ADf,AS-ADf\n";
    for (const auto& r : ranked) {
      out += r.metric_name + "," + csv_number(r.as_score) + "," + csv_number(r.ads_score) + "," +
             csv_number(r.adf_score) + "," + csv_number(r.separation) + "\n";
    }
    result.output = out;
    return result;
  }

  std::size_t captions = 0;
  for (const auto& item : corpus) captions += item.captions.size();
  ordered_json j;
  j["config"] = detail::config_echo(cfg, ids);
  j["corpus"] = {{"items", corpus.size()},
                 {"captions", captions},
                 {"pairs", captions * (captions - 1) / 2}};
  ordered_json ranking = ordered_json::array();
  for (const auto& r : ranked) ranking.push_back(r.metric_name);
  j["ranking"] = ranking;
  ordered_json metrics = ordered_json::array();
  for (const auto& r : ranked) {
    const auto& ev = find_eval(r.metric_name);
    ordered_json m;
    m["metric"] = ev.metric_name;
    m["orientation"] = ev.orientation == Orientation::kHigherBetter ? "higher" : "lower";
    m["normalized"] = ev.normalized ? detail::aggregates_json(*ev.normalized) : ordered_json(nullptr);
    m["raw"] = detail::aggregates_json(ev.raw);
    m["pair_counts"] = detail::counts_json(ev.raw.pair_counts);
    m["missing_counts"] = detail::counts_json(ev.raw.missing_counts);
    ordered_json issues = ordered_json::array();
    for (const auto& issue : ev.issues)
      issues.push_back({{"code", std::string(ErrorCodeName(issue.code))}, {"message", issue.message}});
    m["issues"] = issues;
    metrics.push_back(std::move(m));
  }
  j["metrics"] = metrics;
  j["warnings"] = result.warnings;
  result.output = dump_report(j);
  return result;
}

/// Dumps every unordered caption pair with one score column per metric,
/// optionally followed by normalized columns.
inline CommandResult cmd_pairwise(const RunConfig& cfg) {
  const auto ids = resolve_metrics(cfg);
  CommandResult result;
  const auto in = detail::load_inputs(cfg, ids);
  const Corpus& corpus = in.corpus.items;
  const std::size_t threads = resolve_threads(cfg.threads);

  struct Column {
    std::string name;
    PairScoreMatrix matrix;
  };
  std::vector<Column> columns;
  for (const auto id : ids) {
    const PairMetric metric = detail::make_pair_metric(id, cfg, in);
    PairScoreMatrix raw = pairwise_scores(corpus, metric, threads);
    std::optional<PairScoreMatrix> norm;
    if (cfg.normalized) {
      try {
        norm = normalize_scores(raw, metric.orientation);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateRange) throw;
        result.warnings.push_back(e.message() + "; raw scores only");
      }
    }
    columns.push_back({metric.name, std::move(raw)});
    if (norm) columns.push_back({metric.name + "_norm", std::move(*norm)});
  }

  const auto& slots = columns.front().matrix.slots();
  if (cfg.format == OutputFormat::kJson) {
    ordered_json pairs = ordered_json::array();
    columns.front().matrix.for_each_pair([&](std::size_t i, std::size_t j, const auto&) {
      ordered_json row;
      row["a"] = slots[i].key;
      row["b"] = slots[j].key;
      for (const auto& col : columns) row[col.name] = optional_number(col.matrix.at(i, j));
      pairs.push_back(std::move(row));
    });
    ordered_json j;
    j["config"] = detail::config_echo(cfg, ids);
    j["pairs"] = pairs;
    j["warnings"] = result.warnings;
    result.output = dump_report(j);
    return result;
  }
  std::string out = "caption_a,caption_b";
  for (const auto& col : columns) out += "," + col.name;
  out += "\n";
  columns.front().matrix.for_each_pair([&](std::size_t i, std::size_t j, const auto&) {
    out += csv_escape(slots[i].key) + "," + csv_escape(slots[j].key);
    for (const auto& col : columns) out += "," + csv_number(col.matrix.at(i, j));
    out += "\n";
  });
  result.output = out;
  return result;
}

inline CommandResult run_command(const RunConfig& cfg) {
  switch (cfg.command) {
    case Command::kScore: return cmd_score(cfg);
    case Command::kPairwise: return cmd_pairwise(cfg);
    case Command::kEvaluateMetrics: return cmd_evaluate_metrics(cfg);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown command");
}

}  // namespace capscore
