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

#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "capscore/commands.hpp"

namespace capscore {

/// Exit status: 0 success (warnings allowed), 1 input or validation error,
/// 2 internal numerical failure.
inline int exit_code_for(ErrorCode code) {
  return code == ErrorCode::kNumericalFailure ? 2 : 1;
}

namespace detail {

inline void add_common_options(CLI::App* sub, RunConfig& cfg, std::string& format) {
  static const std::map<std::string, CorpusFormat> kCorpusFormats{
      {"csv", CorpusFormat::kCsv}, {"json", CorpusFormat::kJson}};
  static const std::map<std::string, BleuSmoothing> kSmoothing{
      {"none", BleuSmoothing::kNone}, {"add1", BleuSmoothing::kAddOne}};
  static const std::map<std::string, SbertAggregation> kAgg{
      {"mean", SbertAggregation::kMean}, {"max", SbertAggregation::kMax}};
  static const std::map<std::string, bool> kOnOff{{"on", true}, {"off", false}};

  sub->add_option("--corpus", cfg.corpus_path, "Reference corpus (CSV or JSON)")->required();
  sub->add_option("--corpus-format", cfg.corpus_format, "csv|json (default: by extension)")
      ->transform(CLI::CheckedTransformer(kCorpusFormats, CLI::ignore_case));
  sub->add_option("--word-emb", cfg.word_emb_path, "Word embeddings (CAPEMB)");
  sub->add_option("--sent-emb", cfg.sent_emb_path, "Sentence embeddings (CAPEMB)");
  sub->add_option("--metrics", cfg.metrics,
                  "Comma list: bleu,bleu_1..bleu_4,rouge_l,meteor,cider,sbert_sc,wmd")
      ->delimiter(',');
  sub->add_option("--synonyms", cfg.synonyms_path, "METEOR synonym table");
  sub->add_option("--stopwords", cfg.stopwords_path, "Stopwords dropped before WMD");
  sub->add_option("--cider-scale", cfg.cider_scale, "on|off: multiply CIDEr by 10")
      ->transform(CLI::CheckedTransformer(kOnOff, CLI::ignore_case));
  sub->add_flag("--cider-d", cfg.cider_d, "Use CIDEr-D clipping and length penalty");
  sub->add_option("--df-table", cfg.df_table_path, "Load CIDEr DF tables from a dump");
  sub->add_option("--dump-df", cfg.dump_df_path, "Write the CIDEr DF tables used");
  sub->add_option("--bleu-smoothing", cfg.bleu_smoothing, "none|add1")
      ->transform(CLI::CheckedTransformer(kSmoothing, CLI::ignore_case));
  sub->add_option("--sbert-agg", cfg.sbert_agg, "mean|max over references")
      ->transform(CLI::CheckedTransformer(kAgg, CLI::ignore_case));
  sub->add_option("--threads", cfg.threads, "Worker threads (default: CAPSCORE_THREADS or all cores)");
  sub->add_option("--out", cfg.out_path, "Output file (default: stdout)");
  sub->add_option("--format", format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}, CLI::ignore_case));
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"capscore: caption similarity metrics and metric discriminability"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string format = "json";

  auto* score = app.add_subcommand("score", "Score one candidate caption per item");
  detail::add_common_options(score, cfg, format);
  score->add_option("--candidates", cfg.candidates_path, "Candidates (CSV item_id,caption or JSON map)")
      ->required();
  score->add_flag("--per-item", cfg.per_item, "Include per-item scores");

  auto* pairwise = app.add_subcommand("pairwise", "Dump scores of all caption pairs");
  detail::add_common_options(pairwise, cfg, format);
  pairwise->add_flag("--normalized", cfg.normalized, "Add min-max normalized columns");

  auto* evaluate =
      app.add_subcommand("evaluate-metrics", "AS / ADs / ADf discriminability of each metric");
  detail::add_common_options(evaluate, cfg, format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  if (*score) cfg.command = Command::kScore;
  if (*pairwise) cfg.command = Command::kPairwise;
  if (*evaluate) cfg.command = Command::kEvaluateMetrics;
  cfg.format = (format == "csv" || format == "CSV") ? OutputFormat::kCsv : OutputFormat::kJson;

  try {
    const CommandResult result = run_command(cfg);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    if (cfg.out_path.empty()) {
      out << result.output;
    } else {
      std::ofstream file(cfg.out_path, std::ios::binary);
      if (!file) throw Error(ErrorCode::kIoError, "cannot write " + cfg.out_path);
      file << result.output;
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace capscore
