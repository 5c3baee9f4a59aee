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

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include "gtest/gtest.h"

#include "capscore/ingest.hpp"
#include "support/generators.hpp"

namespace capscore {
namespace {

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

TEST(CsvTest, Rfc4180Quoting) {
  const auto recs = parse_csv("a,b,c\r\n\"x, y\",\"he said \"\"hi\"\"\",\"two\nlines\"\nlast,,\n");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1].fields, (std::vector<std::string>{"x, y", "he said \"hi\"", "two\nlines"}));
  EXPECT_EQ(recs[1].line, 2u);
  EXPECT_EQ(recs[2].line, 4u);
  EXPECT_EQ(recs[2].fields, (std::vector<std::string>{"last", "", ""}));
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a \"b\", c"), "\"a \"\"b\"\", c\"");
  EXPECT_EQ(code_of([] { parse_csv("a,\"unterminated\n"); }), ErrorCode::kParseError);
}

TEST(CorpusCsvTest, CsvAndJsonFixturesAgree) {
  const auto csv = load_corpus(testing::data_path("synthetic_corpus.csv"));
  const auto json = load_corpus(testing::data_path("synthetic_corpus.json"));
  EXPECT_EQ(csv.source_format, CorpusFormat::kCsv);
  EXPECT_EQ(json.source_format, CorpusFormat::kJson);
  EXPECT_EQ(csv.items, json.items);
  ASSERT_EQ(json.items.size(), 4u);
  EXPECT_EQ(json.items[0].item_id, "dog");
  EXPECT_EQ(json.items[0].tags, (std::set<std::string>{"animal", "dog"}));
  EXPECT_EQ(json.items[3].captions[1].tokens, (std::vector<std::string>{"the", "engine", "hums", "smoothly", "late", "at", "night"}));
}

TEST(CorpusCsvTest, TagsAreCanonicalized) {
  const auto c = parse_corpus_csv("item_id,caption_index,caption,tags\nx,0,a dog, Dog ; BARK;;\n");
  EXPECT_EQ(c[0].tags, (std::set<std::string>{"dog", "bark"}));
}

TEST(CorpusCsvTest, CaptionsFollowIndexOrder) {
  const auto c = parse_corpus_csv("item_id,caption_index,caption\nx,1,second\ny,0,other\nx,0,first\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].item_id, "x");
  EXPECT_EQ(c[0].captions[0].raw, "first");
  EXPECT_EQ(c[0].captions[1].raw, "second");
}

TEST(CorpusCsvTest, Errors) {
  std::string msg;
  EXPECT_EQ(code_of([] { parse_corpus_csv("id,caption\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_corpus_csv("item_id,caption_index,caption\nx,0\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_corpus_csv("item_id,caption_index,caption\nx,zero,a\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_corpus_csv("item_id,caption_index,caption\nx,0,a\nx,0,b\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_corpus_csv("item_id,caption_index,caption\nx,0,a\nx,2,b\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] {
              parse_corpus_csv("item_id,caption_index,caption,tags\nx,0,a,dog\nx,1,b,cat\n");
            }),
            ErrorCode::kDuplicateItem);
  EXPECT_EQ(code_of([] { parse_corpus_csv("item_id,caption_index,caption\nx,0,a\nx,1,\" ,. \"\n"); },
                    &msg),
            ErrorCode::kEmptyCaption);
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(CorpusJsonTest, Errors) {
  auto parse = [](const char* text) {
    return code_of([&] { corpus_from_json(nlohmann::json::parse(text)); });
  };
  EXPECT_EQ(parse(R"({"item_id": "x"})"), ErrorCode::kParseError);
  EXPECT_EQ(parse(R"([{"captions": ["a"]}])"), ErrorCode::kParseError);
  EXPECT_EQ(parse(R"([{"item_id": "x", "captions": []}])"), ErrorCode::kParseError);
  EXPECT_EQ(parse(R"([{"item_id": "x", "captions": ["a"]}, {"item_id": "x", "captions": ["b"]}])"),
            ErrorCode::kDuplicateItem);
  EXPECT_EQ(parse(R"([{"item_id": "x", "captions": ["!!"]}])"), ErrorCode::kEmptyCaption);
}

TEST(CorpusJsonTest, LoadErrorCarriesPath) {
  const auto path = (std::filesystem::temp_directory_path() / "capscore_bad_corpus.json").string();
  std::ofstream(path) << "[{\"item_id\": 1}";
  std::string msg;
  EXPECT_EQ(code_of([&] { load_corpus(path); }, &msg), ErrorCode::kParseError);
  EXPECT_NE(msg.find(path), std::string::npos);
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([] { load_corpus("/nonexistent/corpus.csv"); }), ErrorCode::kIoError);
}

TEST(CorpusJsonTest, PropertyRoundTrip) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    Corpus corpus;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      CorpusItem item{"item," + std::to_string(i) + "\"q\"", {}, {}};
      for (std::size_t c = 0; c < 1 + rng() % 5; ++c)
        item.captions.push_back(testing::random_caption(rng, 1, 10, 30));
      for (std::size_t t = 0; t < rng() % 3; ++t) item.tags.insert(testing::vocab_word(rng() % 5));
      corpus.push_back(std::move(item));
    }
    EXPECT_EQ(corpus_from_json(nlohmann::json::parse(corpus_to_json(corpus).dump())), corpus);
    EXPECT_EQ(parse_corpus_csv(corpus_to_csv(corpus)), corpus);
  }
}

TEST(CandidatesTest, CsvAndJson) {
  const auto csv = parse_candidates_csv("item_id,caption\ndog,a dog barks\ncat,\"a cat, meowing\"\n");
  const auto json = parse_candidates_json(R"({"dog": "a dog barks", "cat": "a cat, meowing"})");
  ASSERT_EQ(csv.entries.size(), 2u);
  EXPECT_EQ(csv.entries, json.entries);
  EXPECT_EQ(csv.entries.at("cat").tokens, (std::vector<std::string>{"a", "cat", "meowing"}));
}

TEST(CandidatesTest, Errors) {
  EXPECT_EQ(code_of([] { parse_candidates_csv("item_id,caption\nx,a\nx,b\n"); }),
            ErrorCode::kDuplicateCandidate);
  EXPECT_EQ(code_of([] { parse_candidates_json(R"({"x": "a", "x": "b"})"); }),
            ErrorCode::kDuplicateCandidate);
  EXPECT_EQ(code_of([] { parse_candidates_csv("id,text\nx,a\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_candidates_json(R"(["a"])"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_candidates_csv("item_id,caption\nx,...\n"); }),
            ErrorCode::kEmptyCaption);
}

TEST(CandidatesTest, CrossValidation) {
  const auto corpus = load_corpus(testing::data_path("synthetic_corpus.json")).items;
  const auto full = load_candidates(testing::data_path("synthetic_candidates.csv"));
  const auto cov = cross_validate(full, corpus);
  EXPECT_EQ(cov.covered, 4u);
  EXPECT_TRUE(cov.missing.empty());

  const auto partial = parse_candidates_csv("item_id,caption\ncat,a cat\n");
  const auto pcov = cross_validate(partial, corpus);
  EXPECT_EQ(pcov.covered, 1u);
  EXPECT_EQ(pcov.missing, (std::vector<std::string>{"dog", "rain", "engine"}));

  const auto unknown = parse_candidates_csv("item_id,caption\ncow,a cow moos\n");
  EXPECT_EQ(code_of([&] { cross_validate(unknown, corpus); }), ErrorCode::kUnknownItem);
}

}  // namespace
}  // namespace capscore
