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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

#include "capscore/embedding.hpp"
#include "support/generators.hpp"

namespace capscore {
namespace {

EmbeddingVector V(std::initializer_list<float> xs) { return {std::vector<float>(xs)}; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

TEST(CosineTest, HandComputedValues) {
  EXPECT_EQ(cosine_similarity(V({1, 0}), V({1, 0})), 1.0);
  EXPECT_EQ(cosine_similarity(V({1, 0}), V({0, 1})), 0.0);
  EXPECT_EQ(cosine_similarity(V({1, 0}), V({-2, 0})), -1.0);
  EXPECT_NEAR(cosine_similarity(V({1, 1}), V({1, 0})), std::sqrt(0.5), 1e-15);
}

TEST(CosineTest, RejectsMismatchAndZeroNorm) {
  EXPECT_EQ(code_of([] { cosine_similarity(V({1, 0}), V({1, 0, 0})); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([] { cosine_similarity(V({0, 0}), V({1, 0})); }), ErrorCode::kZeroNormVector);
}

TEST(CosineTest, PropertyBoundedAndSymmetric) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng() % 64;
    const auto a = testing::random_vector(rng, dim);
    const auto b = testing::random_vector(rng, dim);
    const double c = cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_EQ(c, cosine_similarity(b, a));
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
  }
}

TEST(CosineTest, PropertyScaleInvariant) {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + rng() % 32;
    const auto a = testing::random_vector(rng, dim);
    const auto b = testing::random_vector(rng, dim);
    auto sa = a, sb = b;
    const float alpha = scale(rng), beta = scale(rng);
    for (auto& x : sa.values) x *= alpha;
    for (auto& x : sb.values) x *= beta;
    EXPECT_NEAR(cosine_similarity(sa, sb), cosine_similarity(a, b), 1e-6);
  }
}

TEST(SbertTest, MeanAndMaxAggregation) {
  const auto cand = V({1, 0});
  const std::vector<EmbeddingVector> refs{V({1, 0}), V({0, 1})};
  EXPECT_DOUBLE_EQ(sbert_sc(cand, refs), 0.5);
  EXPECT_DOUBLE_EQ(sbert_sc(cand, refs, SbertAggregation::kMax), 1.0);
  EXPECT_DOUBLE_EQ(sbert_sc(cand, {V({3, 0})}), 1.0);
  EXPECT_EQ(code_of([&] { sbert_sc(cand, std::vector<EmbeddingVector>{}); }),
            ErrorCode::kNoReferences);
}

TEST(SentenceLossTest, HandComputedValues) {
  EXPECT_NEAR(sentence_loss(V({1, 2}), V({2, 4})), 0.0, 1e-15);
  EXPECT_EQ(sentence_loss(V({1, 0}), V({0, 5})), 1.0);
  EXPECT_EQ(sentence_loss(V({1, 0}), V({-1, 0})), 2.0);
  EXPECT_EQ(sentence_loss_batch({{V({1, 0}), V({0, 1})}, {V({1, 0}), V({-1, 0})}}), 3.0);
}

TEST(SentenceLossTest, PropertyLossPlusCosineIsOne) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 2 + rng() % 383;
    const auto a = testing::random_vector(rng, dim);
    const auto b = testing::random_vector(rng, dim);
    const double loss = sentence_loss(a, b);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 2.0);
    EXPECT_EQ(loss + cosine_similarity(a, b), 1.0);
  }
}

TEST(CrossEntropyTest, HandComputedValues) {
  const auto onehot = TokenDistribution::one_hot(7);
  EXPECT_EQ(cross_entropy(onehot, onehot), 0.0);
  const TokenDistribution half({{1, 0.5}, {2, 0.5}});
  EXPECT_NEAR(cross_entropy(onehot, TokenDistribution({{7, 0.5}, {8, 0.5}})), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(half, half), std::log(2.0), 1e-15);
  EXPECT_EQ(cross_entropy(onehot, half), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(cross_entropy_batch({{half, half}, {onehot, onehot}}), std::log(2.0), 1e-15);
}

TEST(CrossEntropyTest, RejectsInvalidDistributions) {
  EXPECT_EQ(code_of([] { TokenDistribution({{1, 0.5}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { TokenDistribution({{1, -0.5}, {2, 1.5}}); }), ErrorCode::kInvalidArgument);
  EXPECT_NO_THROW(TokenDistribution({{1, 0.5}, {2, 0.5 + 1e-8}}));
}

TEST(CrossEntropyTest, PropertyGibbsInequality) {
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_dist = [&](std::size_t support) {
    std::map<int, double> m;
    double total = 0;
    for (std::size_t i = 0; i < support; ++i) total += m[static_cast<int>(i)] = u(rng) + 1e-3;
    for (auto& [k, v] : m) v /= total;
    return TokenDistribution(m);
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t support = 1 + rng() % 30;
    const auto p = random_dist(support);
    const auto q = random_dist(support);
    EXPECT_GE(cross_entropy(p, q), cross_entropy(p, p) - 1e-9);
  }
}

TEST(EmbeddingStoreTest, InsertValidation) {
  EmbeddingStore store(EmbeddingKind::kWord, 2);
  store.insert("a", V({1, 2}));
  EXPECT_EQ(code_of([&] { store.insert("a", V({1, 1})); }), ErrorCode::kDuplicateKey);
  EXPECT_EQ(code_of([&] { store.insert("b", V({1, 1, 1})); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([&] { store.insert("c", V({0, 0})); }), ErrorCode::kZeroNormVector);
  EXPECT_EQ(code_of([&] { store.insert("d", V({std::numeric_limits<float>::quiet_NaN(), 1})); }),
            ErrorCode::kFormatError);
  EXPECT_EQ(code_of([&] { store.at("zzz"); }), ErrorCode::kMissingEmbedding);
  EXPECT_EQ(store.find("zzz"), nullptr);
  EXPECT_EQ(store.at("a"), V({1, 2}));
}

TEST(EmbeddingFileTest, ParsesTextFormat) {
  std::istringstream in("CAPEMB 1 sentence 3 2\nitem1#0\t1 0 0\nitem1#1\t0.5 -0.25 1e-3\n");
  const auto store = parse_embeddings_text(in);
  EXPECT_EQ(store.kind(), EmbeddingKind::kSentence);
  EXPECT_EQ(store.dim(), 3u);
  ASSERT_EQ(store.size(), 2u);
  EXPECT_EQ(store.at("item1#1"), V({0.5f, -0.25f, 1e-3f}));
}

TEST(EmbeddingFileTest, RejectsMalformedText) {
  auto parse = [](const std::string& s) {
    return code_of([&] {
      std::istringstream in(s);
      parse_embeddings_text(in);
    });
  };
  EXPECT_EQ(parse("CAPEMX 1 word 2 1\na\t1 0\n"), ErrorCode::kFormatError);
  EXPECT_EQ(parse("CAPEMB 2 word 2 1\na\t1 0\n"), ErrorCode::kFormatError);
  EXPECT_EQ(parse("CAPEMB 1 phrase 2 1\na\t1 0\n"), ErrorCode::kFormatError);
  EXPECT_EQ(parse("CAPEMB 1 word 2 2\na\t1 0\nb\t1\n"), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(parse("CAPEMB 1 word 2 2\na\t1 0\nb\t1 0 3\n"), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(parse("CAPEMB 1 word 2 1\na\t1 x\n"), ErrorCode::kFormatError);
  EXPECT_EQ(parse("CAPEMB 1 word 2 2\na\t1 0\na\t0 1\n"), ErrorCode::kDuplicateKey);
  EXPECT_EQ(parse("CAPEMB 1 word 2 3\na\t1 0\nb\t0 1\n"), ErrorCode::kFormatError);
  EXPECT_EQ(parse("CAPEMB 1 word 2 1\na\t0 0\n"), ErrorCode::kZeroNormVector);
  EXPECT_EQ(parse(""), ErrorCode::kFormatError);
}

TEST(EmbeddingFileTest, LoadErrorNamesPath) {
  const auto path = temp_file("capscore_bad_emb.txt", "CAPEMB 1 word 2 1\na\t1 q\n");
  try {
    load_embeddings(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormatError);
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("FormatError", 1), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([] { load_embeddings("/nonexistent/capscore.txt"); }), ErrorCode::kIoError);
}

TEST(EmbeddingFileTest, TextAndBinaryRoundTrip) {
  std::mt19937_64 rng(61);
  EmbeddingStore store(EmbeddingKind::kWord, 16);
  for (int i = 0; i < 40; ++i) store.insert(testing::vocab_word(static_cast<std::size_t>(i)),
                                            testing::random_vector(rng, 16));
  const auto dir = std::filesystem::temp_directory_path();
  for (const char* name : {"capscore_rt.txt", "capscore_rt.bin"}) {
    const auto path = (dir / name).string();
    save_embeddings(store, path);
    const auto back = load_embeddings(path);
    EXPECT_EQ(back.kind(), store.kind());
    EXPECT_EQ(back.dim(), store.dim());
    EXPECT_EQ(back.entries(), store.entries()) << name;
    std::filesystem::remove(path);
  }
}

TEST(EmbeddingFileTest, HandWrittenBinaryFixture) {
  std::string bytes = "CAPEMB 1 word 2 1\n";
  const unsigned char len[4] = {3, 0, 0, 0};
  bytes.append(reinterpret_cast<const char*>(len), 4);
  bytes += "cat";
  // 1.0f and -2.0f, little-endian
  const unsigned char vals[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  bytes.append(reinterpret_cast<const char*>(vals), 8);
  const auto path = temp_file("capscore_fixture.bin", bytes);
  const auto store = load_embeddings(path);
  EXPECT_EQ(store.at("cat"), V({1.0f, -2.0f}));
  std::filesystem::remove(path);

  const auto truncated = temp_file("capscore_trunc.bin", bytes.substr(0, bytes.size() - 2));
  EXPECT_EQ(code_of([&] { load_embeddings(truncated); }), ErrorCode::kFormatError);
  std::filesystem::remove(truncated);
  const auto trailing = temp_file("capscore_trail.bin", bytes + "x");
  EXPECT_EQ(code_of([&] { load_embeddings(trailing); }), ErrorCode::kFormatError);
  std::filesystem::remove(trailing);
}

TEST(EmbeddingFileTest, SentenceFixtureLoads) {
  const auto store = load_embeddings(testing::data_path("synthetic_sent.capemb"));
  EXPECT_EQ(store.kind(), EmbeddingKind::kSentence);
  EXPECT_GT(store.size(), 0u);
}

}  // namespace
}  // namespace capscore
