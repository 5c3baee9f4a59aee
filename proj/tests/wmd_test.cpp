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
#include <random>
#include <vector>

#include "gtest/gtest.h"

#include "capscore/wmd.hpp"
#include "support/generators.hpp"
#include "support/lp_oracle.hpp"

namespace capscore {
namespace {

Caption C(const std::string& s) { return normalize_and_tokenize(s); }

void expect_feasible(const TransportProblem& p, const TransportPlan& plan) {
  std::vector<double> out(p.rows(), 0.0), in(p.cols(), 0.0);
  double objective = 0.0;
  for (const auto& f : plan.flows) {
    ASSERT_LT(f.supply, p.rows());
    ASSERT_LT(f.demand, p.cols());
    EXPECT_GE(f.mass, -1e-12);
    out[f.supply] += f.mass;
    in[f.demand] += f.mass;
    objective += f.mass * p.cost(f.supply, f.demand);
  }
  for (std::size_t i = 0; i < p.rows(); ++i) EXPECT_NEAR(out[i], p.supply[i], 1e-9);
  for (std::size_t j = 0; j < p.cols(); ++j) EXPECT_NEAR(in[j], p.demand[j], 1e-9);
  EXPECT_NEAR(objective, plan.objective, 1e-9);
}

TEST(TransportTest, SingleSupplyRowIsForced) {
  TransportProblem p{{"a"}, {1.0}, {"x", "y", "z"}, {0.2, 0.3, 0.5}, {1.0, 2.0, 4.0}};
  const auto plan = solve_exact(p);
  EXPECT_NEAR(plan.objective, 0.2 + 0.6 + 2.0, 1e-12);
  expect_feasible(p, plan);
}

TEST(TransportTest, HandSolvedTwoByTwo) {
  // Moving straight across costs 0.5*1 + 0.5*1; crossing would cost 0.5*3 + 0.5*3.
  TransportProblem p{{"a", "b"}, {0.5, 0.5}, {"x", "y"}, {0.5, 0.5}, {1.0, 3.0, 3.0, 1.0}};
  EXPECT_NEAR(solve_exact(p).objective, 1.0, 1e-12);
  // Unequal masses: a sends 0.3 to x and 0.4 to y.
  TransportProblem q{{"a", "b"}, {0.7, 0.3}, {"x", "y"}, {0.6, 0.4}, {1.0, 2.0, 0.0, 5.0}};
  EXPECT_NEAR(solve_exact(q).objective, 0.3 * 1.0 + 0.4 * 2.0 + 0.3 * 0.0, 1e-12);
}

TEST(TransportTest, RejectsInvalidProblems) {
  TransportProblem p{{"a"}, {0.5}, {"x"}, {1.0}, {1.0}};
  EXPECT_THROW(solve_exact(p), Error);
  p.supply = {1.0};
  p.costs = {-1.0};
  EXPECT_THROW(solve_exact(p), Error);
  p.costs = {1.0, 2.0};
  EXPECT_THROW(solve_exact(p), Error);
}

TEST(TransportTest, PropertyMatchesLpOracle) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng() % 6, n = 1 + rng() % 6;
    const auto p = testing::random_transport_problem(rng, m, n, trial % 2 == 1);
    const auto plan = solve_exact(p);
    const auto lp = testing::solve_transport_lp(p.supply, p.demand, p.costs);
    ASSERT_TRUE(lp.feasible);
    ASSERT_NEAR(plan.objective, lp.objective, 1e-7) << m << "x" << n << " trial " << trial;
    expect_feasible(p, plan);
    EXPECT_LE(relaxed_lower_bound(p), plan.objective + 1e-12);
  }
}

TEST(TransportTest, PropertyLargeProblemsStayFeasible) {
  std::mt19937_64 rng(73);
  for (std::size_t k : {16u, 32u, 64u}) {
    for (bool degenerate : {false, true}) {
      const auto p = testing::random_transport_problem(rng, k, k, degenerate);
      const auto plan = solve_exact(p);
      expect_feasible(p, plan);
      EXPECT_LE(relaxed_lower_bound(p), plan.objective + 1e-12);
      EXPECT_LE(plan.flows.size(), 2 * k - 1);
    }
  }
}

TEST(TransportTest, PropertyLpOracleOnMediumProblems) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = testing::random_transport_problem(rng, 12, 10, trial % 2 == 0);
    const auto lp = testing::solve_transport_lp(p.supply, p.demand, p.costs);
    EXPECT_NEAR(solve_exact(p).objective, lp.objective, 1e-7);
  }
}

class WmdTest : public ::testing::Test {
 protected:
  void SetUp() override {
    words_.insert("cat", {{10, 0}});
    words_.insert("kitten", {{10, 1}});
    words_.insert("dog", {{13, 0}});
    words_.insert("hound", {{13, 1}});
    words_.insert("a", {{11, 1}});
  }
  EmbeddingStore words_{EmbeddingKind::kWord, 2};
};

TEST_F(WmdTest, IdenticalCaptionsHaveZeroDistance) {
  EXPECT_EQ(wmd(C("a cat"), C("a cat"), words_).value(), 0.0);
  EXPECT_NEAR(wmd(C("cat a"), C("a cat"), words_).value(), 0.0, 1e-12);
}

TEST_F(WmdTest, HandComputedSingleWords) {
  EXPECT_NEAR(wmd(C("cat"), C("dog"), words_).value(), 3.0, 1e-12);
  // Half the mass stays on "cat", the other half moves kitten -> dog.
  EXPECT_NEAR(wmd(C("cat kitten"), C("cat dog"), words_).value(), 0.5 * std::sqrt(10.0), 1e-12);
}

TEST_F(WmdTest, OovTokensAreDroppedAndMassRenormalized) {
  const auto p = build_problem(C("cat zebra kitten dog"), C("cat"), words_);
  ASSERT_EQ(p.rows(), 3u);
  for (double m : p.supply) EXPECT_NEAR(m, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(wmd(C("cat zebra kitten dog"), C("cat"), words_).value(), (1.0 + 3.0) / 3.0, 1e-12);
  EXPECT_FALSE(wmd(C("zebra"), C("cat"), words_).has_value());
  try {
    build_problem(C("cat"), C("zebra giraffe"), words_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAllTokensOOV);
  }
}

TEST_F(WmdTest, StopwordsAreRemoved) {
  WmdOptions opts{{"a"}};
  EXPECT_NEAR(wmd(C("a cat"), C("a dog"), words_, opts).value(), 3.0, 1e-12);
  EXPECT_FALSE(wmd(C("a"), C("a dog"), words_, opts).has_value());
}

TEST_F(WmdTest, RepeatedTokensCarryMoreMass) {
  const auto p = build_problem(C("cat cat dog"), C("cat"), words_);
  ASSERT_EQ(p.supply_tokens, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_NEAR(p.supply[0], 2.0 / 3.0, 1e-15);
}

TEST(WmdPropertyTest, SymmetricAndSelfZero) {
  std::mt19937_64 rng(83);
  const auto words = testing::random_word_store(rng, 20, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const Caption a = testing::random_caption(rng, 1, 10, 20);
    const Caption b = testing::random_caption(rng, 1, 10, 20);
    const double ab = wmd(a, b, words).value();
    EXPECT_NEAR(ab, wmd(b, a, words).value(), 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(wmd(a, a, words).value(), 0.0, 1e-12);
  }
}

}  // namespace
}  // namespace capscore
