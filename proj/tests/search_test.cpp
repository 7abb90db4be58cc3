// Copyright 2026 The tilescout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tilescout/search.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tilescout/error.hpp"

namespace tilescout::search {
namespace {

using testing_util::random_records;

const models::Registry& registry() {
  static const models::Registry reg = models::Registry::defaults();
  return reg;
}

std::vector<float> random_vector(uint32_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> normal;
  std::vector<float> v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Independent ranking: long double cosine, one rounding to float, stable
// sort by (score desc, cell asc).
std::vector<ScoredTile> reference_ranking(std::span<const store::EmbeddingRecord> records,
                                          const std::vector<float>& q) {
  std::vector<ScoredTile> all;
  for (const auto& r : records) {
    all.push_back({r.cell, testing_oracles::cosine_ld(q, r.to_float32()), 0});
  }
  std::stable_sort(all.begin(), all.end(), [](const ScoredTile& a, const ScoredTile& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.cell < b.cell;
  });
  for (size_t i = 0; i < all.size(); ++i) all[i].rank = static_cast<uint32_t>(i + 1);
  return all;
}

TEST(Normalize, Examples) {
  const std::vector<float> v = {3, 4};
  const auto n = l2_normalize(v);
  EXPECT_FLOAT_EQ(n[0], 0.6f);
  EXPECT_FLOAT_EQ(n[1], 0.8f);
  const std::vector<float> unit = {0, 1, 0};
  const auto u = l2_normalize(unit);
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(u[i], unit[i], 1e-6);
  EXPECT_THROW(l2_normalize(std::vector<float>(8, 0.0f)), Error);
  EXPECT_THROW(l2_normalize(std::vector<float>{1.0f, NAN}), Error);
}

TEST(Normalize, UnitNormProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> scale(-20, 20);
  for (int i = 0; i < 500; ++i) {
    auto v = random_vector(1 + i % 1200, rng);
    const double s = std::exp2(scale(rng));
    for (auto& x : v) x = static_cast<float>(x * s);
    const auto n = l2_normalize(v);
    long double norm = 0;
    for (float x : n) norm += static_cast<long double>(x) * x;
    ASSERT_NEAR(static_cast<double>(std::sqrt(norm)), 1.0, 1e-5);
  }
}

TEST(Cosine, Examples) {
  const std::vector<float> a = {0.6f, 0.8f};
  EXPECT_NEAR(cosine(a, a), 1.0f, 1e-7);
  EXPECT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0f);
  const auto p = l2_normalize(std::vector<float>{1, 2, 2});
  const auto q = l2_normalize(std::vector<float>{2, 1, 2});
  EXPECT_NEAR(cosine(p, q), 8.0 / 9.0, 1e-6);
  EXPECT_THROW(cosine(p, a), Error);
}

TEST(FractionCount, MatchesRule) {
  EXPECT_EQ(fraction_count(1000, 0.025), 25u);
  EXPECT_EQ(fraction_count(10, 0.001), 1u);
  EXPECT_EQ(fraction_count(137, 1.0), 137u);
  for (uint64_t n : {1u, 10u, 137u, 1000u, 10000u, 248719u}) {
    for (double f : {0.001, 0.01, 0.025, 0.1, 0.5, 0.75, 1.0}) {
      EXPECT_EQ(fraction_count(n, f), testing_oracles::fraction_rule(n, f)) << n << " " << f;
    }
  }
  EXPECT_EQ(fraction_count(10, 0.05), 1u);   // 0.5 rounds away from zero
  EXPECT_EQ(fraction_count(10, 0.25), 3u);   // 2.5 -> 3
  EXPECT_THROW(fraction_count(10, 0.0), Error);
  EXPECT_THROW(fraction_count(10, 1.5), Error);
}

TEST(TopK, AllRecordsWhenKExceedsN) {
  const auto& m = registry().at("satclip");
  const auto records = random_records(m, 7, 3);
  const auto index = ModelIndex::from_records(records);
  std::mt19937_64 rng(3);
  const auto q = make_query(m, random_vector(m.dim, rng));
  const auto got = top_k(index, q, 50);
  ASSERT_EQ(got.size(), 7u);
  for (size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].rank, i + 1);
  EXPECT_EQ(got, reference_ranking(records, q.values));
}

TEST(TopK, BitEqualScoresBreakTiesByCell) {
  const auto& m = registry().at("dinov2");
  auto records = random_records(m, 4, 4);
  records[3].vector_bytes = records[1].vector_bytes;
  records[2].vector_bytes = records[1].vector_bytes;
  const auto index = ModelIndex::from_records(records);
  const auto q = make_query(m, records[1].to_float32());
  const auto got = top_k(index, q, 3);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].cell, records[1].cell);
  EXPECT_EQ(got[1].cell, records[2].cell);
  EXPECT_EQ(got[2].cell, records[3].cell);
  EXPECT_EQ(got[0].score, got[2].score);
}

TEST(TopK, ErrorsAreExplicit) {
  const auto& m = registry().at("farslip");
  ModelIndex empty(m.id, m.dim, m.dtype);
  std::mt19937_64 rng(5);
  const auto q = make_query(m, random_vector(m.dim, rng));
  EXPECT_THROW(top_k(empty, q, 5), Error);
  const auto records = random_records(m, 3, 5);
  auto index = ModelIndex::from_records(records);
  EXPECT_THROW(index.add(records[0]), Error);
  EXPECT_THROW(top_k(index, q, 0), Error);
  QueryVector short_q{m.id, std::vector<float>(m.dim - 1, 0.1f)};
  EXPECT_THROW(top_k(index, short_q, 5), Error);
}

class OracleEquivalence : public ::testing::TestWithParam<const char*> {};

TEST_P(OracleEquivalence, TopKMatchesReferenceOnTenThousandRecords) {
  const auto& m = registry().at(GetParam());
  const auto records = random_records(m, 10000, 7);
  const auto index = ModelIndex::from_records(records);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = make_query(m, random_vector(m.dim, rng));
    const auto expected = reference_ranking(records, q.values);
    const auto lib_oracle = brute_force_oracle(records, q);
    const auto got = top_k(index, q, 5);
    ASSERT_EQ(got.size(), 5u);
    for (size_t i = 0; i < 5; ++i) {
      ASSERT_EQ(got[i].cell, expected[i].cell) << trial << " " << i;
      ASSERT_EQ(got[i].rank, expected[i].rank);
      ASSERT_NEAR(got[i].score, expected[i].score, 1e-6);
      ASSERT_EQ(lib_oracle[i].cell, expected[i].cell);
    }
    const auto scores = score_all(index, q);
    for (size_t i = 0; i < records.size(); i += 97) {
      ASSERT_NEAR(scores[i], testing_oracles::cosine_ld(q.values, records[i].to_float32()), 1e-6);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllModels, OracleEquivalence,
                         ::testing::Values("dinov2", "farslip", "satclip", "siglip"));

TEST(Oracle, SingleRecordAndPermutationInvariance) {
  const auto& m = registry().at("farslip");
  auto records = random_records(m, 200, 12);
  std::mt19937_64 rng(12);
  const auto q = make_query(m, random_vector(m.dim, rng));
  const auto one = brute_force_oracle(std::span(records).first(1), q);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].rank, 1u);
  EXPECT_NEAR(one[0].score, cosine(q.values, l2_normalize(records[0].to_float32())), 1e-6);
  const auto base = brute_force_oracle(records, q);
  std::shuffle(records.begin(), records.end(), rng);
  EXPECT_EQ(brute_force_oracle(records, q), base);
}

TEST(Properties, SelfRetrievalScaleInvarianceAndDeterminism) {
  const auto& m = registry().at("siglip");
  const auto records = random_records(m, 3000, 13);
  const auto index = ModelIndex::from_records(records);
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<size_t> pick(0, records.size() - 1);
  for (int trial = 0; trial < 25; ++trial) {
    const size_t i = pick(rng);
    const auto raw = records[i].to_float32();
    const auto q = make_query(m, raw);
    const auto got = top_k(index, q, 10);
    ASSERT_EQ(got[0].cell, records[i].cell);
    ASSERT_NEAR(got[0].score, 1.0, 1e-6);

    auto scaled = raw;
    const float s = std::uniform_real_distribution<float>(1e-3f, 1e3f)(rng);
    for (auto& x : scaled) x *= s;
    const auto got_scaled = top_k(index, make_query(m, scaled), 10);
    for (size_t r = 0; r < got.size(); ++r) ASSERT_EQ(got_scaled[r].cell, got[r].cell);

    ScanOptions parallel;
    parallel.threads = 4;
    parallel.chunk_records = 97;
    ASSERT_EQ(top_k(index, q, 10, parallel), got);
    ASSERT_EQ(score_all(index, q, parallel), score_all(index, q));
  }
}

TEST(TopFraction, CountAndBoundary) {
  const auto& m = registry().at("satclip");
  const auto records = random_records(m, 10000, 14);
  std::mt19937_64 rng(14);
  for (size_t n : {10u, 137u, 1000u, 10000u}) {
    const auto index = ModelIndex::from_records(std::span(records).first(n));
    const auto q = make_query(m, random_vector(m.dim, rng));
    const auto scores = score_all(index, q);
    for (double f : {0.001, 0.025, 0.5, 1.0}) {
      const auto sel = top_fraction(index, q, f);
      ASSERT_EQ(sel.size(), testing_oracles::fraction_rule(n, f));
      std::set<uint64_t> chosen;
      float min_sel = 2.0f;
      for (const auto& t : sel) {
        chosen.insert(grid::cell_key(t.cell));
        min_sel = std::min(min_sel, t.score);
      }
      float max_unsel = -2.0f;
      for (size_t i = 0; i < n; ++i) {
        if (!chosen.count(grid::cell_key(index.cell(i)))) max_unsel = std::max(max_unsel, scores[i]);
      }
      ASSERT_GE(min_sel, max_unsel) << n << " " << f;
    }
  }
}

TEST(TopFraction, ThousandAtTwoPointFivePercentIsTwentyFive) {
  const auto& m = registry().at("farslip");
  const auto records = random_records(m, 1000, 15);
  const auto index = ModelIndex::from_records(records);
  std::mt19937_64 rng(15);
  const auto q = make_query(m, random_vector(m.dim, rng));
  const auto sel = top_fraction(index, q, 0.025);
  ASSERT_EQ(sel.size(), 25u);
  const auto ref = reference_ranking(records, q.values);
  for (size_t i = 0; i < 25; ++i) EXPECT_EQ(sel[i].cell, ref[i].cell);
}

}  // namespace
}  // namespace tilescout::search
