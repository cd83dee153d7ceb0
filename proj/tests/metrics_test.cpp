#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "rva/errors.hpp"
#include "rva/metrics.hpp"
#include "rva/rng.hpp"

namespace rva {
namespace {

EvalRecord with_rank(int rank, int n = 10) {
  EvalRecord r;
  r.ranking.resize(static_cast<std::size_t>(n));
  std::iota(r.ranking.begin(), r.ranking.end(), 0);
  r.gt = r.ranking[static_cast<std::size_t>(rank - 1)];
  r.relevance.assign(static_cast<std::size_t>(n), 0.0);
  r.relevance[static_cast<std::size_t>(r.gt)] = 1.0;
  return r;
}

TEST(Metrics, AllRankOne) {
  const std::vector<EvalRecord> rs = {with_rank(1), with_rank(1)};
  EXPECT_EQ(mean_rank(rs), 1.0);
  EXPECT_EQ(mrr(rs), 1.0);
  EXPECT_EQ(recall_at_k(rs, 1), 1.0);
  EXPECT_EQ(ndcg(rs), 1.0);
}

TEST(Metrics, HandFixtures) {
  EXPECT_DOUBLE_EQ(mean_rank({with_rank(1), with_rank(3)}), 2.0);
  const std::vector<EvalRecord> rs = {with_rank(1), with_rank(2), with_rank(4)};
  EXPECT_NEAR(mrr(rs), 0.58333, 1e-5);
  EXPECT_NEAR(recall_at_k(rs, 2), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(recall_at_k(rs, 10), 1.0);
}

// Relevances {1, 0.5} with the 0.5 answer ranked first:
// (0.5/log2(2) + 1/log2(3)) / (1/log2(2) + 0.5/log2(3)).
TEST(Metrics, NdcgTwoRelevant) {
  EvalRecord r;
  r.ranking = {1, 0, 2};
  r.gt = 0;
  r.relevance = {1.0, 0.5, 0.0};
  const double expected = (0.5 + 1.0 / std::log2(3.0)) / (1.0 + 0.5 / std::log2(3.0));
  EXPECT_NEAR(ndcg_one(r), expected, 1e-12);
  EXPECT_NEAR(ndcg_one(r), 0.859719, 1e-6);
}

TEST(Metrics, NdcgZeroRelevanceCountsAsZero) {
  EvalRecord a = with_rank(1, 4);
  EvalRecord b = with_rank(1, 4);
  b.relevance.assign(4, 0.0);
  EXPECT_EQ(ndcg({a, b}), 0.5);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(mean_rank({}), ValidationError);
  EXPECT_THROW(mrr({}), ValidationError);
  EXPECT_THROW(recall_at_k({with_rank(1, 5)}, 6), ValidationError);
  EXPECT_THROW(recall_at_k({with_rank(1, 5)}, 0), ValidationError);
  EvalRecord bad = with_rank(1, 3);
  bad.relevance[1] = 1.5;
  EXPECT_THROW(ndcg({bad}), ValidationError);
  EvalRecord dup = with_rank(1, 3);
  dup.ranking = {0, 0, 1};
  EXPECT_THROW(mrr({dup}), ValidationError);
}

TEST(Metrics, UniformRandomMeanRank) {
  Rng rng(17);
  std::vector<EvalRecord> rs;
  for (int i = 0; i < 10000; ++i) {
    EvalRecord r = with_rank(1, 100);
    rng.shuffle(std::span<int>(r.ranking));
    rs.push_back(std::move(r));
  }
  EXPECT_NEAR(mean_rank(rs), 50.5, 1.0);
}

// Independent exhaustive oracle: every ordering of <= 6 candidates.
struct Oracle {
  static int rank(const std::vector<int>& order, int gt) {
    return static_cast<int>(std::find(order.begin(), order.end(), gt) - order.begin()) + 1;
  }
  static double ndcg(const std::vector<int>& order, const std::vector<double>& rel) {
    std::vector<double> sorted = rel;
    std::sort(sorted.rbegin(), sorted.rend());
    std::size_t k = 0;
    for (double v : rel) k += v > 0.0 ? 1 : 0;
    if (k == 0) return 0.0;
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      dcg += rel[static_cast<std::size_t>(order[i])] / std::log2(static_cast<double>(i + 2));
      idcg += sorted[i] / std::log2(static_cast<double>(i + 2));
    }
    return dcg / idcg;
  }
};

TEST(Metrics, BruteForceAllOrderings) {
  Rng rng(5);
  for (int n = 1; n <= 6; ++n) {
    std::vector<double> rel(static_cast<std::size_t>(n));
    for (auto& v : rel) v = std::round(rng.uniform() * 4.0) / 4.0;
    const int gt = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    rel[static_cast<std::size_t>(gt)] = 1.0;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<EvalRecord> all;
    double sum_rank = 0, sum_rr = 0, sum_ndcg = 0;
    std::vector<double> hits(7, 0.0);
    do {
      EvalRecord r{order, gt, rel};
      const int rank = Oracle::rank(order, gt);
      EXPECT_EQ(rank_of_gt(r), rank);
      EXPECT_EQ(mrr({r}), 1.0 / rank);
      EXPECT_EQ(mean_rank({r}), static_cast<double>(rank));
      EXPECT_EQ(ndcg_one(r), Oracle::ndcg(order, rel));
      for (int k = 1; k <= n; ++k) EXPECT_EQ(recall_at_k({r}, k), rank <= k ? 1.0 : 0.0);
      sum_rank += rank;
      sum_rr += 1.0 / rank;
      sum_ndcg += Oracle::ndcg(order, rel);
      for (int k = 1; k <= n; ++k) hits[static_cast<std::size_t>(k)] += rank <= k ? 1.0 : 0.0;
      all.push_back(std::move(r));
    } while (std::next_permutation(order.begin(), order.end()));
    const double count = static_cast<double>(all.size());
    EXPECT_DOUBLE_EQ(mean_rank(all), sum_rank / count);
    EXPECT_DOUBLE_EQ(mrr(all), sum_rr / count);
    EXPECT_DOUBLE_EQ(ndcg(all), sum_ndcg / count);
    for (int k = 1; k <= n; ++k) EXPECT_DOUBLE_EQ(recall_at_k(all, k), hits[static_cast<std::size_t>(k)] / count);
  }
}

TEST(Metrics, PropertiesOnRandomSets) {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 10 + static_cast<int>(rng.below(91));
    std::vector<EvalRecord> rs;
    const int count = 1 + static_cast<int>(rng.below(20));
    for (int i = 0; i < count; ++i) {
      EvalRecord r;
      r.ranking.resize(static_cast<std::size_t>(n));
      std::iota(r.ranking.begin(), r.ranking.end(), 0);
      rng.shuffle(std::span<int>(r.ranking));
      r.gt = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      r.relevance.resize(static_cast<std::size_t>(n));
      for (auto& v : r.relevance) v = rng.bernoulli(0.1) ? rng.uniform() : 0.0;
      r.relevance[static_cast<std::size_t>(r.gt)] = 1.0;
      rs.push_back(std::move(r));
    }
    EXPECT_GE(mrr(rs), 1.0 / mean_rank(rs) - 1e-15);
    EXPECT_LE(recall_at_k(rs, 1), recall_at_k(rs, 5));
    EXPECT_LE(recall_at_k(rs, 5), recall_at_k(rs, 10));
    EXPECT_LE(ndcg(rs), 1.0 + 1e-12);
    // Relabeling non-gt candidates while keeping the ranking fixed.
    std::vector<EvalRecord> relabeled = rs;
    for (auto& r : relabeled) {
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span<int>(perm));
      std::swap(perm[static_cast<std::size_t>(std::find(perm.begin(), perm.end(), r.gt) - perm.begin())],
                perm[static_cast<std::size_t>(r.gt)]);
      std::vector<double> rel(r.relevance.size());
      for (std::size_t i = 0; i < rel.size(); ++i) rel[static_cast<std::size_t>(perm[i])] = r.relevance[i];
      for (auto& c : r.ranking) c = perm[static_cast<std::size_t>(c)];
      r.relevance = rel;
    }
    EXPECT_EQ(mrr(relabeled), mrr(rs));
    EXPECT_EQ(mean_rank(relabeled), mean_rank(rs));
    EXPECT_EQ(recall_at_k(relabeled, 5), recall_at_k(rs, 5));
    EXPECT_EQ(ndcg(relabeled), ndcg(rs));
  }
}

}  // namespace
}  // namespace rva
