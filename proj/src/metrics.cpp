#include "rva/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rva/errors.hpp"

namespace rva {

namespace {

void require_records(const std::vector<EvalRecord>& records, const char* what) {
  if (records.empty()) throw ValidationError(std::string(what) + ": no records");
}

double mean_of(const std::vector<EvalRecord>& records, const std::function<double(const EvalRecord&)>& f) {
  double total = 0.0;
  for (const auto& r : records) total += f(r);
  return total / static_cast<double>(records.size());
}

}  // namespace

int rank_of_gt(const EvalRecord& record) {
  const std::size_t n = record.ranking.size();
  std::vector<bool> seen(n, false);
  int rank = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = record.ranking[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n || seen[static_cast<std::size_t>(c)]) {
      throw ValidationError("ranking is not a permutation");
    }
    seen[static_cast<std::size_t>(c)] = true;
    if (c == record.gt) rank = static_cast<int>(i) + 1;
  }
  if (rank == 0) throw ValidationError("ground truth missing from ranking");
  return rank;
}

double mean_rank(const std::vector<EvalRecord>& records) {
  require_records(records, "mean_rank");
  return mean_of(records, [](const EvalRecord& r) { return static_cast<double>(rank_of_gt(r)); });
}

double mrr(const std::vector<EvalRecord>& records) {
  require_records(records, "mrr");
  return mean_of(records, [](const EvalRecord& r) { return 1.0 / rank_of_gt(r); });
}

double recall_at_k(const std::vector<EvalRecord>& records, int k) {
  require_records(records, "recall_at_k");
  if (k < 1) throw ValidationError("recall_at_k: k must be >= 1");
  for (const auto& r : records) {
    if (static_cast<std::size_t>(k) > r.ranking.size()) {
      throw ValidationError("recall_at_k: k exceeds candidate count");
    }
  }
  return mean_of(records, [k](const EvalRecord& r) { return rank_of_gt(r) <= k ? 1.0 : 0.0; });
}

// DCG over the top k positions, k = number of candidates with relevance > 0.
double ndcg_one(const EvalRecord& r) {
  rank_of_gt(r);
  if (r.relevance.size() != r.ranking.size()) throw ValidationError("ndcg: relevance length mismatch");
  for (double v : r.relevance) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("ndcg: relevance outside [0,1]");
  }
  std::vector<double> ideal = r.relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::count_if(ideal.begin(), ideal.end(), [](double v) { return v > 0.0; }));
  if (k == 0) return 0.0;
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += r.relevance[static_cast<std::size_t>(r.ranking[i])] / discount;
    idcg += ideal[i] / discount;
  }
  return dcg / idcg;
}

double ndcg(const std::vector<EvalRecord>& records) {
  require_records(records, "ndcg");
  return mean_of(records, ndcg_one);
}

MetricsReport summarize(const std::vector<EvalRecord>& records) {
  require_records(records, "summarize");
  std::size_t smallest = records[0].ranking.size();
  for (const auto& r : records) smallest = std::min(smallest, r.ranking.size());
  auto recall = [&](int k) {
    return static_cast<std::size_t>(k) > smallest
               ? mean_of(records, [k](const EvalRecord& r) { return rank_of_gt(r) <= k ? 1.0 : 0.0; })
               : recall_at_k(records, k);
  };
  MetricsReport m;
  m.mrr = mrr(records);
  m.r1 = recall(1);
  m.r5 = recall(5);
  m.r10 = recall(10);
  m.mean = mean_rank(records);
  m.ndcg = ndcg(records);
  m.count = records.size();
  return m;
}

}  // namespace rva
