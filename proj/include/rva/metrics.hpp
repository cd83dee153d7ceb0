#ifndef RVA_METRICS_HPP_
#define RVA_METRICS_HPP_

#include <string>
#include <vector>

namespace rva {

struct EvalRecord {
  std::vector<int> ranking;       // candidate indices, rank 1 first
  int gt = 0;
  std::vector<double> relevance;  // per candidate index; empty when unavailable
};

// 1-based rank of the ground truth. Throws when the ranking is not a
// permutation containing gt.
int rank_of_gt(const EvalRecord& record);

double mean_rank(const std::vector<EvalRecord>& records);
double mrr(const std::vector<EvalRecord>& records);
double recall_at_k(const std::vector<EvalRecord>& records, int k);
double ndcg(const std::vector<EvalRecord>& records);
double ndcg_one(const EvalRecord& record);

struct MetricsReport {
  double mrr = 0.0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double mean = 0.0;
  double ndcg = 0.0;
  std::size_t count = 0;
};

// R@k with k above the candidate count is reported as 1.
MetricsReport summarize(const std::vector<EvalRecord>& records);

}  // namespace rva

#endif  // RVA_METRICS_HPP_
