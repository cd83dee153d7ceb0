#ifndef RVA_RECURSION_HPP_
#define RVA_RECURSION_HPP_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rva/errors.hpp"
#include "rva/ops.hpp"

namespace rva {

// Frozen decisions for one round t >= 1. Weight vectors carry the forward
// values of o^I ([2]) and o^P ([t]); with exact one-hot values the blend
// reduces to the literal recursion.
template <typename T>
struct RecursionStep {
  bool cond = true;
  Var<T> infer_weights;
  Var<T> lambda;  // [1]
  std::size_t t_p = 0;
  Var<T> pair_weights;
};

struct TraceRecord {
  std::size_t round = 0;
  bool cond = true;
  double lambda = 1.0;
  std::optional<std::size_t> t_p;  // set when the round recursed
  std::vector<double> alpha;       // recursive attention
  std::vector<double> att;         // question-guided attention
};

struct RecursionTrace {
  std::vector<TraceRecord> rounds;  // index = round

  // Rounds visited by the recursion started at round t, t first.
  std::vector<std::size_t> chain(std::size_t t) const {
    std::vector<std::size_t> out{t};
    while (!rounds.at(out.back()).cond) out.push_back(*rounds.at(out.back()).t_p);
    return out;
  }
  std::size_t depth(std::size_t t) const { return chain(t).size(); }

  void write_dot(std::ostream& out, const std::string& name = "rva") const;
  void write_text(std::ostream& out) const;
};

// Memoized recursion: rounds are pushed in order 0, 1, ... and each round's
// attention is computed once, reusing the cached attention of its paired round.
template <typename T>
class RecursionEngine {
 public:
  explicit RecursionEngine(bool rv_only = false) : rv_only_(rv_only) {}

  Var<T> push_round(Var<T> att, const std::optional<RecursionStep<T>>& step) {
    const std::size_t t = cache_.size();
    TraceRecord rec;
    rec.round = t;
    rec.att = to_double(att.value());
    Var<T> alpha = att;
    if (t > 0 && !rv_only_) {
      if (!step) throw GraphError("recursion: missing decisions for round " + std::to_string(t));
      if (step->t_p >= t) throw GraphError("recursion: paired round must precede round " + std::to_string(t));
      if (step->pair_weights.size() != t) throw ShapeError("recursion: pair weights must have length t");
      Var<T> history = t == 1 ? reshape(cache_[0], Shape{1, att.size()}) : stack(cache_);
      Var<T> recalled = matmul(step->pair_weights, history);
      Var<T> mixed = add(scale_by(one_minus(step->lambda), recalled), scale_by(step->lambda, att));
      Var<T> w = step->infer_weights;
      alpha = add(scale_by(slice(w, 0, 0, 1), att), scale_by(slice(w, 0, 1, 1), mixed));
      rec.cond = step->cond;
      rec.lambda = static_cast<double>(step->lambda.item());
      if (!step->cond) rec.t_p = step->t_p;
    } else if (t > 0 && step) {
      rec.lambda = static_cast<double>(step->lambda.item());
    }
    rec.alpha = to_double(alpha.value());
    cache_.push_back(alpha);
    trace_.rounds.push_back(std::move(rec));
    return alpha;
  }

  Var<T> cached(std::size_t t) const {
    if (t >= cache_.size()) throw GraphError("recursion: cache miss for round " + std::to_string(t));
    return cache_[t];
  }
  std::size_t rounds() const { return cache_.size(); }
  const RecursionTrace& trace() const { return trace_; }

 private:
  static std::vector<double> to_double(const Tensor<T>& v) {
    return std::vector<double>(v.values().begin(), v.values().end());
  }

  bool rv_only_;
  std::vector<Var<T>> cache_;
  RecursionTrace trace_;
};

// v_hat = sum_i alpha_i v_i.
template <typename T>
Var<T> attend_feature(Var<T> alpha, Var<T> regions) {
  if (alpha.shape().size() != 1 || regions.shape().size() != 2 || alpha.size() != regions.shape()[0]) {
    detail::fail_shape("attend_feature", alpha.shape(), regions.shape());
  }
  return matmul(alpha, regions);
}

}  // namespace rva

#endif  // RVA_RECURSION_HPP_
