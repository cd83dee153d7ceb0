#ifndef RVA_ANSWER_HEAD_HPP_
#define RVA_ANSWER_HEAD_HPP_

#include <algorithm>
#include <numeric>
#include <vector>

#include "rva/layers.hpp"

namespace rva {

// v_tilde = v_hat * gate, the gate being f^v_q(q_ans).
template <typename T>
Var<T> filter_visual(Var<T> v_hat, Var<T> gate) {
  if (v_hat.shape() != gate.shape()) detail::fail_shape("filter_visual", v_hat.shape(), gate.shape());
  return hadamard(v_hat, gate);
}

template <typename T>
struct FactModule {
  Gated<T> question;  // f^h_q
  Gated<T> history;   // f^h_h
  Linear<T> score;    // W^h

  static FactModule make(ParameterSet<T>& p, std::size_t code, std::size_t h, Rng& rng) {
    return {Gated<T>::make(p, "fact.fq", "fact", code, h, rng),
            Gated<T>::make(p, "fact.fh", "fact", code, h, rng),
            Linear<T>::make(p, "fact.W", "fact", h, 1, false, rng)};
  }
};

// Attention over the first t history codes. fq_t: transformed question [h];
// fh: transformed histories [>= t, h]; codes: history codes [>= t, 2H].
// Returns {h_f, alpha_h}.
template <typename T>
std::pair<Var<T>, Var<T>> fact_embedding(const FactModule<T>& m, Var<T> fq_t, Var<T> fh, Var<T> codes,
                                         std::size_t t, const ForwardContext& ctx) {
  if (t == 0) throw ValidationError("fact_embedding: empty history");
  Var<T> z = l2_normalize(hadamard(expand_rows(fq_t, t), slice(fh, 0, 0, t)), 1);
  Var<T> alpha = softmax(reshape(m.score(maybe_dropout(z, ctx)), {t}));
  return {matmul(alpha, slice(codes, 0, 0, t)), alpha};
}

// score_i = <candidate_i, joint>.
template <typename T>
Var<T> score_candidates(Var<T> joint, Var<T> candidates) {
  return matmul(candidates, joint);
}

// -log softmax(scores)[gt].
template <typename T>
Var<T> discriminative_loss(Var<T> scores, std::size_t gt) {
  if (!scores.value().all_finite()) throw NumericError("discriminative_loss: non-finite scores");
  return cross_entropy(scores, gt);
}

// Candidate indices by descending score; ties keep the lower index first.
template <typename V>
std::vector<int> rank_candidates(const V& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace rva

#endif  // RVA_ANSWER_HEAD_HPP_
