#ifndef RVA_MODULES_HPP_
#define RVA_MODULES_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rva/layers.hpp"

namespace rva {

// kSample: Gumbel noise, forward value is the one-hot sample (training).
// kGreedy: no noise, forward value is one_hot(argmax logits) (evaluation).
// kRelaxed: Gumbel noise, forward value is the relaxed sample itself, so the
//           whole loss is smooth (gradient checks).
enum class DecisionMode { kSample, kGreedy, kRelaxed };

template <typename T>
struct GumbelSample {
  Tensor<T> one_hot;
  Var<T> relaxed;
  Var<T> logits;
  Var<T> value;  // what downstream arithmetic consumes
  std::size_t index = 0;
};

// Lowest index wins ties.
template <typename T>
std::size_t argmax_index(const Tensor<T>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

template <typename T>
std::vector<T> gumbel_noise(std::size_t n, Rng& rng) {
  std::vector<T> g(n);
  for (auto& x : g) x = static_cast<T>(-std::log(-std::log(rng.uniform_open())));
  return g;
}

// Single-draw Gumbel-softmax with temperature tau. Uses `noise` when given
// instead of drawing from rng (tests pin it).
template <typename T>
GumbelSample<T> gumbel_sample(Var<T> logits, DecisionMode mode, double tau, Rng* rng,
                              const std::vector<T>* noise = nullptr) {
  const Tensor<T>& l = logits.value();
  if (l.rank() != 1 || l.size() < 1) {
    throw ShapeError("gumbel_sample: logits must be a non-empty vector, got " + shape_str(l.shape()));
  }
  if (!l.all_finite()) throw NumericError("gumbel_sample: non-finite logits");
  if (!(tau > 0.0)) throw ValidationError("gumbel_sample: tau must be positive");
  Graph<T>& g = *logits.graph;
  GumbelSample<T> s;
  s.logits = logits;
  Var<T> perturbed = logits;
  if (mode != DecisionMode::kGreedy && l.size() > 1) {
    std::vector<T> drawn;
    if (!noise) {
      if (!rng) throw ValidationError("gumbel_sample: rng required for sampling");
      drawn = gumbel_noise<T>(l.size(), *rng);
      noise = &drawn;
    }
    if (noise->size() != l.size()) throw ShapeError("gumbel_sample: noise length mismatch");
    perturbed = add(logits, g.constant(Tensor<T>(l.shape(), *noise)));
  }
  s.relaxed = softmax(tau == 1.0 ? perturbed : scale(perturbed, static_cast<T>(1.0 / tau)));
  s.index = argmax_index(perturbed.value());
  s.one_hot = Tensor<T>(l.shape());
  s.one_hot[s.index] = T{1};
  s.value = mode == DecisionMode::kRelaxed ? s.relaxed : straight_through(s.one_hot, s.relaxed);
  return s;
}

// Infer: termination flag and fusion weight from shared logits W^I f(q).
template <typename T>
struct InferDecision {
  bool cond = true;
  Var<T> lambda;           // [1], softmax(logits)[0]
  Var<T> weights;          // [2], forward value of o^I
  std::optional<GumbelSample<T>> sample;
  Var<T> probabilities;    // [2], softmax of the noise-free logits
};

template <typename T>
struct InferModule {
  Gated<T> transform;
  Linear<T> logits;

  static InferModule make(ParameterSet<T>& p, std::size_t q_dim, std::size_t hidden, Rng& rng) {
    return {Gated<T>::make(p, "infer.f", "infer", q_dim, hidden, rng),
            Linear<T>::make(p, "infer.W", "infer", hidden, 2, false, rng)};
  }

  // Logits for many rounds at once: [n, q_dim] -> [n, 2].
  Var<T> batch_logits(Var<T> q, const ForwardContext& ctx) const {
    return logits(maybe_dropout(transform(q, ctx), ctx));
  }
};

// Decision for round t given its logits row. At t = 0 the caption terminates
// the recursion without sampling.
template <typename T>
InferDecision<T> infer_decision(Var<T> logits_t, std::size_t t, DecisionMode mode, double tau, Rng* rng) {
  InferDecision<T> d;
  d.probabilities = softmax(logits_t);
  d.lambda = slice(d.probabilities, 0, 0, 1);
  if (t == 0) {
    d.cond = true;
    d.weights = logits_t.graph->constant(Tensor<T>::vector({T{1}, T{0}}));
    return d;
  }
  d.sample = gumbel_sample(logits_t, mode, tau, rng);
  d.cond = d.sample->index == 0;
  d.weights = d.sample->value;
  return d;
}

template <typename T>
struct PairDecision {
  std::size_t t_p = 0;
  Var<T> weights;  // [t], forward value of o^P
  std::optional<GumbelSample<T>> sample;
  Var<T> scores;   // z^P, [t]
};

template <typename T>
struct PairModule {
  Gated<T> question;  // f^P_q
  Gated<T> history;   // f^P_h
  Gated<T> hidden;    // mlp hidden layer
  Linear<T> match;    // mlp output, -> 1
  Linear<T> logit;    // shared map over (z, delta), no bias

  static PairModule make(ParameterSet<T>& p, std::size_t code, std::size_t h, Rng& rng) {
    return {Gated<T>::make(p, "pair.fq", "pair", code, h, rng),
            Gated<T>::make(p, "pair.fh", "pair", code, h, rng),
            Gated<T>::make(p, "pair.mlp", "pair", 2 * h, h, rng),
            Linear<T>::make(p, "pair.mlp.out", "pair", h, 1, true, rng),
            Linear<T>::make(p, "pair.W", "pair", 2, 1, false, rng)};
  }
};

// Pair logits for round t >= 1 from the transformed question row [h] and the
// transformed history rows [>= t, h].
template <typename T>
std::pair<Var<T>, Var<T>> pair_logits(const PairModule<T>& m, Var<T> fq_t, Var<T> fh, std::size_t t,
                                      const ForwardContext& ctx) {
  Graph<T>& g = *fq_t.graph;
  Var<T> joint = concat<T>({expand_rows(fq_t, t), slice(fh, 0, 0, t)}, 1);
  Var<T> z = m.match(maybe_dropout(m.hidden(joint, ctx), ctx));  // [t, 1]
  Tensor<T> delta({t, 1});
  for (std::size_t i = 0; i < t; ++i) delta[i] = static_cast<T>(t - i);
  Var<T> logits = reshape(m.logit(concat<T>({z, g.constant(delta)}, 1)), {t});
  return {logits, reshape(z, {t})};
}

template <typename T>
PairDecision<T> pair_decision(Var<T> logits, Var<T> scores, std::size_t t, DecisionMode mode, double tau,
                              Rng* rng) {
  if (t == 0) throw ValidationError("pair: empty history set (t = 0)");
  PairDecision<T> d;
  d.scores = scores;
  if (t == 1) {
    // Single candidate: no draw, the one-hot is exact.
    d.t_p = 0;
    d.weights = logits.graph->constant(Tensor<T>::vector({T{1}}));
    return d;
  }
  d.sample = gumbel_sample(logits, mode, tau, rng);
  d.t_p = d.sample->index;
  d.weights = d.sample->value;
  return d;
}

template <typename T>
struct AttModule {
  Gated<T> question;  // f^A_q
  Gated<T> region;    // f^A_v
  Linear<T> score;    // W^A, shared across regions

  static AttModule make(ParameterSet<T>& p, std::size_t q_dim, std::size_t v_dim, std::size_t h, Rng& rng) {
    return {Gated<T>::make(p, "att.fq", "att", q_dim, h, rng),
            Gated<T>::make(p, "att.fv", "att", v_dim, h, rng),
            Linear<T>::make(p, "att.W", "att", h, 1, false, rng)};
  }
};

// Attention over K regions from the transformed question [h] and transformed
// regions [K, h].
template <typename T>
Var<T> att_weights(const AttModule<T>& m, Var<T> fq_t, Var<T> fv, const ForwardContext& ctx) {
  const std::size_t k = fv.shape()[0];
  if (k == 0) throw ValidationError("att: no regions");
  Var<T> z = l2_normalize(hadamard(expand_rows(fq_t, k), fv), 1);
  return softmax(reshape(m.score(maybe_dropout(z, ctx)), {k}));
}

}  // namespace rva

#endif  // RVA_MODULES_HPP_
