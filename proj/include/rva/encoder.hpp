#ifndef RVA_ENCODER_HPP_
#define RVA_ENCODER_HPP_

#include <string>
#include <vector>

#include "rva/layers.hpp"

namespace rva {

template <typename T>
struct LstmDirection {
  Parameter<T>* wx = nullptr;  // [in, 4H], gate order i, f, g, o
  Parameter<T>* wh = nullptr;  // [H, 4H]
  Parameter<T>* bias = nullptr;
};

template <typename T>
struct BiLstm {
  LstmDirection<T> forward;
  LstmDirection<T> backward;
  std::size_t input = 0;
  std::size_t hidden = 0;

  static BiLstm make(ParameterSet<T>& params, const std::string& name, const std::string& group,
                     std::size_t input, std::size_t hidden, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto dir = [&](const std::string& tag) {
      LstmDirection<T> d;
      d.wx = &params.add_uniform(name + "." + tag + ".wx", group, {input, 4 * hidden}, bound, rng);
      d.wh = &params.add_uniform(name + "." + tag + ".wh", group, {hidden, 4 * hidden}, bound, rng);
      d.bias = &params.add_uniform(name + "." + tag + ".b", group, {4 * hidden}, bound, rng);
      return d;
    };
    BiLstm b;
    b.forward = dir("fwd");
    b.backward = dir("bwd");
    b.input = input;
    b.hidden = hidden;
    return b;
  }
};

// A batch of sentences run through a bi-LSTM. Step s of row j is stored at
// row s * n + j of the state matrices; the backward direction runs over each
// sentence reversed, so its step s corresponds to word length - 1 - s.
template <typename T>
struct EncodedSentences {
  Var<T> codes;            // [n, 2H]: [fwd state at last word, bwd state at first word]
  Var<T> forward_states;   // [steps * n, H]
  Var<T> backward_states;  // [steps * n, H]
  std::vector<std::size_t> lengths;

  std::size_t count() const { return lengths.size(); }

  // Rows (fwd, bwd) of word i of sentence j in the state matrices.
  std::pair<std::size_t, std::size_t> state_rows(std::size_t j, std::size_t i) const {
    const std::size_t n = lengths.size();
    return {i * n + j, (lengths[j] - 1 - i) * n + j};
  }
};

namespace detail {

// Row j of the output is new[j] when active[j] and old[j] otherwise. Finished
// sentences keep their last state bit for bit.
template <typename T>
Var<T> select_rows(Var<T> fresh, Var<T> old, const std::vector<bool>& active) {
  Tensor<T> out = old.value();
  const std::size_t w = out.cols();
  for (std::size_t r = 0; r < active.size(); ++r) {
    if (active[r]) std::copy_n(fresh.value().row(r).begin(), w, out.row(r).begin());
  }
  return fresh.graph->record("select_rows", std::move(out), {fresh, old},
                             [fresh, old, active, w](Graph<T>& g, const Tensor<T>& gy) {
    Tensor<T>* gf = g.grad_target(fresh);
    Tensor<T>* go = g.grad_target(old);
    for (std::size_t r = 0; r < active.size(); ++r) {
      Tensor<T>* dst = active[r] ? gf : go;
      if (!dst) continue;
      for (std::size_t c = 0; c < w; ++c) dst->at(r, c) += gy.at(r, c);
    }
  });
}

// Length before the first pad; pads must only trail.
inline std::size_t real_length(const std::vector<std::size_t>& tokens, std::size_t vocab_size) {
  std::size_t len = 0;
  while (len < tokens.size() && tokens[len] != 0) ++len;
  for (std::size_t i = len; i < tokens.size(); ++i) {
    if (tokens[i] != 0) throw ValidationError("encode_sequence: pad token before a real token");
  }
  if (len == 0) throw ValidationError("encode_sequence: empty sequence");
  for (std::size_t i = 0; i < len; ++i) {
    if (tokens[i] >= vocab_size) {
      throw ValidationError("encode_sequence: token index " + std::to_string(tokens[i]) +
                            " >= vocabulary size " + std::to_string(vocab_size));
    }
  }
  return len;
}

template <typename T>
std::pair<Var<T>, Var<T>> run_direction(const LstmDirection<T>& dir, std::size_t hidden, Var<T> table,
                                        const std::vector<std::vector<std::size_t>>& rows,
                                        const std::vector<std::size_t>& lengths, std::size_t steps) {
  Graph<T>& g = *table.graph;
  const std::size_t n = rows.size();
  std::vector<std::size_t> gather(steps * n, 0);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      if (s < lengths[j]) gather[s * n + j] = rows[j][s];
    }
  }
  Var<T> xw = matmul(embedding_lookup(table, gather), g.parameter(*dir.wx));  // [steps*n, 4H]
  Var<T> wh = g.parameter(*dir.wh);
  Var<T> bias = expand_rows(g.parameter(*dir.bias), n);
  Var<T> h = g.constant(Tensor<T>({n, hidden}));
  Var<T> c = g.constant(Tensor<T>({n, hidden}));
  std::vector<Var<T>> states;
  states.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    Var<T> gates = add(add(slice(xw, 0, s * n, n), matmul(h, wh)), bias);
    Var<T> i = sigmoid(slice(gates, 1, 0, hidden));
    Var<T> f = sigmoid(slice(gates, 1, hidden, hidden));
    Var<T> cand = tanh(slice(gates, 1, 2 * hidden, hidden));
    Var<T> o = sigmoid(slice(gates, 1, 3 * hidden, hidden));
    Var<T> c_new = add(hadamard(f, c), hadamard(i, cand));
    Var<T> h_new = hadamard(o, tanh(c_new));
    std::vector<bool> active(n);
    bool all_active = true;
    for (std::size_t j = 0; j < n; ++j) {
      active[j] = s < lengths[j];
      all_active = all_active && active[j];
    }
    if (all_active) {
      h = h_new;
      c = c_new;
    } else {
      h = select_rows(h_new, h, active);
      c = select_rows(c_new, c, active);
    }
    states.push_back(h);
  }
  return {h, states.size() == 1 ? states[0] : concat(states, 0)};
}

}  // namespace detail

// Encodes every sentence in one batched recurrence. Trailing pad tokens are
// ignored exactly; each sentence's result does not depend on the rest of the batch.
template <typename T>
EncodedSentences<T> encode_sentences(const BiLstm<T>& lstm, Var<T> table,
                                     const std::vector<std::vector<std::size_t>>& sentences) {
  if (sentences.empty()) throw ValidationError("encode_sequence: no sentences");
  const std::size_t vocab = table.shape()[0];
  EncodedSentences<T> out;
  std::size_t steps = 0;
  for (const auto& s : sentences) {
    out.lengths.push_back(detail::real_length(s, vocab));
    steps = std::max(steps, out.lengths.back());
  }
  std::vector<std::vector<std::size_t>> reversed(sentences.size());
  for (std::size_t j = 0; j < sentences.size(); ++j) {
    reversed[j].assign(sentences[j].begin(), sentences[j].begin() + static_cast<std::ptrdiff_t>(out.lengths[j]));
    std::reverse(reversed[j].begin(), reversed[j].end());
  }
  auto [hf, fstates] = detail::run_direction(lstm.forward, lstm.hidden, table, sentences, out.lengths, steps);
  auto [hb, bstates] = detail::run_direction(lstm.backward, lstm.hidden, table, reversed, out.lengths, steps);
  out.codes = concat<T>({hf, hb}, 1);
  out.forward_states = fstates;
  out.backward_states = bstates;
  return out;
}

// Per-word hidden states [length, 2H] of every sentence, concatenated in
// sentence order: [sum of lengths, 2H].
template <typename T>
Var<T> word_states(const EncodedSentences<T>& enc) {
  std::vector<std::size_t> frows, brows;
  for (std::size_t j = 0; j < enc.count(); ++j) {
    for (std::size_t i = 0; i < enc.lengths[j]; ++i) {
      auto [f, b] = enc.state_rows(j, i);
      frows.push_back(f);
      brows.push_back(b);
    }
  }
  return concat<T>({embedding_lookup(enc.forward_states, frows), embedding_lookup(enc.backward_states, brows)}, 1);
}

template <typename T>
struct SelfAttention {
  Gated<T> transform;  // 2H -> 2H
  Linear<T> score;     // 2H -> 1, shared across words

  static SelfAttention make(ParameterSet<T>& params, const std::string& name, const std::string& group,
                            std::size_t width, Rng& rng) {
    return {Gated<T>::make(params, name + ".f", group, width, width, rng),
            Linear<T>::make(params, name + ".w", group, width, 1, false, rng)};
  }
};

template <typename T>
struct AttendedSentences {
  Var<T> features;              // [n, d]
  std::vector<Var<T>> weights;  // per sentence, [length]
};

// Self-attention over the words of each sentence. `states` holds the word
// hidden states of all sentences back to back, `values` the rows that get
// summed (word embeddings by default).
template <typename T>
AttendedSentences<T> self_attend(const SelfAttention<T>& sa, Var<T> states, Var<T> values,
                                 const std::vector<std::size_t>& lengths, const ForwardContext& ctx) {
  const std::size_t total = states.shape()[0];
  Var<T> z = l2_normalize(sa.transform(states, ctx), 1);
  Var<T> logits = reshape(sa.score(maybe_dropout(z, ctx)), {total});
  AttendedSentences<T> out;
  std::vector<Var<T>> rows;
  std::size_t offset = 0;
  for (std::size_t len : lengths) {
    Var<T> alpha = softmax(slice(logits, 0, offset, len));
    rows.push_back(matmul(alpha, slice(values, 0, offset, len)));
    out.weights.push_back(alpha);
    offset += len;
  }
  out.features = stack(rows);
  return out;
}

}  // namespace rva

#endif  // RVA_ENCODER_HPP_
