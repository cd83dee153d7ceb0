#include "rva/model.hpp"

#include <map>

namespace rva {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("model config: " + msg); };
  if (vocab_size < 3) fail("vocabulary too small");
  if (d_emb == 0 || d_h == 0 || d_v == 0) fail("dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1)");
  if (!(tau > 0.0)) fail("tau must be positive");
}

namespace {

std::vector<std::size_t> truncated(const Vocabulary& vocab, const Tokens& tokens, std::size_t limit) {
  std::vector<std::size_t> out = vocab.encode(tokens);
  if (out.size() > limit) out.resize(limit);
  return out;
}

}  // namespace

EpisodeInput prepare_episode(const Episode& ep, const Vocabulary& vocab) {
  EpisodeInput in;
  const auto caption = truncated(vocab, ep.caption, kCaptionLimit);
  in.questions.push_back(caption);
  in.histories.push_back(caption);
  std::map<Tokens, std::size_t> answer_rows;
  for (int t = 1; t <= ep.round_count(); ++t) {
    const DialogRound& r = ep.round(t);
    in.questions.push_back(truncated(vocab, r.question, kQuestionLimit));
    if (t < ep.round_count()) {
      auto h = truncated(vocab, r.question, kQuestionLimit);
      const auto a = truncated(vocab, r.answer, kAnswerLimit);
      h.insert(h.end(), a.begin(), a.end());
      in.histories.push_back(std::move(h));
    }
    std::vector<std::size_t> rows;
    for (const auto& c : r.candidates) {
      auto [it, fresh] = answer_rows.emplace(c, in.answers.size());
      if (fresh) in.answers.push_back(truncated(vocab, c, kAnswerLimit));
      rows.push_back(it->second);
    }
    in.candidates.push_back(std::move(rows));
    in.gt_index.push_back(static_cast<std::size_t>(r.gt_index));
  }
  in.region_count = ep.regions.size();
  in.region_dim = ep.regions.empty() ? 0 : ep.regions[0].feature.size();
  for (const auto& reg : ep.regions) {
    if (reg.feature.size() != in.region_dim) throw ValidationError("episode regions differ in feature width");
    in.regions.insert(in.regions.end(), reg.feature.begin(), reg.feature.end());
  }
  return in;
}

template <typename T>
RvaModel<T>::RvaModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = Rng::derive(seed, StreamPurpose::kInit);
  const std::size_t E = config_.d_emb, H = config_.d_h, code = 2 * H, q = config_.question_dim();
  embedding_ = &params_.add_uniform("embedding", "embedding", {config_.vocab_size, E}, 0.08, rng);
  for (std::size_t c = 0; c < E; ++c) embedding_->value.at(Vocabulary::kPad, c) = T{0};
  question_lstm_ = BiLstm<T>::make(params_, "qenc", "question_encoder", E, H, rng);
  history_lstm_ = BiLstm<T>::make(params_, "henc", "history_encoder", E, H, rng);
  ref_attention_ = SelfAttention<T>::make(params_, "qref", "self_attention", code, rng);
  ans_attention_ = SelfAttention<T>::make(params_, "qans", "self_attention", code, rng);
  infer_ = InferModule<T>::make(params_, q, H, rng);
  pair_ = PairModule<T>::make(params_, code, H, rng);
  att_ = AttModule<T>::make(params_, q, config_.d_v, H, rng);
  filter_ = Gated<T>::make(params_, "filter", "filter", q, config_.d_v, rng);
  fact_ = FactModule<T>::make(params_, code, H, rng);
  joint_ = Linear<T>::make(params_, "joint", "answer", config_.d_v + q + code, H, true, rng);
  candidate_ = Linear<T>::make(params_, "candidate", "answer", code, H, true, rng);
}

template <typename T>
AnswerBank<T> RvaModel<T>::encode_answers(Graph<T>& g, const std::vector<const EpisodeInput*>& inputs,
                                          const ForwardOptions& opt) const {
  AnswerBank<T> bank;
  std::vector<std::vector<std::size_t>> sentences;
  for (const EpisodeInput* in : inputs) {
    for (const auto& a : in->answers) {
      if (bank.rows.emplace(a, sentences.size()).second) sentences.push_back(a);
    }
  }
  if (sentences.empty()) throw ValidationError("encode_answers: no candidate answers");
  const ForwardContext ctx{opt.train, config_.dropout, opt.dropout_rng};
  Var<T> codes = encode_sentences(history_lstm_, g.parameter(*embedding_), sentences).codes;
  bank.projected = candidate_(maybe_dropout(codes, ctx));
  return bank;
}

template <typename T>
EpisodeForward<T> RvaModel<T>::forward(Graph<T>& g, const EpisodeInput& in, const ForwardOptions& opt,
                                       const AnswerBank<T>* shared) const {
  const ModelConfig& c = config_;
  const std::size_t T_rounds = in.rounds();
  if (T_rounds == 0) throw ValidationError("forward: episode has no rounds");
  if (in.region_dim != c.d_v) {
    throw ValidationError("forward: region width " + std::to_string(in.region_dim) + " does not match d_v " +
                          std::to_string(c.d_v));
  }
  if (in.questions.size() != T_rounds + 1 || in.histories.size() != T_rounds) {
    throw ValidationError("forward: inconsistent episode input");
  }
  const ForwardContext ctx{opt.train, c.dropout, opt.dropout_rng};
  if (ctx.train && ctx.dropout > 0.0 && !ctx.dropout_rng) throw ValidationError("forward: dropout rng missing");
  const bool needs_gumbel = opt.mode != DecisionMode::kGreedy && !c.rv_only;
  if (needs_gumbel && !opt.gumbel_rng) throw ValidationError("forward: gumbel rng missing");

  Var<T> table = g.parameter(*embedding_);
  std::vector<T> region_values(in.regions.begin(), in.regions.end());
  Var<T> regions = g.constant(Tensor<T>({in.region_count, in.region_dim}, std::move(region_values)));

  // Language features.
  const EncodedSentences<T> qenc = encode_sentences(question_lstm_, table, in.questions);
  Var<T> states = word_states(qenc);
  Var<T> values = states;
  if (!c.attend_hidden_states) {
    std::vector<std::size_t> words;
    for (std::size_t j = 0; j < in.questions.size(); ++j) {
      words.insert(words.end(), in.questions[j].begin(),
                   in.questions[j].begin() + static_cast<std::ptrdiff_t>(qenc.lengths[j]));
    }
    values = embedding_lookup(table, words);
  }
  const AttendedSentences<T> ref = self_attend(ref_attention_, states, values, qenc.lengths, ctx);
  const AttendedSentences<T> ans = self_attend(ans_attention_, states, values, qenc.lengths, ctx);
  const Var<T> eq = qenc.codes;
  const Var<T> eh = encode_sentences(history_lstm_, table, in.histories).codes;
  std::optional<AnswerBank<T>> own;
  if (!shared) own = encode_answers(g, {&in}, opt);
  const AnswerBank<T>& bank = shared ? *shared : *own;
  std::vector<std::size_t> answer_row(in.answers.size());
  for (std::size_t i = 0; i < in.answers.size(); ++i) {
    auto it = bank.rows.find(in.answers[i]);
    if (it == bank.rows.end()) throw ValidationError("forward: answer bank misses a candidate");
    answer_row[i] = it->second;
  }
  Var<T> cand = bank.projected;

  // Per-episode transforms, batched over rounds.
  Var<T> att_q = att_.question(ref.features, ctx);
  Var<T> att_v = att_.region(regions, ctx);
  std::optional<Var<T>> infer_logits, pair_q, pair_h, gate;
  if (!c.rv_only) {
    infer_logits = infer_.batch_logits(ref.features, ctx);
    if (!c.pair_last) {
      pair_q = pair_.question(eq, ctx);
      pair_h = pair_.history(eh, ctx);
    }
  }
  if (!c.no_filter) gate = filter_(ans.features, ctx);
  Var<T> fact_q = fact_.question(eq, ctx);
  Var<T> fact_h = fact_.history(eh, ctx);

  EpisodeForward<T> out;
  for (const auto& w : ref.weights) {
    out.ref_word_weights.emplace_back(w.value().values().begin(), w.value().values().end());
  }
  RecursionEngine<T> engine(c.rv_only);
  Var<T> loss;
  bool has_loss = false;
  for (std::size_t t = 0; t <= T_rounds; ++t) {
    Var<T> att = att_weights(att_, row(att_q, t), att_v, ctx);
    std::optional<RecursionStep<T>> step;
    std::size_t paired = t == 0 ? 0 : t - 1;
    if (t > 0 && !c.rv_only) {
      const InferDecision<T> inf = infer_decision(row(*infer_logits, t), t, opt.mode, c.tau, opt.gumbel_rng);
      RecursionStep<T> s;
      s.cond = inf.cond;
      s.infer_weights = inf.weights;
      s.lambda = inf.lambda;
      if (c.pair_last) {
        Tensor<T> hot({t});
        hot[t - 1] = T{1};
        s.t_p = t - 1;
        s.pair_weights = g.constant(std::move(hot));
      } else {
        auto [logits, scores] = pair_logits(pair_, row(*pair_q, t), *pair_h, t, ctx);
        const PairDecision<T> pd = pair_decision(logits, scores, t, opt.mode, c.tau, opt.gumbel_rng);
        s.t_p = pd.t_p;
        s.pair_weights = pd.weights;
      }
      paired = s.t_p;
      step = std::move(s);
    }
    Var<T> alpha = engine.push_round(att, step);
    out.alpha.push_back(alpha);
    if (t == 0) continue;

    out.region_argmax.push_back(argmax_index(alpha.value()));
    out.cond.push_back(engine.trace().rounds.back().cond);
    out.paired.push_back(paired);

    Var<T> v_hat = attend_feature(alpha, regions);
    Var<T> v_tilde = gate ? filter_visual(v_hat, row(*gate, t)) : v_hat;
    auto [h_f, alpha_h] = fact_embedding(fact_, row(fact_q, t), fact_h, eh, t, ctx);
    Var<T> joint = tanh(joint_(maybe_dropout(concat<T>({v_tilde, row(ans.features, t), h_f}), ctx)));
    std::vector<std::size_t> rows;
    for (std::size_t c : in.candidates[t - 1]) rows.push_back(answer_row.at(c));
    Var<T> scores = score_candidates(joint, embedding_lookup(cand, rows));
    out.scores.push_back(scores);
    Var<T> ce = discriminative_loss(scores, in.gt_index[t - 1]);
    loss = has_loss ? add(loss, ce) : ce;
    has_loss = true;
  }
  out.loss_sum = loss;
  out.trace = engine.trace();
  return out;
}

template class RvaModel<float>;
template class RvaModel<double>;

}  // namespace rva
