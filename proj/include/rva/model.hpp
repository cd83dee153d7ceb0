#ifndef RVA_MODEL_HPP_
#define RVA_MODEL_HPP_

#include <map>
#include <optional>
#include <vector>

#include "rva/answer_head.hpp"
#include "rva/dialog.hpp"
#include "rva/encoder.hpp"
#include "rva/modules.hpp"
#include "rva/recursion.hpp"
#include "rva/vocab.hpp"

namespace rva {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_emb = 300;
  std::size_t d_h = 512;
  std::size_t d_v = 64;
  double dropout = 0.5;
  double tau = 1.0;
  bool rv_only = false;
  bool no_filter = false;
  bool pair_last = false;
  bool attend_hidden_states = false;

  void validate() const;
  // Width of q_ref / q_ans.
  std::size_t question_dim() const { return attend_hidden_states ? 2 * d_h : d_emb; }
};

inline constexpr std::size_t kCaptionLimit = 40;
inline constexpr std::size_t kQuestionLimit = 20;
inline constexpr std::size_t kAnswerLimit = 20;

// Token indices of one episode, ready for the model.
struct EpisodeInput {
  std::vector<std::vector<std::size_t>> questions;  // [0] caption, [t] question t
  std::vector<std::vector<std::size_t>> histories;  // [0] caption, [i] question i ++ answer i; T entries
  std::vector<std::vector<std::size_t>> answers;    // distinct candidate answers
  std::vector<std::vector<std::size_t>> candidates; // [t-1]: rows of `answers` for round t
  std::vector<std::size_t> gt_index;                // [t-1]
  std::vector<float> regions;                       // [K * d_v], row-major
  std::size_t region_count = 0;
  std::size_t region_dim = 0;

  std::size_t rounds() const { return gt_index.size(); }
};

EpisodeInput prepare_episode(const Episode& episode, const Vocabulary& vocab);

struct ForwardOptions {
  DecisionMode mode = DecisionMode::kGreedy;
  bool train = false;
  Rng* dropout_rng = nullptr;
  Rng* gumbel_rng = nullptr;
};

template <typename T>
struct EpisodeForward {
  Var<T> loss_sum;                     // sum of cross-entropy over rounds 1..T
  std::vector<Var<T>> scores;          // [t-1]
  std::vector<Var<T>> alpha;           // [t], recursive attention, t = 0..T
  std::vector<std::size_t> region_argmax;   // [t-1]
  std::vector<bool> cond;                   // [t-1]
  std::vector<std::size_t> paired;          // [t-1], Pair's choice whether or not it was used
  std::vector<std::vector<double>> ref_word_weights;  // [t], reference-aware word attention
  RecursionTrace trace;
};

// Projected candidate-answer encodings shared by every episode built into one
// graph. Encoding is row-exact, so a bank over many episodes yields the same
// values as one per episode.
template <typename T>
struct AnswerBank {
  Var<T> projected;  // [n, d_h]
  std::map<std::vector<std::size_t>, std::size_t> rows;
};

template <typename T>
class RvaModel {
 public:
  RvaModel(const ModelConfig& config, std::uint64_t seed);
  RvaModel(const RvaModel&) = delete;
  RvaModel& operator=(const RvaModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  Parameter<T>& embedding() { return *embedding_; }

  // Encodes the distinct answers of `inputs` once.
  AnswerBank<T> encode_answers(Graph<T>& g, const std::vector<const EpisodeInput*>& inputs,
                               const ForwardOptions& options) const;

  // Builds the whole episode into g. Parameters are only read. Without a bank
  // the episode's own answers are encoded.
  EpisodeForward<T> forward(Graph<T>& g, const EpisodeInput& input, const ForwardOptions& options,
                            const AnswerBank<T>* bank = nullptr) const;

 private:
  ModelConfig config_;
  ParameterSet<T> params_;
  Parameter<T>* embedding_ = nullptr;
  BiLstm<T> question_lstm_;
  BiLstm<T> history_lstm_;
  SelfAttention<T> ref_attention_;
  SelfAttention<T> ans_attention_;
  InferModule<T> infer_;
  PairModule<T> pair_;
  AttModule<T> att_;
  Gated<T> filter_;
  FactModule<T> fact_;
  Linear<T> joint_;
  Linear<T> candidate_;
};

extern template class RvaModel<float>;
extern template class RvaModel<double>;

}  // namespace rva

#endif  // RVA_MODEL_HPP_
