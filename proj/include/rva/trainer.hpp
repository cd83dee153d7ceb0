#ifndef RVA_TRAINER_HPP_
#define RVA_TRAINER_HPP_

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rva/config.hpp"
#include "rva/metrics.hpp"
#include "rva/model.hpp"

namespace rva {

// Adam with bias correction.
template <typename T>
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  void update(ParameterSet<T>& params, double lr);
};

// Model, optimizer, randomness and progress of one training run.
template <typename T>
class Session {
 public:
  Session(const RunConfig& config, Vocabulary vocab);

  // Runs one epoch over `data` and returns the mean per-question loss.
  // Throws NumericError (with epoch and step) on a non-finite loss.
  double train_epoch(const std::vector<EpisodeInput>& data);
  // Trains until config().epochs; `after_epoch` runs after each epoch.
  void train(const std::vector<EpisodeInput>& data, const std::function<void(const Session&)>& after_epoch = {});

  // Directory with config.txt, state.meta, params.rva and vocab.txt.
  void save(const std::string& dir) const;
  static std::unique_ptr<Session> load(const std::string& dir);

  const RunConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  RvaModel<T>& model() { return *model_; }
  const RvaModel<T>& model() const { return *model_; }
  int epoch() const { return epoch_; }
  const std::vector<double>& loss_curve() const { return losses_; }

 private:
  RunConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<RvaModel<T>> model_;
  Adam<T> adam_;
  int epoch_ = 0;
  std::vector<double> losses_;
  Rng dropout_rng_;
  Rng gumbel_rng_;
};

extern template class Session<float>;
extern template class Session<double>;

struct QuestionResult {
  std::size_t episode = 0;
  int round = 0;
  std::vector<double> scores;
  std::vector<int> ranking;
  int gt = 0;
  bool ambiguous = false;
  bool skip = false;
  std::optional<int> antecedent;
  std::optional<int> gt_region;
  std::size_t region_argmax = 0;
  bool cond = true;
  std::size_t paired = 0;
  std::vector<double> ref_word_weights;
};

struct CorefDiagnostics {
  double region_acc_ambiguous = 0.0;
  double region_acc_unambiguous = 0.0;
  double recurse_rate_ambiguous = 0.0;    // cond = false on ambiguous questions
  double terminate_rate_unambiguous = 0.0;
  double pair_acc_ambiguous = 0.0;        // Pair's choice equals the antecedent
  double pair_acc_skip = 0.0;
  double pair_chance_skip = 0.0;          // mean of 1/t over skip rounds
  std::size_t ambiguous_count = 0;
  std::size_t unambiguous_grounded_count = 0;
  std::size_t skip_count = 0;
  // Mean reference-aware word attention per token class on ambiguous questions.
  double ref_mass_pronoun = 0.0;
  double ref_mass_noun = 0.0;
  double ref_mass_attribute = 0.0;
  double ref_mass_function = 0.0;
};

struct EvalResult {
  std::vector<QuestionResult> questions;
  std::vector<RecursionTrace> traces;  // per episode
  MetricsReport metrics;
  CorefDiagnostics coref;
};

// Greedy decisions, no dropout. Episodes are spread over `threads` workers;
// results are reduced in episode order, so the thread count never changes them.
template <typename T>
EvalResult evaluate(const RvaModel<T>& model, const std::vector<Episode>& episodes,
                    const std::vector<EpisodeInput>& inputs, int threads);

std::vector<EvalRecord> to_records(const std::vector<Episode>& episodes, const std::vector<QuestionResult>& questions);
CorefDiagnostics coref_diagnostics(const std::vector<Episode>& episodes, const std::vector<QuestionResult>& questions);

std::vector<EpisodeInput> prepare_all(const std::vector<Episode>& episodes, const Vocabulary& vocab);

// Report / dump writers (JSON).
void write_metrics_report(const std::string& path, const EvalResult& result);
void write_prediction_dump(const std::string& path, const EvalResult& result);

}  // namespace rva

#endif  // RVA_TRAINER_HPP_
