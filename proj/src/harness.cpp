#include "rva/harness.hpp"

#include <chrono>

#include "rva/trainer.hpp"

namespace rva {

RunConfig toy_gradcheck_config() {
  RunConfig c;
  c.d_emb = 6;
  c.d_h = 8;
  c.d_v = 40;
  c.regions = 3;
  c.rounds = 3;
  c.objects = 2;
  c.candidates = 4;
  c.dropout = 0.0;
  c.precision = Precision::kFloat64;
  return c;
}

ModelGradcheck model_gradcheck(const RunConfig& config, double tolerance, double eps) {
  config.validate();
  if (config.precision != Precision::kFloat64) throw ValidationError("gradcheck: precision must be float64");
  const auto start = std::chrono::steady_clock::now();
  const Vocabulary vocab = Vocabulary::standard();
  const std::vector<Episode> episodes = generate_dataset(config.seed, 1, config.data());
  const EpisodeInput input = prepare_episode(episodes[0], vocab);
  RvaModel<double> model(config.model(vocab.size()), config.seed);
  const Rng gumbel = Rng::derive(config.seed, StreamPurpose::kGumbel);

  LossBuilder loss = [&](Graph<double>& g) {
    Rng noise = gumbel;
    ForwardOptions opt;
    opt.mode = config.rv_only ? DecisionMode::kGreedy : DecisionMode::kRelaxed;
    opt.gumbel_rng = &noise;
    return model.forward(g, input, opt).loss_sum;
  };
  ModelGradcheck out;
  out.report = finite_diff_check(loss, model.params(), eps);
  if (!out.report.passed(tolerance)) {
    for (const OpCheck& op : check_all_ops(config.seed)) {
      if (op.max_rel_error > out.failing_op_error) {
        out.failing_op_error = op.max_rel_error;
        out.failing_op = op.op;
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace rva
