#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rva/harness.hpp"
#include "rva/trainer.hpp"

namespace fs = std::filesystem;
using namespace rva;

namespace {

struct Options {
  std::uint64_t seed = 1;
  std::size_t episodes = 0;
  std::string config;
  std::string out;
  std::string data;
  std::string out_dir;
  bool resume = false;
  std::string checkpoint;
  std::string report;
  std::string dump;
  std::string traces;
  std::string dot;
  std::size_t episode = 0;
  std::string corrupt_op;
  int threads = 0;
};

int gen_data(const Options& o) {
  const RunConfig config = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  config.validate();
  const auto episodes = generate_dataset(o.seed, o.episodes, config.data());
  write_dataset(o.out, episodes);
  std::cout << fmt::format("wrote {} episodes to {}\n", episodes.size(), o.out);
  return 0;
}

template <typename T>
int train_with(const Options& o, std::unique_ptr<Session<T>> session) {
  const auto episodes = read_dataset(o.data);
  const auto inputs = prepare_all(episodes, session->vocab());
  fs::create_directories(o.out_dir);
  std::ofstream curve(fs::path(o.out_dir) / "loss_curve.txt", session->epoch() == 0 ? std::ios::trunc : std::ios::app);
  if (session->epoch() >= session->config().epochs) session->save(o.out_dir);
  session->train(inputs, [&](const Session<T>& s) {
    const int e = s.epoch() - 1;
    std::cout << fmt::format("epoch {} lr {:.3e} loss {:.6f}\n", e, s.config().learning_rate_at(e), s.loss_curve().back())
              << std::flush;
    curve << fmt::format("{} {:a}\n", e, s.loss_curve().back()) << std::flush;
    s.save(o.out_dir);
  });
  return 0;
}

template <typename T>
int train_typed(const Options& o, const RunConfig& config) {
  if (o.resume && fs::exists(fs::path(o.out_dir) / "state.meta")) {
    auto session = Session<T>::load(o.out_dir);
    if (!(session->config() == config)) throw ValidationError("train: --resume config differs from checkpoint config");
    std::cout << fmt::format("resuming at epoch {}\n", session->epoch());
    return train_with(o, std::move(session));
  }
  return train_with(o, std::make_unique<Session<T>>(config, Vocabulary::standard()));
}

int train(const Options& o) {
  const RunConfig config = load_run_config(o.config);
  return config.precision == Precision::kFloat64 ? train_typed<double>(o, config) : train_typed<float>(o, config);
}

Precision checkpoint_precision(const std::string& dir) {
  return load_run_config((fs::path(dir) / "config.txt").string()).precision;
}

template <typename T>
int eval_typed(const Options& o) {
  auto session = Session<T>::load(o.checkpoint);
  const auto episodes = read_dataset(o.data);
  const auto inputs = prepare_all(episodes, session->vocab());
  const int threads = o.threads > 0 ? o.threads : session->config().eval_threads;
  const EvalResult r = evaluate(session->model(), episodes, inputs, threads);
  if (!o.report.empty()) write_metrics_report(o.report, r);
  if (!o.dump.empty()) write_prediction_dump(o.dump, r);
  if (!o.traces.empty()) {
    fs::create_directories(o.traces);
    for (std::size_t e = 0; e < r.traces.size(); ++e) {
      std::ofstream out(fs::path(o.traces) / fmt::format("episode_{:05}.dot", e));
      r.traces[e].write_dot(out, fmt::format("episode_{}", e));
    }
  }
  const MetricsReport& m = r.metrics;
  std::cout << fmt::format("questions {}  MRR {:.4f}  R@1 {:.4f}  R@5 {:.4f}  R@10 {:.4f}  Mean {:.3f}  NDCG {:.4f}\n",
                           m.count, m.mrr, m.r1, m.r5, m.r10, m.mean, m.ndcg);
  const CorefDiagnostics& c = r.coref;
  std::cout << fmt::format(
      "region acc ambiguous {:.4f} unambiguous {:.4f}  recurse {:.4f}  pair acc {:.4f}  skip pair acc {:.4f} "
      "(chance {:.4f}, n={})\n",
      c.region_acc_ambiguous, c.region_acc_unambiguous, c.recurse_rate_ambiguous, c.pair_acc_ambiguous, c.pair_acc_skip,
      c.pair_chance_skip, c.skip_count);
  return 0;
}

int eval(const Options& o) {
  return checkpoint_precision(o.checkpoint) == Precision::kFloat64 ? eval_typed<double>(o) : eval_typed<float>(o);
}

template <typename T>
int trace_typed(const Options& o) {
  auto session = Session<T>::load(o.checkpoint);
  const auto episodes = read_dataset(o.data);
  if (o.episode >= episodes.size()) {
    throw ValidationError(fmt::format("trace: episode {} out of range ({} episodes)", o.episode, episodes.size()));
  }
  const std::vector<Episode> one{episodes[o.episode]};
  const EvalResult r = evaluate(session->model(), one, prepare_all(one, session->vocab()), 1);
  std::ofstream out(o.dot);
  if (!out) throw ValidationError("trace: cannot write " + o.dot);
  r.traces[0].write_dot(out, fmt::format("episode_{}", o.episode));
  r.traces[0].write_text(std::cout);
  return 0;
}

int trace(const Options& o) {
  return checkpoint_precision(o.checkpoint) == Precision::kFloat64 ? trace_typed<double>(o) : trace_typed<float>(o);
}

int gradcheck(const Options& o) {
  const RunConfig config = o.config.empty() ? toy_gradcheck_config() : load_run_config(o.config);
  Graph<double>::fault_op() = o.corrupt_op;
  const ModelGradcheck r = model_gradcheck(config);
  Graph<double>::fault_op().clear();
  std::cout << fmt::format("{:<18} {:>12} {:>8}  {}\n", "group", "max rel err", "coords", "worst parameter");
  for (const GroupError& g : r.report.groups) {
    std::cout << fmt::format("{:<18} {:>12.3e} {:>8}  {}[{}]\n", g.group, g.max_rel_error, g.coordinates,
                             g.worst_parameter, g.worst_index);
  }
  std::cout << fmt::format("max relative error {:.3e} in {:.1f} s\n", r.report.max_rel_error, r.seconds);
  if (!r.report.passed(1e-4)) {
    std::cout << fmt::format("FAIL: backward rule of op '{}' disagrees with finite differences (rel err {:.3e})\n",
                             r.failing_op, r.failing_op_error);
    return 2;
  }
  std::cout << "PASS\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate the recursive attention dialog model"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dialog dataset");
  gen->add_option("--seed", o.seed, "Master seed")->required();
  gen->add_option("--episodes", o.episodes, "Number of episodes")->required();
  gen->add_option("--config", o.config, "Run config (data keys are used)");
  gen->add_option("--out", o.out, "Output JSON-lines file")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", o.config, "Run config")->required();
  tr->add_option("--data", o.data, "Training dataset")->required();
  tr->add_option("--out-dir", o.out_dir, "Checkpoint directory")->required();
  tr->add_flag("--resume", o.resume, "Continue from the checkpoint in --out-dir");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  ev->add_option("--data", o.data, "Evaluation dataset")->required();
  ev->add_option("--report", o.report, "Metrics report (JSON)");
  ev->add_option("--dump", o.dump, "Prediction dump (JSON lines)");
  ev->add_option("--traces", o.traces, "Directory for per-episode DOT traces");
  ev->add_option("--threads", o.threads, "Worker threads (default: eval_threads from the config)");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  gc->add_option("--config", o.config, "Run config (default: built-in toy dimensions)");
  gc->add_option("--corrupt-op", o.corrupt_op)->group("");

  auto* tc = app.add_subcommand("trace", "Export the recursion trace of one episode");
  tc->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  tc->add_option("--data", o.data, "Dataset")->required();
  tc->add_option("--episode", o.episode, "Episode index")->required();
  tc->add_option("--dot", o.dot, "Output DOT file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) return gen_data(o);
    if (*tr) return train(o);
    if (*ev) return eval(o);
    if (*gc) return gradcheck(o);
    if (*tc) return trace(o);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
