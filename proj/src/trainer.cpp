#include "rva/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "rva/tensor_io.hpp"

namespace rva {

namespace fs = std::filesystem;

template <typename T>
void Adam<T>::update(ParameterSet<T>& params, double lr) {
  if (m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m.emplace_back(params[i].value.shape());
      v.emplace_back(params[i].value.shape());
    }
  }
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value.storage();
    const auto& g = params[i].grad.storage();
    auto& mi = m[i].storage();
    auto& vi = v[i].storage();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = beta1 * static_cast<double>(mi[k]) + (1.0 - beta1) * gk;
      const double vk = beta2 * static_cast<double>(vi[k]) + (1.0 - beta2) * gk * gk;
      mi[k] = static_cast<T>(mk);
      vi[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * (mk / c1) / (std::sqrt(vk / c2) + epsilon));
    }
  }
}

template <typename T>
Session<T>::Session(const RunConfig& config, Vocabulary vocab)
    : config_(config),
      vocab_(std::move(vocab)),
      dropout_rng_(Rng::derive(config.seed, StreamPurpose::kDropout)),
      gumbel_rng_(Rng::derive(config.seed, StreamPurpose::kGumbel)) {
  config_.validate();
  model_ = std::make_unique<RvaModel<T>>(config_.model(vocab_.size()), config_.seed);
  if (!config_.embedding_file.empty()) {
    load_embedding_file(config_.embedding_file, vocab_, model_->embedding().value);
  }
}

template <typename T>
double Session<T>::train_epoch(const std::vector<EpisodeInput>& data) {
  if (data.empty()) throw ValidationError("train: empty dataset");
  const double lr = config_.learning_rate_at(epoch_);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle = Rng::derive(config_.seed, StreamPurpose::kShuffle, static_cast<std::uint64_t>(epoch_));
  shuffle.shuffle(std::span<std::size_t>(order));

  ParameterSet<T>& params = model_->params();
  Parameter<T>& embedding = model_->embedding();
  const ForwardOptions options{DecisionMode::kSample, true, &dropout_rng_, &gumbel_rng_};
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  double total_loss = 0.0;
  std::size_t total_questions = 0, step = 0;
  for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
    const std::size_t end = std::min(order.size(), start + batch);
    std::size_t questions = 0;
    for (std::size_t i = start; i < end; ++i) questions += data[order[i]].rounds();
    params.zero_grad();
    try {
      // One graph per batch: the batch's distinct answers are encoded once.
      Graph<T> g;
      std::vector<const EpisodeInput*> members;
      for (std::size_t i = start; i < end; ++i) members.push_back(&data[order[i]]);
      const AnswerBank<T> bank = model_->encode_answers(g, members, options);
      Var<T> batch_loss;
      for (std::size_t i = start; i < end; ++i) {
        const EpisodeForward<T> fwd = model_->forward(g, data[order[i]], options, &bank);
        const double loss = static_cast<double>(fwd.loss_sum.item());
        if (!std::isfinite(loss)) throw NumericError("non-finite loss");
        batch_loss = i == start ? fwd.loss_sum : add(batch_loss, fwd.loss_sum);
        total_loss += loss;
      }
      g.backward(scale(batch_loss, static_cast<T>(1.0 / static_cast<double>(questions))));
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("train: epoch {} step {}: {}", epoch_, step, e.what()));
    }
    total_questions += questions;
    // The pad row stays at zero.
    for (std::size_t c = 0; c < embedding.grad.cols(); ++c) embedding.grad.at(Vocabulary::kPad, c) = T{0};
    adam_.update(params, lr);
  }
  ++epoch_;
  const double mean = total_loss / static_cast<double>(total_questions);
  losses_.push_back(mean);
  return mean;
}

template <typename T>
void Session<T>::train(const std::vector<EpisodeInput>& data, const std::function<void(const Session&)>& after_epoch) {
  while (epoch_ < config_.epochs) {
    train_epoch(data);
    if (after_epoch) after_epoch(*this);
  }
}

namespace {

std::string rng_text(const Rng::State& s) { return fmt::format("{} {} {}", s.seed, s.stream, s.position); }

Rng::State parse_rng(const std::string& text) {
  std::istringstream in(text);
  Rng::State s;
  if (!(in >> s.seed >> s.stream >> s.position)) throw ValidationError("checkpoint: bad rng state '" + text + "'");
  return s;
}

std::map<std::string, std::string> read_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("checkpoint: cannot read " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

const std::string& meta_at(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ValidationError("checkpoint: missing '" + key + "'");
  return it->second;
}

}  // namespace

template <typename T>
void Session<T>::save(const std::string& dir) const {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "config.txt", std::ios::trunc);
    out << config_.to_text();
  }
  vocab_.save((fs::path(dir) / "vocab.txt").string());
  NamedTensors<T> tensors;
  const ParameterSet<T>& params = model_->params();
  for (std::size_t i = 0; i < params.size(); ++i) tensors.emplace_back(params[i].name, params[i].value);
  for (std::size_t i = 0; i < adam_.m.size(); ++i) {
    tensors.emplace_back("adam.m/" + params[i].name, adam_.m[i]);
    tensors.emplace_back("adam.v/" + params[i].name, adam_.v[i]);
  }
  write_tensor_file((fs::path(dir) / "params.rva").string(), tensors);
  std::ofstream meta(fs::path(dir) / "state.meta", std::ios::trunc);
  meta << "format = rva-checkpoint 1\n";
  meta << "epoch = " << epoch_ << "\n";
  meta << "adam_step = " << adam_.step << "\n";
  meta << "dropout_rng = " << rng_text(dropout_rng_.state()) << "\n";
  meta << "gumbel_rng = " << rng_text(gumbel_rng_.state()) << "\n";
  meta << "loss_curve =";
  for (double l : losses_) meta << ' ' << fmt::format("{:a}", l);
  meta << "\n";
  if (!meta) throw ValidationError("checkpoint: write failed in " + dir);
}

template <typename T>
std::unique_ptr<Session<T>> Session<T>::load(const std::string& dir) {
  const RunConfig config = load_run_config((fs::path(dir) / "config.txt").string());
  const std::uint32_t width = tensor_file_precision((fs::path(dir) / "params.rva").string());
  if (width != sizeof(T)) {
    throw ValidationError(fmt::format("checkpoint: stored precision is {}-byte, expected {}-byte", width, sizeof(T)));
  }
  auto session = std::make_unique<Session<T>>(config, Vocabulary::load((fs::path(dir) / "vocab.txt").string()));
  const auto meta = read_meta((fs::path(dir) / "state.meta").string());
  if (meta_at(meta, "format") != "rva-checkpoint 1") throw ValidationError("checkpoint: unknown format");
  session->epoch_ = std::stoi(meta_at(meta, "epoch"));
  session->adam_.step = std::stoull(meta_at(meta, "adam_step"));
  session->dropout_rng_.set_state(parse_rng(meta_at(meta, "dropout_rng")));
  session->gumbel_rng_.set_state(parse_rng(meta_at(meta, "gumbel_rng")));
  std::istringstream curve(meta_at(meta, "loss_curve"));
  std::string item;
  while (curve >> item) session->losses_.push_back(std::strtod(item.c_str(), nullptr));

  std::map<std::string, Tensor<T>> stored;
  for (auto& [name, t] : read_tensor_file<T>((fs::path(dir) / "params.rva").string())) stored[name] = std::move(t);
  ParameterSet<T>& params = session->model_->params();
  auto take = [&](const std::string& name, const Shape& shape) {
    auto it = stored.find(name);
    if (it == stored.end()) throw ValidationError("checkpoint: missing tensor " + name);
    if (it->second.shape() != shape) {
      throw ValidationError("checkpoint: dimension mismatch for " + name + ": stored " + shape_str(it->second.shape()) +
                            ", config expects " + shape_str(shape));
    }
    return it->second;
  };
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = take(params[i].name, params[i].value.shape());
  if (session->adam_.step > 0) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      session->adam_.m.push_back(take("adam.m/" + params[i].name, params[i].value.shape()));
      session->adam_.v.push_back(take("adam.v/" + params[i].name, params[i].value.shape()));
    }
  }
  return session;
}

std::vector<EpisodeInput> prepare_all(const std::vector<Episode>& episodes, const Vocabulary& vocab) {
  std::vector<EpisodeInput> out;
  out.reserve(episodes.size());
  for (const auto& ep : episodes) out.push_back(prepare_episode(ep, vocab));
  return out;
}

template <typename T>
EvalResult evaluate(const RvaModel<T>& model, const std::vector<Episode>& episodes,
                    const std::vector<EpisodeInput>& inputs, int threads) {
  if (episodes.size() != inputs.size()) throw ValidationError("evaluate: episodes and inputs differ in count");
  if (episodes.empty()) throw ValidationError("evaluate: empty dataset");
  std::vector<std::vector<QuestionResult>> per_episode(episodes.size());
  std::vector<RecursionTrace> traces(episodes.size());
  // Chunks of episodes share one graph and answer bank.
  constexpr std::size_t kChunk = 16;
  const std::size_t chunks = (episodes.size() + kChunk - 1) / kChunk;
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t c = first; c < chunks; c += stride) {
      Graph<T> g(false);
      const std::size_t lo = c * kChunk, hi = std::min(episodes.size(), lo + kChunk);
      std::vector<const EpisodeInput*> members;
      for (std::size_t e = lo; e < hi; ++e) members.push_back(&inputs[e]);
      const AnswerBank<T> bank = model.encode_answers(g, members, ForwardOptions{});
      for (std::size_t e = lo; e < hi; ++e) {
        const EpisodeForward<T> fwd = model.forward(g, inputs[e], ForwardOptions{}, &bank);
        const Episode& ep = episodes[e];
        for (int t = 1; t <= ep.round_count(); ++t) {
          const auto k = static_cast<std::size_t>(t - 1);
          const DialogRound& r = ep.round(t);
          QuestionResult q;
          q.episode = e;
          q.round = t;
          const auto& s = fwd.scores[k].value();
          q.scores.assign(s.values().begin(), s.values().end());
          q.ranking = rank_candidates(q.scores);
          q.gt = r.gt_index;
          q.ambiguous = r.ambiguous;
          q.skip = ep.is_skip_round(t);
          q.antecedent = r.antecedent;
          q.gt_region = r.gt_region;
          q.region_argmax = fwd.region_argmax[k];
          q.cond = fwd.cond[k];
          q.paired = fwd.paired[k];
          q.ref_word_weights = fwd.ref_word_weights[static_cast<std::size_t>(t)];
          per_episode[e].push_back(std::move(q));
        }
        traces[e] = fwd.trace;
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  EvalResult result;
  for (auto& qs : per_episode) {
    for (auto& q : qs) result.questions.push_back(std::move(q));
  }
  result.traces = std::move(traces);
  result.metrics = summarize(to_records(episodes, result.questions));
  result.coref = coref_diagnostics(episodes, result.questions);
  return result;
}

std::vector<EvalRecord> to_records(const std::vector<Episode>& episodes, const std::vector<QuestionResult>& questions) {
  std::vector<EvalRecord> out;
  out.reserve(questions.size());
  for (const auto& q : questions) {
    out.push_back({q.ranking, q.gt, episodes.at(q.episode).round(q.round).relevance});
  }
  return out;
}

CorefDiagnostics coref_diagnostics(const std::vector<Episode>& episodes, const std::vector<QuestionResult>& questions) {
  CorefDiagnostics d;
  std::size_t amb_region = 0, unamb_region = 0, recurse = 0, terminate = 0, unamb = 0, pair_ok = 0, skip_ok = 0;
  double chance = 0.0;
  auto in = [](const std::vector<std::string>& list, const std::string& tok) {
    return std::find(list.begin(), list.end(), tok) != list.end();
  };
  for (const auto& q : questions) {
    const bool region_ok = q.gt_region && static_cast<std::size_t>(*q.gt_region) == q.region_argmax;
    if (q.ambiguous) {
      ++d.ambiguous_count;
      amb_region += region_ok;
      recurse += !q.cond;
      pair_ok += q.antecedent && static_cast<std::size_t>(*q.antecedent) == q.paired;
      const Tokens& words = episodes.at(q.episode).round(q.round).question;
      for (std::size_t i = 0; i < q.ref_word_weights.size() && i < words.size(); ++i) {
        const std::string& w = words[i];
        const double a = q.ref_word_weights[i];
        if (w == Lexicon::pronoun()) d.ref_mass_pronoun += a;
        else if (in(Lexicon::object_categories(), w) || in(Lexicon::clutter_categories(), w)) d.ref_mass_noun += a;
        else if (in(Lexicon::colors(), w) || in(Lexicon::sizes(), w) || in(Lexicon::states(), w) ||
                 in(Lexicon::rows(), w) || in(Lexicon::columns(), w)) d.ref_mass_attribute += a;
        else d.ref_mass_function += a;
      }
    } else {
      ++unamb;
      terminate += q.cond;
      if (q.gt_region) {
        ++d.unambiguous_grounded_count;
        unamb_region += region_ok;
      }
    }
    if (q.skip) {
      ++d.skip_count;
      skip_ok += q.antecedent && static_cast<std::size_t>(*q.antecedent) == q.paired;
      chance += 1.0 / q.round;
    }
  }
  auto ratio = [](double a, std::size_t b) { return b == 0 ? 0.0 : a / static_cast<double>(b); };
  d.region_acc_ambiguous = ratio(static_cast<double>(amb_region), d.ambiguous_count);
  d.region_acc_unambiguous = ratio(static_cast<double>(unamb_region), d.unambiguous_grounded_count);
  d.recurse_rate_ambiguous = ratio(static_cast<double>(recurse), d.ambiguous_count);
  d.terminate_rate_unambiguous = ratio(static_cast<double>(terminate), unamb);
  d.pair_acc_ambiguous = ratio(static_cast<double>(pair_ok), d.ambiguous_count);
  d.pair_acc_skip = ratio(static_cast<double>(skip_ok), d.skip_count);
  d.pair_chance_skip = ratio(chance, d.skip_count);
  d.ref_mass_pronoun = ratio(d.ref_mass_pronoun, d.ambiguous_count);
  d.ref_mass_noun = ratio(d.ref_mass_noun, d.ambiguous_count);
  d.ref_mass_attribute = ratio(d.ref_mass_attribute, d.ambiguous_count);
  d.ref_mass_function = ratio(d.ref_mass_function, d.ambiguous_count);
  return d;
}

void write_metrics_report(const std::string& path, const EvalResult& r) {
  nlohmann::ordered_json j;
  j["mrr"] = r.metrics.mrr;
  j["r@1"] = r.metrics.r1;
  j["r@5"] = r.metrics.r5;
  j["r@10"] = r.metrics.r10;
  j["mean"] = r.metrics.mean;
  j["ndcg"] = r.metrics.ndcg;
  j["count"] = r.metrics.count;
  const CorefDiagnostics& c = r.coref;
  j["coref"] = {
      {"region_acc_ambiguous", c.region_acc_ambiguous},
      {"region_acc_unambiguous", c.region_acc_unambiguous},
      {"recurse_rate_ambiguous", c.recurse_rate_ambiguous},
      {"terminate_rate_unambiguous", c.terminate_rate_unambiguous},
      {"pair_acc_ambiguous", c.pair_acc_ambiguous},
      {"pair_acc_skip", c.pair_acc_skip},
      {"pair_chance_skip", c.pair_chance_skip},
      {"ambiguous_count", c.ambiguous_count},
      {"skip_count", c.skip_count},
      {"ref_mass_pronoun", c.ref_mass_pronoun},
      {"ref_mass_noun", c.ref_mass_noun},
      {"ref_mass_attribute", c.ref_mass_attribute},
      {"ref_mass_function", c.ref_mass_function},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write report: " + path);
  out << j.dump(2) << '\n';
}

void write_prediction_dump(const std::string& path, const EvalResult& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write dump: " + path);
  for (const auto& q : r.questions) {
    nlohmann::ordered_json j;
    j["episode"] = q.episode;
    j["round"] = q.round;
    j["scores"] = q.scores;
    j["ranking"] = q.ranking;
    j["gt_index"] = q.gt;
    out << j.dump() << '\n';
  }
}

template struct Adam<float>;
template struct Adam<double>;
template class Session<float>;
template class Session<double>;
template EvalResult evaluate<float>(const RvaModel<float>&, const std::vector<Episode>&, const std::vector<EpisodeInput>&, int);
template EvalResult evaluate<double>(const RvaModel<double>&, const std::vector<Episode>&, const std::vector<EpisodeInput>&, int);

}  // namespace rva
