#ifndef RVA_CONFIG_HPP_
#define RVA_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "rva/dialog.hpp"
#include "rva/model.hpp"

namespace rva {

enum class Precision { kFloat32, kFloat64 };

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t d_emb = 300;
  std::size_t d_h = 512;
  std::size_t d_v = 64;
  int regions = 36;
  int rounds = 10;
  int objects = 6;
  double ambiguity_rate = 0.5;
  double skip_rate = 0.2;
  int candidates = 100;
  double jitter = 0.05;
  double learning_rate = 1e-3;
  double lr_decay = 0.5;
  double lr_floor = 5e-5;
  double dropout = 0.5;
  double tau = 1.0;
  int epochs = 20;
  int batch_size = 32;
  bool rv_only = false;
  bool no_filter = false;
  bool pair_last = false;
  bool attend_hidden_states = false;
  Precision precision = Precision::kFloat32;
  std::string embedding_file;
  int eval_threads = 1;

  void validate() const;
  DataConfig data() const;
  ModelConfig model(std::size_t vocab_size) const;
  double learning_rate_at(int epoch) const;

  // key = value lines, one per documented key, in a fixed order.
  std::string to_text() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Parses key = value lines; '#' starts a comment. Unknown or repeated keys and
// malformed values throw ValidationError naming the line. Missing keys keep
// their defaults.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace rva

#endif  // RVA_CONFIG_HPP_
