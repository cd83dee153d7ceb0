#include "rva/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "rva/errors.hpp"

namespace rva {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& v) {
  N out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ValidationError("bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("bad boolean '" + v + "'");
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

// One entry per documented key: a setter and a getter for printing.
struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename N>
Field number_field(N RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& v) { c.*m = parse_number<N>(v); },
          [m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<N>) return fmt_double(c.*m);
            else return std::to_string(c.*m);
          }};
}

Field bool_field(bool RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& v) { c.*m = parse_bool(v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      {"seed", number_field(&RunConfig::seed)},
      {"d_emb", number_field(&RunConfig::d_emb)},
      {"d_h", number_field(&RunConfig::d_h)},
      {"d_v", number_field(&RunConfig::d_v)},
      {"regions", number_field(&RunConfig::regions)},
      {"rounds", number_field(&RunConfig::rounds)},
      {"objects", number_field(&RunConfig::objects)},
      {"ambiguity_rate", number_field(&RunConfig::ambiguity_rate)},
      {"skip_rate", number_field(&RunConfig::skip_rate)},
      {"candidates", number_field(&RunConfig::candidates)},
      {"jitter", number_field(&RunConfig::jitter)},
      {"learning_rate", number_field(&RunConfig::learning_rate)},
      {"lr_decay", number_field(&RunConfig::lr_decay)},
      {"lr_floor", number_field(&RunConfig::lr_floor)},
      {"dropout", number_field(&RunConfig::dropout)},
      {"tau", number_field(&RunConfig::tau)},
      {"epochs", number_field(&RunConfig::epochs)},
      {"batch_size", number_field(&RunConfig::batch_size)},
      {"rv_only", bool_field(&RunConfig::rv_only)},
      {"no_filter", bool_field(&RunConfig::no_filter)},
      {"pair_last", bool_field(&RunConfig::pair_last)},
      {"attend_hidden_states", bool_field(&RunConfig::attend_hidden_states)},
      {"precision",
       {[](RunConfig& c, const std::string& v) {
          if (v == "float32") c.precision = Precision::kFloat32;
          else if (v == "float64") c.precision = Precision::kFloat64;
          else throw ValidationError("precision must be float32 or float64, got '" + v + "'");
        },
        [](const RunConfig& c) { return std::string(c.precision == Precision::kFloat32 ? "float32" : "float64"); }}},
      {"embedding_file",
       {[](RunConfig& c, const std::string& v) { c.embedding_file = v; },
        [](const RunConfig& c) { return c.embedding_file; }}},
      {"eval_threads", number_field(&RunConfig::eval_threads)},
  };
  return f;
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (d_emb == 0 || d_h == 0 || d_v == 0) fail("dimensions must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(lr_floor > 0.0) || lr_floor > learning_rate) fail("lr_floor must lie in (0, learning_rate]");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1)");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (eval_threads < 1) fail("eval_threads must be >= 1");
  data().validate();
}

DataConfig RunConfig::data() const {
  DataConfig d;
  d.regions = regions;
  d.rounds = rounds;
  d.objects = objects;
  d.feature_dim = static_cast<int>(d_v);
  d.ambiguity_rate = ambiguity_rate;
  d.skip_rate = skip_rate;
  d.candidates = candidates;
  d.jitter = jitter;
  return d;
}

ModelConfig RunConfig::model(std::size_t vocab_size) const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.d_emb = d_emb;
  m.d_h = d_h;
  m.d_v = d_v;
  m.dropout = dropout;
  m.tau = tau;
  m.rv_only = rv_only;
  m.no_filter = no_filter;
  m.pair_last = pair_last;
  m.attend_hidden_states = attend_hidden_states;
  return m;
}

double RunConfig::learning_rate_at(int epoch) const {
  return std::max(lr_floor, learning_rate * std::pow(lr_decay, epoch));
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& all = fields();
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& f) { return f.first == key; });
    if (it == all.end()) throw ValidationError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ValidationError(where + "repeated key '" + key + "'");
    try {
      it->second.set(c, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace rva
