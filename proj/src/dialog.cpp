#include "rva/dialog.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rva/errors.hpp"
#include "rva/rng.hpp"

namespace rva {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- lexicon

const std::vector<std::string>& Lexicon::object_categories() {
  static const std::vector<std::string> v = {"lamp",  "cup",  "dog",   "cat",
                                             "chair", "table", "book", "phone",
                                             "vase",  "clock", "bottle", "bag"};
  return v;
}
const std::vector<std::string>& Lexicon::clutter_categories() {
  static const std::vector<std::string> v = {"wall", "floor", "window", "plant", "shelf", "rug"};
  return v;
}
const std::vector<std::string>& Lexicon::colors() {
  static const std::vector<std::string> v = {"red",   "blue",  "green", "yellow",
                                             "black", "white", "brown", "gray"};
  return v;
}
const std::vector<std::string>& Lexicon::sizes() {
  static const std::vector<std::string> v = {"small", "medium", "large"};
  return v;
}
const std::vector<std::string>& Lexicon::states() {
  static const std::vector<std::string> v = {"clean", "dirty"};
  return v;
}
const std::vector<std::string>& Lexicon::rows() {
  static const std::vector<std::string> v = {"top", "middle", "bottom"};
  return v;
}
const std::vector<std::string>& Lexicon::columns() {
  static const std::vector<std::string> v = {"left", "center", "right"};
  return v;
}
const std::string& Lexicon::pronoun() {
  static const std::string p = "it";
  return p;
}

std::vector<std::string> Lexicon::all_tokens() {
  std::vector<std::string> out = {"what", "color", "is",  "the", "how", "big", "where",
                                  "there", "a",    "in",  "picture", "yes", "no", pronoun()};
  for (const auto* list : {&object_categories(), &clutter_categories(), &colors(), &sizes(),
                           &states(), &rows(), &columns()}) {
    out.insert(out.end(), list->begin(), list->end());
  }
  return out;
}

int Lexicon::attribute_code_width() {
  return static_cast<int>(object_categories().size() + clutter_categories().size() +
                          colors().size() + sizes().size() + states().size() + rows().size() +
                          columns().size());
}

void DataConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("data config: " + msg); };
  const int named = static_cast<int>(Lexicon::object_categories().size());
  if (regions < 1) fail("regions must be >= 1");
  if (rounds < 1 || rounds > 10) fail("rounds must lie in [1, 10]");
  if (objects < 1 || objects > regions) fail("objects must lie in [1, regions]");
  if (objects >= named) {
    fail("objects must be < " + std::to_string(named) +
         " so absent categories remain for existence questions");
  }
  if (feature_dim < Lexicon::attribute_code_width()) {
    fail("feature_dim must be >= " + std::to_string(Lexicon::attribute_code_width()));
  }
  if (!(ambiguity_rate >= 0.0 && ambiguity_rate <= 1.0)) fail("ambiguity_rate must lie in [0,1]");
  if (!(skip_rate >= 0.0 && skip_rate <= 1.0)) fail("skip_rate must lie in [0,1]");
  if (candidates < 2 || candidates > 100) fail("candidates must lie in [2, 100]");
  if (!(jitter >= 0.0)) fail("jitter must be >= 0");
}

// ---------------------------------------------------------------- generation

namespace {

enum class Kind { kColor, kSize, kState, kPosition, kExists };

std::vector<float> attribute_feature(const Region& r, int dim, double jitter, Rng& rng) {
  std::vector<float> f(static_cast<std::size_t>(dim), 0.0f);
  std::size_t offset = 0;
  auto put = [&](int index, std::size_t width) {
    f[offset + static_cast<std::size_t>(index)] = 1.0f;
    offset += width;
  };
  put(r.category, Lexicon::object_categories().size() + Lexicon::clutter_categories().size());
  put(r.color, Lexicon::colors().size());
  put(r.size, Lexicon::sizes().size());
  put(r.state, Lexicon::states().size());
  put(r.position / 3, Lexicon::rows().size());
  put(r.position % 3, Lexicon::columns().size());
  if (jitter > 0.0) {
    for (auto& v : f) v += static_cast<float>(jitter * rng.normal());
  }
  return f;
}

Tokens answer_for(Kind kind, const Region& r, int asked_state, bool present) {
  switch (kind) {
    case Kind::kColor: return {Lexicon::colors()[static_cast<std::size_t>(r.color)]};
    case Kind::kSize: return {Lexicon::sizes()[static_cast<std::size_t>(r.size)]};
    case Kind::kState: return {r.state == asked_state ? "yes" : "no"};
    case Kind::kPosition:
      return {Lexicon::rows()[static_cast<std::size_t>(r.position / 3)],
              Lexicon::columns()[static_cast<std::size_t>(r.position % 3)]};
    case Kind::kExists: return {present ? "yes" : "no"};
  }
  return {};
}

Tokens question_for(Kind kind, const std::string& referent, bool pronoun, int asked_state) {
  const Tokens subject = pronoun ? Tokens{Lexicon::pronoun()} : Tokens{"the", referent};
  Tokens q;
  switch (kind) {
    case Kind::kColor: q = {"what", "color", "is"}; break;
    case Kind::kSize: q = {"how", "big", "is"}; break;
    case Kind::kPosition: q = {"where", "is"}; break;
    case Kind::kState: q = {"is"}; break;
    case Kind::kExists: return {"is", "there", "a", referent};
  }
  q.insert(q.end(), subject.begin(), subject.end());
  if (kind == Kind::kState) q.push_back(Lexicon::states()[static_cast<std::size_t>(asked_state)]);
  return q;
}

std::vector<Tokens> answers_of_kind(Kind kind) {
  std::vector<Tokens> out;
  switch (kind) {
    case Kind::kColor:
      for (const auto& c : Lexicon::colors()) out.push_back({c});
      break;
    case Kind::kSize:
      for (const auto& s : Lexicon::sizes()) out.push_back({s});
      break;
    case Kind::kState:
    case Kind::kExists:
      out = {{"yes"}, {"no"}};
      break;
    case Kind::kPosition:
      for (const auto& r : Lexicon::rows()) {
        for (const auto& c : Lexicon::columns()) out.push_back({r, c});
      }
      break;
  }
  return out;
}

// Every distinct candidate string: the canonical answers of all kinds followed
// by "<color> <category>" fillers.
const std::vector<Tokens>& candidate_pool() {
  static const std::vector<Tokens> pool = [] {
    std::vector<Tokens> out;
    for (Kind k : {Kind::kColor, Kind::kSize, Kind::kState, Kind::kPosition}) {
      for (auto& a : answers_of_kind(k)) out.push_back(std::move(a));
    }
    for (const auto& c : Lexicon::colors()) {
      for (const auto& o : Lexicon::object_categories()) out.push_back({c, o});
    }
    return out;
  }();
  return pool;
}

void fill_candidates(DialogRound& round, Kind kind, int count, Rng& rng) {
  std::vector<Tokens> near;
  for (auto& a : answers_of_kind(kind)) {
    if (a != round.answer) near.push_back(std::move(a));
  }
  rng.shuffle(std::span<Tokens>(near));
  const std::size_t near_cap = static_cast<std::size_t>(count - 1) / 2;
  if (count < 100 && near.size() > near_cap) near.resize(near_cap);
  near.resize(std::min(near.size(), static_cast<std::size_t>(count - 1)));

  const std::vector<Tokens> same_kind = answers_of_kind(kind);
  std::vector<Tokens> rest;
  for (const auto& a : candidate_pool()) {
    if (std::find(same_kind.begin(), same_kind.end(), a) == same_kind.end()) rest.push_back(a);
  }
  rng.shuffle(std::span<Tokens>(rest));

  std::vector<std::pair<Tokens, double>> chosen;
  chosen.emplace_back(round.answer, 1.0);
  for (auto& a : near) chosen.emplace_back(std::move(a), 0.5);
  for (std::size_t i = 0; chosen.size() < static_cast<std::size_t>(count); ++i) {
    chosen.emplace_back(rest.at(i), 0.0);
  }
  rng.shuffle(std::span<std::pair<Tokens, double>>(chosen));
  round.candidates.clear();
  round.relevance.clear();
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (chosen[i].second == 1.0) round.gt_index = static_cast<int>(i);
    round.candidates.push_back(std::move(chosen[i].first));
    round.relevance.push_back(chosen[i].second);
  }
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t master_seed, std::uint64_t index) {
  // SplitMix64 finalizer over (master, index).
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Episode generate_episode(std::uint64_t seed, const DataConfig& config) {
  config.validate();
  Rng rng = Rng::derive(seed, StreamPurpose::kData);
  const int named = static_cast<int>(Lexicon::object_categories().size());
  const int clutter = static_cast<int>(Lexicon::clutter_categories().size());

  Episode ep;
  ep.seed = seed;

  std::vector<int> categories(static_cast<std::size_t>(named));
  std::iota(categories.begin(), categories.end(), 0);
  rng.shuffle(std::span<int>(categories));
  const std::vector<int> present(categories.begin(), categories.begin() + config.objects);
  const std::vector<int> absent(categories.begin() + config.objects, categories.end());

  for (int i = 0; i < config.regions; ++i) {
    Region r;
    r.category = i < config.objects ? present[static_cast<std::size_t>(i)]
                                    : named + static_cast<int>(rng.below(clutter));
    r.color = static_cast<int>(rng.below(Lexicon::colors().size()));
    r.size = static_cast<int>(rng.below(Lexicon::sizes().size()));
    r.state = static_cast<int>(rng.below(Lexicon::states().size()));
    r.position = static_cast<int>(rng.below(9));
    ep.regions.push_back(std::move(r));
  }
  rng.shuffle(std::span<Region>(ep.regions));
  for (auto& r : ep.regions) {
    r.feature = attribute_feature(r, config.feature_dim, config.jitter, rng);
  }
  std::vector<int> object_region(static_cast<std::size_t>(named), -1);
  for (std::size_t i = 0; i < ep.regions.size(); ++i) {
    if (ep.regions[i].category < named) object_region[static_cast<std::size_t>(ep.regions[i].category)] = static_cast<int>(i);
  }
  auto random_present_region = [&] {
    const int cat = present[rng.below(present.size())];
    return object_region[static_cast<std::size_t>(cat)];
  };
  auto category_name = [&](int region) {
    return Lexicon::object_categories()[static_cast<std::size_t>(ep.regions[static_cast<std::size_t>(region)].category)];
  };

  ep.caption_region = random_present_region();
  ep.caption = {"there", "is", "a",
                Lexicon::colors()[static_cast<std::size_t>(ep.regions[static_cast<std::size_t>(ep.caption_region)].color)],
                category_name(ep.caption_region), "in", "the", "picture"};

  // Round plan: ambiguity flags are drawn independently; a skip is formed by
  // turning the unambiguous round before an ambiguous one into a question about
  // an absent object, which grounds nothing.
  const int T = config.rounds;
  std::vector<bool> ambiguous(static_cast<std::size_t>(T + 1), false);
  std::vector<bool> distractor(static_cast<std::size_t>(T + 1), false);
  for (int t = 1; t <= T; ++t) ambiguous[static_cast<std::size_t>(t)] = rng.bernoulli(config.ambiguity_rate);
  std::vector<int> eligible;
  for (int t = 2; t <= T; ++t) {
    if (ambiguous[static_cast<std::size_t>(t)] && !ambiguous[static_cast<std::size_t>(t - 1)]) {
      eligible.push_back(t);
      if (rng.bernoulli(config.skip_rate)) distractor[static_cast<std::size_t>(t - 1)] = true;
    }
  }
  const bool any_skip = std::find(distractor.begin(), distractor.end(), true) != distractor.end();
  if (config.skip_rate > 0.0 && config.ambiguity_rate > 0.0 && T >= 2 && !any_skip) {
    if (!eligible.empty()) {
      distractor[static_cast<std::size_t>(eligible[rng.below(eligible.size())] - 1)] = true;
    } else {
      ambiguous[1] = false;
      ambiguous[2] = true;
      distractor[1] = true;
    }
  }

  std::vector<std::optional<int>> grounded(static_cast<std::size_t>(T + 1));
  grounded[0] = ep.caption_region;
  int last_grounded = 0;
  for (int t = 1; t <= T; ++t) {
    DialogRound round;
    Kind kind;
    const auto st = static_cast<std::size_t>(t);
    if (distractor[st]) {
      kind = Kind::kExists;
      const int cat = absent[rng.below(absent.size())];
      round.question = question_for(kind, Lexicon::object_categories()[static_cast<std::size_t>(cat)], false, 0);
      round.answer = {"no"};
    } else {
      static constexpr Kind kAttributeKinds[] = {Kind::kColor, Kind::kSize, Kind::kState, Kind::kPosition};
      static constexpr Kind kAllKinds[] = {Kind::kColor, Kind::kSize, Kind::kState, Kind::kPosition, Kind::kExists};
      int region;
      if (ambiguous[st]) {
        kind = kAttributeKinds[rng.below(4)];
        round.ambiguous = true;
        round.antecedent = last_grounded;
        region = *grounded[static_cast<std::size_t>(last_grounded)];
      } else {
        kind = kAllKinds[rng.below(5)];
        region = random_present_region();
      }
      const int asked_state = static_cast<int>(rng.below(Lexicon::states().size()));
      round.question = question_for(kind, category_name(region), round.ambiguous, asked_state);
      round.answer = answer_for(kind, ep.regions[static_cast<std::size_t>(region)], asked_state, true);
      round.gt_region = region;
      grounded[st] = region;
      last_grounded = t;
    }
    fill_candidates(round, kind, config.candidates, rng);
    ep.rounds.push_back(std::move(round));
  }
  return ep;
}

std::vector<Episode> generate_dataset(std::uint64_t master_seed, std::size_t count,
                                      const DataConfig& config) {
  std::vector<Episode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_episode(episode_seed(master_seed, i), config));
  }
  return out;
}

// ---------------------------------------------------------------- serialization

namespace {

double nine_digits(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return std::strtod(buf, nullptr);
}

const std::vector<std::string>& all_categories() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> out = Lexicon::object_categories();
    out.insert(out.end(), Lexicon::clutter_categories().begin(), Lexicon::clutter_categories().end());
    return out;
  }();
  return v;
}

std::vector<std::string> position_names() {
  std::vector<std::string> out;
  for (const auto& r : Lexicon::rows()) {
    for (const auto& c : Lexicon::columns()) out.push_back(r + " " + c);
  }
  return out;
}

int index_of(const std::vector<std::string>& list, const std::string& name, const std::string& field) {
  auto it = std::find(list.begin(), list.end(), name);
  if (it == list.end()) throw ValidationError("unknown " + field + " '" + name + "'");
  return static_cast<int>(it - list.begin());
}

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::optional<int> read_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<int>();
}

}  // namespace

std::string episode_to_line(const Episode& ep) {
  json j;
  j["seed"] = ep.seed;
  json regions = json::array();
  const auto positions = position_names();
  for (const auto& r : ep.regions) {
    json jr;
    jr["category"] = all_categories().at(static_cast<std::size_t>(r.category));
    jr["color"] = Lexicon::colors().at(static_cast<std::size_t>(r.color));
    jr["size"] = Lexicon::sizes().at(static_cast<std::size_t>(r.size));
    jr["state"] = Lexicon::states().at(static_cast<std::size_t>(r.state));
    jr["position"] = positions.at(static_cast<std::size_t>(r.position));
    json feature = json::array();
    for (float v : r.feature) feature.push_back(nine_digits(v));
    jr["feature"] = std::move(feature);
    regions.push_back(std::move(jr));
  }
  j["regions"] = std::move(regions);
  j["caption"] = ep.caption;
  j["caption_region"] = ep.caption_region;
  json rounds = json::array();
  for (const auto& r : ep.rounds) {
    json jr;
    jr["question"] = r.question;
    jr["answer"] = r.answer;
    jr["ambiguous"] = r.ambiguous;
    jr["antecedent"] = optional_int(r.antecedent);
    jr["gt_region"] = optional_int(r.gt_region);
    jr["candidates"] = r.candidates;
    jr["gt_index"] = r.gt_index;
    jr["relevance"] = r.relevance;
    rounds.push_back(std::move(jr));
  }
  j["rounds"] = std::move(rounds);
  return j.dump();
}

Episode episode_from_line(const std::string& line, std::size_t record_index) {
  const std::string where = "record " + std::to_string(record_index) + ": ";
  try {
    const json j = json::parse(line);
    Episode ep;
    ep.seed = j.at("seed").get<std::uint64_t>();
    const auto positions = position_names();
    for (const auto& jr : j.at("regions")) {
      Region r;
      r.category = index_of(all_categories(), jr.at("category").get<std::string>(), "category");
      r.color = index_of(Lexicon::colors(), jr.at("color").get<std::string>(), "color");
      r.size = index_of(Lexicon::sizes(), jr.at("size").get<std::string>(), "size");
      r.state = index_of(Lexicon::states(), jr.at("state").get<std::string>(), "state");
      r.position = index_of(positions, jr.at("position").get<std::string>(), "position");
      for (const auto& v : jr.at("feature")) r.feature.push_back(static_cast<float>(v.get<double>()));
      ep.regions.push_back(std::move(r));
    }
    ep.caption = j.at("caption").get<Tokens>();
    ep.caption_region = j.at("caption_region").get<int>();
    for (const auto& jr : j.at("rounds")) {
      DialogRound r;
      r.question = jr.at("question").get<Tokens>();
      r.answer = jr.at("answer").get<Tokens>();
      r.ambiguous = jr.at("ambiguous").get<bool>();
      r.antecedent = read_optional(jr.at("antecedent"));
      r.gt_region = read_optional(jr.at("gt_region"));
      r.candidates = jr.at("candidates").get<std::vector<Tokens>>();
      r.gt_index = jr.at("gt_index").get<int>();
      r.relevance = jr.at("relevance").get<std::vector<double>>();
      if (r.candidates.size() != r.relevance.size() || r.gt_index < 0 ||
          r.gt_index >= static_cast<int>(r.candidates.size())) {
        throw ValidationError("inconsistent candidate list");
      }
      ep.rounds.push_back(std::move(r));
    }
    if (ep.regions.empty() || ep.caption_region < 0 ||
        ep.caption_region >= static_cast<int>(ep.regions.size())) {
      throw ValidationError("caption_region out of range");
    }
    return ep;
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  } catch (const json::exception& e) {
    throw ValidationError(where + e.what());
  }
}

void write_dataset(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  json header;
  header["format"] = "rva-dialog";
  header["version"] = kDatasetVersion;
  header["episodes"] = episodes.size();
  out << header.dump() << '\n';
  for (const auto& ep : episodes) out << episode_to_line(ep) << '\n';
  if (!out) throw ValidationError("write failed: " + path);
}

std::vector<Episode> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset is empty (no header): " + path);
  std::size_t count = 0;
  try {
    const json header = json::parse(line);
    if (header.at("format").get<std::string>() != "rva-dialog") {
      throw ValidationError("dataset schema mismatch: unknown format");
    }
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion) {
      throw ValidationError("dataset schema mismatch: version " + std::to_string(version) +
                            ", expected " + std::to_string(kDatasetVersion));
    }
    count = header.at("episodes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("dataset header: ") + e.what());
  }
  std::vector<Episode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw ValidationError("dataset truncated at record " + std::to_string(i) + ": expected " +
                            std::to_string(count) + " episodes");
    }
    out.push_back(episode_from_line(line, i));
  }
  return out;
}

// ---------------------------------------------------------------- resolver

std::vector<ResolvedRound> scripted_resolve(const Episode& ep) {
  const auto& cats = Lexicon::object_categories();
  auto named_region = [&](const Tokens& tokens) -> std::optional<int> {
    for (const auto& tok : tokens) {
      auto it = std::find(cats.begin(), cats.end(), tok);
      if (it == cats.end()) continue;
      const int cat = static_cast<int>(it - cats.begin());
      for (std::size_t i = 0; i < ep.regions.size(); ++i) {
        if (ep.regions[i].category == cat) return static_cast<int>(i);
      }
      return std::nullopt;
    }
    return std::nullopt;
  };
  std::vector<std::optional<int>> grounded = {named_region(ep.caption)};
  std::vector<ResolvedRound> out;
  for (int t = 1; t <= ep.round_count(); ++t) {
    const DialogRound& round = ep.round(t);
    const Tokens& q = round.question;
    ResolvedRound res;
    const bool pronoun = std::find(q.begin(), q.end(), Lexicon::pronoun()) != q.end();
    if (pronoun) {
      for (int r = t - 1; r >= 0; --r) {
        if (grounded[static_cast<std::size_t>(r)]) {
          res.antecedent = r;
          res.region = grounded[static_cast<std::size_t>(r)];
          break;
        }
      }
    } else {
      res.region = named_region(q);
    }
    grounded.push_back(res.region);

    Tokens answer;
    if (q[0] == "is" && q[1] == "there") {
      answer = {res.region ? "yes" : "no"};
    } else if (res.region) {
      const Region& reg = ep.regions[static_cast<std::size_t>(*res.region)];
      if (q[0] == "what") answer = {Lexicon::colors()[static_cast<std::size_t>(reg.color)]};
      else if (q[0] == "how") answer = {Lexicon::sizes()[static_cast<std::size_t>(reg.size)]};
      else if (q[0] == "where") {
        answer = {Lexicon::rows()[static_cast<std::size_t>(reg.position / 3)],
                  Lexicon::columns()[static_cast<std::size_t>(reg.position % 3)]};
      } else {
        answer = {Lexicon::states()[static_cast<std::size_t>(reg.state)] == q.back() ? "yes" : "no"};
      }
    }
    for (std::size_t i = 0; i < round.candidates.size(); ++i) {
      if (round.candidates[i] == answer) res.ranking.push_back(static_cast<int>(i));
    }
    for (std::size_t i = 0; i < round.candidates.size(); ++i) {
      if (round.candidates[i] != answer) res.ranking.push_back(static_cast<int>(i));
    }
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace rva
