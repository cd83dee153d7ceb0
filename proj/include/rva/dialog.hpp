#ifndef RVA_DIALOG_HPP_
#define RVA_DIALOG_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rva {

using Tokens = std::vector<std::string>;

// Closed word lists the generator draws from.
struct Lexicon {
  static const std::vector<std::string>& object_categories();   // nameable
  static const std::vector<std::string>& clutter_categories();  // never named
  static const std::vector<std::string>& colors();
  static const std::vector<std::string>& sizes();
  static const std::vector<std::string>& states();
  static const std::vector<std::string>& rows();     // position bucket, vertical
  static const std::vector<std::string>& columns();  // position bucket, horizontal
  static const std::string& pronoun();
  // Every token the generator can emit, in a fixed order.
  static std::vector<std::string> all_tokens();
  // Width of the noiseless attribute code; feature_dim must be at least this.
  static int attribute_code_width();
};

struct DataConfig {
  int regions = 36;
  int rounds = 10;
  int objects = 6;
  int feature_dim = 64;
  double ambiguity_rate = 0.5;
  double skip_rate = 0.2;
  int candidates = 100;
  double jitter = 0.05;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// Attribute indices into the Lexicon lists. category < object_categories().size()
// names an object; larger values are clutter.
struct Region {
  int category = 0;
  int color = 0;
  int size = 0;
  int state = 0;
  int position = 0;  // row * 3 + column
  std::vector<float> feature;

  friend bool operator==(const Region&, const Region&) = default;
};

struct DialogRound {
  Tokens question;
  Tokens answer;
  bool ambiguous = false;
  std::optional<int> antecedent;  // set exactly for ambiguous rounds
  std::optional<int> gt_region;   // absent when the question grounds nothing
  std::vector<Tokens> candidates;
  int gt_index = 0;
  std::vector<double> relevance;

  friend bool operator==(const DialogRound&, const DialogRound&) = default;
};

// One image with its caption (round 0) and rounds 1..T. rounds[t-1] holds
// round t.
struct Episode {
  std::uint64_t seed = 0;
  std::vector<Region> regions;
  Tokens caption;
  int caption_region = 0;
  std::vector<DialogRound> rounds;

  int round_count() const { return static_cast<int>(rounds.size()); }
  const DialogRound& round(int t) const { return rounds.at(static_cast<std::size_t>(t - 1)); }
  // Ambiguous round whose antecedent is not the immediately preceding round.
  bool is_skip_round(int t) const {
    const DialogRound& r = round(t);
    return r.ambiguous && r.antecedent && *r.antecedent != t - 1;
  }

  friend bool operator==(const Episode&, const Episode&) = default;
};

std::uint64_t episode_seed(std::uint64_t master_seed, std::uint64_t index);

Episode generate_episode(std::uint64_t seed, const DataConfig& config);

// Episode i uses episode_seed(master_seed, i).
std::vector<Episode> generate_dataset(std::uint64_t master_seed, std::size_t count,
                                      const DataConfig& config);

// Line-delimited JSON: a header line {"format","version","episodes"} followed by
// one episode per line. Features are written with 9 significant digits.
inline constexpr int kDatasetVersion = 1;
std::string episode_to_line(const Episode& episode);
Episode episode_from_line(const std::string& line, std::size_t record_index);
void write_dataset(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_dataset(const std::string& path);

// Rule-based resolver working from tokens and region attributes only: named
// categories ground directly, the pronoun follows the most recent round that
// grounded a present object. Used to prove the generator's labels consistent.
struct ResolvedRound {
  std::optional<int> region;
  std::optional<int> antecedent;
  std::vector<int> ranking;  // candidate indices, best first
};
std::vector<ResolvedRound> scripted_resolve(const Episode& episode);

}  // namespace rva

#endif  // RVA_DIALOG_HPP_
