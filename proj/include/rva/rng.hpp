#ifndef RVA_RNG_HPP_
#define RVA_RNG_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace rva {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Stateless: maps a 128-bit counter and a 64-bit key to 128 random bits.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

// Independent streams derived from the master seed, one per purpose.
enum class StreamPurpose : std::uint32_t {
  kInit = 1,
  kDropout = 2,
  kGumbel = 3,
  kData = 4,
  kShuffle = 5,
  kTest = 6,
};

// Counter-based generator over Philox4x32-10. The 128-bit counter is
// {position_lo, position_hi, stream_lo, stream_hi} and the key is the seed,
// so (seed, stream, position) fully determines the next value on any platform.
class Rng {
 public:
  struct State {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t position = 0;  // index of the next 32-bit word
    friend bool operator==(const State&, const State&) = default;
  };

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : state_{seed, stream, 0} {}

  static Rng derive(std::uint64_t master_seed, StreamPurpose purpose,
                    std::uint64_t index = 0) {
    return Rng(master_seed,
               (static_cast<std::uint64_t>(purpose) << 48) ^ index);
  }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // [0, 1) with 53 random bits.
  double uniform();
  // (0, 1): never returns an endpoint, safe for log(-log(u)).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (one value per call, two uniforms consumed).
  double normal();
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename Item>
  void shuffle(std::span<Item> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  const State& state() const { return state_; }
  void set_state(const State& state) { state_ = state; }

 private:
  State state_;
};

}  // namespace rva

#endif  // RVA_RNG_HPP_
