#ifndef HNOMA_RNG_HPP
#define HNOMA_RNG_HPP

#include <cstdint>

namespace hnoma {

// Counter-based random streams. Every draw is a pure function of
// (seed, purpose, slot, block, user, counter), so results do not depend on
// which worker evaluates which block or in what order.

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class StreamPurpose : std::uint64_t {
  Channel = 1,   // fading draw
  Action = 2,    // action sampling in state-driven mode
  Traffic = 3,   // Bernoulli packet arrival
  Mutant = 4,    // random mutant states for ESS checks
  Generic = 5,
};

struct StreamKey {
  std::uint64_t seed = 0;
  StreamPurpose purpose = StreamPurpose::Generic;
  std::uint64_t slot = 0;
  std::uint64_t block = 0;
  std::uint64_t user = 0;
};

class CounterStream {
 public:
  explicit CounterStream(const StreamKey& key) : key_(hash(key)) {}
  explicit CounterStream(std::uint64_t raw_key) : key_(splitmix64(raw_key)) {}

  std::uint64_t next_u64() {
    return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
  }

  // Uniform on (0, 1]; never returns 0 so -log(u) stays finite.
  double uniform_open0() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  static std::uint64_t hash(const StreamKey& k) {
    std::uint64_t h = splitmix64(k.seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(k.purpose));
    h = splitmix64(h ^ k.slot);
    h = splitmix64(h ^ (k.block * 0xD1B54A32D192ED03ULL));
    h = splitmix64(h ^ (k.user * 0xABC98388FB8FAC03ULL));
    return h;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hnoma

#endif  // HNOMA_RNG_HPP
