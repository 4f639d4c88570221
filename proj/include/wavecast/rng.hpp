#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Counter-based random streams. Every draw is a pure function of
// (seed, purpose, stream, draw_index), so results do not depend on generation order
// or thread count. The exact bit recipe is documented in README.md.
namespace wavecast::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kDrawStep = 0xD1B54A32D192ED03ULL;

// Domain tags keep streams of different consumers independent for the same seed.
enum class Purpose : std::uint64_t {
  Dataset = 0x5a17'0000'0000'0001ULL,
  Shuffle = 0x5a17'0000'0000'0002ULL,
  Init = 0x5a17'0000'0000'0003ULL,
  Check = 0x5a17'0000'0000'0004ULL,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, Purpose purpose, std::uint64_t stream) {
  const std::uint64_t k0 = mix64(seed ^ static_cast<std::uint64_t>(purpose));
  return mix64(k0 + stream * kGolden);
}

constexpr std::uint64_t draw(std::uint64_t key, std::uint64_t index) {
  return mix64(key + (index + 1) * kDrawStep);
}

// Top 53 bits mapped onto [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, Purpose purpose, std::uint64_t stream)
      : key_(stream_key(seed, purpose, stream)) {}

  std::uint64_t next_u64() { return draw(key_, counter_++); }
  double uniform() { return to_unit(next_u64()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n) by rejection on the top bits.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (consumes two draws).
  double normal();

  std::uint64_t counter() const { return counter_; }
  void seek(std::uint64_t index) { counter_ = index; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates permutation of [0, n) from the stream.
std::vector<std::size_t> permutation(CounterStream& stream, std::size_t n);

}  // namespace wavecast::rng
