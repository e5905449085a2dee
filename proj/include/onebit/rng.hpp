#pragma once

#include <cstdint>
#include <limits>

namespace onebit {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream identifiers inside one (replication, step) cell.
namespace lane {
inline constexpr std::uint64_t kChain = 0xC4A1'0000'0000ULL;
inline constexpr std::uint64_t noise(std::uint64_t edge) { return edge; }
}  // namespace lane

/// Counter-based generator: the output is a pure function of
/// (seed, replication, step, lane, draw index). Any cell can be regenerated
/// without replaying earlier ones, and distinct cells never share state.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t step,
                std::uint64_t lane_id)
      : key_(splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ replication) ^ step) ^ lane_id)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + 0x632BE59BD9B4E019ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace onebit
