#ifndef CWELD_RNG_HPP_
#define CWELD_RNG_HPP_

#include <array>
#include <cstdint>

namespace cweld {

// Stream identifiers. Every random quantity in the toolkit is addressed by
// (seed, stream, a, b); distinct consumers use distinct streams so that no two
// of them can ever share a draw.
enum class Stream : std::uint32_t {
  kVaguelet = 1,      // a = level j, b = position l
  kFourierCos = 2,    // a = mode n
  kFourierSin = 3,    // a = mode n
  kSecondField = 4,   // two-gff mode, second field; a = level, b = position
  kTreeOverride = 5,  // forced-failure hook; a = level, b = position
};

/// Philox4x32-10 counter-based generator. Stateless: the output is a pure
/// function of (key, counter), so any draw can be regenerated in isolation.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed, std::uint32_t stream = 0);

  Block operator()(Block counter) const;

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Keyed standard-normal and uniform draws.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream)
      : seed_(seed), stream_(stream), philox_(seed, static_cast<std::uint32_t>(stream)) {}

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t a, std::uint64_t b = 0) const;

  /// N(0, 1) via Box-Muller on one Philox block.
  double normal(std::uint64_t a, std::uint64_t b = 0) const;

  std::uint64_t seed() const { return seed_; }
  Stream stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  Stream stream_;
  Philox4x32 philox_;
};

}  // namespace cweld

#endif  // CWELD_RNG_HPP_
