#ifndef CWELD_COMMON_HPP_
#define CWELD_COMMON_HPP_

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cweld {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kLn2 = std::numbers::ln2;

// Error hierarchy. ConfigError maps to CLI exit code 2, NumericalError to 3.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "%g" rendering of a number for messages.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

constexpr bool is_pow2(std::uint64_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr int ilog2(std::uint64_t n) {
  int r = 0;
  while (n > 1) {
    n >>= 1;
    ++r;
  }
  return r;
}

/// Dyadic interval [l 2^-j, (l+1) 2^-j] on the unit circle.
struct DyadicIndex {
  int j = 0;
  std::int64_t l = 0;

  DyadicIndex() = default;
  DyadicIndex(int level, std::int64_t pos) : j(level), l(pos) {
    if (level < 0 || level > 62) throw ConfigError("DyadicIndex: level out of range");
    if (pos < 0 || pos >= (std::int64_t{1} << level))
      throw ConfigError("DyadicIndex: position must satisfy 0 <= l < 2^j");
  }

  std::int64_t count() const { return std::int64_t{1} << j; }
  double length() const { return std::ldexp(1.0, -j); }
  double left() const { return static_cast<double>(l) * length(); }
  double right() const { return static_cast<double>(l + 1) * length(); }
  double center() const { return (static_cast<double>(l) + 0.5) * length(); }

  /// Neighbor at signed offset, wrapping around the circle.
  DyadicIndex shifted(std::int64_t offset) const {
    const std::int64_t n = count();
    return DyadicIndex(j, ((l + offset) % n + n) % n);
  }
  DyadicIndex left_child() const { return DyadicIndex(j + 1, 2 * l); }
  DyadicIndex right_child() const { return DyadicIndex(j + 1, 2 * l + 1); }

  friend bool operator==(const DyadicIndex&, const DyadicIndex&) = default;
};

}  // namespace cweld

#endif  // CWELD_COMMON_HPP_
