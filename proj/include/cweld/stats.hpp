#ifndef CWELD_STATS_HPP_
#define CWELD_STATS_HPP_

#include <cmath>
#include <span>

#include "cweld/common.hpp"

namespace cweld::stats {

struct MeanSe {
  double mean = 0;
  double se = 0;  // standard error of the mean
  double sd = 0;
};

inline MeanSe mean_se(std::span<const double> x) {
  if (x.empty()) throw ConfigError("mean_se: empty sample");
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  const double n = static_cast<double>(x.size());
  const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return {m, sd / std::sqrt(n), sd};
}

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("least_squares: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw ConfigError("least_squares: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / (n - 2) / sxx);
  }
  return fit;
}

struct NormalityTest {
  double statistic = 0;
  double p_value = 1;
};

/// Jarque-Bera test; the statistic is asymptotically chi-squared with two
/// degrees of freedom, whose survival function is exp(-x/2).
inline NormalityTest jarque_bera(std::span<const double> x) {
  if (x.size() < 8) throw ConfigError("jarque_bera: sample too small");
  const double n = static_cast<double>(x.size());
  double m = 0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  const double jb = n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
  return {jb, std::exp(-jb / 2.0)};
}

}  // namespace cweld::stats

#endif  // CWELD_STATS_HPP_
