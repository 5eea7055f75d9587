#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "cweld/fft.hpp"
#include "cweld/vaguelet.hpp"

using namespace cweld;

namespace {

// Closed-form modulus of the Meyer wavelet transform, written directly from the
// band description rather than from the filter product.
double meyer_modulus(double xi) {
  auto nu = [](double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * x * x * (35 - 84 * x + 70 * x * x - 20 * x * x * x);
  };
  const double a = std::abs(xi);
  if (a <= 2 * kPi / 3 || a >= 8 * kPi / 3) return 0.0;
  if (a <= 4 * kPi / 3) return std::sin(kPi / 2 * nu(3 * a / (2 * kPi) - 1));
  return std::cos(kPi / 2 * nu(3 * a / (4 * kPi) - 1));
}

// Direct trigonometric synthesis of psi_{j,l}(theta) from the coefficient row.
double direct_eval(const std::vector<Complex>& c, double theta) {
  const auto n_max = static_cast<std::int64_t>(c.size() / 2);
  Complex s{};
  for (std::int64_t n = -n_max; n <= n_max; ++n)
    s += c[static_cast<std::size_t>(n + n_max)] * std::polar(1.0, kTwoPi * n * theta);
  return s.real();
}

}  // namespace

TEST_CASE("filter values and invariants") {
  const auto f = build_meyer_filter(1024);
  CHECK(f(0.0) == 1.0);
  CHECK(f(kPi) == 0.0);
  CHECK(f(kPi / 3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f(kPi / 2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(f(-kPi / 2) == f(kPi / 2));
  CHECK(f(kPi / 2 + kTwoPi) == doctest::Approx(f(kPi / 2)).epsilon(1e-14));
  CHECK(f.quadrature_mirror_defect() <= 1e-10);
  for (double x = -kPi / 2; x <= kPi / 2; x += 0.01) CHECK(f(x) > 0.0);
  const auto g = build_meyer_filter(512, TransitionProfile::kSmooth);
  CHECK(g.quadrature_mirror_defect() <= 1e-10);
  CHECK(g(kPi / 2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
}

TEST_CASE("filter resolution is validated") {
  CHECK_THROWS_AS(build_meyer_filter(128), ConfigError);
  CHECK_THROWS_AS(build_meyer_filter(1000), ConfigError);
}

TEST_CASE("mother wavelet matches the closed-form Meyer band") {
  const auto f = build_meyer_filter(1024);
  CHECK(std::abs(mother_wavelet_hat(f, 0.0)) == 0.0);
  for (double xi = -9.0; xi <= 9.0; xi += 0.0137)
    CHECK(std::abs(mother_wavelet_hat(f, xi)) == doctest::Approx(meyer_modulus(xi)).epsilon(1e-12));
  CHECK_THROWS_AS(mother_wavelet_hat(f, 1e7), RangeError);
}

TEST_CASE("wavelet energy and the ln2 identity") {
  for (auto profile : {TransitionProfile::kPolynomial, TransitionProfile::kSmooth}) {
    const auto f = build_meyer_filter(1024, profile);
    CHECK(wavelet_energy(f) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(wavelet_log_energy(f) - std::log(2.0) / kPi) <= 1e-9);
  }
}

TEST_CASE("vaguelet coefficient rows") {
  const auto f = build_meyer_filter(1024);
  const std::int64_t n_max = 1 << 9;
  const auto c0 = vaguelet_coeffs(f, DyadicIndex(3, 0), n_max);
  const auto c5 = vaguelet_coeffs(f, DyadicIndex(3, 5), n_max);
  CHECK(c0[n_max] == Complex{});
  double norm = 0.0;
  for (std::int64_t n = -n_max; n <= n_max; ++n) {
    const auto i = static_cast<std::size_t>(n + n_max);
    norm += kTwoPi * std::abs(n) * std::norm(c0[i]);
    CHECK(std::abs(c5[i]) == doctest::Approx(std::abs(c0[i])).epsilon(1e-14));
    const Complex phase = std::polar(1.0, -kTwoPi * n * 5.0 / 8.0);
    CHECK(std::abs(c5[i] - phase * c0[i]) <= 1e-13);
    CHECK(std::abs(c0[static_cast<std::size_t>(-n + n_max)] - std::conj(c0[i])) <= 1e-15);
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(vaguelet_coeffs(f, DyadicIndex(3, 0), 32), RangeError);
}

TEST_CASE("table scaling flag") {
  const auto f = build_meyer_filter(512);
  const VagueletTable raw(f, 4);
  const auto scaled = raw.with_scaling(VagueletScaling::kFieldScaled);
  CHECK(raw.max_truncation_residual() <= 1e-12);
  const DyadicIndex idx(4, 3);
  CHECK(std::abs(scaled.coeff(idx, 7) - std::sqrt(kPi) * raw.coeff(idx, 7)) <= 1e-15);
  CHECK_THROWS_AS(raw.row(5), ConfigError);
}

TEST_CASE("grid evaluation agrees with direct synthesis and is periodic") {
  const auto f = build_meyer_filter(512);
  const VagueletTable table(f, 5);
  const DyadicIndex idx(5, 11);
  const int grid = 1 << 10;
  const auto samples = evaluate_vaguelet_grid(table, idx, grid);
  const auto c = table.coeffs(idx);
  for (int i : {0, 17, 353, 512, 1000}) {
    CHECK(samples[i] == doctest::Approx(direct_eval(c, double(i) / grid)).epsilon(1e-10));
    CHECK(direct_eval(c, double(i) / grid + 1.0) ==
          doctest::Approx(direct_eval(c, double(i) / grid)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(evaluate_vaguelet_grid(table, idx, 1 << 8), RangeError);
  CHECK_THROWS_AS(evaluate_vaguelet_grid(table, idx, 1000), RangeError);
}

TEST_CASE("vaguelet decay envelope") {
  const auto f = build_meyer_filter(1024);
  const VagueletTable table(f, 6);
  const int grid = 1 << 14;
  const auto psi = evaluate_vaguelet_grid(table, DyadicIndex(6, 0), grid);
  std::vector<double> xs, ys;
  for (int s : {4, 8, 16, 32}) {
    double peak = 0.0;
    for (int i = 0; i < grid; ++i) {
      const double d = std::min(i, grid - i) * 64.0 / grid;
      const bool in_band = s < 32 ? (d >= s && d < 2 * s) : d >= 24;
      if (in_band) peak = std::max(peak, std::abs(psi[i]));
    }
    xs.push_back(std::log(s));
    ys.push_back(std::log(peak));
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / 4;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / 4;
  double sxy = 0, sxx = 0;
  for (int k = 0; k < 4; ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  const double slope = sxy / sxx;
  MESSAGE("decay slope " << slope);
  CHECK(slope <= -f.decay_exponent());
}

TEST_CASE("H^{1/2} Gram matrix is the identity through level 5") {
  const auto f = build_meyer_filter(512);
  const VagueletTable table(f, 5, 3);
  std::vector<DyadicIndex> all;
  for (int j = 0; j <= 5; ++j)
    for (std::int64_t l = 0; l < (1 << j); ++l) all.emplace_back(j, l);
  double worst = 0.0;
  for (const auto& a : all)
    for (const auto& b : all) {
      const Complex g = half_derivative_inner(table, a, b);
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  CHECK(worst <= 1e-6);
}

TEST_CASE("level square sums stay within a fixed band of (m+1) ln2/pi") {
  const auto f = build_meyer_filter(1024);
  const VagueletTable table(f, 8);
  const int grid = 1 << 12;
  const auto sums = cumulative_square_sums(table, 8, grid);
  std::vector<double> dev;
  for (int m = 0; m <= 8; ++m) {
    double d = 0.0;
    for (double v : sums[m]) d = std::max(d, std::abs(v - (m + 1) * std::log(2.0) / kPi));
    dev.push_back(d);
  }
  const double c0 = *std::max_element(dev.begin(), dev.end());
  CHECK(c0 < 0.25);
  // no growth with m
  CHECK(std::abs(dev[8] - dev[5]) < 1e-3);
  // the mean of a level sum is a Riemann sum of the log-energy integral
  const auto lvl = level_square_sum(table, 8, grid);
  CHECK(std::accumulate(lvl.begin(), lvl.end(), 0.0) / grid ==
        doctest::Approx(std::log(2.0) / kPi).epsilon(1e-8));
}

TEST_CASE("far square sums are bounded") {
  const auto f = build_meyer_filter(1024);
  const VagueletTable table(f, 9);
  const int grid = 1 << 13;
  double worst = 0.0;
  for (int m : {2, 4})
    for (std::int64_t l : {std::int64_t{0}, std::int64_t{3}}) {
      const auto tail = far_square_sum(table, DyadicIndex(m, l), m, 9, grid);
      worst = std::max(worst, *std::max_element(tail.begin(), tail.end()));
    }
  MESSAGE("far tail max " << worst);
  CHECK(worst < 0.25);
}

TEST_CASE("level spectrum synthesis equals the sum of translates") {
  const auto f = build_meyer_filter(512);
  const VagueletTable table(f, 4, 6, VagueletScaling::kFieldScaled);
  const int grid = 1 << 9;
  const std::vector<double> a = {0.3, -1.2, 0.7, 2.0, -0.4, 0.1, 0.9, -1.5,
                                 1.1, 0.0,  0.2, -0.6, 0.8, -0.9, 1.3, 0.5};
  std::vector<Complex> half(grid / 2 + 1);
  add_level_spectrum(table, 4, a, half);
  std::vector<double> field(grid);
  fft::backward_real(half, field);
  std::vector<double> direct(grid, 0.0);
  for (int l = 0; l < 16; ++l) {
    const auto s = evaluate_vaguelet_grid(table, DyadicIndex(4, l), grid);
    for (int i = 0; i < grid; ++i) direct[i] += a[l] * s[i];
  }
  for (int i = 0; i < grid; ++i) CHECK(field[i] == doctest::Approx(direct[i]).epsilon(1e-10));
}

TEST_CASE("coefficient cache round trip") {
  const auto f = build_meyer_filter(512);
  const DyadicIndex idx(2, 3);
  const auto c = vaguelet_coeffs(f, idx, 64);
  const auto path = std::filesystem::temp_directory_path() / vaguelet_cache_name(f.hash(), idx, 64);
  write_vaguelet_cache(path, idx, c);
  DyadicIndex back;
  const auto r = read_vaguelet_cache(path, back);
  CHECK(back == idx);
  CHECK(r == c);
  std::filesystem::remove(path);
}
