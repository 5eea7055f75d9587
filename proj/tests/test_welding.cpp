#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cweld/welding.hpp"

using namespace cweld;

namespace {

CircleHomeomorphism sampled(int n, double (*fn)(double)) {
  std::vector<double> s(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) s[static_cast<std::size_t>(i)] = fn(double(i) / n);
  s.front() = 0.0;
  s.back() = 1.0;
  return CircleHomeomorphism(std::move(s));
}

// smooth, h' in [0.9, 1.1]
double wobble(double x) { return x + 0.1 * std::sin(kTwoPi * x) / kTwoPi; }

DyadicMassTree cascade_tree(std::uint64_t seed, int depth) {
  static const auto filter = build_meyer_filter(1024);
  auto table = std::make_shared<const VagueletTable>(filter, depth);
  CascadeField c(table, constant_schedule(1.0, depth));
  return build_measure(c.field(seed, depth).values, depth);
}

}  // namespace

TEST_CASE("homeomorphism from a measure") {
  const auto leb = homeomorphism_from_measure(build_measure(std::vector<double>(256, 0.0), 8));
  for (int i = 0; i <= 256; ++i) CHECK(leb.samples()[i] == doctest::Approx(i / 256.0).epsilon(1e-15));

  std::vector<double> leaves(64);
  for (int i = 0; i < 64; ++i) leaves[i] = (i < 32 ? 4.0 / 3.0 : 2.0 / 3.0) / 64;
  const auto h = homeomorphism_from_measure(DyadicMassTree::from_leaves(leaves));
  CHECK(h(0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(h.samples().back() == 1.0);

  const auto rnd = homeomorphism_from_measure(cascade_tree(4, 10));
  CHECK(rnd.samples().back() == 1.0);
  for (std::size_t i = 1; i < rnd.samples().size(); ++i) CHECK(rnd.samples()[i] > rnd.samples()[i - 1]);
  CHECK(rnd(1.25) == doctest::Approx(rnd(0.25) + 1.0).epsilon(1e-15));
  CHECK(rnd.inverse(rnd(0.3)) == doctest::Approx(0.3).epsilon(1e-12));

  CHECK_THROWS_AS(CircleHomeomorphism({0.0, 0.6, 0.6, 1.0}), ConfigError);
  CHECK_THROWS_AS(CircleHomeomorphism({0.0, 0.5}), ConfigError);
}

TEST_CASE("primitive is exact for the interpolant and periodic") {
  const auto h = sampled(64, wobble);
  // trapezoid sum on a fine grid against the closed-form primitive
  double fine = 0.0;
  const int m = 64 * 200;
  for (int i = 0; i < m; ++i) fine += 0.5 * (h(double(i) / m) + h(double(i + 1) / m)) / m;
  CHECK(h.primitive(1.0) == doctest::Approx(fine).epsilon(1e-12));
  for (double x : {-1.7, -0.2, 0.3, 2.4}) {
    // G(x + 1) = G(x) + G(1) + x
    CHECK(h.primitive(x + 1.0) == doctest::Approx(h.primitive(x) + h.primitive(1.0) + x).epsilon(1e-12));
  }
  CHECK(h.mean_offset() == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("two-field composition") {
  const auto x2 = sampled(1024, [](double x) { return x * x; });
  const auto x3 = sampled(1024, [](double x) { return x * x * x; });
  const auto id = CircleHomeomorphism::identity(1024);
  const auto a = compose_two_gff(x2, id);
  for (int i = 0; i <= 1024; ++i) CHECK(a.samples()[i] == doctest::Approx(x2.samples()[i]).epsilon(1e-14));
  const auto b = compose_two_gff(x3, x3);
  for (int i = 0; i <= 1024; ++i) CHECK(std::abs(b.samples()[i] - i / 1024.0) < 1e-12);
  const auto c = compose_two_gff(x2, x3);
  double worst = 0.0;
  for (int i = 0; i <= 1024; ++i) worst = std::max(worst, std::abs(c.samples()[i] - std::cbrt(std::pow(i / 1024.0, 2))));
  MESSAGE("x^(2/3) composition error " << worst);
  CHECK(worst < 1e-3);
}

TEST_CASE("Beurling-Ahlfors extension layers") {
  const BeurlingAhlforsExtension id(CircleHomeomorphism::identity(32));
  for (double x : {0.0, 0.3, 0.77})
    for (double y : {1e-3, 0.2, 0.9}) {
      const auto f = id(x, y);
      CHECK(f.real() == doctest::Approx(x).epsilon(1e-12));
      CHECK(f.imag() == doctest::Approx(y).epsilon(1e-12));
    }
  const BeurlingAhlforsExtension ext(homeomorphism_from_measure(cascade_tree(8, 10)));
  for (double x : {0.1, 0.6})
    for (double y : {0.01, 0.4, 1.5}) {
      const auto d = ext(x + 1.0, y) - ext(x, y);
      CHECK(std::abs(d - 1.0) < 1e-12);
    }
  CHECK(ext(0.37, 3.0) == Complex(0.37, 3.0));
  // the two lower layers meet at y = 1
  CHECK(std::abs(ext(0.4, 1.0 - 1e-12) - ext(0.4, 1.0)) < 1e-9);
  CHECK(std::abs(ext(0.4, 1.0) - Complex(0.4 + ext.c0(), 1.0)) < 1e-12);
  CHECK(std::abs(ext(0.4, 2.0) - Complex(0.4, 2.0)) < 1e-15);
  CHECK_THROWS_AS(ext(0.1, 0.0), RangeError);
  CHECK_THROWS_AS(ext(0.1, -0.5), RangeError);
}

TEST_CASE("extension reproduces h on the real axis") {
  const BeurlingAhlforsExtension ext(homeomorphism_from_measure(cascade_tree(12, 10)));
  const auto& h = ext.homeomorphism();
  double lip = 0.0;
  for (std::size_t i = 1; i < h.samples().size(); ++i)
    lip = std::max(lip, (h.samples()[i] - h.samples()[i - 1]) * h.intervals());
  double prev = 1e9;
  for (double y : {1e-2, 1e-3, 1e-4, 1e-5}) {
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double x = (i + 0.5) / 200;
      worst = std::max(worst, std::abs(ext(x, y) - Complex(h(x), 0.0)));
    }
    CHECK(worst < prev);
    // |Re F - h| <= y Lip / 2 and |Im F| <= y Lip
    CHECK(worst <= 1.5 * y * lip);
    prev = worst;
  }
}

TEST_CASE("exact Jacobian matches finite differences") {
  const BeurlingAhlforsExtension ext(sampled(128, wobble));
  const double e = 1e-6;
  for (double x : {0.123, 0.5, 0.871})
    for (double y : {0.05, 0.3, 1.4}) {
      const auto [fx, fy] = ext.jacobian(x, y);
      CHECK(std::abs(fx - (ext(x + e, y) - ext(x - e, y)) / (2 * e)) < 1e-5);
      CHECK(std::abs(fy - (ext(x, y + e) - ext(x, y - e)) / (2 * e)) < 1e-5);
    }
}

TEST_CASE("Beltrami coefficient on the disk grid") {
  const GridSpec grid{128, 1.25};
  const auto zero = beltrami_from_extension(BeurlingAhlforsExtension(CircleHomeomorphism::identity(256)), grid);
  CHECK(zero.sup_abs() < 1e-8);
  CHECK(zero.clipped == 0);

  const BeurlingAhlforsExtension qs(sampled(512, wobble));
  const auto f = beltrami_from_extension(qs, grid);
  MESSAGE("quasisymmetric sup|mu| " << f.sup_abs());
  CHECK(f.sup_abs() < 0.5);
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c)
      if (std::abs(grid.point(r, c)) >= 1.0) CHECK(f.at(r, c) == Complex{});

  // |mu| of Psi equals |mu| of F at the corresponding strip point
  for (Complex z : {Complex(0.3, 0.2), Complex(-0.5, 0.4), Complex(0.1, -0.8)}) {
    const double d = 1e-5;
    const Complex i(0, 1);
    const Complex px = (qs.disk_map(z + d) - qs.disk_map(z - d)) / (2 * d);
    const Complex py = (qs.disk_map(z + i * d) - qs.disk_map(z - i * d)) / (2 * d);
    const double mpsi = std::abs((px + i * py) / (px - i * py));
    const double mf = std::abs(qs.beltrami(std::arg(z) / kTwoPi, -std::log(std::abs(z)) / kTwoPi));
    CHECK(mpsi == doctest::Approx(mf).epsilon(1e-4));
  }
  CHECK(std::isfinite(f.distortion_integral()));
  CHECK(f.distortion_integral() >= kPi * 0.95);
}

TEST_CASE("Beltrami field from a rough measure clips with telemetry") {
  const BeurlingAhlforsExtension ext(homeomorphism_from_measure(cascade_tree(3, 12)));
  const auto f = beltrami_from_extension(ext, GridSpec{256, 2.0}, 1.0);
  CHECK(f.sup_abs() <= kMuClip);
  MESSAGE("clip fraction " << f.clip_fraction() << ", sup|mu| " << f.sup_abs());
  if (f.clipped > 0) CHECK_THROWS_AS(beltrami_from_extension(ext, GridSpec{256, 2.0}, 0.0), NumericalError);
}

TEST_CASE("dyadic distortion functional") {
  const auto leb = build_measure(std::vector<double>(1 << 10, 0.0), 10);
  for (auto I : {DyadicIndex(2, 0), DyadicIndex(3, 5), DyadicIndex(5, 31)}) {
    const auto rep = distortion_K(leb, I);
    CHECK(rep.K == doctest::Approx(18432.0).epsilon(1e-12));
    CHECK(rep.deltas.size() == 96u * 96u);
  }
  CHECK_THROWS_AS(distortion_K(leb, DyadicIndex(6, 0)), ConfigError);
  CHECK_THROWS_AS(distortion_K(leb, DyadicIndex(1, 0)), ConfigError);

  const auto tree = cascade_tree(21, 11);
  const auto rep = distortion_K(tree, DyadicIndex(4, 7));
  for (std::size_t a = 0; a < 96; ++a)
    for (std::size_t b = 0; b < 96; ++b) {
      CHECK(rep.deltas[a * 96 + b] >= 2.0);
      CHECK(rep.deltas[a * 96 + b] == rep.deltas[b * 96 + a]);
    }
  CHECK(rep.K > 18432.0);
}

TEST_CASE("Whitney-box distortion is controlled by the dyadic functional") {
  double c0 = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto tree = cascade_tree(seed, 12);
    const BeurlingAhlforsExtension ext(homeomorphism_from_measure(tree));
    for (auto I : {DyadicIndex(3, 2), DyadicIndex(4, 9), DyadicIndex(5, 20), DyadicIndex(6, 40)}) {
      const double k = whitney_max_distortion(ext, I);
      CHECK(std::isfinite(k));
      c0 = std::max(c0, k / distortion_K(tree, I).K);
    }
  }
  MESSAGE("empirical C0 = " << c0);
  CHECK(c0 > 0.0);
  CHECK(c0 < 1.0);
  const BeurlingAhlforsExtension id(CircleHomeomorphism::identity(1024));
  CHECK(whitney_max_distortion(id, DyadicIndex(4, 3)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exports") {
  const auto dir = std::filesystem::temp_directory_path();
  const BeurlingAhlforsExtension qs(sampled(64, wobble));
  const auto f = beltrami_from_extension(qs, GridSpec{32, 1.5});
  write_beltrami_binary(dir / "cweld_mu.bmf", f);
  const auto back = read_beltrami_binary(dir / "cweld_mu.bmf");
  CHECK(back.mu == f.mu);
  CHECK(back.grid.half_width == 1.5);
  CHECK(back.inside == f.inside);
  CHECK(back.provenance == f.provenance);
  write_homeomorphism_csv(dir / "cweld_h.csv", qs.homeomorphism());
  CHECK(std::filesystem::file_size(dir / "cweld_h.csv") > 100);
  for (auto p : {"cweld_mu.bmf", "cweld_mu.bmf.json", "cweld_h.csv"}) std::filesystem::remove(dir / p);
}
