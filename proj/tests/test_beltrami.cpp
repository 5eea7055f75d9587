#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cweld/beltrami.hpp"

using namespace cweld;

namespace {

BeltramiField radial_stretch(double K, const GridSpec& grid, int supersample = 1) {
  return radial_stretch_field(K, grid, supersample);
}

// closed form z |z|^{K-1} inside the disk, identity outside
Complex radial_exact(double K, Complex z) {
  const double r = std::abs(z);
  return r < 1.0 ? z * std::pow(r, K - 1.0) : z;
}

double sup_error(const SolvedMap& map, Complex (*exact)(Complex)) {
  double e = 0.0;
  for (int r = 0; r < map.grid.n; ++r)
    for (int c = 0; c < map.grid.n; ++c) e = std::max(e, std::abs(map.at(r, c) - exact(map.grid.point(r, c))));
  return e;
}

std::shared_ptr<const VagueletTable> table(int levels) {
  static const auto filter = build_meyer_filter(1024);
  return std::make_shared<const VagueletTable>(filter, levels);
}

BeurlingAhlforsExtension weld_extension(std::uint64_t seed, int depth) {
  CascadeField c(table(depth), constant_schedule(1.0, depth));
  return BeurlingAhlforsExtension(homeomorphism_from_measure(build_measure(c.field(seed, depth).values, depth)));
}

}  // namespace

TEST_CASE("coefficient truncation") {
  const GridSpec grid{64, 2.0};
  const auto mu = radial_stretch(3.0, grid);
  CHECK(mu.sup_abs() == doctest::Approx(0.5));
  const auto m1 = truncate_coefficient(mu, 1);
  for (std::size_t i = 0; i < mu.mu.size(); ++i) CHECK(m1.mu[i] == mu.mu[i] * 0.5);
  CHECK(m1.sup_abs() == doctest::Approx(0.25));
  const double a = m1.sup_abs();
  CHECK((1 + a) / (1 - a) == doctest::Approx(5.0 / 3.0));
  for (int l : {1, 3, 7, 100}) CHECK(truncate_coefficient(mu, l).sup_abs() <= double(l) / (l + 1));
  CHECK_THROWS_AS(truncate_coefficient(mu, 0), ConfigError);

  // round trip: the truncated field is a radial stretch with K = 5/3
  const GridSpec big{256, 2.0};
  const auto map = solve_principal(truncate_coefficient(radial_stretch(3.0, big), 1), SolverConfig{big, 1});
  CHECK(std::abs(map(Complex(0.5, 0.0)) - std::pow(0.5, 5.0 / 3.0)) < 1e-2);
}

TEST_CASE("Beurling transform on the periodized box") {
  const GridSpec grid{64, 2.0};
  const std::vector<Complex> zero(grid.size());
  for (const auto& v : beurling_transform(zero, grid).values) CHECK(v == Complex{});

  // a single Fourier mode is scaled by its symbol value
  const int mx = 3, my = -5;
  const double k0 = kTwoPi / (2 * grid.half_width);
  const Complex xi(k0 * mx, k0 * my);
  std::vector<Complex> mode(grid.size());
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c)
      mode[static_cast<std::size_t>(r) * grid.n + c] = std::polar(1.0, kTwoPi * (mx * c + my * r) / grid.n);
  const auto s = beurling_transform(mode, grid);
  for (std::size_t i = 0; i < mode.size(); ++i)
    CHECK(std::abs(s.values[i] - std::conj(xi) / xi * mode[i]) < 1e-12);
  CHECK(s.aliasing_risk);

  // discrete Parseval with the mean removed
  std::vector<Complex> g(grid.size());
  Complex mean;
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c) {
      const Complex z = grid.point(r, c);
      g[static_cast<std::size_t>(r) * grid.n + c] = std::exp(-8.0 * std::norm(z - Complex(0.2, -0.1))) * z;
    }
  for (const auto& v : g) mean += v / double(g.size());
  double a = 0, b = 0;
  const auto sg = beurling_transform(g, grid);
  CHECK_FALSE(sg.aliasing_risk);
  for (std::size_t i = 0; i < g.size(); ++i) {
    a += std::norm(g[i] - mean);
    b += std::norm(sg.values[i]);
  }
  CHECK(b == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("zero coefficient gives the identity") {
  const GridSpec grid{64, 2.0};
  const auto map = solve_principal(beltrami_from_function([](Complex) { return Complex{}; }, grid, "zero"),
                                   SolverConfig{grid});
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c) CHECK(map.at(r, c) == grid.point(r, c));
  CHECK(map.iterations == 0);
  const auto curve = extract_curve(map, 256);
  CHECK(curve.points.size() == 257u);
  CHECK(curve.points.front() == curve.points.back());
  for (const auto& p : curve.points) CHECK(std::abs(std::abs(p) - 1.0) < 1e-12);
  CHECK(curve.simple());
}

TEST_CASE("radial stretch oracle on a 512 grid") {
  const GridSpec grid{512, 2.0};
  const auto map = solve_principal(radial_stretch(2.0, grid, 8), SolverConfig{grid, 1, 500, 1e-12});
  const double err = sup_error(map, [](Complex z) { return radial_exact(2.0, z); });
  MESSAGE("sup error " << err << ", iterations " << map.iterations << ", residual " << map.residual
                       << ", F(0.5) " << map(0.5));
  CHECK(err <= 1e-2);
  CHECK(map.residual <= 1e-3);
  CHECK(std::abs(map(0.5) - 0.25) <= 1e-2);
  CHECK(boundary_deviation(map, 2 * grid.spacing()) <= 1e-3);
  // geometric convergence at rate sup|mu| = 1/3
  for (std::size_t k = 2; k + 1 < map.residual_history.size(); ++k)
    CHECK(map.residual_history[k + 1] <= map.residual_history[k] * (1.0 / 3.0) * 1.05);
  const auto curve = extract_curve(map, 1024);
  double dev = 0.0;
  for (const auto& p : curve.points) dev = std::max(dev, std::abs(std::abs(p) - 1.0));
  MESSAGE("curve deviation from the unit circle " << dev);
  CHECK(dev <= 2e-3);
  CHECK(curve.simple());
}

TEST_CASE("constant coefficient with nonzero mass") {
  // mu = c on the disk: F = z + c conj(z) inside, z + c / z outside
  const Complex c0(0.3, 0.2);
  auto exact = [c0](Complex z) { return std::abs(z) < 1.0 ? z + c0 * std::conj(z) : z + c0 / z; };
  double prev = 1e9;
  for (double L : {2.0, 4.0}) {
    const GridSpec grid{static_cast<int>(128 * L), L};
    const auto map = solve_principal(beltrami_from_function([c0](Complex) { return c0; }, grid, "const"),
                                     SolverConfig{grid});
    double err = 0.0, frame = 0.0;
    for (int r = 0; r < grid.n; ++r)
      for (int c = 0; c < grid.n; ++c) {
        const Complex z = grid.point(r, c);
        err = std::max(err, std::abs(map.at(r, c) - exact(z)));
        if (r == 0 || c == 0) frame = std::max(frame, std::abs(map.at(r, c) - z));
      }
    MESSAGE("L = " << L << ": sup error " << err << ", frame deviation " << frame);
    CHECK(err <= 1e-2);
    CHECK(frame < prev);
    prev = frame;
  }
}

TEST_CASE("solver errors") {
  const GridSpec grid{64, 2.0};
  const auto mu = radial_stretch(3.0, grid);
  CHECK_THROWS_AS(solve_principal(mu, SolverConfig{grid, 0}), ConfigError);
  CHECK_NOTHROW(solve_principal(mu, SolverConfig{grid, 1}));
  CHECK_THROWS_AS(solve_principal(radial_stretch(4.0, grid), SolverConfig{grid, 1}), ConfigError);
  CHECK_THROWS_AS(solve_principal(mu, SolverConfig{GridSpec{128, 2.0}, 1}), ConfigError);
  CHECK_THROWS_AS(solve_principal(beltrami_from_function([](Complex) { return Complex{}; }, GridSpec{64, 1.5}, ""),
                                  SolverConfig{GridSpec{64, 1.5}}),
                  ConfigError);
  try {
    solve_principal(mu, SolverConfig{grid, 1, 3, 1e-14});
    FAIL("expected non-convergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("self-intersection scan") {
  std::vector<Complex> eight = {{0, 0}, {1, 1}, {1, 0}, {0, 1}, {0, 0}};
  const auto hits = find_self_intersections(eight);
  REQUIRE(hits.size() == 1u);
  CHECK(hits[0] == std::pair<int, int>(0, 2));
  std::vector<Complex> square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  CHECK(find_self_intersections(square).empty());
  // a fine circle has no crossings
  std::vector<Complex> circ;
  for (int k = 0; k <= 4096; ++k) circ.push_back(std::polar(1.0, kTwoPi * (k % 4096) / 4096));
  CHECK(find_self_intersections(circ).empty());
}

TEST_CASE("welding curves converge as the truncation index grows") {
  const GridSpec grid{256, 2.0};
  const auto ext = weld_extension(5, 10);
  const auto mu = beltrami_from_extension(ext, grid, 0.05);
  std::vector<JordanCurve> curves;
  std::vector<double> intk;
  for (int l : {3, 7, 15, 31}) {
    const auto ml = truncate_coefficient(mu, l);
    const auto map = solve_principal(ml, SolverConfig{grid, l, 4000, 1e-8});
    CHECK(map.residual <= 1e-8);
    curves.push_back(extract_curve(map, 1024));
    CHECK(curves.back().simple());
    intk.push_back(ml.distortion_integral());
    std::vector<std::pair<Complex, Complex>> pairs;
    for (int k = 0; k < 50; ++k)
      pairs.emplace_back(std::polar(0.9, 0.3 * k), std::polar(0.5 + 0.01 * k, 0.3 * k + 0.1));
    CHECK(inverse_continuity_ratio(map, intk.back(), pairs) <= 1.0);
  }
  const double d1 = curve_distance(curves[0], curves[1]), d2 = curve_distance(curves[1], curves[2]),
               d3 = curve_distance(curves[2], curves[3]);
  MESSAGE("successive curve distances " << d1 << ' ' << d2 << ' ' << d3);
  CHECK(d2 < d1);
  CHECK(d3 < d2);
  for (double v : intk) CHECK(std::isfinite(v));
}

TEST_CASE("distortion integral is stable under refinement") {
  const auto ext = weld_extension(6, 10);
  const double a = beltrami_from_extension(ext, GridSpec{256, 2.0}, 0.05).distortion_integral();
  const double b = beltrami_from_extension(ext, GridSpec{512, 2.0}, 0.05).distortion_integral();
  MESSAGE("int K dA: " << a << " (256), " << b << " (512)");
  CHECK(std::abs(a - b) <= 0.1 * b);
}

TEST_CASE("curve and telemetry export") {
  const GridSpec grid{64, 2.0};
  const auto mu = radial_stretch(2.0, grid);
  const auto map = solve_principal(mu, SolverConfig{grid});
  const auto curve = extract_curve(map, 64);
  const auto dir = std::filesystem::temp_directory_path();
  write_curve_csv(dir / "cweld_curve.csv", curve);
  write_curve_svg(dir / "cweld_curve.svg", curve);
  write_solver_telemetry(dir / "cweld_solver.json", map, mu);
  for (auto p : {"cweld_curve.csv", "cweld_curve.svg", "cweld_solver.json"}) {
    CHECK(std::filesystem::file_size(dir / p) > 50);
    std::filesystem::remove(dir / p);
  }
}
