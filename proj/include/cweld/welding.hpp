#ifndef CWELD_WELDING_HPP_
#define CWELD_WELDING_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cweld/cascade.hpp"
#include "cweld/common.hpp"

namespace cweld {

/// Increasing circle map sampled at x_i = i/n, i = 0..n, with h(0) = 0,
/// h(1) = 1, linear between nodes and extended by h(x + 1) = h(x) + 1.
class CircleHomeomorphism {
 public:
  explicit CircleHomeomorphism(std::vector<double> samples);
  static CircleHomeomorphism identity(int intervals);

  int intervals() const { return static_cast<int>(h_.size()) - 1; }
  std::span<const double> samples() const { return h_; }
  double operator()(double x) const;
  /// Piecewise-linear inverse; inverse(h(x)) == x up to rounding.
  double inverse(double y) const;
  /// int_0^x h(t) dt for any real x, exact for the interpolant.
  double primitive(double x) const;
  /// c0 = int_0^1 h - 1/2.
  double mean_offset() const { return prefix_.back() - 0.5; }

  std::string label;

 private:
  std::vector<double> h_;
  std::vector<double> prefix_;  // prefix_[i] = int_0^{x_i} h
};

/// h(x_i) = nu([0, x_i]) / nu([0, 1]) at the dyadic nodes of the given level
/// (default: the tree depth). Throws NumericalError when the masses are too
/// uneven for the samples to stay strictly increasing in double precision.
CircleHomeomorphism homeomorphism_from_measure(const DyadicMassTree& tree, int level = -1);

/// h1 o h2^{-1} on the finer of the two grids.
CircleHomeomorphism compose_two_gff(const CircleHomeomorphism& h1, const CircleHomeomorphism& h2);

/// Beurling-Ahlfors extension of h to the upper half plane:
///   F = (1/2) int_0^1 (h(x+ty) + h(x-ty)) dt + i int_0^1 (h(x+ty) - h(x-ty)) dt,  0 < y < 1,
///   F = z + (2 - y) c0 for 1 <= y <= 2 and F = z above, with c0 = int_0^1 h - 1/2.
/// Satisfies F(z + 1) = F(z) + 1, and the layers meet continuously at y = 1.
class BeurlingAhlforsExtension {
 public:
  explicit BeurlingAhlforsExtension(CircleHomeomorphism h);

  const CircleHomeomorphism& homeomorphism() const { return h_; }
  double c0() const { return c0_; }
  /// F(x + iy); RangeError for y <= 0.
  Complex operator()(double x, double y) const;
  /// Exact partial derivatives (F_x, F_y) of the extension (one-sided at
  /// kinks of h).
  std::pair<Complex, Complex> jacobian(double x, double y) const;
  /// Beltrami coefficient of F from the exact partials.
  Complex beltrami(double x, double y) const;
  /// Psi(z) = exp(2 pi i F(log z / 2 pi i)) for |z| < 1, Psi(0) = 0, the
  /// boundary values exp(2 pi i h(arg z / 2 pi)) on |z| = 1, and the
  /// reflection 1 / conj(Psi(1 / conj z)) outside.
  Complex disk_map(Complex z) const;

 private:
  CircleHomeomorphism h_;
  double c0_;
};

/// Square sampling box [-half_width, half_width]^2 with n nodes per axis at
/// -half_width + k * spacing; rows run along the imaginary axis.
struct GridSpec {
  int n = 512;
  double half_width = 2.0;

  double spacing() const { return 2.0 * half_width / n; }
  Complex point(int row, int col) const {
    return {-half_width + col * spacing(), -half_width + row * spacing()};
  }
  std::size_t size() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n); }
};

struct BeltramiField {
  GridSpec grid;
  std::vector<Complex> mu;  // row-major, zero outside the open unit disk
  std::size_t inside = 0;   // grid nodes with |z| < 1
  std::size_t clipped = 0;  // nodes where |mu| was clipped to the threshold
  std::string provenance;

  Complex at(int row, int col) const {
    return mu[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.n) +
              static_cast<std::size_t>(col)];
  }
  double clip_fraction() const { return inside == 0 ? 0.0 : double(clipped) / double(inside); }
  double sup_abs() const;
  /// K = (1 + |mu|) / (1 - |mu|) at a flat index.
  double distortion(std::size_t i) const;
  /// Grid estimate of int_D K dA.
  double distortion_integral() const;
};

inline constexpr double kMuClip = 1.0 - 1e-6;

/// mu = Psi_zbar / Psi_z by centered differences with the grid spacing as
/// step, zero outside the unit disk. |mu| is clipped at kMuClip; a clip
/// fraction above max_clip_fraction throws NumericalError.
BeltramiField beltrami_from_extension(const BeurlingAhlforsExtension& ext, const GridSpec& grid,
                                      double max_clip_fraction = 0.01);

/// Field from an explicit coefficient, zero outside the disk. With
/// supersample s > 1 each node holds the mean of mu over an s x s lattice of
/// its cell, so nodes straddling the circle carry the covered fraction.
template <class Fn>
BeltramiField beltrami_from_function(Fn&& mu, const GridSpec& grid, std::string provenance,
                                     int supersample = 1) {
  if (supersample < 1) throw ConfigError("supersample must be >= 1");
  BeltramiField f;
  f.grid = grid;
  f.provenance = std::move(provenance);
  f.mu.assign(grid.size(), Complex{});
  const double d = grid.spacing();
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c) {
      const Complex z = grid.point(r, c);
      if (std::abs(z) < 1.0) ++f.inside;
      if (std::abs(z) >= 1.0 + d) continue;
      Complex acc;
      for (int a = 0; a < supersample; ++a)
        for (int b = 0; b < supersample; ++b) {
          const Complex w = supersample == 1
                                ? z
                                : z + d * Complex((b + 0.5) / supersample - 0.5, (a + 0.5) / supersample - 0.5);
          if (std::abs(w) < 1.0) acc += mu(w);
        }
      f.mu[static_cast<std::size_t>(r) * grid.n + c] = acc / double(supersample * supersample);
    }
  return f;
}

struct DistortionReport {
  double K = 0;                // sum of delta over ordered pairs
  std::vector<double> deltas;  // delta(J1, J2), row-major over the 96 subintervals
};

/// K_nu(I) = sum over ordered pairs (J1, J2) of level-(n+5) subintervals of
/// j(I) = I and its two neighbors of delta = nu(J1)/nu(J2) + nu(J2)/nu(J1).
/// Requires 2 <= level(I) and tree depth >= level(I) + 5.
DistortionReport distortion_K(const DyadicMassTree& tree, DyadicIndex I);

/// Largest K(F) on a samples x samples lattice covering the Whitney box
/// C_I = {x in I, 2^{-n-1} <= y <= 2^{-n}}.
double whitney_max_distortion(const BeurlingAhlforsExtension& ext, DyadicIndex I, int samples = 9);

void write_homeomorphism_csv(const std::filesystem::path& path, const CircleHomeomorphism& h);
/// "BMF1", u32 nx, u32 ny, f64 xmin, xmax, ymin, ymax, then complex float64
/// pairs row-major; provenance in a JSON sidecar.
void write_beltrami_binary(const std::filesystem::path& path, const BeltramiField& field);
BeltramiField read_beltrami_binary(const std::filesystem::path& path);

}  // namespace cweld

#endif  // CWELD_WELDING_HPP_
