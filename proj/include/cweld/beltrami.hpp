#ifndef CWELD_BELTRAMI_HPP_
#define CWELD_BELTRAMI_HPP_

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cweld/welding.hpp"

namespace cweld {

struct SolverConfig {
  GridSpec grid;             // n a power of two, half_width >= 2
  int truncation = 1;        // l: sup|mu| must not exceed l / (l + 1)
  int max_iterations = 500;
  double tolerance = 1e-10;  // on ||F_zbar - mu F_z||_2 / ||F_z||_2
};

/// mu_l = l / (l + 1) mu pointwise; l >= 1.
BeltramiField truncate_coefficient(const BeltramiField& field, int l);

struct SpectralResult {
  std::vector<Complex> values;
  bool aliasing_risk = false;  // input not small on the box boundary
};

/// Beurling transform on the periodized box: symbol conj(xi) / xi, zero mode
/// mapped to zero. Input is row-major n x n.
SpectralResult beurling_transform(std::span<const Complex> g, const GridSpec& grid);

/// Cauchy transform on the periodized box: symbol -2i / xi, zero mode dropped.
std::vector<Complex> cauchy_transform_periodic(std::span<const Complex> g, const GridSpec& grid);

struct SolvedMap {
  GridSpec grid;
  std::vector<Complex> F;  // row-major samples of the principal solution
  int iterations = 0;
  double residual = 0;
  std::vector<double> residual_history;
  double sup_mu = 0;       // contraction constant of the iteration

  Complex at(int row, int col) const {
    return F[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.n) +
             static_cast<std::size_t>(col)];
  }
  /// Bilinear interpolation of F(z) - z, plus z. RangeError outside the box.
  Complex operator()(Complex z) const;
};

/// mu = k z / conj(z) on the disk with k = (K - 1) / (K + 1); its principal
/// solution is z |z|^{K-1} inside the disk and the identity outside.
BeltramiField radial_stretch_field(double K, const GridSpec& grid, int supersample = 1);
Complex radial_stretch_map(double K, Complex z);

/// Principal solution F = z + C h of F_zbar = mu F_z, where h = mu (1 + S h)
/// is found by fixed-point iteration. Both transforms are free-space
/// convolutions with cell-integrated kernels (zero-padded to 2n), exact for
/// piecewise-constant h, so F = z + O(1/z) with no periodic images.
/// Throws ConfigError on grid mismatch or sup|mu| > l/(l+1), NumericalError
/// when the residual misses the tolerance within max_iterations.
SolvedMap solve_principal(const BeltramiField& field, const SolverConfig& config);

struct JordanCurve {
  std::vector<Complex> points;  // closed: points.front() == points.back()
  std::vector<std::pair<int, int>> intersections;  // crossing segment pairs
  bool simple() const { return intersections.empty(); }
};

/// Gamma_i = F(exp(2 pi i k / M)), k = 0..M-1, closed, with a sweep over
/// segments for crossings between non-adjacent segments. Never repairs.
JordanCurve extract_curve(const SolvedMap& map, int samples);

/// Sweep-and-prune crossing scan of a closed polyline.
std::vector<std::pair<int, int>> find_self_intersections(std::span<const Complex> closed);

/// max_k |a_k - b_k| over two curves with the same sampling.
double curve_distance(const JordanCurve& a, const JordanCurve& b);

/// Largest |F(z) - z| over grid nodes with 1 <= |z| <= 1 + width.
double boundary_deviation(const SolvedMap& map, double width);

/// Largest ratio |a - b| log(e + 1/|F(a) - F(b)|) / (16 pi^2 (|F(a)|^2 + |F(b)|^2 + intK))
/// over the given domain pairs: the inverse map g = F^{-1} obeys the
/// modulus-of-continuity bound exactly when this is <= 1.
double inverse_continuity_ratio(const SolvedMap& map, double distortion_integral,
                                std::span<const std::pair<Complex, Complex>> pairs);

void write_curve_csv(const std::filesystem::path& path, const JordanCurve& curve);
void write_curve_svg(const std::filesystem::path& path, const JordanCurve& curve);
void write_solver_telemetry(const std::filesystem::path& path, const SolvedMap& map,
                            const BeltramiField& field);

}  // namespace cweld

#endif  // CWELD_BELTRAMI_HPP_
