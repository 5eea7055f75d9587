#ifndef CWELD_MODULUS_HPP_
#define CWELD_MODULUS_HPP_

#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cweld/beltrami.hpp"
#include "cweld/common.hpp"

namespace cweld {

enum class AnnulusShape { round, square };

/// A(center, inner, outer). Square annuli sit between the squares of
/// half-side inner and outer.
struct AnnulusSpec {
  Complex center;
  double inner = 1.0;
  double outer = 2.0;
  AnnulusShape shape = AnnulusShape::round;

  /// ConfigError unless 0 < inner < outer.
  void validate() const;
  /// (1/2pi) ln(outer / inner).
  double round_modulus() const { return std::log(outer / inner) / kTwoPi; }
};

/// Distortion samples on a polar grid: rho_i = inner (outer/inner)^{i/(radial-1)},
/// theta_j = 2 pi j / angular. Square annuli scale each ray by
/// 1 / max(|cos|, |sin|) so the rings are the square frames.
struct PolarSamples {
  AnnulusSpec spec;
  int radial = 0;
  int angular = 0;
  std::vector<double> K;  // radial x angular, row per ring

  double rho(int i) const;
  double theta(int j) const { return kTwoPi * j / angular; }
  Complex point(int i, int j) const;
  double at(int i, int j) const {
    return K[static_cast<std::size_t>(i) * static_cast<std::size_t>(angular) + static_cast<std::size_t>(j)];
  }
};

/// Polar node layout without samples; ConfigError unless radial >= 2 and
/// angular >= 3.
PolarSamples polar_layout(const AnnulusSpec& spec, int radial, int angular);

template <class Fn>
PolarSamples sample_distortion(Fn&& K, const AnnulusSpec& spec, int radial, int angular) {
  auto s = polar_layout(spec, radial, angular);
  s.K.resize(static_cast<std::size_t>(radial) * static_cast<std::size_t>(angular));
  for (int i = 0; i < radial; ++i)
    for (int j = 0; j < angular; ++j)
      s.K[static_cast<std::size_t>(i) * angular + j] = K(s.point(i, j));
  return s;
}

/// K = (1 + |mu|) / (1 - |mu|) with |mu| interpolated bilinearly between grid
/// nodes; 1 outside the field's box.
PolarSamples sample_distortion(const BeltramiField& field, const AnnulusSpec& spec, int radial, int angular);

/// int (int K dtheta)^{-1} drho / rho: periodic trapezoid in theta, trapezoid
/// in log rho. ConfigError if any sample is below 1.
double lehto_integral(const PolarSamples& samples);
/// Same over rings first..last; the sum over [a, m] and [m, b] equals [a, b]
/// up to rounding for every ring m.
double lehto_integral(const PolarSamples& samples, int first, int last);

struct SeriesBound {
  double value = 0;        // C + C sum_i D_i d^{-i}, i from 1
  bool divergent = false;  // last term above cutoff times the partial sum
  int terms = 0;
};

/// Bound from per-level distortion bounds D_1, D_2, ...; the series counts
/// as convergent when its last term is at most cutoff times the partial sum.
/// ConfigError unless every D_i >= 1 and d >= 2.
SeriesBound modulus_upper_bound(std::span<const double> levels, double d, double C, double cutoff = 1e-15);
/// Generates D_i = level(i) until the Cauchy cutoff holds or max_terms.
SeriesBound modulus_upper_bound(const std::function<double(int)>& level, double d, double C,
                                int max_terms = 4096, double cutoff = 1e-15);

/// Closed forms: D_i = D gives C + C D / (d - 1); D_i = d^{i/2} gives
/// C + C / (sqrt(d) - 1).
double constant_level_bound(double D, double d, double C);
double sqrt_level_bound(double d, double C);

struct ModulusEstimate {
  AnnulusSpec spec;
  double source_modulus = 0;   // (1/2pi) ln(R/r) of the round annulus
  double fem_modulus = 0;      // 1 / Dirichlet energy of the harmonic measure of the image
  double diameter_bound = 0;   // (1/pi) ln(16 diam F(B_R) / diam F(B_r)), an upper bound
  double diameter_ratio = 0;
  bool unreliable = false;
  std::string reason;
};

/// Image modulus of F(A) by P1 finite elements on the mapped polar mesh
/// (u = 0 on the inner ring, 1 on the outer ring). Flags the estimate as
/// unreliable when the mapped mesh folds or the image diameters nearly agree.
ModulusEstimate image_modulus_estimate(const std::function<Complex(Complex)>& F, const AnnulusSpec& spec,
                                       int radial = 64, int angular = 256);
ModulusEstimate image_modulus_estimate(const SolvedMap& map, const AnnulusSpec& spec, int radial = 64,
                                       int angular = 256);

/// {spec, lehto, modulus_estimate, bracket, flags} per annulus.
void write_modulus_report(const std::filesystem::path& path, const ModulusEstimate& estimate, double lehto,
                          double distortion_bound);

}  // namespace cweld

#endif  // CWELD_MODULUS_HPP_
