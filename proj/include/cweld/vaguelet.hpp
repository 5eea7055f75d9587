#ifndef CWELD_VAGUELET_HPP_
#define CWELD_VAGUELET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cweld/common.hpp"

namespace cweld {

// Smoothing profile of the Meyer transition band. kPolynomial is the classical
// degree-7 profile x^4(35 - 84x + 70x^2 - 20x^3), which is C^3 and gives the
// wavelet polynomial decay. kSmooth uses the C-infinity bump ratio
// e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}).
enum class TransitionProfile { kPolynomial, kSmooth };

/// Low-pass filter m0 of a Meyer-type multiresolution analysis.
///
/// m0 is real, even and 2pi periodic: 1 on |xi| <= pi/3, 0 on
/// 2pi/3 <= |xi| <= pi, with the transition on (pi/3, 2pi/3) chosen so that
/// m0(xi)^2 + m0(xi + pi)^2 = 1 everywhere.
class WaveletFilter {
 public:
  WaveletFilter(int resolution, TransitionProfile profile);

  /// Analytic evaluation; any real xi.
  double operator()(double xi) const;

  /// Samples at xi_k = 2 pi k / resolution, k = 0..resolution-1.
  std::span<const double> samples() const { return samples_; }
  int resolution() const { return resolution_; }
  TransitionProfile profile() const { return profile_; }

  /// Decay exponent q guaranteed for the resulting wavelet:
  /// |Phi(x)| <= C_q (1 + |x|)^{-q}.
  double decay_exponent() const;

  /// Largest frequency for which mother_wavelet_hat is evaluated.
  double max_frequency() const;

  /// max_k | m0(xi_k)^2 + m0(xi_k + pi)^2 - 1 | over the sample grid.
  double quadrature_mirror_defect() const;

  std::uint64_t hash() const { return hash_; }

 private:
  int resolution_;
  TransitionProfile profile_;
  std::vector<double> samples_;
  std::uint64_t hash_;
};

WaveletFilter build_meyer_filter(int resolution = 1024,
                                 TransitionProfile profile = TransitionProfile::kPolynomial);

/// Fourier transform of the mother wavelet (angular frequency),
/// Phi^(xi) = e^{-i xi/2} m0(xi/2 + pi) prod_{k>=1} m0(xi / 2^{k+1}).
/// Band-limited: nonzero only for 2pi/3 < |xi| < 8pi/3.
Complex mother_wavelet_hat(const WaveletFilter& filter, double xi);

/// (1/2pi) int |Phi^|^2 d xi, by adaptive Gauss-Kronrod on the support.
double wavelet_energy(const WaveletFilter& filter);

/// (1/2pi) int |Phi^(xi)|^2 / |xi| d xi. Equals ln2/pi for every
/// orthonormal wavelet.
double wavelet_log_energy(const WaveletFilter& filter);

/// Whether raw vaguelets or the sqrt(pi)-scaled ones entering the field
/// expansion are returned.
enum class VagueletScaling { kRaw, kFieldScaled };

/// Nonnegative-frequency coefficients of the translate-zero vaguelet at level
/// j. Negative frequencies follow by conjugate symmetry (vaguelets are real).
struct VagueletRow {
  int j = 0;
  std::int64_t n_max = 0;        // requested truncation order
  std::vector<Complex> coeffs;   // coeffs[n], n = 0..support_end-1
  double truncation_residual = 0;  // 1 - sum_{0<|n|<=n_max} 2pi|n| |c(n)|^2

  Complex at(std::int64_t n) const;  // any signed n with |n| <= n_max
};

/// Coefficients of psi_{j,l}, n = -n_max..n_max (index n + n_max).
/// Throws RangeError when n_max < 2^{j+3}.
std::vector<Complex> vaguelet_coeffs(const WaveletFilter& filter, DyadicIndex idx,
                                     std::int64_t n_max);

/// Per-level rows for levels 0..max_level, sharing one filter.
class VagueletTable {
 public:
  /// n_max for level j is 2^{j + n_max_shift}; n_max_shift >= 3.
  VagueletTable(const WaveletFilter& filter, int max_level, int n_max_shift = 6,
                VagueletScaling scaling = VagueletScaling::kRaw);

  int max_level() const { return static_cast<int>(rows_.size()) - 1; }
  VagueletScaling scaling() const { return scaling_; }
  double scale_factor() const;
  std::uint64_t filter_hash() const { return filter_hash_; }

  /// Raw row for level j (scale factor not applied).
  const VagueletRow& row(int j) const;

  /// Coefficients of psi_{j,l} for n = -n_max..n_max, with scaling applied.
  std::vector<Complex> coeffs(DyadicIndex idx) const;

  /// Coefficient psi^_{j,l}(n), with scaling applied.
  Complex coeff(DyadicIndex idx, std::int64_t n) const;

  /// Largest |1 - H^{1/2} norm| over levels (raw convention).
  double max_truncation_residual() const;

  /// Copy with a different scaling flag; rows are shared by value.
  VagueletTable with_scaling(VagueletScaling scaling) const;

 private:
  VagueletTable() = default;
  std::vector<VagueletRow> rows_;
  VagueletScaling scaling_ = VagueletScaling::kRaw;
  std::uint64_t filter_hash_ = 0;
};

/// Samples psi_{j,l}(i / grid), i = 0..grid-1, with the table's scaling.
/// grid must be a power of two >= 2^{j+4}.
std::vector<double> evaluate_vaguelet_grid(const VagueletTable& table, DyadicIndex idx, int grid);

/// sum_l psi_{j,l}(theta)^2 on the grid (table scaling applied).
std::vector<double> level_square_sum(const VagueletTable& table, int j, int grid);

/// sum_{j=0..m} sum_l psi_{j,l}^2 for every m = 0..max_level; entry m holds
/// the cumulative sum through level m.
std::vector<std::vector<double>> cumulative_square_sums(const VagueletTable& table, int max_level,
                                                        int grid);

/// For theta in I (grid points i with i/grid in I) the tail
/// sum_{j=first_level..last_level} sum_{J at level j, J not inside 3I} psi_J^2(theta).
/// 3I is I with its two neighbors, wrapping around the circle.
std::vector<double> far_square_sum(const VagueletTable& table, DyadicIndex interval,
                                   int first_level, int last_level, int grid);

/// H^{1/2} inner product sum_n 2pi|n| a(n) conj(b(n)) of two vaguelets.
Complex half_derivative_inner(const VagueletTable& table, DyadicIndex a, DyadicIndex b);

/// Adds the spectrum of sum_l coeffs[l] psi_{j,l} into a half spectrum
/// (bins 0..grid/2) for a grid of size grid = 2 (half.size() - 1).
/// coeffs.size() must be 2^j.
void add_level_spectrum(const VagueletTable& table, int j, std::span<const double> coeffs,
                        std::span<Complex> half);

// Binary cache of coefficient rows ("VGLT1"): magic, u32 j, u64 l, u64 n_max,
// then (re, im) float64 pairs for n = -n_max..n_max.
void write_vaguelet_cache(const std::filesystem::path& path, DyadicIndex idx,
                          std::span<const Complex> coeffs);
std::vector<Complex> read_vaguelet_cache(const std::filesystem::path& path, DyadicIndex& idx);
std::string vaguelet_cache_name(std::uint64_t filter_hash, DyadicIndex idx, std::int64_t n_max);

}  // namespace cweld

#endif  // CWELD_VAGUELET_HPP_
