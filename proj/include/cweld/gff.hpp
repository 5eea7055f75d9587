#ifndef CWELD_GFF_HPP_
#define CWELD_GFF_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cweld/rng.hpp"
#include "cweld/vaguelet.hpp"

namespace cweld {

enum class Representation { kFourier, kVaguelet };

/// Field values X(i / grid) on a uniform grid of the unit circle.
struct FieldSample {
  std::vector<double> values;
  Representation representation = Representation::kFourier;
  int truncation = 0;  // mode cutoff N (Fourier) or depth m (vaguelet)
  std::uint64_t seed = 0;
  std::vector<Stream> streams;

  int grid() const { return static_cast<int>(values.size()); }
};

/// X_N(theta) = sum_{n=1..N} (A_n cos 2 pi n theta + B_n sin 2 pi n theta) / sqrt(n).
/// A_n and B_n are keyed by n on their own streams. Throws RangeError for
/// N > grid/2.
FieldSample sample_gff_fourier(std::uint64_t seed, int n_modes, int grid);

/// X(theta) = sum_{j=0..m} sum_l A_{j,l} sqrt(pi) psi_{j,l}(theta), with
/// A_{j,l} keyed by (j, l). A raw table is scaled by sqrt(pi) here; a
/// field-scaled table is used as is.
FieldSample sample_gff_vaguelet(std::uint64_t seed, const VagueletTable& table, int depth, int grid,
                                Stream stream = Stream::kVaguelet);

/// sum_{j=first..last} weight[j - first] sum_l A_{j,l} psi_{j,l} for the
/// table's scaling, one spectral synthesis for all levels.
std::vector<double> vaguelet_partial_sum(const VagueletTable& table, std::uint64_t seed,
                                         Stream stream, int first_level, int last_level, int grid,
                                         std::span<const double> weight);

/// Running estimate of the stationary covariance C(k / grid), averaged over
/// theta (circularly, via the power spectrum) and over added fields.
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(int grid);
  void add(std::span<const double> field);
  /// Covariance at every lag k = 0..grid-1.
  std::vector<double> covariance() const;
  std::size_t count() const { return count_; }

 private:
  int grid_;
  std::vector<double> power_;
  std::size_t count_ = 0;
};

/// Pointwise exact variance of the vaguelet partial sum:
/// pi sum_{j<=m} sum_l psi_{j,l}^2 for a raw table.
std::vector<double> vaguelet_field_variance(const VagueletTable& table, int depth, int grid);

// Exports: CSV with (theta, value) rows; raw little-endian float64 values with
// a JSON sidecar at <path>.json.
void write_field_csv(const std::filesystem::path& path, const FieldSample& sample);
void write_field_raw(const std::filesystem::path& path, const FieldSample& sample);
FieldSample read_field_raw(const std::filesystem::path& path);

}  // namespace cweld

#endif  // CWELD_GFF_HPP_
