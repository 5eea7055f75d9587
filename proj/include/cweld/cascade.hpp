#ifndef CWELD_CASCADE_HPP_
#define CWELD_CASCADE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "cweld/gff.hpp"
#include "cweld/vaguelet.hpp"

namespace cweld {

enum class ScheduleKind { kConstant, kCritical, kUser };

/// Variance per dyadic band. Band k (1-based) covers levels n_{k-1}+1 .. n_k
/// with n_0 = 0; every level in band k carries variance t_k.
struct VarianceSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  std::vector<double> t;     // t[k-1] = t_k
  std::vector<int> band_end;  // band_end[k-1] = n_k, strictly increasing
  double gamma = 0.5;
  double epsilon = 0.1;
  double growth_constant = 1.0;  // the large constant C in the band-end formula
  int cap = 0;
  bool clamped = false;  // band ends were replaced by the capped geometric rule

  int depth() const { return band_end.empty() ? 0 : band_end.back(); }
  int bands() const { return static_cast<int>(t.size()); }
  /// Band k containing the level (1-based level >= 1).
  int band_of_level(int level) const;
  double variance_at_level(int level) const { return t[static_cast<std::size_t>(band_of_level(level) - 1)]; }
};

/// t_k = t for every level 1..cap. Requires 0 <= t < 2.
VarianceSchedule constant_schedule(double t, int cap);

/// t_k = 2 - k^{-gamma}, 0 < gamma < 1. The band ends follow
/// n_k = min(formula, max(n_{k-1}+1, 2 n_{k-1})) truncated at cap, where
/// formula = (k+1)^gamma exp(C (k+1)^{3 gamma (k+1)^gamma} / epsilon).
VarianceSchedule critical_schedule(double gamma, double epsilon, int cap,
                                         double growth_constant = 1.0);

/// Explicit (t_k, n_k) lists.
VarianceSchedule user_schedule(std::vector<double> t, std::vector<int> band_end);

/// Dispatch by kind; `t_or_gamma` is t for kConstant and gamma for kCritical.
VarianceSchedule make_schedule(ScheduleKind kind, double t_or_gamma, double epsilon, int cap);

/// Generates the compensated field
/// S_D = sum_{j=1..D} sum_l ( sqrt(t_j pi) A_{j,l} psi_{j,l} - (t_j pi / 2) psi_{j,l}^2 )
/// with A_{j,l} keyed by (seed, j, l), so S_D for every D shares its draws.
/// Compensators are cached per (depth, grid) and shared across threads.
class CascadeField {
 public:
  CascadeField(std::shared_ptr<const VagueletTable> table, VarianceSchedule schedule,
               int oversample = 4);

  const VarianceSchedule& schedule() const { return schedule_; }
  const VagueletTable& table() const { return *table_; }
  int oversample() const { return oversample_; }
  int default_grid(int depth) const { return 1 << (depth + oversample_); }

  /// S at the requested depth; grid 0 picks 2^{depth + oversample}.
  FieldSample field(std::uint64_t seed, int depth, int grid = 0,
                    Stream stream = Stream::kVaguelet) const;

  /// sum_{j<=depth} (t_j pi / 2) sum_l psi_{j,l}^2 on the grid.
  std::shared_ptr<const std::vector<double>> compensator(int depth, int grid) const;

 private:
  std::shared_ptr<const VagueletTable> table_;
  VarianceSchedule schedule_;
  int oversample_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, std::shared_ptr<const std::vector<double>>> cache_;
};

/// Free-function form; builds a one-off CascadeField.
FieldSample accumulate_field(const VarianceSchedule& schedule,
                             std::shared_ptr<const VagueletTable> table, std::uint64_t seed,
                             int depth, int grid);

/// Masses nu(I) on the dyadic tree, levels 0..depth.
///
/// Stored as nu(I) = exp(log_scale) * scaled(I). Leaves come from log-sum-exp
/// over grid cells, and parents are sums of their two children, so
/// scaled(I) == scaled(left) + scaled(right) holds exactly in floating point.
class DyadicMassTree {
 public:
  DyadicMassTree() = default;
  /// From leaf masses given as logarithms.
  static DyadicMassTree from_log_leaves(std::span<const double> log_leaves);
  /// From positive leaf masses.
  static DyadicMassTree from_leaves(std::span<const double> leaves);

  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  double mass(DyadicIndex idx) const;
  double log_mass(DyadicIndex idx) const;
  double scaled(DyadicIndex idx) const;
  double log_scale() const { return log_scale_; }
  double total() const { return mass(DyadicIndex(0, 0)); }
  /// Scaled masses at one level (multiply by exp(log_scale) for nu).
  std::span<const double> level(int j) const;
  /// Real masses at one level.
  std::vector<double> masses(int j) const;

  std::uint64_t seed = 0;
  std::string schedule_label;

 private:
  std::vector<std::vector<double>> levels_;
  double log_scale_ = 0.0;
};

/// Midpoint-rule masses e^{S(theta_i)} / grid summed into leaves at the
/// requested depth (default: one leaf per grid cell). Throws NumericalError
/// when the dynamic range of e^S leaves a leaf mass unrepresentable.
DyadicMassTree build_measure(std::span<const double> field, int depth = -1);

/// Total mass F_k after each band (k = 0..bands, F_0 = 1), per member.
struct MartingaleTrace {
  std::vector<int> band_end;                // levels at which F is recorded, with 0 first
  std::vector<std::vector<double>> values;  // values[member][k]
  std::size_t members() const { return values.size(); }
  /// Ensemble mean and standard error of F_k.
  std::pair<double, double> mean_se(std::size_t k) const;
  /// Ensemble mean of F_k log(1 + F_k).
  double llogl(std::size_t k) const;
};

/// F_k computed on grid 2^{n_k + oversample} for each band end n_k <= depth.
MartingaleTrace martingale_trace(const CascadeField& cascade, std::span<const std::uint64_t> seeds,
                                 int depth);

/// Ensemble accumulator of mean_I nu(I)^p per level.
class MomentAccumulator {
 public:
  MomentAccumulator(double p, int max_level);
  void add(const DyadicMassTree& tree);
  /// E[nu(I)^p] estimate at level j (averaged over intervals and members).
  double moment(int level) const;
  /// Standard error across members at level j.
  double moment_se(int level) const;
  std::size_t members() const { return members_; }
  double p() const { return p_; }

 private:
  double p_;
  std::vector<double> sum_, sum_sq_;
  std::size_t members_ = 0;
};

struct MultifractalFit {
  double slope = 0;        // fitted zeta_p
  double slope_se = 0;
  double predicted = 0;    // p - (p^2 - p) t / 2
  bool boundary = false;   // p t == 2: moment on the edge of existence
  bool low_count = false;  // fewer members than advised for this p
  std::vector<double> log_moments;  // per fitted level
};

/// Least-squares slope of log E[nu(I)^p] against log |I| over levels
/// first..last. Throws ConfigError when p t > 2.
MultifractalFit multifractal_fit(const MomentAccumulator& acc, double t, int first_level,
                                 int last_level);
MultifractalFit multifractal_fit(std::span<const DyadicMassTree> ensemble, double p, double t,
                                 int first_level, int last_level);

struct NegativeMomentProbe {
  std::vector<double> s;
  std::vector<double> laplace;  // mean of exp(-s M)
  double tail_exponent = 0;     // delta in L(s) ~ s^{-delta}, fitted on [s_lo, s_hi]
  double moment = 0;            // estimate of E[M^{-q}]
  double direct_moment = 0;     // plain ensemble mean of M^{-q}
  bool unstable = false;        // q at or beyond the fitted tail exponent
};

/// Laplace transform of the total masses on the s-grid and
/// E[M^{-q}] = (1 / Gamma(q)) int_0^inf s^{q-1} L(s) ds on that grid, with
/// the power-law tail beyond the last node added in closed form.
NegativeMomentProbe negative_moment_probe(std::span<const double> totals, std::span<const double> s,
                                          double q, double fit_lo = 10.0, double fit_hi = 1000.0);

/// Log-spaced s-grid.
std::vector<double> log_grid(double lo, double hi, int points);

struct EnvelopeReport {
  std::vector<DyadicIndex> violations;
  std::vector<double> fraction;  // per level 0..depth
};

/// Intervals with nu(I) > |I|^{a_k}, k = band of level(I); level 0 uses a_1.
EnvelopeReport scaling_envelope_check(const DyadicMassTree& tree, const VarianceSchedule& schedule,
                                      std::span<const double> a);

/// a_k from zeta_{p_k} - a_k p_k = 1 + epsilon with p_k = 1 + k^{-gamma}/2 and
/// zeta_p = p - (p^2 - p) t_k / 2.
std::vector<double> default_envelope_exponents(const VarianceSchedule& schedule, double epsilon);

// Tree export. CSV: depth-first rows (level, index, mass). DMT1: magic, u32
// depth, float64 leaf masses; internal nodes follow by additivity.
void write_tree_csv(const std::filesystem::path& path, const DyadicMassTree& tree);
void write_tree_binary(const std::filesystem::path& path, const DyadicMassTree& tree);
DyadicMassTree read_tree_binary(const std::filesystem::path& path);

}  // namespace cweld

#endif  // CWELD_CASCADE_HPP_
