#include "cweld/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "cweld/binary_io.hpp"
#include "cweld/parallel.hpp"
#include "cweld/stats.hpp"

namespace cweld {

int VarianceSchedule::band_of_level(int level) const {
  if (level < 1 || level > depth())
    throw RangeError("level " + std::to_string(level) + " outside schedule depth " +
                     std::to_string(depth()));
  const auto it = std::lower_bound(band_end.begin(), band_end.end(), level);
  return static_cast<int>(it - band_end.begin()) + 1;
}

VarianceSchedule constant_schedule(double t, int cap) {
  if (!(t >= 0.0)) throw ConfigError("variance t must be nonnegative");
  if (t >= 2.0) throw ConfigError("constant schedule requires t < 2 (supercritical unsupported)");
  if (cap < 1) throw ConfigError("schedule cap must be >= 1");
  VarianceSchedule s;
  s.kind = ScheduleKind::kConstant;
  s.cap = cap;
  s.t.assign(static_cast<std::size_t>(cap), t);
  for (int k = 1; k <= cap; ++k) s.band_end.push_back(k);
  return s;
}

VarianceSchedule critical_schedule(double gamma, double epsilon, int cap,
                                         double growth_constant) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("critical schedule requires 0 < gamma < 1, got " + format_number(gamma));
  if (!(epsilon > 0.0)) throw ConfigError("critical schedule requires epsilon > 0");
  if (!(growth_constant > 0.0)) throw ConfigError("growth constant must be positive");
  if (cap < 1) throw ConfigError("schedule cap must be >= 1");
  VarianceSchedule s;
  s.kind = ScheduleKind::kCritical;
  s.gamma = gamma;
  s.epsilon = epsilon;
  s.growth_constant = growth_constant;
  s.cap = cap;
  int prev = 0;
  for (int k = 1; prev < cap; ++k) {
    const double kp1 = k + 1.0;
    const double log_formula =
        gamma * std::log(kp1) +
        growth_constant * std::pow(kp1, 3.0 * gamma * std::pow(kp1, gamma)) / epsilon;
    const int geometric = std::max(prev + 1, 2 * prev);
    int end = geometric;
    if (log_formula < std::log(static_cast<double>(geometric)))
      end = std::max(prev + 1, static_cast<int>(std::ceil(std::exp(log_formula))));
    else
      s.clamped = true;
    if (end > cap) {
      end = cap;
      s.clamped = true;
    }
    s.t.push_back(2.0 - std::pow(static_cast<double>(k), -gamma));
    s.band_end.push_back(end);
    prev = end;
  }
  return s;
}

VarianceSchedule user_schedule(std::vector<double> t, std::vector<int> band_end) {
  if (t.empty() || t.size() != band_end.size())
    throw ConfigError("user schedule needs matching nonempty t and band-end lists");
  int prev = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0.0 && t[k] <= 2.0)) throw ConfigError("user schedule requires 0 < t_k <= 2");
    if (band_end[k] <= prev) throw ConfigError("user schedule band ends must strictly increase");
    prev = band_end[k];
  }
  VarianceSchedule s;
  s.kind = ScheduleKind::kUser;
  s.t = std::move(t);
  s.band_end = std::move(band_end);
  s.cap = prev;
  return s;
}

VarianceSchedule make_schedule(ScheduleKind kind, double t_or_gamma, double epsilon, int cap) {
  switch (kind) {
    case ScheduleKind::kConstant:
      return constant_schedule(t_or_gamma, cap);
    case ScheduleKind::kCritical:
      return critical_schedule(t_or_gamma, epsilon, cap);
    case ScheduleKind::kUser:
      break;
  }
  throw ConfigError("user schedules are built from explicit lists");
}

CascadeField::CascadeField(std::shared_ptr<const VagueletTable> table, VarianceSchedule schedule,
                           int oversample)
    : table_(std::move(table)), schedule_(std::move(schedule)), oversample_(oversample) {
  if (!table_) throw ConfigError("cascade needs a vaguelet table");
  if (oversample_ < 4) throw ConfigError("cascade grid must over-resolve the deepest level by 2^4");
}

std::shared_ptr<const std::vector<double>> CascadeField::compensator(int depth, int grid) const {
  const auto key = std::make_pair(depth, grid);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto comp = std::make_shared<std::vector<double>>(static_cast<std::size_t>(grid), 0.0);
  const double s2 = table_->scaling() == VagueletScaling::kRaw ? kPi : 1.0;
  for (int j = 1; j <= depth; ++j) {
    const double w = 0.5 * schedule_.variance_at_level(j) * s2;
    const auto lvl = level_square_sum(*table_, j, grid);
    for (std::size_t i = 0; i < comp->size(); ++i) (*comp)[i] += w * lvl[i];
  }
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(comp)).first->second;
}

FieldSample CascadeField::field(std::uint64_t seed, int depth, int grid, Stream stream) const {
  if (depth < 0) throw ConfigError("cascade depth must be nonnegative");
  if (depth > schedule_.depth())
    throw ConfigError("cascade depth " + std::to_string(depth) + " exceeds schedule cap " +
                      std::to_string(schedule_.depth()));
  if (grid == 0) grid = default_grid(depth);
  FieldSample out;
  out.representation = Representation::kVaguelet;
  out.truncation = depth;
  out.seed = seed;
  out.streams = {stream};
  if (depth == 0) {
    out.values.assign(static_cast<std::size_t>(grid), 0.0);
    return out;
  }
  const double s = table_->scaling() == VagueletScaling::kRaw ? std::sqrt(kPi) : 1.0;
  std::vector<double> weight;
  for (int j = 1; j <= depth; ++j) weight.push_back(s * std::sqrt(schedule_.variance_at_level(j)));
  out.values = vaguelet_partial_sum(*table_, seed, stream, 1, depth, grid, weight);
  const auto comp = compensator(depth, grid);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= (*comp)[i];
  return out;
}

FieldSample accumulate_field(const VarianceSchedule& schedule,
                             std::shared_ptr<const VagueletTable> table, std::uint64_t seed,
                             int depth, int grid) {
  return CascadeField(std::move(table), schedule).field(seed, depth, grid);
}

DyadicMassTree DyadicMassTree::from_log_leaves(std::span<const double> log_leaves) {
  if (!is_pow2(log_leaves.size())) throw ConfigError("leaf count must be a power of two");
  DyadicMassTree t;
  const double top = *std::max_element(log_leaves.begin(), log_leaves.end());
  if (!std::isfinite(top)) throw NumericalError("non-finite log mass");
  t.log_scale_ = top;
  const int depth = ilog2(log_leaves.size());
  t.levels_.resize(static_cast<std::size_t>(depth) + 1);
  auto& leaves = t.levels_.back();
  leaves.resize(log_leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    leaves[i] = std::exp(log_leaves[i] - top);
    if (!(leaves[i] > 0.0) || !std::isfinite(leaves[i]))
      throw NumericalError("mass dynamic range exceeds double precision at leaf " +
                           std::to_string(i));
  }
  for (int j = depth - 1; j >= 0; --j) {
    const auto& child = t.levels_[static_cast<std::size_t>(j) + 1];
    auto& lvl = t.levels_[static_cast<std::size_t>(j)];
    lvl.resize(child.size() / 2);
    for (std::size_t l = 0; l < lvl.size(); ++l) lvl[l] = child[2 * l] + child[2 * l + 1];
  }
  return t;
}

DyadicMassTree DyadicMassTree::from_leaves(std::span<const double> leaves) {
  std::vector<double> logs(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (!(leaves[i] > 0.0)) throw ConfigError("leaf masses must be positive");
    logs[i] = std::log(leaves[i]);
  }
  return from_log_leaves(logs);
}

double DyadicMassTree::scaled(DyadicIndex idx) const {
  if (idx.j > depth()) throw RangeError("tree has depth " + std::to_string(depth()));
  return levels_[static_cast<std::size_t>(idx.j)][static_cast<std::size_t>(idx.l)];
}

double DyadicMassTree::mass(DyadicIndex idx) const { return std::exp(log_scale_) * scaled(idx); }

double DyadicMassTree::log_mass(DyadicIndex idx) const { return log_scale_ + std::log(scaled(idx)); }

std::span<const double> DyadicMassTree::level(int j) const {
  if (j < 0 || j > depth()) throw RangeError("tree has depth " + std::to_string(depth()));
  return levels_[static_cast<std::size_t>(j)];
}

std::vector<double> DyadicMassTree::masses(int j) const {
  const auto lv = level(j);
  const double f = std::exp(log_scale_);
  std::vector<double> out(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) out[i] = f * lv[i];
  return out;
}

DyadicMassTree build_measure(std::span<const double> field, int depth) {
  if (!is_pow2(field.size())) throw ConfigError("measure grid must be a power of two");
  const int grid_level = ilog2(field.size());
  if (depth < 0) depth = grid_level;
  if (depth > grid_level) throw ConfigError("tree depth exceeds grid resolution");
  const std::size_t leaves = std::size_t{1} << depth;
  const std::size_t cells = field.size() / leaves;
  const double log_cell = -std::log(static_cast<double>(field.size()));
  std::vector<double> log_leaves(leaves);
  for (std::size_t b = 0; b < leaves; ++b) {
    const auto first = field.begin() + static_cast<std::ptrdiff_t>(b * cells);
    const double top = *std::max_element(first, first + static_cast<std::ptrdiff_t>(cells));
    double acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) acc += std::exp(first[static_cast<std::ptrdiff_t>(i)] - top);
    log_leaves[b] = top + std::log(acc) + log_cell;
  }
  return DyadicMassTree::from_log_leaves(log_leaves);
}

std::pair<double, double> MartingaleTrace::mean_se(std::size_t k) const {
  std::vector<double> x;
  x.reserve(values.size());
  for (const auto& v : values) x.push_back(v.at(k));
  const auto ms = stats::mean_se(x);
  return {ms.mean, ms.se};
}

double MartingaleTrace::llogl(std::size_t k) const {
  double s = 0.0;
  for (const auto& v : values) s += v.at(k) * std::log1p(v.at(k));
  return s / static_cast<double>(values.size());
}

namespace {

double total_mass(std::span<const double> field) {
  const double top = *std::max_element(field.begin(), field.end());
  double acc = 0.0;
  for (double v : field) acc += std::exp(v - top);
  return std::exp(top) * acc / static_cast<double>(field.size());
}

}  // namespace

MartingaleTrace martingale_trace(const CascadeField& cascade, std::span<const std::uint64_t> seeds,
                                 int depth) {
  MartingaleTrace trace;
  trace.band_end.push_back(0);
  for (int n : cascade.schedule().band_end)
    if (n <= depth) trace.band_end.push_back(n);
  trace.values.assign(seeds.size(), {});
  parallel_for(seeds.size(), [&](std::size_t m) {
    std::vector<double> f;
    f.reserve(trace.band_end.size());
    for (int n : trace.band_end) {
      if (n == 0) {
        f.push_back(1.0);
        continue;
      }
      f.push_back(total_mass(cascade.field(seeds[m], n).values));
    }
    trace.values[m] = std::move(f);
  });
  return trace;
}

MomentAccumulator::MomentAccumulator(double p, int max_level)
    : p_(p),
      sum_(static_cast<std::size_t>(max_level) + 1, 0.0),
      sum_sq_(static_cast<std::size_t>(max_level) + 1, 0.0) {
  if (max_level < 0) throw ConfigError("moment accumulator needs max_level >= 0");
}

void MomentAccumulator::add(const DyadicMassTree& tree) {
  const int top = static_cast<int>(sum_.size()) - 1;
  if (tree.depth() < top) throw ConfigError("tree shallower than the moment levels");
  for (int j = 0; j <= top; ++j) {
    const auto lv = tree.level(j);
    double acc = 0.0;
    for (double v : lv) acc += std::exp(p_ * (tree.log_scale() + std::log(v)));
    acc /= static_cast<double>(lv.size());
    sum_[static_cast<std::size_t>(j)] += acc;
    sum_sq_[static_cast<std::size_t>(j)] += acc * acc;
  }
  ++members_;
}

double MomentAccumulator::moment(int level) const {
  if (members_ == 0) throw ConfigError("moment accumulator is empty");
  return sum_.at(static_cast<std::size_t>(level)) / static_cast<double>(members_);
}

double MomentAccumulator::moment_se(int level) const {
  if (members_ < 2) return 0.0;
  const double n = static_cast<double>(members_);
  const double m = moment(level);
  const double var = (sum_sq_.at(static_cast<std::size_t>(level)) / n - m * m) * n / (n - 1.0);
  return std::sqrt(std::max(var, 0.0) / n);
}

MultifractalFit multifractal_fit(const MomentAccumulator& acc, double t, int first_level,
                                 int last_level) {
  const double p = acc.p();
  if (p * t > 2.0 + 1e-12)
    throw ConfigError("moment order p = " + format_number(p) + " does not exist at t = " +
                      format_number(t) + " (needs p t <= 2)");
  if (first_level < 0 || last_level <= first_level)
    throw ConfigError("multifractal fit needs at least two levels");
  MultifractalFit fit;
  fit.predicted = p - (p * p - p) * t / 2.0;
  fit.boundary = std::abs(p * t - 2.0) <= 1e-12;
  fit.low_count = acc.members() < static_cast<std::size_t>(std::ceil(500.0 * std::max(p, 1.0)));
  std::vector<double> x;
  for (int j = first_level; j <= last_level; ++j) {
    x.push_back(-j * kLn2);
    fit.log_moments.push_back(std::log(acc.moment(j)));
  }
  const auto lf = stats::least_squares(x, fit.log_moments);
  fit.slope = lf.slope;
  fit.slope_se = lf.slope_se;
  return fit;
}

MultifractalFit multifractal_fit(std::span<const DyadicMassTree> ensemble, double p, double t,
                                 int first_level, int last_level) {
  MomentAccumulator acc(p, last_level);
  for (const auto& tree : ensemble) acc.add(tree);
  return multifractal_fit(acc, t, first_level, last_level);
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo) || points < 2) throw ConfigError("log_grid: need 0 < lo < hi, >= 2 points");
  std::vector<double> s(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    s[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
  return s;
}

NegativeMomentProbe negative_moment_probe(std::span<const double> totals, std::span<const double> s,
                                          double q, double fit_lo, double fit_hi) {
  if (totals.empty()) throw ConfigError("negative_moment_probe: empty ensemble");
  if (s.size() < 2 || !(s.front() > 0.0)) throw ConfigError("s-grid must be positive");
  if (!std::is_sorted(s.begin(), s.end())) throw ConfigError("s-grid must be increasing");
  if (!(q > 0.0)) throw ConfigError("moment order q must be positive");
  NegativeMomentProbe out;
  out.s.assign(s.begin(), s.end());
  const double n = static_cast<double>(totals.size());
  for (double sv : s) {
    double acc = 0.0;
    for (double m : totals) acc += std::exp(-sv * m);
    out.laplace.push_back(acc / n);
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] >= fit_lo && s[i] <= fit_hi && out.laplace[i] > 0.0) {
      lx.push_back(std::log(s[i]));
      ly.push_back(std::log(out.laplace[i]));
    }
  if (lx.size() >= 2) out.tail_exponent = -stats::least_squares(lx, ly).slope;
  // int_0^{s_0}: L is close to 1 there; use the mean of its end values.
  double integral = std::pow(s[0], q) / q * 0.5 * (1.0 + out.laplace[0]);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double f0 = std::pow(s[i - 1], q) * out.laplace[i - 1];
    const double f1 = std::pow(s[i], q) * out.laplace[i];
    integral += 0.5 * (f0 + f1) * std::log(s[i] / s[i - 1]);
  }
  const double delta = out.tail_exponent;
  if (delta > q) {
    integral += out.laplace.back() * std::pow(s.back(), q) / (delta - q);
  } else {
    out.unstable = true;
    integral = std::numeric_limits<double>::infinity();
  }
  out.moment = integral / std::tgamma(q);
  double direct = 0.0;
  for (double m : totals) direct += std::pow(m, -q);
  out.direct_moment = direct / n;
  if (totals.size() < static_cast<std::size_t>(50.0 * q)) out.unstable = true;
  return out;
}

EnvelopeReport scaling_envelope_check(const DyadicMassTree& tree, const VarianceSchedule& schedule,
                                      std::span<const double> a) {
  if (a.empty()) throw ConfigError("envelope check needs at least one exponent");
  EnvelopeReport rep;
  for (int j = 0; j <= tree.depth(); ++j) {
    int band = 1;
    if (j >= 1) band = j <= schedule.depth() ? schedule.band_of_level(j) : schedule.bands();
    const double ak = a[std::min(static_cast<std::size_t>(band - 1), a.size() - 1)];
    const double bound = -ak * j * kLn2;  // log |I|^{a_k}
    const auto lv = tree.level(j);
    std::size_t bad = 0;
    for (std::size_t l = 0; l < lv.size(); ++l) {
      if (tree.log_scale() + std::log(lv[l]) > bound) {
        ++bad;
        rep.violations.emplace_back(j, static_cast<std::int64_t>(l));
      }
    }
    rep.fraction.push_back(static_cast<double>(bad) / static_cast<double>(lv.size()));
  }
  return rep;
}

std::vector<double> default_envelope_exponents(const VarianceSchedule& schedule, double epsilon) {
  std::vector<double> a;
  for (int k = 1; k <= schedule.bands(); ++k) {
    const double p = 1.0 + 0.5 * std::pow(static_cast<double>(k), -schedule.gamma);
    const double t = schedule.t[static_cast<std::size_t>(k - 1)];
    const double zeta = p - (p * p - p) * t / 2.0;
    a.push_back((zeta - 1.0 - epsilon) / p);
  }
  return a;
}

void write_tree_csv(const std::filesystem::path& path, const DyadicMassTree& tree) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << "level,index,mass\n" << std::setprecision(17);
  std::vector<DyadicIndex> stack{DyadicIndex(0, 0)};
  while (!stack.empty()) {
    const DyadicIndex n = stack.back();
    stack.pop_back();
    os << n.j << ',' << n.l << ',' << tree.mass(n) << '\n';
    if (n.j < tree.depth()) {
      stack.push_back(n.right_child());
      stack.push_back(n.left_child());
    }
  }
}

void write_tree_binary(const std::filesystem::path& path, const DyadicMassTree& tree) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path.string());
  bio::write_magic(os, "DMT1");
  bio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tree.depth()));
  for (double m : tree.masses(tree.depth())) {
    if (!std::isfinite(m)) throw NumericalError("leaf mass not representable for export");
    bio::write_le<double>(os, m);
  }
}

DyadicMassTree read_tree_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  bio::expect_magic(is, "DMT1");
  const auto depth = bio::read_le<std::uint32_t>(is);
  if (depth > 40) throw ConfigError("DMT1 depth out of range");
  std::vector<double> leaves(std::size_t{1} << depth);
  for (auto& v : leaves) v = bio::read_le<double>(is);
  return DyadicMassTree::from_leaves(leaves);
}

}  // namespace cweld
