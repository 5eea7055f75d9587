#include "cweld/vaguelet.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <fstream>

#include "cweld/binary_io.hpp"
#include "cweld/fft.hpp"

namespace cweld {
namespace {

double transition(TransitionProfile profile, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  switch (profile) {
    case TransitionProfile::kPolynomial:
      return x * x * x * x * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x);
    case TransitionProfile::kSmooth: {
      const double a = std::exp(-1.0 / x);
      const double b = std::exp(-1.0 / (1.0 - x));
      return a / (a + b);
    }
  }
  return 0.0;
}

double filter_value(TransitionProfile profile, double xi) {
  double x = std::fmod(std::abs(xi), kTwoPi);
  if (x > kPi) x = kTwoPi - x;
  if (x <= kPi / 3.0) return 1.0;
  if (x >= 2.0 * kPi / 3.0) return 0.0;
  return std::cos(0.5 * kPi * transition(profile, 3.0 * x / kPi - 1.0));
}

// Phase e^{-2 pi i n l / 2^j} with the product reduced exactly modulo 2^j.
Complex translation_phase(std::int64_t n, std::int64_t l, int j) {
  if (j == 0) return 1.0;
  const std::int64_t period = std::int64_t{1} << j;
  const std::int64_t r = ((n % period) * (l % period)) % period;
  const std::int64_t rr = (r + period) % period;
  const double angle = -kTwoPi * static_cast<double>(rr) / static_cast<double>(period);
  return {std::cos(angle), std::sin(angle)};
}

void check_grid(int grid, int j) {
  if (!is_pow2(static_cast<std::uint64_t>(grid)) || grid < (1 << std::min(j + 4, 30)))
    throw RangeError("vaguelet grid of size " + std::to_string(grid) +
                     " under-resolves level " + std::to_string(j) + " (need power of two >= 2^" +
                     std::to_string(j + 4) + ")");
}

// Raw samples of psi_{j,0} on the grid.
std::vector<double> base_samples(const VagueletRow& row, int grid) {
  check_grid(grid, row.j);
  const std::size_t half = static_cast<std::size_t>(grid) / 2 + 1;
  if (row.coeffs.size() > half - 1)
    throw RangeError("vaguelet spectrum exceeds grid Nyquist band");
  std::vector<Complex> spec(half, Complex{});
  std::copy(row.coeffs.begin(), row.coeffs.end(), spec.begin());
  std::vector<double> out(static_cast<std::size_t>(grid));
  fft::backward_real(spec, out);
  return out;
}

}  // namespace

WaveletFilter::WaveletFilter(int resolution, TransitionProfile profile)
    : resolution_(resolution), profile_(profile) {
  if (resolution < 256 || !is_pow2(static_cast<std::uint64_t>(resolution)))
    throw ConfigError("filter resolution must be a power of two >= 256, got " +
                      std::to_string(resolution));
  samples_.resize(static_cast<std::size_t>(resolution));
  for (int k = 0; k < resolution; ++k) samples_[k] = filter_value(profile, kTwoPi * k / resolution);
  bio::Fnv1a h;
  h.update("meyer");
  h.update_value(static_cast<std::int32_t>(resolution));
  h.update_value(static_cast<std::int32_t>(profile));
  h.update(samples_.data(), samples_.size() * sizeof(double));
  hash_ = h.digest();
}

double WaveletFilter::operator()(double xi) const { return filter_value(profile_, xi); }

double WaveletFilter::decay_exponent() const {
  return profile_ == TransitionProfile::kPolynomial ? 3.0 : 4.0;
}

double WaveletFilter::max_frequency() const { return kPi * resolution_; }

double WaveletFilter::quadrature_mirror_defect() const {
  const int half = resolution_ / 2;
  double worst = 0.0;
  for (int k = 0; k < resolution_; ++k) {
    const double a = samples_[k];
    const double b = samples_[(k + half) % resolution_];
    worst = std::max(worst, std::abs(a * a + b * b - 1.0));
  }
  return worst;
}

WaveletFilter build_meyer_filter(int resolution, TransitionProfile profile) {
  return WaveletFilter(resolution, profile);
}

Complex mother_wavelet_hat(const WaveletFilter& filter, double xi) {
  if (!(std::abs(xi) <= filter.max_frequency()))
    throw RangeError("mother_wavelet_hat: frequency beyond representable band");
  double product = filter(xi / 2.0 + kPi);
  // Factors m0(xi / 2^k) for k >= 2 are exactly 1 once |xi / 2^k| <= pi/3.
  for (double s = xi / 4.0; product != 0.0; s /= 2.0) {
    product *= filter(s);
    if (std::abs(s) <= kPi / 3.0) break;
  }
  const double angle = -xi / 2.0;
  return product * Complex(std::cos(angle), std::sin(angle));
}

namespace {

template <class F>
double integrate_support(F&& f) {
  using boost::math::quadrature::gauss_kronrod;
  // Breakpoints at multiples of pi/3 separate the smooth pieces of |Phi^|.
  double total = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double a = k * kPi / 3.0;
    const double b = (k + 1) * kPi / 3.0;
    total += gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-15);
  }
  return 2.0 * total / kTwoPi;  // integrand is even in xi
}

}  // namespace

double wavelet_energy(const WaveletFilter& filter) {
  return integrate_support([&](double xi) { return std::norm(mother_wavelet_hat(filter, xi)); });
}

double wavelet_log_energy(const WaveletFilter& filter) {
  return integrate_support([&](double xi) {
    return xi > 0.0 ? std::norm(mother_wavelet_hat(filter, xi)) / xi : 0.0;
  });
}

Complex VagueletRow::at(std::int64_t n) const {
  if (n > n_max || n < -n_max) throw RangeError("vaguelet coefficient beyond n_max");
  if (n < 0) return std::conj(at(-n));
  return static_cast<std::size_t>(n) < coeffs.size() ? coeffs[static_cast<std::size_t>(n)]
                                                      : Complex{};
}

namespace {

VagueletRow make_row(const WaveletFilter& filter, int j, std::int64_t n_max) {
  if (j < 0 || j > 40) throw ConfigError("vaguelet level out of range");
  if (n_max < (std::int64_t{1} << (j + 3)))
    throw RangeError("vaguelet truncation n_max = " + std::to_string(n_max) +
                     " below 2^(j+3) for level " + std::to_string(j));
  const double period = std::ldexp(1.0, j);
  const double top = kTwoPi * static_cast<double>(n_max) / period;
  if (top > filter.max_frequency())
    throw RangeError("vaguelet truncation exceeds the filter's representable band");
  VagueletRow row;
  row.j = j;
  row.n_max = n_max;
  // The filter vanishes on [2pi/3, pi], so Phi^ vanishes beyond 8pi/3.
  const std::int64_t n_top = std::min<std::int64_t>(
      n_max, static_cast<std::int64_t>(std::ceil(4.0 * period / 3.0)) + 1);
  row.coeffs.assign(static_cast<std::size_t>(n_top) + 1, Complex{});
  const double level_scale = std::ldexp(1.0, -j);
  double norm = 0.0;
  for (std::int64_t n = 1; n <= n_top; ++n) {
    const double xi = kTwoPi * static_cast<double>(n) / period;
    const Complex c = std::sqrt(level_scale) * mother_wavelet_hat(filter, xi) /
                      std::sqrt(kTwoPi * static_cast<double>(n));
    row.coeffs[static_cast<std::size_t>(n)] = c;
    norm += 2.0 * kTwoPi * static_cast<double>(n) * std::norm(c);
  }
  row.truncation_residual = 1.0 - norm;
  std::size_t last = row.coeffs.size();
  while (last > 1 && row.coeffs[last - 1] == Complex{}) --last;
  row.coeffs.resize(last);
  return row;
}

}  // namespace

std::vector<Complex> vaguelet_coeffs(const WaveletFilter& filter, DyadicIndex idx,
                                     std::int64_t n_max) {
  const VagueletRow row = make_row(filter, idx.j, n_max);
  std::vector<Complex> out(static_cast<std::size_t>(2 * n_max + 1));
  for (std::int64_t n = -n_max; n <= n_max; ++n)
    out[static_cast<std::size_t>(n + n_max)] = translation_phase(n, idx.l, idx.j) * row.at(n);
  return out;
}

VagueletTable::VagueletTable(const WaveletFilter& filter, int max_level, int n_max_shift,
                             VagueletScaling scaling)
    : scaling_(scaling), filter_hash_(filter.hash()) {
  if (max_level < 0) throw ConfigError("vaguelet table needs max_level >= 0");
  if (n_max_shift < 3) throw ConfigError("vaguelet table needs n_max >= 2^(j+3)");
  rows_.reserve(static_cast<std::size_t>(max_level) + 1);
  for (int j = 0; j <= max_level; ++j)
    rows_.push_back(make_row(filter, j, std::int64_t{1} << (j + n_max_shift)));
}

double VagueletTable::scale_factor() const {
  return scaling_ == VagueletScaling::kRaw ? 1.0 : std::sqrt(kPi);
}

const VagueletRow& VagueletTable::row(int j) const {
  if (j < 0 || j > max_level())
    throw ConfigError("vaguelet table has no level " + std::to_string(j) + " (max " +
                      std::to_string(max_level()) + ")");
  return rows_[static_cast<std::size_t>(j)];
}

std::vector<Complex> VagueletTable::coeffs(DyadicIndex idx) const {
  const VagueletRow& r = row(idx.j);
  std::vector<Complex> out(static_cast<std::size_t>(2 * r.n_max + 1));
  for (std::int64_t n = -r.n_max; n <= r.n_max; ++n)
    out[static_cast<std::size_t>(n + r.n_max)] =
        scale_factor() * translation_phase(n, idx.l, idx.j) * r.at(n);
  return out;
}

Complex VagueletTable::coeff(DyadicIndex idx, std::int64_t n) const {
  return scale_factor() * translation_phase(n, idx.l, idx.j) * row(idx.j).at(n);
}

double VagueletTable::max_truncation_residual() const {
  double worst = 0.0;
  for (const auto& r : rows_) worst = std::max(worst, std::abs(r.truncation_residual));
  return worst;
}

VagueletTable VagueletTable::with_scaling(VagueletScaling scaling) const {
  VagueletTable t;
  t.rows_ = rows_;
  t.scaling_ = scaling;
  t.filter_hash_ = filter_hash_;
  return t;
}

std::vector<double> evaluate_vaguelet_grid(const VagueletTable& table, DyadicIndex idx, int grid) {
  const std::vector<double> base = base_samples(table.row(idx.j), grid);
  // Translation by l 2^-j is an exact circular shift on a grid divisible by 2^j.
  const std::int64_t shift = idx.l * (grid >> idx.j);
  const double s = table.scale_factor();
  std::vector<double> out(base.size());
  for (std::int64_t i = 0; i < grid; ++i)
    out[static_cast<std::size_t>(i)] = s * base[static_cast<std::size_t>(((i - shift) % grid + grid) % grid)];
  return out;
}

std::vector<double> level_square_sum(const VagueletTable& table, int j, int grid) {
  const std::vector<double> base = base_samples(table.row(j), grid);
  const std::size_t period = static_cast<std::size_t>(grid >> j);
  const double s2 = table.scale_factor() * table.scale_factor();
  std::vector<double> folded(period, 0.0);
  for (std::size_t i = 0; i < base.size(); ++i) folded[i % period] += base[i] * base[i];
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s2 * folded[i % period];
  return out;
}

std::vector<std::vector<double>> cumulative_square_sums(const VagueletTable& table, int max_level,
                                                        int grid) {
  std::vector<std::vector<double>> out;
  std::vector<double> acc(static_cast<std::size_t>(grid), 0.0);
  for (int j = 0; j <= max_level; ++j) {
    const auto level = level_square_sum(table, j, grid);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += level[i];
    out.push_back(acc);
  }
  return out;
}

std::vector<double> far_square_sum(const VagueletTable& table, DyadicIndex interval,
                                   int first_level, int last_level, int grid) {
  if (first_level < 0 || last_level < first_level)
    throw ConfigError("far_square_sum: empty level range");
  check_grid(grid, last_level);
  const int m = interval.j;
  const std::int64_t begin = interval.l * (grid >> m);
  const std::int64_t count = grid >> m;
  std::vector<double> out(static_cast<std::size_t>(count), 0.0);
  const double s2 = table.scale_factor() * table.scale_factor();
  for (int j = first_level; j <= last_level; ++j) {
    const std::vector<double> base = base_samples(table.row(j), grid);
    const std::int64_t period = grid >> j;
    const int fine = std::max(j, m);
    const std::int64_t circle = std::int64_t{1} << fine;
    const std::int64_t width = std::int64_t{1} << (fine - j);
    const std::int64_t span3 = 3 * (std::int64_t{1} << (fine - m));
    const std::int64_t start3 = (interval.l - 1) * (std::int64_t{1} << (fine - m));
    for (std::int64_t l = 0; l < (std::int64_t{1} << j); ++l) {
      const std::int64_t offset = ((l * width - start3) % circle + circle) % circle;
      if (offset + width <= span3) continue;  // J inside 3I
      const std::int64_t shift = l * period;
      for (std::int64_t k = 0; k < count; ++k) {
        const std::int64_t i = begin + k;
        const double v = base[static_cast<std::size_t>(((i - shift) % grid + grid) % grid)];
        out[static_cast<std::size_t>(k)] += s2 * v * v;
      }
    }
  }
  return out;
}

Complex half_derivative_inner(const VagueletTable& table, DyadicIndex a, DyadicIndex b) {
  const std::int64_t n_max = std::min(table.row(a.j).n_max, table.row(b.j).n_max);
  Complex sum{};
  for (std::int64_t n = -n_max; n <= n_max; ++n) {
    if (n == 0) continue;
    sum += kTwoPi * static_cast<double>(std::abs(n)) * table.coeff(a, n) *
           std::conj(table.coeff(b, n));
  }
  return sum;
}

void add_level_spectrum(const VagueletTable& table, int j, std::span<const double> coeffs,
                        std::span<Complex> half) {
  const VagueletRow& r = table.row(j);
  const std::size_t count = std::size_t{1} << j;
  if (coeffs.size() != count) throw ConfigError("add_level_spectrum: need 2^j coefficients");
  if (half.size() < 2) throw RangeError("add_level_spectrum: empty spectrum");
  const int grid = static_cast<int>(2 * (half.size() - 1));
  check_grid(grid, j);
  if (r.coeffs.size() > half.size() - 1)
    throw RangeError("vaguelet spectrum exceeds grid Nyquist band");
  std::vector<Complex> a(count / 2 + 1);
  fft::forward_real(coeffs, a);
  const double s = table.scale_factor();
  for (std::size_t n = 1; n < r.coeffs.size(); ++n) {
    const std::size_t k = n & (count - 1);
    const Complex ak = k <= count / 2 ? a[k] : std::conj(a[count - k]);
    half[n] += s * ak * r.coeffs[n];
  }
}

void write_vaguelet_cache(const std::filesystem::path& path, DyadicIndex idx,
                          std::span<const Complex> coeffs) {
  if (coeffs.size() % 2 == 0) throw ConfigError("vaguelet cache row must have odd length");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
  bio::write_magic(os, "VGLT1");
  bio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(idx.j));
  bio::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(idx.l));
  bio::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(coeffs.size() / 2));
  for (const Complex& c : coeffs) {
    bio::write_le<double>(os, c.real());
    bio::write_le<double>(os, c.imag());
  }
  if (!os) throw NumericalError("write failed: " + path.string());
}

std::vector<Complex> read_vaguelet_cache(const std::filesystem::path& path, DyadicIndex& idx) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  bio::expect_magic(is, "VGLT1");
  const auto j = bio::read_le<std::uint32_t>(is);
  const auto l = bio::read_le<std::uint64_t>(is);
  const auto n_max = bio::read_le<std::uint64_t>(is);
  idx = DyadicIndex(static_cast<int>(j), static_cast<std::int64_t>(l));
  std::vector<Complex> out(static_cast<std::size_t>(2 * n_max + 1));
  for (auto& c : out) {
    const double re = bio::read_le<double>(is);
    const double im = bio::read_le<double>(is);
    c = {re, im};
  }
  return out;
}

std::string vaguelet_cache_name(std::uint64_t filter_hash, DyadicIndex idx, std::int64_t n_max) {
  return "vglt_" + bio::hex64(filter_hash) + "_j" + std::to_string(idx.j) + "_l" +
         std::to_string(idx.l) + "_n" + std::to_string(n_max) + ".bin";
}

}  // namespace cweld
