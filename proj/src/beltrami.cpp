#include "cweld/beltrami.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>

#include "cweld/fft.hpp"

namespace cweld {

namespace {

void check_grid(const GridSpec& grid) {
  if (grid.n < 8 || !is_pow2(static_cast<std::uint64_t>(grid.n)))
    throw ConfigError("solver grid size must be a power of two >= 8");
  if (grid.half_width < 2.0)
    throw ConfigError("solver box half-width must be >= 2 (unit-disk support plus margin 1)");
}

// Applies a Fourier multiplier symbol(xi), xi = kx + i ky in angular units.
template <class Symbol>
std::vector<Complex> apply_multiplier(std::span<const Complex> g, const GridSpec& grid, Symbol&& symbol) {
  const int n = grid.n;
  if (g.size() != grid.size()) throw ConfigError("field does not match the grid");
  std::vector<Complex> spec(grid.size()), out(grid.size());
  fft::forward_2d(n, n, g, spec);
  const double k0 = kTwoPi / (2.0 * grid.half_width);
  const double norm = 1.0 / (double(n) * n);
  for (int r = 0; r < n; ++r) {
    const double ky = k0 * fft::signed_frequency(r, n);
    for (int c = 0; c < n; ++c) {
      const double kx = k0 * fft::signed_frequency(c, n);
      auto& s = spec[static_cast<std::size_t>(r) * n + c];
      s = (kx == 0.0 && ky == 0.0) ? Complex{} : s * symbol(Complex(kx, ky)) * norm;
    }
  }
  fft::backward_2d(n, n, spec, out);
  return out;
}

// Cell-integrated free-space kernels, exact for piecewise-constant input.
// With u + iv = z - zeta ranging over a source cell of side d:
//   Cauchy:   (1/pi) int 1/(u + iv) dA, mixed antiderivative A - iB with
//             A = v ln|w| + u atan(v/u), B = u ln|w| + v atan(u/v);
//   Beurling: -(1/pi) int 1/(u + iv)^2 dA, antiderivative -atan(v/u) + i ln|w|.
// Corner offsets are odd multiples of d/2, so no corner touches an axis; the
// target's own cell vanishes by symmetry for both kernels.
double corner_sum(double u0, double u1, double v0, double v1, double (*f)(double, double)) {
  return f(u1, v1) - f(u0, v1) - f(u1, v0) + f(u0, v0);
}
double cauchy_re(double u, double v) {
  return 0.5 * v * std::log(u * u + v * v) + u * std::atan(v / u);
}
double cauchy_im(double u, double v) {
  return 0.5 * u * std::log(u * u + v * v) + v * std::atan(u / v);
}
double beurling_re(double u, double v) { return -std::atan(v / u); }
double beurling_im(double u, double v) { return 0.5 * std::log(u * u + v * v); }

// Linear (non-periodic) convolution of an n x n field with a kernel given on
// offsets -(n-1)..(n-1), through a 2n x 2n zero-padded FFT.
class FreeSpaceOperator {
 public:
  template <class Kernel>
  FreeSpaceOperator(int n, Kernel&& kernel) : n_(n), m_(2 * n), spec_(std::size_t(m_) * m_) {
    std::vector<Complex> k(spec_.size());
    for (int a = -(n - 1); a <= n - 1; ++a)
      for (int b = -(n - 1); b <= n - 1; ++b)
        k[std::size_t((a + m_) % m_) * m_ + std::size_t((b + m_) % m_)] = kernel(a, b);
    fft::forward_2d(m_, m_, k, spec_);
    for (auto& s : spec_) s /= double(m_) * m_;
  }

  std::vector<Complex> apply(std::span<const Complex> g) const {
    std::vector<Complex> pad(spec_.size()), f(spec_.size());
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) pad[std::size_t(r) * m_ + c] = g[std::size_t(r) * n_ + c];
    fft::forward_2d(m_, m_, pad, f);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= spec_[i];
    fft::backward_2d(m_, m_, f, pad);
    std::vector<Complex> out(std::size_t(n_) * n_);
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) out[std::size_t(r) * n_ + c] = pad[std::size_t(r) * m_ + c];
    return out;
  }

 private:
  int n_, m_;
  std::vector<Complex> spec_;
};

FreeSpaceOperator cell_cauchy(int n, double d) {
  return FreeSpaceOperator(n, [d](int a, int b) {
    if (a == 0 && b == 0) return Complex{};
    const double u0 = (b - 0.5) * d, u1 = (b + 0.5) * d, v0 = (a - 0.5) * d, v1 = (a + 0.5) * d;
    return Complex(corner_sum(u0, u1, v0, v1, cauchy_re), -corner_sum(u0, u1, v0, v1, cauchy_im)) / kPi;
  });
}

FreeSpaceOperator cell_beurling(int n, double d) {
  return FreeSpaceOperator(n, [d](int a, int b) {
    if (a == 0 && b == 0) return Complex{};
    const double u0 = (b - 0.5) * d, u1 = (b + 0.5) * d, v0 = (a - 0.5) * d, v1 = (a + 0.5) * d;
    return -Complex(corner_sum(u0, u1, v0, v1, beurling_re), corner_sum(u0, u1, v0, v1, beurling_im)) / kPi;
  });
}

Complex cell_cauchy_integral(Complex w, double side) {
  const double u0 = w.real() - 0.5 * side, u1 = w.real() + 0.5 * side;
  const double v0 = w.imag() - 0.5 * side, v1 = w.imag() + 0.5 * side;
  return Complex(corner_sum(u0, u1, v0, v1, cauchy_re), -corner_sum(u0, u1, v0, v1, cauchy_im)) / kPi;
}

// h vanishes off the closed disk, so a cell cut by the unit circle carries
// its mass h d^2 on the covered part only. Re-spreads that mass over the
// covered sub-cells and corrects targets within kWindow cells; the shift is
// a dipole of size O(d^3), so farther targets change by O(d^3 / r^2).
void clip_to_disk(std::vector<Complex>& ch, std::span<const Complex> h, const GridSpec& grid) {
  constexpr int kSub = 9, kWindow = 3;  // odd kSub keeps sub-cell corners off every target
  const int n = grid.n;
  const double d = grid.spacing(), e = d / kSub;
  const double reach = std::sqrt(0.5) * d;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const Complex hc = h[std::size_t(r) * n + c];
      const Complex zc = grid.point(r, c);
      if (hc == Complex{} || std::abs(std::abs(zc) - 1.0) > reach) continue;
      std::vector<Complex> covered;
      for (int a = 0; a < kSub; ++a)
        for (int b = 0; b < kSub; ++b) {
          const Complex q = zc + Complex((b + 0.5) * e - 0.5 * d, (a + 0.5) * e - 0.5 * d);
          if (std::abs(q) < 1.0) covered.push_back(q);
        }
      if (covered.size() == std::size_t(kSub) * kSub) continue;
      if (covered.empty()) continue;  // node mass has no covered part to move to
      const Complex density = hc * (double(kSub) * kSub / double(covered.size()));
      for (int tr = std::max(0, r - kWindow); tr <= std::min(n - 1, r + kWindow); ++tr)
        for (int tc = std::max(0, c - kWindow); tc <= std::min(n - 1, c + kWindow); ++tc) {
          const Complex zt = grid.point(tr, tc);
          Complex clipped;
          for (const Complex q : covered) clipped += cell_cauchy_integral(zt - q, e);
          const Complex full = (tr == r && tc == c) ? Complex{} : cell_cauchy_integral(zt - zc, d);
          ch[std::size_t(tr) * n + tc] += density * clipped - hc * full;
        }
    }
}

double l2(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

}  // namespace

BeltramiField truncate_coefficient(const BeltramiField& field, int l) {
  if (l < 1) throw ConfigError("truncation index must be >= 1");
  BeltramiField out = field;
  const double s = double(l) / double(l + 1);
  for (auto& m : out.mu) m *= s;
  out.provenance = field.provenance + " | l=" + std::to_string(l);
  return out;
}

SpectralResult beurling_transform(std::span<const Complex> g, const GridSpec& grid) {
  SpectralResult r;
  r.values = apply_multiplier(g, grid, [](Complex xi) { return std::conj(xi) / xi; });
  double edge = 0.0, peak = 0.0;
  const int n = grid.n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = std::abs(g[static_cast<std::size_t>(i) * n + j]);
      peak = std::max(peak, a);
      if (i == 0 || j == 0 || i == n - 1 || j == n - 1) edge = std::max(edge, a);
    }
  r.aliasing_risk = peak > 0.0 && edge > 1e-3 * peak;
  return r;
}

std::vector<Complex> cauchy_transform_periodic(std::span<const Complex> g, const GridSpec& grid) {
  return apply_multiplier(g, grid, [](Complex xi) { return Complex(0.0, -2.0) / xi; });
}

Complex SolvedMap::operator()(Complex z) const {
  const double d = grid.spacing();
  const double cx = (z.real() + grid.half_width) / d, cy = (z.imag() + grid.half_width) / d;
  if (cx < 0.0 || cy < 0.0 || cx > grid.n - 1 || cy > grid.n - 1)
    throw RangeError("interpolation point outside the solver box");
  const int c = std::min(static_cast<int>(cx), grid.n - 2), r = std::min(static_cast<int>(cy), grid.n - 2);
  const double tx = cx - c, ty = cy - r;
  auto disp = [&](int rr, int cc) { return at(rr, cc) - grid.point(rr, cc); };
  const Complex v = (1 - ty) * ((1 - tx) * disp(r, c) + tx * disp(r, c + 1)) +
                    ty * ((1 - tx) * disp(r + 1, c) + tx * disp(r + 1, c + 1));
  return z + v;
}

BeltramiField radial_stretch_field(double K, const GridSpec& grid, int supersample) {
  if (!(K >= 1.0)) throw ConfigError("radial stretch needs K >= 1");
  const double k = (K - 1.0) / (K + 1.0);
  return beltrami_from_function(
      [k](Complex z) { return std::norm(z) == 0.0 ? Complex{} : k * z / std::conj(z); }, grid,
      "radial-stretch K=" + format_number(K), supersample);
}

Complex radial_stretch_map(double K, Complex z) {
  const double r = std::abs(z);
  return r < 1.0 ? z * std::pow(r, K - 1.0) : z;
}

SolvedMap solve_principal(const BeltramiField& field, const SolverConfig& config) {
  const GridSpec& grid = config.grid;
  check_grid(grid);
  if (field.grid.n != grid.n || field.grid.half_width != grid.half_width)
    throw ConfigError("Beltrami field grid does not match the solver grid");
  if (config.truncation < 1) throw ConfigError("truncation index must be >= 1");
  if (!(config.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  const double cap = double(config.truncation) / (config.truncation + 1);
  SolvedMap out;
  out.grid = grid;
  out.sup_mu = field.sup_abs();
  if (out.sup_mu > cap * (1.0 + 1e-12))
    throw ConfigError("sup|mu| = " + format_number(out.sup_mu) + " exceeds l/(l+1) = " +
                      format_number(cap) + "; truncate the coefficient first");

  const std::size_t N = grid.size();
  const auto S = cell_beurling(grid.n, grid.spacing());
  std::vector<Complex> h(N, Complex{}), fz(N);
  for (int it = 0;; ++it) {
    const auto s = S.apply(h);
    double num = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      fz[i] = 1.0 + s[i];
      num += std::norm(h[i] - field.mu[i] * fz[i]);
    }
    out.residual = std::sqrt(num) / l2(fz);
    out.residual_history.push_back(out.residual);
    out.iterations = it;
    if (out.residual <= config.tolerance) break;
    if (it >= config.max_iterations)
      throw NumericalError("Beltrami iteration did not converge in " + std::to_string(it) +
                           " iterations; residual " + format_number(out.residual) + " > " +
                           format_number(config.tolerance));
    for (std::size_t i = 0; i < N; ++i) h[i] = field.mu[i] * fz[i];
  }
  auto ch = cell_cauchy(grid.n, grid.spacing()).apply(h);
  clip_to_disk(ch, h, grid);
  out.F.resize(N);
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c) {
      const auto i = static_cast<std::size_t>(r) * grid.n + c;
      out.F[i] = grid.point(r, c) + ch[i];
    }
  return out;
}

namespace {

double orient(Complex a, Complex b, Complex c) {
  return (b.real() - a.real()) * (c.imag() - a.imag()) - (b.imag() - a.imag()) * (c.real() - a.real());
}

bool on_segment(Complex a, Complex b, Complex p) {
  return std::min(a.real(), b.real()) <= p.real() && p.real() <= std::max(a.real(), b.real()) &&
         std::min(a.imag(), b.imag()) <= p.imag() && p.imag() <= std::max(a.imag(), b.imag());
}

bool segments_meet(Complex a, Complex b, Complex c, Complex d) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0)))
    return true;
  return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
         (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

}  // namespace

std::vector<std::pair<int, int>> find_self_intersections(std::span<const Complex> closed) {
  const int m = static_cast<int>(closed.size()) - 1;  // segment count
  std::vector<std::pair<int, int>> hits;
  if (m < 3) return hits;
  auto lo = [&](int s) { return std::min(closed[s].real(), closed[s + 1].real()); };
  auto hi = [&](int s) { return std::max(closed[s].real(), closed[s + 1].real()); };
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lo(a) < lo(b); });
  std::vector<int> active;
  for (int s : order) {
    const double x = lo(s);
    std::erase_if(active, [&](int t) { return hi(t) < x; });
    for (int t : active) {
      const int gap = std::abs(s - t);
      if (gap == 1 || gap == m - 1) continue;
      if (segments_meet(closed[s], closed[s + 1], closed[t], closed[t + 1]))
        hits.emplace_back(std::min(s, t), std::max(s, t));
    }
    active.push_back(s);
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

JordanCurve extract_curve(const SolvedMap& map, int samples) {
  if (samples < 3) throw ConfigError("curve needs at least 3 samples");
  JordanCurve c;
  c.points.reserve(static_cast<std::size_t>(samples) + 1);
  for (int k = 0; k < samples; ++k) c.points.push_back(map(std::polar(1.0, kTwoPi * k / samples)));
  c.points.push_back(c.points.front());
  c.intersections = find_self_intersections(c.points);
  return c;
}

double curve_distance(const JordanCurve& a, const JordanCurve& b) {
  if (a.points.size() != b.points.size()) throw ConfigError("curves sampled differently");
  double d = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) d = std::max(d, std::abs(a.points[i] - b.points[i]));
  return d;
}

double boundary_deviation(const SolvedMap& map, double width) {
  double d = 0.0;
  for (int r = 0; r < map.grid.n; ++r)
    for (int c = 0; c < map.grid.n; ++c) {
      const Complex z = map.grid.point(r, c);
      const double a = std::abs(z);
      if (a >= 1.0 && a <= 1.0 + width) d = std::max(d, std::abs(map.at(r, c) - z));
    }
  return d;
}

double inverse_continuity_ratio(const SolvedMap& map, double distortion_integral,
                                std::span<const std::pair<Complex, Complex>> pairs) {
  double worst = 0.0;
  for (const auto& [a, b] : pairs) {
    const Complex fa = map(a), fb = map(b);
    const double gap = std::abs(fa - fb);
    if (gap == 0.0) continue;
    const double bound = 16.0 * kPi * kPi * (std::norm(fa) + std::norm(fb) + distortion_integral) /
                         std::log(std::exp(1.0) + 1.0 / gap);
    worst = std::max(worst, std::abs(a - b) / bound);
  }
  return worst;
}

void write_curve_csv(const std::filesystem::path& path, const JordanCurve& curve) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << "index,re,im\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.points.size(); ++i)
    os << i << ',' << curve.points[i].real() << ',' << curve.points[i].imag() << '\n';
}

void write_curve_svg(const std::filesystem::path& path, const JordanCurve& curve) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : curve.points) {
    x0 = std::min(x0, p.real());
    x1 = std::max(x1, p.real());
    y0 = std::min(y0, p.imag());
    y1 = std::max(y1, p.imag());
  }
  const double pad = 0.05 * std::max(x1 - x0, y1 - y0);
  os << std::setprecision(8) << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\""
     << x0 - pad << ' ' << -(y1 + pad) << ' ' << (x1 - x0) + 2 * pad << ' ' << (y1 - y0) + 2 * pad
     << "\">\n<polyline fill=\"none\" stroke=\"black\" stroke-width=\"" << 0.002 * (x1 - x0 + 2 * pad)
     << "\" points=\"";
  for (const auto& p : curve.points) os << p.real() << ',' << -p.imag() << ' ';
  os << "\"/>\n</svg>\n";
}

void write_solver_telemetry(const std::filesystem::path& path, const SolvedMap& map,
                            const BeltramiField& field) {
  nlohmann::json j;
  j["grid"] = map.grid.n;
  j["half_width"] = map.grid.half_width;
  j["iterations"] = map.iterations;
  j["residual"] = map.residual;
  j["residual_history"] = map.residual_history;
  j["sup_mu"] = map.sup_mu;
  j["clip_fraction"] = field.clip_fraction();
  j["clipped"] = field.clipped;
  j["provenance"] = field.provenance;
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace cweld
