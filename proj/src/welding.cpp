#include "cweld/welding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>

#include "cweld/binary_io.hpp"
#include "cweld/parallel.hpp"

namespace cweld {

CircleHomeomorphism::CircleHomeomorphism(std::vector<double> samples) : h_(std::move(samples)) {
  if (h_.size() < 2) throw ConfigError("homeomorphism needs at least one interval");
  if (h_.front() != 0.0 || h_.back() != 1.0)
    throw ConfigError("homeomorphism samples must start at 0 and end at 1");
  for (std::size_t i = 1; i < h_.size(); ++i)
    if (!(h_[i] > h_[i - 1]))
      throw ConfigError("homeomorphism samples not strictly increasing at node " + std::to_string(i));
  const double dx = 1.0 / intervals();
  prefix_.resize(h_.size());
  prefix_[0] = 0.0;
  for (std::size_t i = 1; i < h_.size(); ++i) prefix_[i] = prefix_[i - 1] + 0.5 * dx * (h_[i] + h_[i - 1]);
}

CircleHomeomorphism CircleHomeomorphism::identity(int intervals) {
  if (intervals < 1) throw ConfigError("identity needs at least one interval");
  std::vector<double> s(static_cast<std::size_t>(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) s[static_cast<std::size_t>(i)] = double(i) / intervals;
  s.back() = 1.0;
  return CircleHomeomorphism(std::move(s));
}

double CircleHomeomorphism::operator()(double x) const {
  const double k = std::floor(x);
  const double pos = (x - k) * intervals();
  const int i = std::min(static_cast<int>(pos), intervals() - 1);
  const double t = pos - i;
  const auto u = static_cast<std::size_t>(i);
  return h_[u] + t * (h_[u + 1] - h_[u]) + k;
}

double CircleHomeomorphism::inverse(double y) const {
  const double k = std::floor(y);
  const double f = y - k;
  auto it = std::upper_bound(h_.begin(), h_.end(), f);
  const auto i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - h_.begin() - 1, 0,
                                                                      intervals() - 1));
  const double t = (f - h_[i]) / (h_[i + 1] - h_[i]);
  return (static_cast<double>(i) + t) / intervals() + k;
}

double CircleHomeomorphism::primitive(double x) const {
  const double k = std::floor(x);
  const double f = x - k;
  const double pos = f * intervals();
  const int i = std::min(static_cast<int>(pos), intervals() - 1);
  const double t = pos - i;
  const auto u = static_cast<std::size_t>(i);
  const double g = prefix_[u] + t / intervals() * (h_[u] + 0.5 * t * (h_[u + 1] - h_[u]));
  // G(f + k) = G(f) + k G(1) + k f + k (k - 1) / 2
  return g + k * prefix_.back() + k * f + 0.5 * k * (k - 1.0);
}

CircleHomeomorphism homeomorphism_from_measure(const DyadicMassTree& tree, int level) {
  if (level < 0) level = tree.depth();
  if (level > tree.depth()) throw ConfigError("homeomorphism level exceeds tree depth");
  const auto masses = tree.level(level);
  std::vector<double> s(masses.size() + 1, 0.0);
  for (std::size_t i = 0; i < masses.size(); ++i) s[i + 1] = s[i] + masses[i];
  const double total = s.back();
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("measure has no positive mass");
  for (auto& v : s) v /= total;
  s.back() = 1.0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1]))
      throw NumericalError("cumulative mass stalls at node " + std::to_string(i) +
                           "; the measure is too uneven for double precision at level " +
                           std::to_string(level));
  CircleHomeomorphism h(std::move(s));
  h.label = tree.schedule_label.empty() ? "measure" : tree.schedule_label;
  return h;
}

CircleHomeomorphism compose_two_gff(const CircleHomeomorphism& h1, const CircleHomeomorphism& h2) {
  const int n = std::max(h1.intervals(), h2.intervals());
  std::vector<double> s(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) s[static_cast<std::size_t>(i)] = h1(h2.inverse(double(i) / n));
  s.front() = 0.0;
  s.back() = 1.0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw NumericalError("composition lost strict monotonicity");
  CircleHomeomorphism out(std::move(s));
  out.label = h1.label + "*inv(" + h2.label + ")";
  return out;
}

BeurlingAhlforsExtension::BeurlingAhlforsExtension(CircleHomeomorphism h)
    : h_(std::move(h)), c0_(h_.mean_offset()) {}

Complex BeurlingAhlforsExtension::operator()(double x, double y) const {
  if (!(y > 0.0)) throw RangeError("extension is defined for y > 0");
  if (y > 2.0) return {x, y};
  if (y >= 1.0) return Complex(x, y) + (2.0 - y) * c0_;
  const double p = h_.primitive(x + y), q = h_.primitive(x - y), r = h_.primitive(x);
  return {(p - q) / (2.0 * y), (p - 2.0 * r + q) / y};
}

std::pair<Complex, Complex> BeurlingAhlforsExtension::jacobian(double x, double y) const {
  if (!(y > 0.0)) throw RangeError("extension is defined for y > 0");
  if (y > 2.0) return {Complex(1.0, 0.0), Complex(0.0, 1.0)};
  if (y >= 1.0) return {Complex(1.0, 0.0), Complex(-c0_, 1.0)};
  const double p = h_.primitive(x + y), q = h_.primitive(x - y), r = h_.primitive(x);
  const double a = h_(x + y), b = h_(x - y), c = h_(x);
  const Complex fx((a - b) / (2.0 * y), (a - 2.0 * c + b) / y);
  const Complex fy((a + b) / (2.0 * y) - (p - q) / (2.0 * y * y),
                   (a - b) / y - (p - 2.0 * r + q) / (y * y));
  return {fx, fy};
}

Complex BeurlingAhlforsExtension::beltrami(double x, double y) const {
  const auto [fx, fy] = jacobian(x, y);
  const Complex i(0.0, 1.0);
  return (fx + i * fy) / (fx - i * fy);
}

Complex BeurlingAhlforsExtension::disk_map(Complex z) const {
  const double r = std::abs(z);
  if (r == 0.0) return {};
  const double x = std::arg(z) / kTwoPi;
  if (r == 1.0) return std::polar(1.0, kTwoPi * h_(x));
  if (r > 1.0) return 1.0 / std::conj(disk_map(1.0 / std::conj(z)));
  const Complex f = (*this)(x, -std::log(r) / kTwoPi);
  return std::polar(std::exp(-kTwoPi * f.imag()), kTwoPi * f.real());
}

double BeltramiField::sup_abs() const {
  double s = 0.0;
  for (const auto& m : mu) s = std::max(s, std::abs(m));
  return s;
}

double BeltramiField::distortion(std::size_t i) const {
  const double a = std::abs(mu[i]);
  return (1.0 + a) / (1.0 - a);
}

double BeltramiField::distortion_integral() const {
  double s = 0.0;
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c)
      if (std::abs(grid.point(r, c)) < 1.0) s += distortion(static_cast<std::size_t>(r) * grid.n + c);
  return s * grid.spacing() * grid.spacing();
}

BeltramiField beltrami_from_extension(const BeurlingAhlforsExtension& ext, const GridSpec& grid,
                                      double max_clip_fraction) {
  if (grid.n < 4) throw ConfigError("Beltrami grid too small");
  if (grid.half_width < 1.0) throw ConfigError("Beltrami grid must cover the unit disk");
  BeltramiField f;
  f.grid = grid;
  f.provenance = "beurling-ahlfors(" + ext.homeomorphism().label + ")";
  f.mu.assign(grid.size(), Complex{});
  const double d = grid.spacing();
  const Complex i(0.0, 1.0);
  std::vector<std::size_t> inside(static_cast<std::size_t>(grid.n), 0),
      clipped(static_cast<std::size_t>(grid.n), 0);
  parallel_for(static_cast<std::size_t>(grid.n), [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int c = 0; c < grid.n; ++c) {
      const Complex z = grid.point(r, c);
      if (std::abs(z) >= 1.0) continue;
      ++inside[row];
      const Complex px = (ext.disk_map(z + d) - ext.disk_map(z - d)) / (2.0 * d);
      const Complex py = (ext.disk_map(z + i * d) - ext.disk_map(z - i * d)) / (2.0 * d);
      const Complex dz = 0.5 * (px - i * py), dzbar = 0.5 * (px + i * py);
      Complex m = dzbar / dz;
      if (!std::isfinite(m.real()) || !std::isfinite(m.imag())) {
        m = Complex(kMuClip, 0.0);
        ++clipped[row];
      } else if (std::abs(m) > kMuClip) {
        m *= kMuClip / std::abs(m);
        ++clipped[row];
      }
      f.mu[row * static_cast<std::size_t>(grid.n) + static_cast<std::size_t>(c)] = m;
    }
  });
  for (std::size_t r = 0; r < inside.size(); ++r) {
    f.inside += inside[r];
    f.clipped += clipped[r];
  }
  if (f.clip_fraction() > max_clip_fraction)
    throw NumericalError("Beltrami coefficient clipped at " + std::to_string(f.clipped) + " of " +
                         std::to_string(f.inside) + " disk nodes; refine the grid (n = " +
                         std::to_string(grid.n) + ")");
  return f;
}

DistortionReport distortion_K(const DyadicMassTree& tree, DyadicIndex I) {
  if (I.j < 2) throw ConfigError("j(I) overlaps itself below level 2");
  if (tree.depth() < I.j + 5)
    throw ConfigError("distortion_K needs tree depth " + std::to_string(I.j + 5) + ", have " +
                      std::to_string(tree.depth()));
  const auto fine = tree.level(I.j + 5);
  std::vector<double> m;
  m.reserve(96);
  for (int off = -1; off <= 1; ++off) {
    const auto nb = I.shifted(off);
    for (std::int64_t k = 0; k < 32; ++k) m.push_back(fine[static_cast<std::size_t>(nb.l * 32 + k)]);
  }
  DistortionReport rep;
  rep.deltas.resize(m.size() * m.size());
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t b = 0; b < m.size(); ++b) {
      const double d = m[a] / m[b] + m[b] / m[a];
      rep.deltas[a * m.size() + b] = d;
      rep.K += d;
    }
  return rep;
}

double whitney_max_distortion(const BeurlingAhlforsExtension& ext, DyadicIndex I, int samples) {
  if (samples < 2) throw ConfigError("Whitney lattice needs at least 2 samples per side");
  const double y0 = 0.5 * I.length(), y1 = I.length();
  double worst = 1.0;
  for (int a = 0; a < samples; ++a)
    for (int b = 0; b < samples; ++b) {
      const double x = I.left() + I.length() * a / (samples - 1);
      const double y = y0 + (y1 - y0) * b / (samples - 1);
      const double m = std::abs(ext.beltrami(x, y));
      worst = std::max(worst, m < 1.0 ? (1.0 + m) / (1.0 - m) : std::numeric_limits<double>::infinity());
    }
  return worst;
}

void write_homeomorphism_csv(const std::filesystem::path& path, const CircleHomeomorphism& h) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << "x,h\n" << std::setprecision(17);
  const auto s = h.samples();
  for (int i = 0; i <= h.intervals(); ++i)
    os << double(i) / h.intervals() << ',' << s[static_cast<std::size_t>(i)] << '\n';
}

void write_beltrami_binary(const std::filesystem::path& path, const BeltramiField& field) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string());
    bio::write_magic(os, "BMF1");
    bio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid.n));
    bio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid.n));
    const double L = field.grid.half_width;
    for (double v : {-L, L, -L, L}) bio::write_le<double>(os, v);
    for (const auto& m : field.mu) {
      bio::write_le<double>(os, m.real());
      bio::write_le<double>(os, m.imag());
    }
  }
  nlohmann::json j;
  j["provenance"] = field.provenance;
  j["inside"] = field.inside;
  j["clipped"] = field.clipped;
  j["clip_fraction"] = field.clip_fraction();
  j["clip_threshold"] = kMuClip;
  std::ofstream(path.string() + ".json") << j.dump(2) << '\n';
}

BeltramiField read_beltrami_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  bio::expect_magic(is, "BMF1");
  const auto nx = bio::read_le<std::uint32_t>(is), ny = bio::read_le<std::uint32_t>(is);
  if (nx != ny || nx < 4 || nx > (1u << 14)) throw ConfigError("BMF1: unsupported grid shape");
  const double xmin = bio::read_le<double>(is), xmax = bio::read_le<double>(is);
  bio::read_le<double>(is);
  bio::read_le<double>(is);
  BeltramiField f;
  f.grid = GridSpec{static_cast<int>(nx), 0.5 * (xmax - xmin)};
  f.mu.resize(f.grid.size());
  for (auto& m : f.mu) {
    const double re = bio::read_le<double>(is);
    m = Complex(re, bio::read_le<double>(is));
  }
  for (int r = 0; r < f.grid.n; ++r)
    for (int c = 0; c < f.grid.n; ++c)
      if (std::abs(f.grid.point(r, c)) < 1.0) ++f.inside;
  if (std::ifstream js{path.string() + ".json"}) {
    const auto j = nlohmann::json::parse(js);
    f.provenance = j.value("provenance", "");
    f.clipped = j.value("clipped", std::size_t{0});
  }
  return f;
}

}  // namespace cweld
