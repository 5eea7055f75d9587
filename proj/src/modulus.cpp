#include "cweld/modulus.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <fstream>
#include <json.hpp>

namespace cweld {

void AnnulusSpec::validate() const {
  if (!(inner > 0.0) || !(outer > inner)) throw ConfigError("annulus needs 0 < inner < outer");
}

double PolarSamples::rho(int i) const {
  return spec.inner * std::pow(spec.outer / spec.inner, double(i) / (radial - 1));
}

Complex PolarSamples::point(int i, int j) const {
  const double t = theta(j);
  double scale = 1.0;
  if (spec.shape == AnnulusShape::square) scale = 1.0 / std::max(std::abs(std::cos(t)), std::abs(std::sin(t)));
  return spec.center + rho(i) * scale * Complex(std::cos(t), std::sin(t));
}

PolarSamples polar_layout(const AnnulusSpec& spec, int radial, int angular) {
  spec.validate();
  if (radial < 2 || angular < 3) throw ConfigError("polar grid needs radial >= 2 and angular >= 3");
  PolarSamples s;
  s.spec = spec;
  s.radial = radial;
  s.angular = angular;
  return s;
}

PolarSamples sample_distortion(const BeltramiField& field, const AnnulusSpec& spec, int radial, int angular) {
  const GridSpec& g = field.grid;
  const double d = g.spacing();
  return sample_distortion(
      [&](Complex z) {
        const double cx = (z.real() + g.half_width) / d, cy = (z.imag() + g.half_width) / d;
        if (cx < 0.0 || cy < 0.0 || cx > g.n - 1 || cy > g.n - 1) return 1.0;
        const int c = std::min(static_cast<int>(cx), g.n - 2), r = std::min(static_cast<int>(cy), g.n - 2);
        const double tx = cx - c, ty = cy - r;
        const double m = (1 - ty) * ((1 - tx) * std::abs(field.at(r, c)) + tx * std::abs(field.at(r, c + 1))) +
                         ty * ((1 - tx) * std::abs(field.at(r + 1, c)) + tx * std::abs(field.at(r + 1, c + 1)));
        return (1.0 + m) / (1.0 - m);
      },
      spec, radial, angular);
}

double lehto_integral(const PolarSamples& samples) { return lehto_integral(samples, 0, samples.radial - 1); }

double lehto_integral(const PolarSamples& s, int first, int last) {
  if (first < 0 || last >= s.radial || first > last) throw ConfigError("Lehto ring range out of bounds");
  if (s.K.size() != static_cast<std::size_t>(s.radial) * s.angular) throw ConfigError("Lehto samples incomplete");
  auto ring = [&](int i) {
    double sum = 0.0;
    for (int j = 0; j < s.angular; ++j) {
      const double k = s.at(i, j);
      if (!(k >= 1.0)) throw ConfigError("distortion samples must satisfy K >= 1");
      sum += k;
    }
    return 1.0 / (sum * kTwoPi / s.angular);
  };
  const double step = std::log(s.spec.outer / s.spec.inner) / (s.radial - 1);
  double total = 0.0;
  for (int i = first; i < last; ++i) total += 0.5 * step * (ring(i) + ring(i + 1));
  return total;
}

namespace {

void check_levels(double D, double d) {
  if (!(d >= 2.0)) throw ConfigError("branching d must be >= 2");
  if (!(D >= 1.0)) throw ConfigError("level distortion bounds must satisfy D_i >= 1");
}

}  // namespace

SeriesBound modulus_upper_bound(std::span<const double> levels, double d, double C, double cutoff) {
  SeriesBound b;
  double sum = 0.0, last = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    check_levels(levels[i], d);
    last = levels[i] * std::pow(d, -double(i + 1));
    if (!std::isfinite(last)) {
      b.divergent = true;
      break;
    }
    sum += last;
    ++b.terms;
  }
  if (levels.empty()) check_levels(1.0, d);
  b.divergent = b.divergent || levels.empty() || last > cutoff * sum;
  b.value = C + C * sum;
  return b;
}

SeriesBound modulus_upper_bound(const std::function<double(int)>& level, double d, double C, int max_terms,
                                double cutoff) {
  if (max_terms < 1) throw ConfigError("max_terms must be >= 1");
  std::vector<double> levels;
  double sum = 0.0;
  for (int i = 1; i <= max_terms; ++i) {
    const double D = level(i);
    check_levels(D, d);
    levels.push_back(D);
    const double term = D * std::pow(d, -double(i));
    if (!std::isfinite(term)) break;
    sum += term;
    if (term <= cutoff * sum) break;
  }
  return modulus_upper_bound(levels, d, C, cutoff);
}

double constant_level_bound(double D, double d, double C) {
  check_levels(D, d);
  return C + C * D / (d - 1.0);
}

double sqrt_level_bound(double d, double C) {
  check_levels(1.0, d);
  return C + C / (std::sqrt(d) - 1.0);
}

namespace {

double ring_diameter(std::span<const Complex> pts) {
  double best = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) best = std::max(best, std::abs(pts[a] - pts[b]));
  return best;
}

}  // namespace

ModulusEstimate image_modulus_estimate(const std::function<Complex(Complex)>& F, const AnnulusSpec& spec,
                                       int radial, int angular) {
  if (radial < 3) throw ConfigError("image modulus needs radial >= 3");
  const auto layout = polar_layout(spec, radial, angular);
  ModulusEstimate est;
  est.spec = spec;
  est.source_modulus = spec.round_modulus();

  const int nodes = radial * angular;
  auto id = [angular](int i, int j) { return i * angular + (j % angular); };
  std::vector<Complex> P(static_cast<std::size_t>(nodes));
  for (int i = 0; i < radial; ++i)
    for (int j = 0; j < angular; ++j) P[std::size_t(id(i, j))] = F(layout.point(i, j));

  // Interior rings 1..radial-2 are unknowns; ring 0 holds u = 0, the last u = 1.
  const int unknowns = (radial - 2) * angular;
  auto unknown = [angular](int node) { return node - angular; };
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
  double boundary_energy = 0.0;  // outer-outer couplings with u = 1
  bool folded = false;

  auto add_triangle = [&](int a, int b, int c) {
    const int v[3] = {a, b, c};
    Complex e[3];
    for (int k = 0; k < 3; ++k) e[k] = P[std::size_t(v[(k + 2) % 3])] - P[std::size_t(v[(k + 1) % 3])];
    const double area = 0.5 * (e[0].real() * e[1].imag() - e[0].imag() * e[1].real());
    if (!(area > 0.0)) folded = true;
    const double A = std::abs(area);
    if (A == 0.0) return;
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        const double kpq = (e[p].real() * e[q].real() + e[p].imag() * e[q].imag()) / (4.0 * A);
        const int rp = v[p] / angular, rq = v[q] / angular;
        const bool up = rp > 0 && rp < radial - 1, uq = rq > 0 && rq < radial - 1;
        if (up && uq) trip.emplace_back(unknown(v[p]), unknown(v[q]), kpq);
        else if (up && rq == radial - 1) rhs[unknown(v[p])] -= kpq;
        else if (rp == radial - 1 && rq == radial - 1) boundary_energy += kpq;
      }
  };
  for (int i = 0; i + 1 < radial; ++i)
    for (int j = 0; j < angular; ++j) {
      add_triangle(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      add_triangle(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }

  Eigen::SparseMatrix<double> K(unknowns, unknowns);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
  if (solver.info() != Eigen::Success) throw NumericalError("modulus stiffness matrix is singular");
  const Eigen::VectorXd u = solver.solve(rhs);
  // energy = u^T K u + 2 u^T K_{I,outer} 1 + 1^T K_{outer} 1 = boundary_energy - u . rhs
  const double energy = boundary_energy - u.dot(rhs);
  if (!(energy > 0.0) || !std::isfinite(energy)) throw NumericalError("non-positive Dirichlet energy");
  est.fem_modulus = 1.0 / energy;

  const std::span<const Complex> all(P);
  const double inner_diam = ring_diameter(all.subspan(0, std::size_t(angular)));
  const double outer_diam = ring_diameter(all.subspan(std::size_t(radial - 1) * angular, std::size_t(angular)));
  est.diameter_ratio = outer_diam / inner_diam;
  est.diameter_bound = std::log(16.0 * est.diameter_ratio) / kPi;

  if (folded) {
    est.unreliable = true;
    est.reason = "mapped mesh folds";
  } else if (est.diameter_ratio < 1.05) {
    est.unreliable = true;
    est.reason = "image diameters nearly equal";
  }
  return est;
}

ModulusEstimate image_modulus_estimate(const SolvedMap& map, const AnnulusSpec& spec, int radial, int angular) {
  return image_modulus_estimate([&map](Complex z) { return map(z); }, spec, radial, angular);
}

void write_modulus_report(const std::filesystem::path& path, const ModulusEstimate& e, double lehto,
                          double distortion_bound) {
  nlohmann::json j;
  j["spec"] = {{"center", {e.spec.center.real(), e.spec.center.imag()}},
               {"inner", e.spec.inner},
               {"outer", e.spec.outer},
               {"shape", e.spec.shape == AnnulusShape::round ? "round" : "square"}};
  j["lehto"] = lehto;
  j["modulus_estimate"] = {{"fem", e.fem_modulus},
                           {"diameter_upper_bound", e.diameter_bound},
                           {"diameter_ratio", e.diameter_ratio},
                           {"source", e.source_modulus}};
  const double lo = e.source_modulus / distortion_bound, hi = e.source_modulus * distortion_bound;
  j["bracket"] = {lo, hi};
  j["flags"] = {{"unreliable", e.unreliable},
                {"reason", e.reason},
                {"in_bracket", e.fem_modulus >= lo && e.fem_modulus <= hi}};
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace cweld
