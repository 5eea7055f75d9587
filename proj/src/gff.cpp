#include "cweld/gff.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>

#include "cweld/binary_io.hpp"
#include "cweld/fft.hpp"

namespace cweld {

FieldSample sample_gff_fourier(std::uint64_t seed, int n_modes, int grid) {
  if (grid < 2 || !is_pow2(static_cast<std::uint64_t>(grid)))
    throw ConfigError("field grid must be a power of two");
  if (n_modes < 0) throw ConfigError("mode cutoff must be nonnegative");
  if (n_modes > grid / 2)
    throw RangeError("mode cutoff " + std::to_string(n_modes) + " aliases on a grid of " +
                     std::to_string(grid));
  const CounterRng cos_rng(seed, Stream::kFourierCos);
  const CounterRng sin_rng(seed, Stream::kFourierSin);
  std::vector<Complex> half(static_cast<std::size_t>(grid / 2 + 1), Complex{});
  for (int n = 1; n <= n_modes; ++n) {
    const double a = cos_rng.normal(static_cast<std::uint64_t>(n));
    const double b = sin_rng.normal(static_cast<std::uint64_t>(n));
    const double r = 1.0 / std::sqrt(static_cast<double>(n));
    // The Nyquist bin enters the real synthesis once and its sine vanishes.
    half[static_cast<std::size_t>(n)] =
        n == grid / 2 ? Complex(a * r, 0.0) : Complex(0.5 * a * r, -0.5 * b * r);
  }
  FieldSample out;
  out.values.resize(static_cast<std::size_t>(grid));
  fft::backward_real(half, out.values);
  out.representation = Representation::kFourier;
  out.truncation = n_modes;
  out.seed = seed;
  out.streams = {Stream::kFourierCos, Stream::kFourierSin};
  return out;
}

std::vector<double> vaguelet_partial_sum(const VagueletTable& table, std::uint64_t seed,
                                         Stream stream, int first_level, int last_level, int grid,
                                         std::span<const double> weight) {
  if (last_level > table.max_level())
    throw ConfigError("vaguelet table stops at level " + std::to_string(table.max_level()) +
                      ", level " + std::to_string(last_level) + " requested");
  if (grid < 2 || !is_pow2(static_cast<std::uint64_t>(grid)))
    throw ConfigError("field grid must be a power of two");
  std::vector<double> out(static_cast<std::size_t>(grid), 0.0);
  if (last_level < first_level) return out;
  if (weight.size() != static_cast<std::size_t>(last_level - first_level + 1))
    throw ConfigError("vaguelet_partial_sum: one weight per level required");
  const CounterRng rng(seed, stream);
  std::vector<Complex> half(static_cast<std::size_t>(grid / 2 + 1), Complex{});
  std::vector<double> coeffs;
  for (int j = first_level; j <= last_level; ++j) {
    const double w = weight[static_cast<std::size_t>(j - first_level)];
    coeffs.resize(std::size_t{1} << j);
    for (std::size_t l = 0; l < coeffs.size(); ++l)
      coeffs[l] = w * rng.normal(static_cast<std::uint64_t>(j), l);
    add_level_spectrum(table, j, coeffs, half);
  }
  fft::backward_real(half, out);
  return out;
}

FieldSample sample_gff_vaguelet(std::uint64_t seed, const VagueletTable& table, int depth, int grid,
                                Stream stream) {
  if (depth < 0) throw ConfigError("vaguelet depth must be nonnegative");
  const double scale = table.scaling() == VagueletScaling::kRaw ? std::sqrt(kPi) : 1.0;
  const std::vector<double> weight(static_cast<std::size_t>(depth) + 1, scale);
  FieldSample out;
  out.values = vaguelet_partial_sum(table, seed, stream, 0, depth, grid, weight);
  out.representation = Representation::kVaguelet;
  out.truncation = depth;
  out.seed = seed;
  out.streams = {stream};
  return out;
}

CovarianceAccumulator::CovarianceAccumulator(int grid)
    : grid_(grid), power_(static_cast<std::size_t>(grid / 2 + 1), 0.0) {
  if (grid < 2 || !is_pow2(static_cast<std::uint64_t>(grid)))
    throw ConfigError("covariance grid must be a power of two");
}

void CovarianceAccumulator::add(std::span<const double> field) {
  if (static_cast<int>(field.size()) != grid_) throw ConfigError("covariance: grid mismatch");
  std::vector<Complex> spec(power_.size());
  fft::forward_real(field, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) power_[k] += std::norm(spec[k]);
  ++count_;
}

std::vector<double> CovarianceAccumulator::covariance() const {
  if (count_ == 0) throw ConfigError("covariance: no samples");
  std::vector<Complex> spec(power_.size());
  const double norm = static_cast<double>(count_) * grid_ * grid_;
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] = power_[k] / norm;
  std::vector<double> out(static_cast<std::size_t>(grid_));
  fft::backward_real(spec, out);
  return out;
}

std::vector<double> vaguelet_field_variance(const VagueletTable& table, int depth, int grid) {
  const double s = table.scaling() == VagueletScaling::kRaw ? kPi : 1.0;
  std::vector<double> out(static_cast<std::size_t>(grid), 0.0);
  for (int j = 0; j <= depth; ++j) {
    const auto lvl = level_square_sum(table, j, grid);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * lvl[i];
  }
  return out;
}

namespace {

nlohmann::json sidecar(const FieldSample& sample) {
  nlohmann::json j;
  j["grid"] = sample.grid();
  j["representation"] = sample.representation == Representation::kFourier ? "fourier" : "vaguelet";
  j["truncation"] = sample.truncation;
  j["seed"] = sample.seed;
  auto streams = nlohmann::json::array();
  for (Stream s : sample.streams) streams.push_back(static_cast<std::uint32_t>(s));
  j["streams"] = streams;
  j["format"] = "float64-le";
  return j;
}

}  // namespace

void write_field_csv(const std::filesystem::path& path, const FieldSample& sample) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << "theta,value\n" << std::setprecision(17);
  const int n = sample.grid();
  for (int i = 0; i < n; ++i)
    os << static_cast<double>(i) / n << ',' << sample.values[static_cast<std::size_t>(i)] << '\n';
}

void write_field_raw(const std::filesystem::path& path, const FieldSample& sample) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string());
    for (double v : sample.values) bio::write_le<double>(os, v);
  }
  std::ofstream js(path.string() + ".json");
  js << sidecar(sample).dump(2) << '\n';
}

FieldSample read_field_raw(const std::filesystem::path& path) {
  std::ifstream js(path.string() + ".json");
  if (!js) throw ConfigError("missing sidecar " + path.string() + ".json");
  const auto j = nlohmann::json::parse(js);
  FieldSample out;
  out.representation =
      j.at("representation").get<std::string>() == "fourier" ? Representation::kFourier
                                                              : Representation::kVaguelet;
  out.truncation = j.at("truncation").get<int>();
  out.seed = j.at("seed").get<std::uint64_t>();
  for (auto s : j.at("streams")) out.streams.push_back(static_cast<Stream>(s.get<std::uint32_t>()));
  const int grid = j.at("grid").get<int>();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  out.values.resize(static_cast<std::size_t>(grid));
  for (auto& v : out.values) v = bio::read_le<double>(is);
  return out;
}

}  // namespace cweld
