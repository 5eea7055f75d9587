#include "cweld/pipeline.hpp"

#include <fftw3.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "cweld/binary_io.hpp"
#include "cweld/modulus.hpp"

namespace cweld {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(WeldMode mode) { return mode == WeldMode::one_gff ? "one-gff" : "two-gff"; }

std::string to_string(Stream stream) {
  switch (stream) {
    case Stream::kVaguelet: return "vaguelet";
    case Stream::kFourierCos: return "fourier-cos";
    case Stream::kFourierSin: return "fourier-sin";
    case Stream::kSecondField: return "second-field";
    case Stream::kTreeOverride: return "tree-override";
  }
  return "unknown";
}

Stream stream_from_string(const std::string& name) {
  for (Stream s : {Stream::kVaguelet, Stream::kFourierCos, Stream::kFourierSin, Stream::kSecondField,
                   Stream::kTreeOverride})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown stream '" + name + "'");
}

void RunConfig::validate() const {
  if (schedule.kind == "critical") {
    if (!(schedule.gamma > 0.0 && schedule.gamma < 1.0))
      throw ConfigError("critical schedules require 0 < gamma < 1, got gamma = " +
                        format_number(schedule.gamma));
  } else if (schedule.kind == "constant") {
    if (!(schedule.t >= 0.0 && schedule.t < 2.0)) throw ConfigError("constant schedules require 0 <= t < 2");
  } else {
    throw ConfigError("schedule kind must be constant or critical, got '" + schedule.kind + "'");
  }
  if (depth < 1 || depth > 20) throw ConfigError("depth must lie in 1..20");
  if (schedule.cap < depth) throw ConfigError("schedule cap must cover the depth");
  if (oversample < 4) throw ConfigError("field grid must resolve the depth: oversample >= 4");
  if (depth + oversample > 24) throw ConfigError("field grid 2^(depth + oversample) exceeds 2^24");
  if (filter_resolution < 64 || !is_pow2(static_cast<std::uint64_t>(filter_resolution)))
    throw ConfigError("filter resolution must be a power of two >= 64");
  if (grid.n < 16 || !is_pow2(static_cast<std::uint64_t>(grid.n)))
    throw ConfigError("solver grid must be a power of two >= 16");
  if (!(grid.half_width >= 2.0)) throw ConfigError("solver box half-width must be >= 2");
  if (truncation < 1) throw ConfigError("truncation index must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (!(max_clip_fraction >= 0.0 && max_clip_fraction <= 1.0))
    throw ConfigError("max_clip_fraction must lie in [0, 1]");
  if (curve_samples < 16) throw ConfigError("curve_samples must be >= 16");
  for (double r : annulus_inner)
    if (!(r > 0.0 && 2.0 * r < 1.0)) throw ConfigError("diagnostic annuli A(0, r, 2r) must sit inside the disk");
  if (stream2 != Stream::kVaguelet && stream2 != Stream::kSecondField)
    throw ConfigError("second field stream must be vaguelet or second-field");
  if (tree.enabled) {
    TreeRuleConfig rc;
    rc.N = tree.N;
    rc.generations = tree.generations;
    rc.d = tree.d;
    rc.validate();
  }
}

VarianceSchedule RunConfig::make_schedule() const {
  if (schedule.kind == "critical")
    return critical_schedule(schedule.gamma, schedule.epsilon, schedule.cap);
  return constant_schedule(schedule.t, schedule.cap);
}

json RunConfig::to_json() const {
  return {{"seed", seed},
          {"schedule",
           {{"kind", schedule.kind},
            {"t", schedule.t},
            {"gamma", schedule.gamma},
            {"epsilon", schedule.epsilon},
            {"cap", schedule.cap}}},
          {"depth", depth},
          {"oversample", oversample},
          {"filter_resolution", filter_resolution},
          {"grid", grid.n},
          {"half_width", grid.half_width},
          {"truncation", truncation},
          {"max_iterations", max_iterations},
          {"tolerance", tolerance},
          {"max_clip_fraction", max_clip_fraction},
          {"curve_samples", curve_samples},
          {"annulus_inner", annulus_inner},
          {"mode", to_string(mode)},
          {"seed2", seed2},
          {"stream2", to_string(stream2)},
          {"emit", {{"csv", emit.csv}, {"json", emit.json}, {"svg", emit.svg}}},
          {"tree",
           {{"enabled", tree.enabled}, {"N", tree.N}, {"generations", tree.generations}, {"d", tree.d}}}};
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j,
             {"seed", "schedule", "depth", "oversample", "filter_resolution", "grid", "half_width", "truncation",
              "max_iterations", "tolerance", "max_clip_fraction", "curve_samples", "annulus_inner", "mode", "seed2",
              "stream2", "output_dir", "emit", "tree"},
             "run config");
  RunConfig c;
  read(j, "seed", c.seed);
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    check_keys(s, {"kind", "t", "gamma", "epsilon", "cap"}, "schedule");
    read(s, "kind", c.schedule.kind);
    read(s, "t", c.schedule.t);
    read(s, "gamma", c.schedule.gamma);
    read(s, "epsilon", c.schedule.epsilon);
    read(s, "cap", c.schedule.cap);
  }
  read(j, "depth", c.depth);
  read(j, "oversample", c.oversample);
  read(j, "filter_resolution", c.filter_resolution);
  read(j, "grid", c.grid.n);
  read(j, "half_width", c.grid.half_width);
  read(j, "truncation", c.truncation);
  read(j, "max_iterations", c.max_iterations);
  read(j, "tolerance", c.tolerance);
  read(j, "max_clip_fraction", c.max_clip_fraction);
  read(j, "curve_samples", c.curve_samples);
  read(j, "annulus_inner", c.annulus_inner);
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m);
    if (m == "one-gff") c.mode = WeldMode::one_gff;
    else if (m == "two-gff") c.mode = WeldMode::two_gff;
    else throw ConfigError("mode must be one-gff or two-gff, got '" + m + "'");
  }
  read(j, "seed2", c.seed2);
  if (j.contains("stream2")) {
    std::string s;
    read(j, "stream2", s);
    c.stream2 = stream_from_string(s);
  }
  if (j.contains("output_dir")) {
    std::string d;
    read(j, "output_dir", d);
    c.output_dir = d;
  }
  if (j.contains("emit")) {
    const auto& e = j["emit"];
    check_keys(e, {"csv", "json", "svg"}, "emit");
    read(e, "csv", c.emit.csv);
    read(e, "json", c.emit.json);
    read(e, "svg", c.emit.svg);
  }
  if (j.contains("tree")) {
    const auto& t = j["tree"];
    check_keys(t, {"enabled", "N", "generations", "d"}, "tree");
    read(t, "enabled", c.tree.enabled);
    read(t, "N", c.tree.N);
    read(t, "generations", c.tree.generations);
    read(t, "d", c.tree.d);
  }
  return c;
}

std::uint64_t RunConfig::hash() const {
  bio::Fnv1a h;
  h.update(to_json().dump());
  return h.digest();
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  bio::Fnv1a h;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(is.gcount()));
  }
  return h.digest();
}

Bundle write_manifest(const fs::path& dir, const RunConfig& config, json diagnostics) {
  Bundle b;
  b.dir = dir;
  b.diagnostics = std::move(diagnostics);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  json files = json::array();
  for (const auto& name : names) {
    BundleFile f{name, file_hash(dir / name), fs::file_size(dir / name)};
    files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"fnv1a", bio::hex64(f.hash)}});
    b.files.push_back(std::move(f));
  }
  json streams = json::array();
  streams.push_back({{"field", "primary"}, {"seed", config.seed}, {"stream", to_string(Stream::kVaguelet)},
                     {"id", static_cast<std::uint32_t>(Stream::kVaguelet)}});
  if (config.mode == WeldMode::two_gff)
    streams.push_back({{"field", "second"}, {"seed", config.seed2}, {"stream", to_string(config.stream2)},
                       {"id", static_cast<std::uint32_t>(config.stream2)}});
  json m = {{"version", kVersion},
            {"fftw", std::string(fftw_version)},
            {"config", config.to_json()},
            {"config_hash", bio::hex64(config.hash())},
            {"seed", config.seed},
            {"streams", streams},
            {"files", files}};
  const fs::path path = dir / "manifest.json";
  {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path.string());
    os << m.dump(2) << '\n';
  }
  b.manifest_hash = file_hash(path);
  return b;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << std::setprecision(8);
  return os;
}

}  // namespace

void write_homeomorphism_svg(const fs::path& path, const CircleHomeomorphism& h) {
  auto os = open_out(path);
  const auto s = h.samples();
  const int n = h.intervals();
  const int step = std::max(1, n / 2048);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"-0.05 -1.05 1.1 1.1\">\n"
     << "<polyline fill=\"none\" stroke=\"#999\" stroke-width=\"0.002\" points=\"0,0 1,-1\"/>\n"
     << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.003\" points=\"";
  for (int i = 0; i <= n; i += step) os << double(i) / n << ',' << -s[std::size_t(i)] << ' ';
  if (n % step != 0) os << 1 << ',' << -1;
  os << "\"/>\n</svg>\n";
}

void write_modulus_svg(const fs::path& path, std::span<const double> inner, std::span<const double> source,
                       std::span<const double> image, std::span<const double> lehto) {
  if (inner.empty() || source.size() != inner.size() || image.size() != inner.size() ||
      lehto.size() != inner.size())
    throw ConfigError("modulus chart series must match the annulus list");
  double x0 = 1e300, x1 = -1e300, y1 = 0.0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    x0 = std::min(x0, std::log2(inner[i]));
    x1 = std::max(x1, std::log2(inner[i]));
    y1 = std::max({y1, source[i], image[i], lehto[i]});
  }
  if (x1 == x0) x1 = x0 + 1.0;
  y1 = y1 > 0.0 ? 1.1 * y1 : 1.0;
  auto X = [&](double r) { return 50.0 + 500.0 * (std::log2(r) - x0) / (x1 - x0); };
  auto Y = [&](double v) { return 350.0 - 300.0 * v / y1; };
  auto os = open_out(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"400\">\n"
     << "<line x1=\"50\" y1=\"350\" x2=\"550\" y2=\"350\" stroke=\"black\"/>\n"
     << "<line x1=\"50\" y1=\"50\" x2=\"50\" y2=\"350\" stroke=\"black\"/>\n";
  const std::pair<std::span<const double>, const char*> series[] = {
      {source, "#1f77b4"}, {image, "#d62728"}, {lehto, "#2ca02c"}};
  for (const auto& [values, colour] : series) {
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < inner.size(); ++i) os << X(inner[i]) << ',' << Y(values[i]) << ' ';
    os << "\"/>\n";
  }
  os << "<text x=\"60\" y=\"30\" font-size=\"12\">modulus vs log2 r: source (blue), image (red), Lehto (green)"
     << "</text>\n</svg>\n";
}

namespace {

constexpr const char* kArtifacts[] = {
    "FAILED",       "manifest.json",    "field.raw",        "field2.raw", "measure.dmt",  "measure.csv",
    "measure2.dmt", "homeomorphism.csv", "homeomorphism.svg", "beltrami.bmf", "solver.json", "curve.csv",
    "curve.svg",    "modulus.svg",      "diagnostics.json", "tree.json",  "tree.csv"};

class StageRunner {
 public:
  explicit StageRunner(fs::path dir) : dir_(std::move(dir)) {}

  template <class Fn>
  auto operator()(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const ConfigError& e) {
      fail(name, e.what(), false);
    } catch (const std::exception& e) {
      fail(name, e.what(), true);
    }
  }

 private:
  [[noreturn]] void fail(const std::string& stage, const std::string& what, bool numerical) {
    std::ofstream os(dir_ / "FAILED");
    os << "stage: " << stage << "\nerror: " << what << '\n';
    throw StageError(stage, what, numerical);
  }
  fs::path dir_;
};

json annulus_json(const ModulusEstimate& e, double lehto, double K) {
  const double lo = e.source_modulus / K, hi = e.source_modulus * K;
  return {{"inner", e.spec.inner},
          {"outer", e.spec.outer},
          {"source_modulus", e.source_modulus},
          {"fem_modulus", e.fem_modulus},
          {"diameter_upper_bound", e.diameter_bound},
          {"lehto", lehto},
          {"bracket", {lo, hi}},
          {"in_bracket", e.fem_modulus >= lo && e.fem_modulus <= hi},
          {"unreliable", e.unreliable},
          {"reason", e.reason}};
}

}  // namespace

Bundle run_pipeline(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  // Artifacts of an earlier run in the same place must not leak into this manifest.
  for (const char* name : kArtifacts) {
    fs::remove(dir / name);
    fs::remove(dir / (std::string(name) + ".json"));
  }
  StageRunner stage(dir);
  const auto& emit = config.emit;

  const auto schedule = config.make_schedule();
  auto [f1, f2] = stage("field", [&] {
    auto table = std::make_shared<const VagueletTable>(build_meyer_filter(config.filter_resolution), config.depth);
    const CascadeField cascade(table, schedule, config.oversample);
    auto a = cascade.field(config.seed, config.depth);
    write_field_raw(dir / "field.raw", a);
    FieldSample b;
    if (config.mode == WeldMode::two_gff) {
      b = cascade.field(config.seed2, config.depth, 0, config.stream2);
      write_field_raw(dir / "field2.raw", b);
    }
    return std::make_pair(std::move(a), std::move(b));
  });

  auto measures = stage("measure", [&] {
    std::vector<DyadicMassTree> out{build_measure(f1.values, config.depth)};
    out[0].seed = config.seed;
    write_tree_binary(dir / "measure.dmt", out[0]);
    if (emit.csv) write_tree_csv(dir / "measure.csv", out[0]);
    if (config.mode == WeldMode::two_gff) {
      out.push_back(build_measure(f2.values, config.depth));
      out[1].seed = config.seed2;
      write_tree_binary(dir / "measure2.dmt", out[1]);
    }
    return out;
  });

  json diag;
  const auto h = stage("homeomorphism", [&] {
    auto h1 = homeomorphism_from_measure(measures[0]);
    if (config.mode == WeldMode::two_gff) h1 = compose_two_gff(h1, homeomorphism_from_measure(measures[1]));
    double dev = 0.0;
    const auto s = h1.samples();
    for (int i = 0; i <= h1.intervals(); ++i) dev = std::max(dev, std::abs(s[std::size_t(i)] - double(i) / h1.intervals()));
    diag["homeomorphism"] = {{"intervals", h1.intervals()}, {"mean_offset", h1.mean_offset()},
                             {"identity_deviation", dev}};
    if (emit.csv) write_homeomorphism_csv(dir / "homeomorphism.csv", h1);
    if (emit.svg) write_homeomorphism_svg(dir / "homeomorphism.svg", h1);
    return h1;
  });

  const auto mu = stage("beltrami", [&] {
    const BeurlingAhlforsExtension ext(h);
    auto field = truncate_coefficient(beltrami_from_extension(ext, config.grid, config.max_clip_fraction),
                                      config.truncation);
    write_beltrami_binary(dir / "beltrami.bmf", field);
    diag["beltrami"] = {{"sup_abs", field.sup_abs()},
                        {"clip_fraction", field.clip_fraction()},
                        {"max_clip_fraction", config.max_clip_fraction},
                        {"distortion_integral", field.distortion_integral()}};
    return field;
  });

  const auto map = stage("solve", [&] {
    auto m = solve_principal(mu, SolverConfig{config.grid, config.truncation, config.max_iterations,
                                              config.tolerance});
    if (emit.json) write_solver_telemetry(dir / "solver.json", m, mu);
    diag["solver"] = {{"iterations", m.iterations},
                      {"residual", m.residual},
                      {"tolerance", config.tolerance},
                      {"sup_mu", m.sup_mu},
                      {"boundary_deviation", boundary_deviation(m, 0.25)}};
    return m;
  });

  stage("curve", [&] {
    const auto curve = extract_curve(map, config.curve_samples);
    if (emit.csv) write_curve_csv(dir / "curve.csv", curve);
    if (emit.svg) write_curve_svg(dir / "curve.svg", curve);
    diag["curve"] = {{"samples", config.curve_samples},
                     {"self_intersections", curve.intersections.size()},
                     {"simple", curve.simple()},
                     {"closed", curve.points.front() == curve.points.back()}};
  });

  stage("diagnostics", [&] {
    const double sup = mu.sup_abs();
    const double K = (1.0 + sup) / (1.0 - sup);
    json rows = json::array();
    std::vector<double> src, img, leh;
    for (double r : config.annulus_inner) {
      const AnnulusSpec spec{{}, r, 2.0 * r};
      const double lehto = lehto_integral(sample_distortion(mu, spec, 33, 256));
      const auto est = image_modulus_estimate(map, spec, 33, 128);
      rows.push_back(annulus_json(est, lehto, K));
      src.push_back(est.source_modulus);
      img.push_back(est.fem_modulus);
      leh.push_back(lehto);
    }
    diag["distortion_bound"] = K;
    diag["annuli"] = rows;
    diag["residuals_ok"] = map.residual <= config.tolerance && mu.clip_fraction() <= config.max_clip_fraction;
    if (emit.svg && !config.annulus_inner.empty())
      write_modulus_svg(dir / "modulus.svg", config.annulus_inner, src, img, leh);
  });

  if (config.tree.enabled) {
    stage("tree", [&] {
      TreeRuleConfig rc;
      rc.N = config.tree.N;
      rc.generations = config.tree.generations;
      rc.d = config.tree.d;
      rc.schedule = config.schedule.kind == "critical"
                        ? critical_schedule(config.schedule.gamma, config.schedule.epsilon, 62)
                        : constant_schedule(config.schedule.t, 62);
      const auto tree = TreeEngine(rc).grow(config.seed);
      if (emit.json) write_tree_json(dir / "tree.json", tree);
      if (emit.csv) write_tree_summary_csv(dir / "tree.csv", tree);
      json gens = json::array();
      for (const auto& g : tree.generations) gens.push_back({{"nodes", g.nodes}, {"survivors", g.survivors}});
      diag["tree"] = {{"d_ary", tree.d_ary}, {"generations", gens}};
    });
  }

  if (emit.json) {
    std::ofstream os(dir / "diagnostics.json");
    if (!os) throw ConfigError("cannot open " + (dir / "diagnostics.json").string());
    os << diag.dump(2) << '\n';
  }
  return stage("manifest", [&] { return write_manifest(dir, config, diag); });
}

}  // namespace cweld
