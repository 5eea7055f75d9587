// Command-line front end. Every subcommand reads its inputs from flags, an
// optional JSON config and persisted artifacts, and writes into the output
// directory. Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>

#include "cweld/binary_io.hpp"
#include "cweld/cascade.hpp"
#include "cweld/gff.hpp"
#include "cweld/modulus.hpp"
#include "cweld/parallel.hpp"
#include "cweld/pipeline.hpp"
#include "cweld/survival.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cweld;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

/// Flag values left unset keep the config-file (or default) value.
struct RunFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed, seed2;
  std::optional<std::string> kind, mode, stream2, out;
  std::optional<double> t, gamma, epsilon, half_width, tolerance, clip;
  std::optional<int> cap, depth, oversample, grid, truncation, max_iterations, samples;
  bool no_csv = false, no_json = false, no_svg = false, tree = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "JSON run config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed);
    app.add_option("--seed2", seed2, "second field seed (two-gff)");
    app.add_option("--kind", kind, "schedule kind: constant | critical");
    app.add_option("--t", t, "constant schedule variance");
    app.add_option("--gamma", gamma);
    app.add_option("--epsilon", epsilon);
    app.add_option("--cap", cap, "schedule level cap");
    app.add_option("--depth", depth);
    app.add_option("--oversample", oversample);
    app.add_option("--grid", grid, "solver grid nodes per axis");
    app.add_option("--half-width", half_width, "solver box half-width");
    app.add_option("--truncation", truncation, "coefficient truncation index l");
    app.add_option("--max-iterations", max_iterations);
    app.add_option("--tolerance", tolerance);
    app.add_option("--max-clip", clip, "largest tolerated clip fraction");
    app.add_option("--samples", samples, "curve samples M");
    app.add_option("--mode", mode, "one-gff | two-gff");
    app.add_option("--stream2", stream2, "second field stream: second-field | vaguelet");
    app.add_option("--out", out, "output directory");
    app.add_flag("--no-csv", no_csv);
    app.add_flag("--no-json", no_json);
    app.add_flag("--no-svg", no_svg);
    app.add_flag("--tree", tree, "grow a stopping-time tree for the diagnostics");
  }

  /// Precedence: flags, then CWELD_OUTPUT_DIR (output directory only), then
  /// the config file, then defaults.
  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      json j;
      try {
        j = json::parse(is);
      } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + config_file + ": " + e.what());
      }
      c = RunConfig::from_json(j);
    }
    if (const char* env = std::getenv("CWELD_OUTPUT_DIR"); env && *env) c.output_dir = env;
    if (seed) c.seed = *seed;
    if (seed2) c.seed2 = *seed2;
    if (kind) c.schedule.kind = *kind;
    if (t) c.schedule.t = *t;
    if (gamma) c.schedule.gamma = *gamma;
    if (epsilon) c.schedule.epsilon = *epsilon;
    if (cap) c.schedule.cap = *cap;
    if (depth) c.depth = *depth;
    if (oversample) c.oversample = *oversample;
    if (grid) c.grid.n = *grid;
    if (half_width) c.grid.half_width = *half_width;
    if (truncation) c.truncation = *truncation;
    if (max_iterations) c.max_iterations = *max_iterations;
    if (tolerance) c.tolerance = *tolerance;
    if (clip) c.max_clip_fraction = *clip;
    if (samples) c.curve_samples = *samples;
    if (mode) {
      if (*mode == "one-gff") c.mode = WeldMode::one_gff;
      else if (*mode == "two-gff") c.mode = WeldMode::two_gff;
      else throw ConfigError("mode must be one-gff or two-gff");
    }
    if (stream2) c.stream2 = stream_from_string(*stream2);
    if (out) c.output_dir = *out;
    if (no_csv) c.emit.csv = false;
    if (no_json) c.emit.json = false;
    if (no_svg) c.emit.svg = false;
    if (tree) c.tree.enabled = true;
    c.validate();
    return c;
  }
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path.string());
  os << j.dump(2) << '\n';
}

std::shared_ptr<const VagueletTable> make_table(const RunConfig& c) {
  return std::make_shared<const VagueletTable>(build_meyer_filter(c.filter_resolution), c.depth);
}

void cmd_weld(const RunConfig& c) {
  const auto b = run_pipeline(c);
  std::cout << "bundle " << b.dir.string() << " manifest " << bio::hex64(b.manifest_hash) << '\n'
            << "residual " << b.diagnostics["solver"]["residual"] << " self-intersections "
            << b.diagnostics["curve"]["self_intersections"] << '\n';
}

void cmd_sample_field(const RunConfig& c, const std::string& representation, int modes) {
  fs::create_directories(c.output_dir);
  FieldSample f;
  if (representation == "cascade") {
    f = CascadeField(make_table(c), c.make_schedule(), c.oversample).field(c.seed, c.depth);
  } else if (representation == "vaguelet") {
    f = sample_gff_vaguelet(c.seed, *make_table(c), c.depth, 1 << (c.depth + c.oversample));
  } else if (representation == "fourier") {
    f = sample_gff_fourier(c.seed, modes, 1 << (c.depth + c.oversample));
  } else {
    throw ConfigError("representation must be cascade, vaguelet or fourier");
  }
  write_field_raw(c.output_dir / "field.raw", f);
  if (c.emit.csv) write_field_csv(c.output_dir / "field.csv", f);
  std::cout << "field " << f.grid() << " samples -> " << (c.output_dir / "field.raw").string() << '\n';
}

void cmd_build_measure(const RunConfig& c, const fs::path& field_path) {
  fs::create_directories(c.output_dir);
  const auto f = read_field_raw(field_path);
  auto tree = build_measure(f.values, c.depth);
  tree.seed = f.seed;
  write_tree_binary(c.output_dir / "measure.dmt", tree);
  if (c.emit.csv) write_tree_csv(c.output_dir / "measure.csv", tree);
  const auto h = homeomorphism_from_measure(tree);
  if (c.emit.csv) write_homeomorphism_csv(c.output_dir / "homeomorphism.csv", h);
  if (c.emit.svg) write_homeomorphism_svg(c.output_dir / "homeomorphism.svg", h);
  std::cout << "total mass " << tree.total() << " depth " << tree.depth() << '\n';
}

BeltramiField load_coefficient(const RunConfig& c, const std::string& beltrami, const std::string& measure,
                               std::optional<double> radial) {
  const int given = int(!beltrami.empty()) + int(!measure.empty()) + int(radial.has_value());
  if (given != 1) throw ConfigError("give exactly one of --beltrami, --measure, --radial");
  if (!beltrami.empty()) return read_beltrami_binary(beltrami);
  if (radial) return radial_stretch_field(*radial, c.grid, 8);
  const BeurlingAhlforsExtension ext(homeomorphism_from_measure(read_tree_binary(measure)));
  return truncate_coefficient(beltrami_from_extension(ext, c.grid, c.max_clip_fraction), c.truncation);
}

SolvedMap solve_for(const RunConfig& c, const BeltramiField& mu) {
  return solve_principal(mu, SolverConfig{mu.grid, c.truncation, c.max_iterations, c.tolerance});
}

void cmd_solve(const RunConfig& c, const BeltramiField& mu) {
  fs::create_directories(c.output_dir);
  const auto map = solve_for(c, mu);
  const auto curve = extract_curve(map, c.curve_samples);
  if (c.emit.json) write_solver_telemetry(c.output_dir / "solver.json", map, mu);
  if (c.emit.csv) write_curve_csv(c.output_dir / "curve.csv", curve);
  if (c.emit.svg) write_curve_svg(c.output_dir / "curve.svg", curve);
  std::cout << "iterations " << map.iterations << " residual " << map.residual << " self-intersections "
            << curve.intersections.size() << '\n';
}

void cmd_modulus(const RunConfig& c, const BeltramiField& mu) {
  fs::create_directories(c.output_dir);
  const auto map = solve_for(c, mu);
  const double sup = mu.sup_abs();
  const double K = (1.0 + sup) / (1.0 - sup);
  std::vector<double> src, img, leh;
  for (std::size_t i = 0; i < c.annulus_inner.size(); ++i) {
    const double r = c.annulus_inner[i];
    const AnnulusSpec spec{{}, r, 2.0 * r};
    const double lehto = lehto_integral(sample_distortion(mu, spec, 33, 256));
    const auto est = image_modulus_estimate(map, spec, 33, 128);
    write_modulus_report(c.output_dir / ("modulus_" + std::to_string(i) + ".json"), est, lehto, K);
    src.push_back(est.source_modulus);
    img.push_back(est.fem_modulus);
    leh.push_back(lehto);
    std::cout << "A(0, " << r << ", " << 2 * r << "): source " << est.source_modulus << " image "
              << est.fem_modulus << " Lehto " << lehto << (est.unreliable ? " (unreliable)" : "") << '\n';
  }
  if (c.emit.svg && !src.empty()) write_modulus_svg(c.output_dir / "modulus.svg", c.annulus_inner, src, img, leh);
}

struct TreeFlags {
  int N = 9, generations = 2, d = 2, seeds = 1;
  double p_fail = 0.0;
  std::string override_kind = "none";
};

void cmd_tree_sim(const RunConfig& c, const TreeFlags& f) {
  fs::create_directories(c.output_dir);
  TreeRuleConfig rc;
  rc.N = f.N;
  rc.generations = f.generations;
  rc.d = f.d;
  rc.schedule = c.schedule.kind == "critical"
                    ? critical_schedule(c.schedule.gamma, c.schedule.epsilon, 62)
                    : constant_schedule(c.schedule.t, 62);
  RuleOverride hook;
  if (f.override_kind == "pass") hook.kind = RuleOverride::Kind::force_pass;
  else if (f.override_kind == "bernoulli") hook = {RuleOverride::Kind::bernoulli, f.p_fail};
  else if (f.override_kind != "none") throw ConfigError("override must be none, pass or bernoulli");
  if (f.seeds < 1) throw ConfigError("--seeds must be >= 1");
  const TreeEngine engine(rc);
  std::vector<TreeResult> runs(static_cast<std::size_t>(f.seeds));
  parallel_for(runs.size(), [&](std::size_t i) { runs[i] = engine.grow(c.seed + i, hook); });
  write_tree_json(c.output_dir / "tree.json", runs.front());
  write_tree_summary_csv(c.output_dir / "tree.csv", runs.front());
  long nodes = 0, failed = 0, d_ary = 0;
  for (const auto& r : runs) {
    d_ary += r.d_ary;
    for (const auto& g : r.generations) {
      nodes += g.nodes;
      failed += g.nodes - g.survivors;
    }
  }
  const double p_hat = double(failed) / double(nodes);
  const auto gw = gw_survival(0.0, p_hat, rc.arity(), rc.d, rc.generations + 1, GwMap::exact, 0.0);
  const json j = {{"seeds", f.seeds},
                  {"first_seed", c.seed},
                  {"nodes", nodes},
                  {"node_failure_rate", p_hat},
                  {"d_ary_frequency", double(d_ary) / f.seeds},
                  {"gw_no_subtree_probability", gw.q},
                  {"gw_bound_fixed_point", gw_survival(0.0, p_hat, rc.arity(), rc.d, 10000).q}};
  write_json(c.output_dir / "survival.json", j);
  std::cout << j.dump(2) << '\n';
}

struct StatsFlags {
  std::string kind = "martingale";
  int draws = 200;
  double p = 2.0;
  int first = 4;
  int modes = 512;
};

void cmd_stats(const RunConfig& c, const StatsFlags& f) {
  fs::create_directories(c.output_dir);
  if (f.draws < 2) throw ConfigError("--draws must be >= 2");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(f.draws));
  std::iota(seeds.begin(), seeds.end(), c.seed);
  json j = {{"kind", f.kind}, {"draws", f.draws}, {"first_seed", c.seed}};
  if (f.kind == "martingale") {
    const CascadeField cascade(make_table(c), c.make_schedule(), c.oversample);
    const auto trace = martingale_trace(cascade, seeds, c.depth);
    json rows = json::array();
    for (std::size_t k = 0; k < trace.band_end.size(); ++k) {
      const auto [m, se] = trace.mean_se(k);
      rows.push_back({{"level", trace.band_end[k]}, {"mean", m}, {"se", se}});
    }
    j["bands"] = rows;
  } else if (f.kind == "moments") {
    const CascadeField cascade(make_table(c), c.make_schedule(), c.oversample);
    std::vector<DyadicMassTree> trees(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
      trees[i] = build_measure(cascade.field(seeds[i], c.depth).values, c.depth);
    });
    if (c.schedule.kind != "constant") throw ConfigError("moment fits need a constant schedule");
    const auto fit = multifractal_fit(trees, f.p, c.schedule.t, f.first, c.depth);
    j["p"] = f.p;
    j["zeta"] = fit.slope;
    j["zeta_se"] = fit.slope_se;
    j["predicted"] = fit.predicted;
    j["log_moments"] = fit.log_moments;
  } else if (f.kind == "covariance") {
    const int grid = 1 << (c.depth + c.oversample);
    CovarianceAccumulator acc(grid);
    for (auto s : seeds) acc.add(sample_gff_fourier(s, f.modes, grid).values);
    const auto cov = acc.covariance();
    json rows = json::array();
    for (int k = grid / 64; k <= grid / 2; k *= 2)
      rows.push_back({{"lag", double(k) / grid}, {"covariance", cov[std::size_t(k)]}});
    j["modes"] = f.modes;
    j["lags"] = rows;
  } else {
    throw ConfigError("stats kind must be martingale, moments or covariance");
  }
  write_json(c.output_dir / "stats.json", j);
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random conformal welding toolkit"};
  app.require_subcommand(1);

  RunFlags weld_flags, field_flags, measure_flags, solve_flags, modulus_flags, tree_flags, stats_flags;
  auto* weld = app.add_subcommand("weld", "full pipeline: field, measure, weld, solve, curve, diagnostics");
  weld_flags.attach(*weld);

  auto* field = app.add_subcommand("sample-field", "sample a field on the circle");
  field_flags.attach(*field);
  std::string representation = "cascade";
  int modes = 512;
  field->add_option("--representation", representation, "cascade | vaguelet | fourier");
  field->add_option("--modes", modes, "Fourier mode cutoff");

  auto* measure = app.add_subcommand("build-measure", "mass tree and homeomorphism from a persisted field");
  measure_flags.attach(*measure);
  std::string field_path;
  measure->add_option("--field", field_path, "field.raw from sample-field")->required()->check(CLI::ExistingFile);

  std::string beltrami_path, measure_path;
  std::optional<double> radial;
  auto* solve = app.add_subcommand("solve", "principal solution and curve for a persisted coefficient");
  solve_flags.attach(*solve);
  solve->add_option("--beltrami", beltrami_path, "BMF1 coefficient")->check(CLI::ExistingFile);
  solve->add_option("--measure", measure_path, "DMT1 mass tree")->check(CLI::ExistingFile);
  solve->add_option("--radial", radial, "radial stretch with this K");

  auto* modulus = app.add_subcommand("modulus", "Lehto integrals and image moduli on A(0, r, 2r)");
  modulus_flags.attach(*modulus);
  modulus->add_option("--beltrami", beltrami_path, "BMF1 coefficient")->check(CLI::ExistingFile);
  modulus->add_option("--measure", measure_path, "DMT1 mass tree")->check(CLI::ExistingFile);
  modulus->add_option("--radial", radial, "radial stretch with this K");
  std::vector<double> inner;
  modulus->add_option("--inner", inner, "inner radii r");

  auto* tree = app.add_subcommand("tree-sim", "stopping-time trees over a seed range");
  tree_flags.attach(*tree);
  TreeFlags tf;
  tree->add_option("--N", tf.N);
  tree->add_option("--generations", tf.generations);
  tree->add_option("--d", tf.d);
  tree->add_option("--seeds", tf.seeds, "number of consecutive seeds");
  tree->add_option("--override", tf.override_kind, "none | pass | bernoulli");
  tree->add_option("--p-fail", tf.p_fail);

  auto* stats = app.add_subcommand("stats", "ensemble statistics");
  stats_flags.attach(*stats);
  StatsFlags sf;
  stats->add_option("--statistic", sf.kind, "martingale | moments | covariance");
  stats->add_option("--draws", sf.draws);
  stats->add_option("--p", sf.p, "moment order");
  stats->add_option("--first-level", sf.first);
  stats->add_option("--modes", sf.modes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (weld->parsed()) {
      cmd_weld(weld_flags.resolve());
    } else if (field->parsed()) {
      cmd_sample_field(field_flags.resolve(), representation, modes);
    } else if (measure->parsed()) {
      cmd_build_measure(measure_flags.resolve(), field_path);
    } else if (solve->parsed()) {
      const auto c = solve_flags.resolve();
      cmd_solve(c, load_coefficient(c, beltrami_path, measure_path, radial));
    } else if (modulus->parsed()) {
      auto c = modulus_flags.resolve();
      if (!inner.empty()) {
        c.annulus_inner = inner;
        c.validate();
      }
      cmd_modulus(c, load_coefficient(c, beltrami_path, measure_path, radial));
    } else if (tree->parsed()) {
      cmd_tree_sim(tree_flags.resolve(), tf);
    } else if (stats->parsed()) {
      cmd_stats(stats_flags.resolve(), sf);
    }
  } catch (const StageError& e) {
    std::cerr << "error in stage " << e.what() << '\n';
    return e.numerical() ? kNumericalExit : kConfigExit;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalExit;
  }
  return 0;
}
