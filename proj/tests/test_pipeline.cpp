#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cweld/pipeline.hpp"

using namespace cweld;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cweld_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_config(const std::string& name) {
  RunConfig c;
  c.depth = 8;
  c.schedule.cap = 8;
  c.grid.n = 64;
  c.curve_samples = 256;
  c.output_dir = scratch(name);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(CWELD_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round trip and hash") {
  RunConfig c;
  c.seed = 42;
  c.schedule.kind = "critical";
  c.schedule.gamma = 0.75;
  c.mode = WeldMode::two_gff;
  c.stream2 = Stream::kVaguelet;
  c.tree.enabled = true;
  const auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());

  RunConfig moved = c;
  moved.output_dir = "elsewhere";
  CHECK(moved.hash() == c.hash());
  RunConfig reseeded = c;
  reseeded.seed = 43;
  CHECK(reseeded.hash() != c.hash());

  CHECK_THROWS_AS(RunConfig::from_json(json{{"seeds", 1}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"schedule", {{"kappa", 1}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"mode", "three-gff"}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"depth", "deep"}}), ConfigError);
  CHECK(RunConfig::from_json(json{{"output_dir", "x"}}).output_dir == fs::path("x"));
}

TEST_CASE("config validation") {
  RunConfig c;
  c.schedule.kind = "critical";
  c.schedule.gamma = 1.2;
  try {
    c.validate();
    FAIL("gamma = 1.2 accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("gamma < 1") != std::string::npos);
  }
  c.schedule.gamma = 0.5;
  CHECK_NOTHROW(c.validate());

  auto rejects = [](auto mutate) {
    RunConfig r;
    mutate(r);
    CHECK_THROWS_AS(r.validate(), ConfigError);
  };
  rejects([](RunConfig& r) { r.grid.half_width = 1.5; });
  rejects([](RunConfig& r) { r.grid.n = 100; });
  rejects([](RunConfig& r) { r.oversample = 3; });
  rejects([](RunConfig& r) { r.schedule.cap = r.depth - 1; });
  rejects([](RunConfig& r) { r.schedule.kind = "linear"; });
  rejects([](RunConfig& r) { r.schedule.t = 2.0; });
  rejects([](RunConfig& r) { r.tolerance = 0.0; });
  rejects([](RunConfig& r) { r.curve_samples = 8; });
  rejects([](RunConfig& r) { r.annulus_inner = {0.5}; });
  rejects([](RunConfig& r) { r.stream2 = Stream::kTreeOverride; });
  rejects([](RunConfig& r) {
    r.tree.enabled = true;
    r.tree.d = 99;
  });
}

TEST_CASE("replays are byte-identical") {
  auto a = small_config("replay_a");
  auto b = small_config("replay_b");
  const auto ba = run_pipeline(a);
  const auto bb = run_pipeline(b);
  CHECK(ba.manifest_hash == bb.manifest_hash);
  REQUIRE(ba.files.size() == bb.files.size());
  for (std::size_t i = 0; i < ba.files.size(); ++i) {
    CHECK(ba.files[i].name == bb.files[i].name);
    CHECK(slurp(a.output_dir / ba.files[i].name) == slurp(b.output_dir / bb.files[i].name));
  }
  CHECK(slurp(a.output_dir / "manifest.json") == slurp(b.output_dir / "manifest.json"));

  const auto m = read_json(a.output_dir / "manifest.json");
  CHECK(m["seed"] == a.seed);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["streams"].size() == 1);
  CHECK(m["streams"][0]["stream"] == "vaguelet");
}

TEST_CASE("bundle contents") {
  auto c = small_config("contents");
  c.tree.enabled = true;
  c.tree.generations = 1;
  const auto b = run_pipeline(c);
  for (const char* name : {"field.raw", "measure.dmt", "homeomorphism.csv", "homeomorphism.svg", "beltrami.bmf",
                           "solver.json", "curve.csv", "curve.svg", "modulus.svg", "diagnostics.json",
                           "tree.json", "tree.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(c.output_dir / name), name);
  CHECK_FALSE(fs::exists(c.output_dir / "FAILED"));
  const auto d = read_json(c.output_dir / "diagnostics.json");
  CHECK(d["solver"]["residual"].get<double>() <= c.tolerance);
  CHECK(d["residuals_ok"] == true);
  CHECK(d["curve"]["closed"] == true);
  CHECK(d["annuli"].size() == c.annulus_inner.size());
  CHECK(d.contains("tree"));
  for (const auto& row : d["annuli"]) CHECK(row["lehto"].get<double>() > 0.0);
  CHECK(slurp(c.output_dir / "curve.svg").rfind("<svg", 0) == 0);
  CHECK(slurp(c.output_dir / "homeomorphism.svg").find("</svg>") != std::string::npos);

  // Disabled emitters leave no stale files behind.
  c.emit.csv = false;
  c.tree.enabled = false;
  const auto again = run_pipeline(c);
  CHECK_FALSE(fs::exists(c.output_dir / "curve.csv"));
  CHECK_FALSE(fs::exists(c.output_dir / "tree.json"));
  for (const auto& f : again.files) CHECK(f.name.find(".csv") == std::string::npos);
}

TEST_CASE("two fields with equal seeds weld to the identity") {
  auto c = small_config("two_equal");
  c.mode = WeldMode::two_gff;
  c.seed2 = c.seed;
  c.stream2 = Stream::kVaguelet;
  run_pipeline(c);
  const auto d = read_json(c.output_dir / "diagnostics.json");
  CHECK(d["homeomorphism"]["identity_deviation"].get<double>() <= 1e-12);
  CHECK(d["beltrami"]["sup_abs"].get<double>() <= 1e-6);
  const auto m = read_json(c.output_dir / "manifest.json");
  CHECK(m["streams"].size() == 2);

  // Independent draws differ from the identity.
  c.stream2 = Stream::kSecondField;
  c.output_dir = scratch("two_independent");
  c.max_clip_fraction = 1.0;
  run_pipeline(c);
  CHECK(read_json(c.output_dir / "diagnostics.json")["homeomorphism"]["identity_deviation"].get<double>() > 1e-3);
}

TEST_CASE("stage failures leave a FAILED marker") {
  auto c = small_config("failed");
  c.max_iterations = 2;
  try {
    run_pipeline(c);
    FAIL("solver converged in two iterations");
  } catch (const StageError& e) {
    CHECK(e.stage() == "solve");
    CHECK(e.numerical());
  }
  const auto marker = slurp(c.output_dir / "FAILED");
  CHECK(marker.find("stage: solve") != std::string::npos);
  CHECK(fs::exists(c.output_dir / "beltrami.bmf"));
  CHECK_FALSE(fs::exists(c.output_dir / "manifest.json"));

  c.max_iterations = 2000;
  run_pipeline(c);
  CHECK_FALSE(fs::exists(c.output_dir / "FAILED"));
}

TEST_CASE("weld smoke run at t = 1, depth 12, 4096 samples") {
  RunConfig c;
  c.output_dir = scratch("smoke");
  const auto b = run_pipeline(c);
  const auto& d = b.diagnostics;
  CHECK(d["residuals_ok"] == true);
  CHECK(d["curve"]["simple"] == true);
  CHECK(d["curve"]["samples"] == 4096);
  CHECK(fs::file_size(c.output_dir / "curve.svg") > 0);
}

TEST_CASE("command-line exit codes") {
  const fs::path out = scratch("cli");
  CHECK(run_cli("weld --depth 8 --cap 8 --grid 64 --samples 256 --out " + out.string()) == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(run_cli("weld --kind critical --gamma 1.2 --out " + out.string()) == 2);
  CHECK(run_cli("weld --half-width 1 --out " + out.string()) == 2);
  CHECK(run_cli("weld --no-such-flag") == 2);
  CHECK(run_cli("weld --depth 8 --cap 8 --grid 64 --max-iterations 2 --out " + out.string()) == 3);
  CHECK(fs::exists(out / "FAILED"));

  const fs::path env_out = scratch("cli_env");
  const std::string env = "CWELD_OUTPUT_DIR=" + env_out.string() + " ";
  CHECK(std::system((env + CWELD_CLI_PATH + " solve --radial 2 --grid 64 --samples 64 > /dev/null").c_str()) == 0);
  CHECK(fs::exists(env_out / "solver.json"));

  const fs::path field = scratch("cli_field");
  CHECK(run_cli("sample-field --depth 8 --cap 8 --out " + field.string()) == 0);
  CHECK(run_cli("build-measure --depth 8 --cap 8 --field " + (field / "field.raw").string() + " --out " +
                field.string()) == 0);
  CHECK(run_cli("solve --grid 64 --measure " + (field / "measure.dmt").string() + " --out " + field.string()) == 0);
  CHECK(fs::exists(field / "curve.svg"));
  CHECK(run_cli("solve --grid 64 --out " + field.string()) == 2);
}
