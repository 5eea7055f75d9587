#ifndef CWELD_PIPELINE_HPP_
#define CWELD_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "cweld/beltrami.hpp"
#include "cweld/cascade.hpp"
#include "cweld/survival.hpp"

namespace cweld {

struct ScheduleConfig {
  std::string kind = "constant";  // constant | critical
  double t = 1.0;                 // constant schedules
  double gamma = 0.5;             // critical schedules
  double epsilon = 0.1;
  int cap = 12;
};

struct EmitterConfig {
  bool csv = true;
  bool json = true;
  bool svg = true;
};

/// Optional stopping-time tree stage; its summary lands in the diagnostics.
struct TreeStageConfig {
  bool enabled = false;
  int N = 9;
  int generations = 1;
  int d = 2;
};

enum class WeldMode { one_gff, two_gff };

/// Everything a run reads. The output directory is excluded from the config
/// hash so bundles written to different places compare equal.
struct RunConfig {
  std::uint64_t seed = 1;
  ScheduleConfig schedule;
  int depth = 12;       // cascade and measure depth
  int oversample = 4;   // field grid 2^{depth + oversample}
  int filter_resolution = 1024;
  GridSpec grid{256, 2.0};
  int truncation = 8;
  int max_iterations = 2000;
  double tolerance = 1e-8;
  double max_clip_fraction = 0.01;
  int curve_samples = 4096;
  std::vector<double> annulus_inner{0.0625, 0.125, 0.25};  // A(0, r, 2r) diagnostics
  WeldMode mode = WeldMode::one_gff;
  std::uint64_t seed2 = 2;
  Stream stream2 = Stream::kSecondField;  // kVaguelet or kSecondField
  std::filesystem::path output_dir = "cweld_out";
  EmitterConfig emit;
  TreeStageConfig tree;

  /// ConfigError on inconsistent stage parameters: field grid must resolve
  /// the depth (oversample >= 4), depth within the schedule cap, solver box
  /// half-width >= 2 with a power-of-two grid, gamma in (0, 1) for
  /// critical schedules, positive tolerances and sample counts.
  void validate() const;
  VarianceSchedule make_schedule() const;
  /// Canonical JSON without the output directory.
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
};

std::string to_string(WeldMode mode);
std::string to_string(Stream stream);
Stream stream_from_string(const std::string& name);

/// Error raised inside a named stage; the original kind survives through
/// `numerical`.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what, bool numerical)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), numerical_(numerical) {}
  const std::string& stage() const { return stage_; }
  bool numerical() const { return numerical_; }

 private:
  std::string stage_;
  bool numerical_;
};

struct BundleFile {
  std::string name;
  std::uint64_t hash = 0;  // FNV-1a of the contents
  std::uintmax_t bytes = 0;
};

struct Bundle {
  std::filesystem::path dir;
  std::vector<BundleFile> files;  // sorted by name, manifest excluded
  std::uint64_t manifest_hash = 0;
  nlohmann::json diagnostics;
};

/// Stages: field, measure, homeomorphism, extension, beltrami, solve, curve,
/// diagnostics, [tree], manifest. Each stage writes its artifacts as it
/// finishes. On failure a FAILED file naming the stage is written next to the
/// partial bundle and a StageError is thrown.
Bundle run_pipeline(const RunConfig& config);

/// Lists the bundle files in name order, hashes them and writes
/// manifest.json (config, hash, seeds, streams, version, files).
Bundle write_manifest(const std::filesystem::path& dir, const RunConfig& config,
                      nlohmann::json diagnostics = {});

std::uint64_t file_hash(const std::filesystem::path& path);

/// Static plots.
void write_homeomorphism_svg(const std::filesystem::path& path, const CircleHomeomorphism& h);
/// Polyline of (log2 inner radius, value) per series, one colour each.
void write_modulus_svg(const std::filesystem::path& path, std::span<const double> inner,
                       std::span<const double> source, std::span<const double> image,
                       std::span<const double> lehto);

inline constexpr const char* kVersion = "cweld 1.0.0";

}  // namespace cweld

#endif  // CWELD_PIPELINE_HPP_
