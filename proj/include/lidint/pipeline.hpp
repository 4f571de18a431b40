#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lidint/annotate.hpp"
#include "lidint/densify.hpp"
#include "lidint/eval.hpp"
#include "lidint/image.hpp"
#include "lidint/solver.hpp"
#include "lidint/synth.hpp"

namespace lidint {

/// How a sample's sparse intensity is stored: a 16-bit intensity PNG plus an
/// 8-bit mask PNG, or a CSV of "u,v,intensity" rows with a normalizing
/// divisor.
struct LidarRef {
  std::string png;      // intensity PNG path (paired with mask)
  std::string mask;
  std::string csv;      // alternative: CSV path
  double divisor = 1.0;

  bool is_csv() const { return !csv.empty(); }
};

struct Sample {
  std::string id;
  std::string image;          // display-encoded PNG
  double gamma = 2.2;         // encoding exponent of the image file
  LidarRef lidar;
  std::string albedo;         // optional ground-truth albedo PNG (linear)
  std::string shade;          // optional ground-truth shade PNG (linear)
  std::string annotations;    // optional JSON-lines pair file
};

std::vector<Sample> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<Sample>& samples);

struct LoadedSample {
  LinearImage image;
  SparseIntensity lidar;
  std::optional<LinearImage> gt_albedo;
  std::optional<GrayMap> gt_shade;
  std::vector<AnnotationPair> annotations;  // empty when the sample has none
};

/// Loads and validates every referenced file; relative paths resolve against
/// base_dir. CSV rows are checked against the image bounds and malformed
/// rows are reported with their row number.
LoadedSample load_sample(const Sample& sample, const std::string& base_dir);

/// CSV helpers for the "u,v,intensity" sparse format (header line required).
SparseIntensity load_lidar_csv(const std::string& path, int width, int height, double divisor);
void save_lidar_csv(const std::string& path, const SparseIntensity& sparse);

/// Writes a synthetic scene to dir as PNGs (image display-encoded with the
/// given gamma, ground truth stored linearly) plus the sparse intensity, and
/// returns a manifest entry with paths relative to dir.
Sample save_scene(const std::string& dir, const std::string& id, const SynthScene& scene,
                  double gamma = 2.2);

/// Flat key=value configuration text: '#' comments, one pair per line.
std::map<std::string, std::string> load_key_value_config(const std::string& path);

enum class Method {
  ours,
  ours_no_lid,
  ours_no_int,
  baseline_r,
  baseline_s,
  retinex,
  color_retinex,
};

Method method_from_name(const std::string& name);
std::string method_name(Method m);

struct ExperimentConfig {
  std::string manifest;
  std::vector<Method> methods{Method::ours};
  std::vector<double> densities{1.0, 0.5, 0.1, 0.01};
  double delta = 0.1;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir;
  bool balanced = false;
  double annotation_r_frac = 0.07;
  int jobs = 1;
  SolverConfig solver;
  DensifyParams densify;

  void validate() const;
  static ExperimentConfig from_key_values(const std::map<std::string, std::string>& kv);
};

struct RunRow {
  std::string sample_id;
  Method method = Method::ours;
  double density = 1.0;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct RunFailure {
  std::string sample_id;
  std::string method;
  double density = 1.0;
  std::uint64_t seed = 0;
  std::string error;
};

struct AggregateRow {
  Method method = Method::ours;
  double density = 1.0;
  std::size_t runs = 0;
  double whdr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

struct ExperimentResult {
  std::vector<RunRow> rows;
  std::vector<RunFailure> failures;
  std::vector<AggregateRow> aggregate;
  std::string table;  // aligned text mirror of the aggregate
};

/// Runs every sample x method x density x seed combination, evaluating
/// against the sample's annotations (or simulated ones from ground-truth
/// albedo), writing per-run artifacts and an aggregate summary under
/// out_dir. Per-sample failures are collected, not fatal. Deterministic
/// given identical config and seeds, independent of the jobs count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// One decomposition with the method/density/seed semantics of the runner;
/// exposed so tools and tests share the exact experiment path.
Decomposition run_method(Method method, const LinearImage& image, const SparseIntensity& lidar,
                         const SolverConfig& solver_cfg, const DensifyParams& densify_params);

}  // namespace lidint
