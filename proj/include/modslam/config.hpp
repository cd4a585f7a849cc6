#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "modslam/algorithms.hpp"
#include "modslam/dataset.hpp"
#include "modslam/evaluation.hpp"
#include "modslam/param_table.hpp"

namespace modslam {

enum class SyncMode { Lockstep, Pipelined };
std::string to_string(SyncMode m);

struct AlgorithmConfig {
  std::string name;
  ParamTable params;  // every algorithm.* key except name

  bool operator==(const AlgorithmConfig&) const = default;
};

struct PipelineConfig {
  int queue_capacity = 8;
  SyncMode sync = SyncMode::Lockstep;
  int viz_interval = 10;
  int render_eval_interval = 50;
  bool odometry_only = false;
  bool use_gt_pose = false;

  bool operator==(const PipelineConfig&) const = default;
};

/// Thresholds used by the evaluation stage of a run.
struct EvaluationConfig {
  AlignMode align = AlignMode::SE3;
  double max_dt = 0.02;        // seconds, trajectory association
  double tau_f = 0.05;         // meters, precision/recall threshold
  double tau_c = 0.05;         // meters, completion ratio threshold
  int samples = 200000;        // surface samples per mesh
  int depth_l1_stride = 50;    // frames between depth-L1 views

  bool operator==(const EvaluationConfig&) const = default;
};

struct RunConfig {
  DatasetConfig dataset;
  AlgorithmConfig algorithm;
  PipelineConfig pipeline;
  EvaluationConfig evaluation;
  std::filesystem::path output_dir = "output";
  std::uint64_t seed = 0;

  /// Throws ConfigError unless the invariants hold: queue capacity,
  /// intervals and downsample >= 1, a registered algorithm whose parameters
  /// parse, and no frame-to-model tracker in odometry-only mode.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// Parses a TOML document with sections [dataset], [algorithm], [pipeline]
/// and [evaluation] plus top-level output_dir and seed. Overrides of the form
/// "section.key=value" (value in TOML syntax, bare words taken as strings)
/// are applied before validation. Relative dataset roots and output dirs
/// resolve against base_dir when it is not empty. Throws ConfigError naming
/// the offending key for unknown keys, missing required keys and type
/// mismatches.
RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {},
                       const std::filesystem::path& base_dir = {});

/// Reads and parses a file; relative paths resolve against its directory.
/// Throws IoError when unreadable.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// TOML text that parse_config maps back to an identical RunConfig.
std::string serialize_config(const RunConfig& config);

/// The objects one run needs, built before any stage worker starts.
struct ComponentGraph {
  DatasetDescriptor dataset;
  std::unique_ptr<Algorithm> algorithm;
  AlgorithmParams algorithm_params;
  PipelineConfig pipeline;
  EvaluationConfig evaluation;
};

/// Opens the dataset and looks up the algorithm. Throws IoError for an
/// unreadable dataset and ConfigError for an unregistered algorithm.
ComponentGraph instantiate(const RunConfig& config);

}  // namespace modslam
