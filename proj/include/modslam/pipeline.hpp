#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "modslam/config.hpp"

namespace modslam {

/// Tracker to monitor status message, emitted on every viz_interval-th frame.
struct VizPacket {
  long index = 0;
  Pose est_pose;
  ImageF color;
  ImageF model_depth;  // map raycast, or live depth without a map; empty if none
  double frame_seconds = 0;  // tracker + mapper time of this frame
  double cumulative_fps = 0;
};

struct FrameRecord {
  long index = 0;
  double timestamp = 0;
  Pose est_pose;
  std::optional<Pose> gt_pose;
  double tracker_seconds = 0;
  double mapper_seconds = 0;  // 0 when no mapper ran
  bool keyframe = false;
  bool integrated = false;
  double peak_rss_bytes = 0;
};

struct RunArtifacts {
  std::filesystem::path out_dir;
  std::filesystem::path trajectory;     // TUM, estimated poses
  std::filesystem::path stats;          // per-frame timing
  std::filesystem::path config;         // resolved configuration
  std::filesystem::path summary;        // counters as JSON
  std::filesystem::path monitor_dir;    // snapshots + monitor.tsv
  std::optional<std::filesystem::path> gt_trajectory;
  std::optional<std::filesystem::path> mesh;
  std::optional<std::filesystem::path> renders_dir;
  int render_pairs = 0;

  std::vector<FrameRecord> frames;
  std::vector<long> integrated_keyframes;
  std::size_t max_map_queue_depth = 0;
  long max_tracker_lead = 0;  // packets queued ahead of the mapper, at push time
  std::size_t viz_written = 0;
  std::size_t viz_dropped = 0;
  std::size_t monitor_errors = 0;
  double wall_seconds = 0;
  double fps = 0;  // frames / sum of tracker and mapper time
  double peak_rss_bytes = 0;
};

/// Resident-set high-water mark of this process in bytes.
double peak_rss_bytes();

/// Runs tracker, mapper and monitor as concurrent workers over the whole
/// dataset, then exports results into config.output_dir. Throws StageError
/// for the first stage failure, after stopping every worker.
RunArtifacts run_pipeline(ComponentGraph& graph, const RunConfig& config);

/// Convenience: instantiate + run_pipeline.
RunArtifacts run_pipeline(const RunConfig& config);

/// File names inside the output directory.
namespace artifact {
inline constexpr const char* kTrajectory = "trajectory.txt";
inline constexpr const char* kGtTrajectory = "gt_trajectory.txt";
inline constexpr const char* kMesh = "mesh.ply";
inline constexpr const char* kRenders = "renders";
inline constexpr const char* kStats = "stats.tsv";
inline constexpr const char* kConfig = "config.toml";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kMonitor = "monitor";
inline constexpr const char* kReport = "metrics.json";
}  // namespace artifact

/// "render_color_%06d.png" / "render_depth_%06d.png".
std::string render_color_name(long index);
std::string render_depth_name(long index);

struct StatsRow {
  long index = 0;
  double tracker_seconds = 0, mapper_seconds = 0, cumulative_fps = 0, peak_rss_bytes = 0;
};
/// Parses stats.tsv. Throws IoError when unreadable or malformed.
std::vector<StatsRow> read_stats(const std::filesystem::path& path);

}  // namespace modslam
