#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "modslam/geometry.hpp"
#include "modslam/mesh.hpp"

namespace modslam {

// ---------------------------------------------------------------------------
// Analytic scenes

/// Room walls: free space inside, matter outside.
struct InvertedBox {
  Vec3 center;
  Vec3 half_extents;
};
struct Sphere {
  Vec3 center;
  double radius;
};
struct Box {
  Vec3 center;
  Vec3 half_extents;
};
using SdfPrimitive = std::variant<InvertedBox, Sphere, Box>;

struct SdfScene {
  std::vector<SdfPrimitive> primitives;

  /// Throws InvalidArgument unless there is one room and every other
  /// primitive lies inside it.
  void validate() const;
  /// Axis-aligned bounds of the room.
  Eigen::AlignedBox3d bounds() const;
};

double sdf_eval(const SdfPrimitive& prim, const Vec3& p);
/// Min-union over all primitives; optionally reports the closest primitive.
double sdf_eval(const SdfScene& scene, const Vec3& p, int* nearest = nullptr);
/// Unit gradient by central differences with h = 1e-4 m.
Vec3 sdf_normal(const SdfScene& scene, const Vec3& p);

inline constexpr double kSdfMaxRange = 8.0;
inline constexpr double kSdfSurfaceTol = 1e-4;
inline constexpr int kSdfMaxSteps = 256;

/// Sphere-traced z-depth image; misses and hits beyond 8 m are 0.
ImageF raycast_sdf(const SdfScene& scene, const CameraModel& cam,
                   const Pose& cam_to_world);

struct SdfRender {
  ImageF depth;
  ImageF color;
};
/// Depth plus Lambertian shading under a single directional light.
SdfRender render_sdf(const SdfScene& scene, const CameraModel& cam,
                     const Pose& cam_to_world, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic sequences

struct OrbitSpec {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  double height = 0.0;           // camera z relative to center
  double start_angle = 0.0;      // radians
  double total_angle = 2 * M_PI; // radians swept over the sequence
  Vec3 target = Vec3::Zero();    // look-at point
  double target_bob = 0.0;       // vertical look-at oscillation amplitude (m)
  double bob_cycles = 0.0;       // oscillations over the sequence
};
struct LineSpec {
  Vec3 start = Vec3(-0.5, 0, 0);
  Vec3 end = Vec3(0.5, 0, 0);
  Vec3 target = Vec3(0, 1, 0);
};
using TrajectorySpec = std::variant<OrbitSpec, LineSpec>;

/// Camera-to-world pose looking from eye toward target with world +z up
/// (camera x right, y down, z forward).
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

std::vector<Pose> trajectory_poses(const TrajectorySpec& spec, int n_frames);

struct SyntheticOptions {
  double mesh_voxel = 0.01;  // marching cubes lattice for the reference mesh
  double frame_rate = 30.0;
  double depth_scale = 6553.5;
};

// ---------------------------------------------------------------------------
// Datasets

enum class DatasetKind { Tum, Replica, Synthetic };

std::string to_string(DatasetKind kind);
/// Accepts "tum", "replica", "synthetic". Throws ConfigError otherwise.
DatasetKind parse_dataset_kind(const std::string& s);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Replica;
  std::filesystem::path root;
  int downsample = 1;
  long first_frame = 0;
  long last_frame = -1;  // exclusive, -1 = until the end
  double max_dt = 0.02;  // TUM association window, seconds
  // Optional intrinsics overrides.
  std::optional<double> fx, fy, cx, cy, depth_scale;

  bool operator==(const DatasetConfig&) const = default;
};

struct AssociationRecord {
  double t_color = 0, t_depth = 0;
  std::optional<double> t_gt;
  std::string color_path, depth_path;
  std::optional<Pose> gt_pose;
};

struct TimestampedEntry {
  double timestamp;
  std::string path;
};

struct DatasetDescriptor {
  DatasetKind kind = DatasetKind::Replica;
  std::filesystem::path root;
  CameraModel camera;       // after downsampling
  CameraModel raw_camera;   // as stored on disk
  int downsample = 1;
  long frame_count = 0;
  std::vector<AssociationRecord> associations;  // TUM only

  // Per-frame data for the selected range.
  std::vector<double> timestamps;
  std::vector<std::filesystem::path> color_paths, depth_paths;
  std::vector<std::optional<Pose>> gt_poses;

  // Synthetic extras.
  std::optional<SdfScene> scene;
  std::optional<std::filesystem::path> gt_mesh_path;
  std::uint64_t seed = 0;

  Trajectory gt_trajectory() const;
};

/// Greedy mutual-nearest association: candidate pairs within max_dt are
/// taken in order of increasing |dt|, each entry used at most once. Throws
/// IoError "no associable frames" when nothing matches.
std::vector<AssociationRecord> associate_tum(
    const std::vector<TimestampedEntry>& color,
    const std::vector<TimestampedEntry>& depth, const Trajectory& gt,
    double max_dt);

/// Index pairs (into a, b) produced by the same greedy policy, sorted by a.
std::vector<std::pair<std::size_t, std::size_t>> greedy_associate(
    const std::vector<double>& a, const std::vector<double>& b, double max_dt);

/// Throws IoError for a missing root, missing intrinsics or empty sequence.
DatasetDescriptor open_dataset(const DatasetConfig& config);

/// Throws IoError naming the frame index for unreadable images and
/// InvalidArgument for an out-of-range index.
Frame load_frame(const DatasetDescriptor& desc, long i);

/// Renders and writes a Replica-layout sequence plus metadata and the
/// reference mesh. Throws IoError when out_dir is not writable.
DatasetDescriptor generate_synthetic(const SdfScene& scene,
                                     const TrajectorySpec& trajectory,
                                     const CameraModel& cam, int n_frames,
                                     const std::filesystem::path& out_dir,
                                     std::uint64_t seed,
                                     const SyntheticOptions& options = {});

/// Reference mesh of an analytic scene on a lattice of the given pitch.
TriangleMesh scene_mesh(const SdfScene& scene, double voxel);

/// Named scenes: "room-sphere", "room-boxes".
std::vector<std::string> synthetic_presets();
struct SyntheticPreset {
  SdfScene scene;
  TrajectorySpec trajectory;
  CameraModel camera;
};
/// Throws ConfigError for an unknown name.
SyntheticPreset synthetic_preset(const std::string& name);

}  // namespace modslam
