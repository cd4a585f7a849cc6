#pragma once

#include <filesystem>
#include <optional>

#include "modslam/config.hpp"
#include "modslam/evaluation.hpp"

namespace modslam {

/// "synthetic" when synthetic.json is present, "tum" when rgb.txt is,
/// otherwise "replica".
DatasetKind detect_dataset_kind(const std::filesystem::path& root);
/// open_dataset with the detected kind and default options.
DatasetDescriptor open_dataset_dir(const std::filesystem::path& root);

struct TrajectoryEval {
  double ate_cm = 0;
  int pairs = 0;
  Similarity alignment;  // maps estimated positions into the ground-truth frame
};
/// Throws DegenerateInput when fewer than 3 poses associate.
TrajectoryEval evaluate_trajectory(const Trajectory& gt, const Trajectory& est, AlignMode align,
                                   double max_dt);

struct RenderEval {
  double psnr_db = 0;  // mean over views
  bool capped = false;
  double ssim = 0;     // mean over views
  int views = 0;
};
/// Pairs render_color_<index>.png files whose index is a multiple of stride
/// with the dataset frame of that index. Throws InvalidArgument naming the
/// first render without a frame and DegenerateInput when nothing pairs.
RenderEval evaluate_renders(const std::filesystem::path& renders_dir,
                            const DatasetDescriptor& desc, int stride = 1);

/// Every metric of a finished run directory, using the evaluation settings
/// stored with it. Sections whose inputs are missing stay null. The
/// reconstruction is moved into the ground-truth frame by the trajectory
/// alignment unless alignment is disabled.
MetricsReport evaluate_run(const std::filesystem::path& run_dir);

/// Renders depth (16 bit, depth_scale units) and headlight-shaded normals
/// (8 bit RGB) of a mesh at every stride-th pose. Returns the number of
/// image pairs written. Throws InvalidArgument for an empty mesh.
int replay(const std::vector<Pose>& poses, const TriangleMesh& mesh, const CameraModel& cam,
           const std::filesystem::path& out_dir, int stride);

/// TUM ("t tx ty tz qx qy qz qw") or 16-number matrix rows, by column count.
std::vector<Pose> read_any_trajectory(const std::filesystem::path& path);

/// "fx fy cx cy width height". Throws IoError.
CameraModel read_intrinsics(const std::filesystem::path& path, double depth_scale);

}  // namespace modslam
