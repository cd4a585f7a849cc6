#pragma once

#include <vector>

#include "modslam/geometry.hpp"

namespace modslam {

/// Constant-velocity motion prior: prev1 * (prev2^-1 * prev1). With only
/// prev1 it returns prev1, with neither the identity.
Pose predict_constant_velocity(const std::optional<Pose>& prev1,
                               const std::optional<Pose>& prev2);

/// Per-pixel unit normals (camera frame, 3 channels) from central
/// differences of unprojected points, oriented toward the camera. Pixels
/// whose depth or any 4-neighbour depth is invalid, and border pixels, get
/// the zero vector.
ImageF estimate_normals(const ImageF& depth, const CameraModel& cam);

/// Nearest-sample decimation by an integer factor, matching
/// CameraModel::downsampled.
ImageF decimate(const ImageF& img, int k);

struct IcpParams {
  int pyramid_levels = 3;
  std::vector<int> max_iters{10, 5, 4};  // coarse to fine
  double dist_reject = 0.10;             // meters
  double normal_reject = 0.524;          // radians
  double convergence_eps = 1e-6;         // twist norm
  int min_correspondences = 200;

  /// Throws InvalidArgument unless every field is positive and max_iters
  /// has one entry per level.
  void validate() const;
};

struct IcpStats {
  std::vector<int> iterations;  // per level, coarse to fine
  int total_iterations = 0;
  double final_error = 0;       // mean squared point-to-plane residual, m^2
  int inlier_count = 0;
};

struct IcpResult {
  Pose pose;
  IcpStats stats;
};

/// Model side of a registration: depth and camera-frame normals seen from
/// model_pose (a TSDF raycast, or the previous frame for odometry).
struct IcpModel {
  const ImageF& depth;
  const ImageF& normals;
  Pose pose;
};

/// Point-to-plane ICP of live_depth against the model with projective data
/// association, coarse-to-fine over a depth pyramid. The pose is updated as
/// T <- exp(xi) * T with xi = (v, omega). Throws DivergenceError on too few
/// final correspondences, a singular normal matrix or an objective that
/// keeps increasing after step halving.
IcpResult icp_point_to_plane(const IcpModel& model, const ImageF& live_depth,
                             const CameraModel& cam, const Pose& init,
                             const IcpParams& params);

/// r(xi) = (exp(xi) * T * p_live - q) . n and its derivative at xi = 0,
/// [n^T, (x cross n)^T] with x = T * p_live.
double point_to_plane_residual(const Pose& T, const Vec3& p_live, const Vec3& q,
                               const Vec3& n);
Eigen::Matrix<double, 1, 6> point_to_plane_jacobian(const Pose& T,
                                                    const Vec3& p_live,
                                                    const Vec3& n);

}  // namespace modslam
