#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "modslam/marching_cubes.hpp"
#include "modslam/mesh.hpp"

namespace modslam {

struct TsdfParams {
  double voxel_size = 0.02;
  double truncation = 0.08;  // 4 x voxel_size by default
  double max_weight = 64.0;
  Vec3 origin = Vec3(-2, -2, -2);
  Vec3 extents = Vec3(4, 4, 4);

  /// Throws InvalidArgument unless truncation > voxel_size > 0, extents > 0
  /// and max_weight > 0.
  void validate() const;
};

/// Dense truncated signed distance grid. Values are normalized by the
/// truncation distance and lie in [-1, 1]; weight 0 means unobserved.
class TsdfVolume {
 public:
  TsdfVolume() = default;
  TsdfVolume(const Vec3& origin, std::array<int, 3> dims, double voxel_size);
  static TsdfVolume from_params(const TsdfParams& params);

  const GridSpec& grid() const { return grid_; }
  const std::array<int, 3>& dims() const { return grid_.dims; }
  double voxel_size() const { return grid_.voxel_size; }
  const Vec3& origin() const { return grid_.origin; }
  std::size_t voxel_count() const { return tsdf_.size(); }

  std::size_t index(int i, int j, int k) const {
    return (std::size_t(k) * grid_.dims[1] + j) * grid_.dims[0] + i;
  }
  float& tsdf(int i, int j, int k) { return tsdf_[index(i, j, k)]; }
  float tsdf(int i, int j, int k) const { return tsdf_[index(i, j, k)]; }
  float& weight(int i, int j, int k) { return weight_[index(i, j, k)]; }
  float weight(int i, int j, int k) const { return weight_[index(i, j, k)]; }
  Rgb8& color(int i, int j, int k) { return color_[index(i, j, k)]; }
  const Rgb8& color(int i, int j, int k) const { return color_[index(i, j, k)]; }

  const std::vector<float>& tsdf_values() const { return tsdf_; }
  const std::vector<float>& weights() const { return weight_; }

  bool empty() const;
  double weight_sum() const;
  /// FNV-1a over the tsdf, weight and color arrays.
  std::uint64_t state_hash() const;

  /// Trilinear tsdf at a world point; nullopt outside the grid or when any
  /// of the 8 neighbours is unobserved.
  std::optional<double> sample(const Vec3& p) const;
  /// Trilinear color in [0,1] (unchecked weights, clamps to the grid).
  Vec3 sample_color(const Vec3& p) const;
  /// Normalized tsdf gradient by central differences of trilinear samples.
  std::optional<Vec3> gradient(const Vec3& p) const;

 private:
  GridSpec grid_;
  std::vector<float> tsdf_;
  std::vector<float> weight_;
  std::vector<Rgb8> color_;
};

/// Projective TSDF fusion of one depth (and optional color) image seen from
/// cam_to_world. frame_weight is the weight of this observation.
void tsdf_integrate(TsdfVolume& volume, const ImageF& depth,
                    const ImageF* color, const CameraModel& cam,
                    const Pose& cam_to_world, const TsdfParams& params,
                    float frame_weight = 1.0f);

struct ModelRender {
  ImageF depth;    // z-depth meters, 0 = miss
  ImageF normals;  // 3 channels, camera frame, zero where invalid
  ImageF color;    // 3 channels [0,1]
};

/// Ray marching at 0.5 x truncation until a +/- sign change, refined by
/// linear interpolation of the two bracketing samples.
ModelRender raycast_tsdf(const TsdfVolume& volume, const CameraModel& cam,
                         const Pose& cam_to_world, double truncation,
                         double max_range = 8.0);

/// Zero level set of the observed region, with per-vertex colors. Cells
/// touching an unobserved voxel are skipped.
TriangleMesh marching_cubes(const TsdfVolume& volume, double iso = 0.0);

}  // namespace modslam
