#include "modslam/tsdf.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "modslam/errors.hpp"
#include "test_util.h"

namespace modslam {
namespace {

// Odd-sized camera whose principal point sits on a pixel center, so the
// central pixel looks straight down the optical axis.
const CameraModel kCam{80.0, 80.0, 40.0, 30.0, 81, 61, 1000.0};

TsdfParams frustum_params() {
  TsdfParams p;
  p.voxel_size = 0.02;
  p.truncation = 0.08;
  p.origin = Vec3(-1.1, -0.84, 1.7);  // x = y = 0 is a lattice column
  p.extents = Vec3(2.2, 1.68, 0.6);
  return p;
}

ImageF constant_depth(double d) { return ImageF(kCam.width, kCam.height, 1, float(d)); }

TEST(Tsdf, ParamsValidate) {
  TsdfParams p;
  EXPECT_NO_THROW(p.validate());
  p.truncation = p.voxel_size;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = TsdfParams{};
  p.extents = Vec3(1, 0, 1);
  EXPECT_THROW(p.validate(), InvalidArgument);
  EXPECT_THROW(TsdfVolume(Vec3::Zero(), {1, 4, 4}, 0.1), InvalidArgument);
}

TEST(Tsdf, FrontalPlaneZeroCrossing) {
  const auto params = frustum_params();
  auto vol = TsdfVolume::from_params(params);
  tsdf_integrate(vol, constant_depth(2.0), nullptr, kCam, Pose::identity(), params);
  const int i = 55, j = 42;  // the optical axis column
  ASSERT_NEAR(vol.grid().position(i, j, 0).head<2>().norm(), 0.0, 1e-12);
  std::optional<double> crossing;
  for (int k = 0; k + 1 < vol.dims()[2]; ++k) {
    const float a = vol.tsdf(i, j, k), b = vol.tsdf(i, j, k + 1);
    if (vol.weight(i, j, k) > 0 && vol.weight(i, j, k + 1) > 0 && a > 0 && b <= 0) {
      const double za = vol.grid().position(i, j, k).z();
      crossing = za + params.voxel_size * a / (a - b);
      break;
    }
  }
  ASSERT_TRUE(crossing);
  EXPECT_NEAR(*crossing, 2.0, params.voxel_size / 2);
}

TEST(Tsdf, WeightsSaturate) {
  auto params = frustum_params();
  params.max_weight = 5;
  auto vol = TsdfVolume::from_params(params);
  for (int n = 0; n < 15; ++n) {
    tsdf_integrate(vol, constant_depth(2.0), nullptr, kCam, Pose::identity(), params);
  }
  float wmax = 0;
  for (float w : vol.weights()) wmax = std::max(wmax, w);
  EXPECT_EQ(wmax, 5.0f);
}

TEST(Tsdf, BehindTruncationUntouched) {
  const auto params = frustum_params();
  auto vol = TsdfVolume::from_params(params);
  tsdf_integrate(vol, constant_depth(1.9), nullptr, kCam, Pose::identity(), params);
  for (int k = 0; k < vol.dims()[2]; ++k) {
    const double z = vol.grid().position(55, 42, k).z();
    if (z > 1.9 + params.truncation + 1e-9) {
      EXPECT_EQ(vol.weight(55, 42, k), 0.0f) << z;
      EXPECT_EQ(vol.tsdf(55, 42, k), 1.0f);
    } else if (z < 1.9 + params.truncation - 1e-9) {
      EXPECT_GT(vol.weight(55, 42, k), 0.0f) << z;
    }
  }
}

TEST(Tsdf, TwiceEqualsOnceWithDoubleWeight) {
  const auto params = frustum_params();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(1.8f, 2.2f);
  ImageF depth(kCam.width, kCam.height);
  ImageF color(kCam.width, kCam.height, 3);
  for (auto& d : depth.data()) d = u(rng);
  for (auto& c : color.data()) c = u(rng) - 1.7f;
  const Pose pose = Pose::from_axis_angle(Vec3(0.01, -0.02, 0.005), Vec3(0.02, 0.0, -0.03));

  auto twice = TsdfVolume::from_params(params);
  tsdf_integrate(twice, depth, &color, kCam, pose, params);
  tsdf_integrate(twice, depth, &color, kCam, pose, params);
  auto once = TsdfVolume::from_params(params);
  tsdf_integrate(once, depth, &color, kCam, pose, params, 2.0f);
  EXPECT_EQ(twice.tsdf_values(), once.tsdf_values());
  EXPECT_EQ(twice.weights(), once.weights());
  EXPECT_EQ(twice.state_hash(), once.state_hash());
}

TEST(Tsdf, ValuesStayNormalized) {
  const auto params = frustum_params();
  auto vol = TsdfVolume::from_params(params);
  tsdf_integrate(vol, constant_depth(2.0), nullptr, kCam, Pose::identity(), params);
  tsdf_integrate(vol, constant_depth(1.75), nullptr, kCam,
                 Pose::translation_only(Vec3(0.05, 0, 0.1)), params);
  for (std::size_t n = 0; n < vol.voxel_count(); ++n) {
    ASSERT_LE(std::abs(vol.tsdf_values()[n]), 1.0f);
    ASSERT_GE(vol.weights()[n], 0.0f);
  }
}

TEST(Tsdf, RaycastEmptyVolumeIsZero) {
  const auto vol = TsdfVolume::from_params(frustum_params());
  const auto r = raycast_tsdf(vol, kCam, Pose::identity(), 0.08);
  for (float d : r.depth.data()) ASSERT_EQ(d, 0.0f);
}

TEST(Tsdf, FuseThenRaycastFrontalPlane) {
  const auto params = frustum_params();
  auto vol = TsdfVolume::from_params(params);
  tsdf_integrate(vol, constant_depth(2.0), nullptr, kCam, Pose::identity(), params);

  const auto same = raycast_tsdf(vol, kCam, Pose::identity(), params.truncation);
  int good = 0;
  for (float d : same.depth.data()) good += std::abs(d - 2.0) <= params.voxel_size / 2;
  EXPECT_GE(good, 0.95 * kCam.width * kCam.height);
  // Normals face the camera.
  const Vec3 n(same.normals(40, 30, 0), same.normals(40, 30, 1), same.normals(40, 30, 2));
  EXPECT_NEAR(n.z(), -1.0, 1e-3);

  // 10 cm closer along the axis: the plane is at 1.9 m.
  const auto moved = raycast_tsdf(vol, kCam, Pose::translation_only(Vec3(0, 0, 0.1)),
                                  params.truncation);
  int valid = 0, close = 0;
  for (float d : moved.depth.data()) {
    if (d <= 0) continue;
    ++valid;
    close += std::abs(d - 1.9) <= params.voxel_size;
  }
  EXPECT_GT(valid, kCam.width * kCam.height / 2);
  EXPECT_EQ(close, valid);

  // 10 cm sideways: same plane depth where observed.
  const auto side = raycast_tsdf(vol, kCam, Pose::translation_only(Vec3(0.1, 0, 0)),
                                 params.truncation);
  valid = close = 0;
  for (float d : side.depth.data()) {
    if (d <= 0) continue;
    ++valid;
    close += std::abs(d - 2.0) <= params.voxel_size;
  }
  EXPECT_GT(valid, kCam.width * kCam.height / 2);
  EXPECT_EQ(close, valid);
}

TEST(Tsdf, MarchingCubesOfFusedPlane) {
  const auto params = frustum_params();
  auto vol = TsdfVolume::from_params(params);
  ImageF color(kCam.width, kCam.height, 3, 0.5f);
  tsdf_integrate(vol, constant_depth(2.0), &color, kCam, Pose::identity(), params);
  const TriangleMesh mesh = marching_cubes(vol);
  ASSERT_FALSE(mesh.triangles.empty());
  ASSERT_EQ(mesh.colors.size(), mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) ASSERT_NEAR(v.z(), 2.0, params.voxel_size / 2);
  for (const auto& c : mesh.colors) ASSERT_NEAR(c[0], 128, 1);
  EXPECT_TRUE(marching_cubes(TsdfVolume::from_params(params)).triangles.empty());
}

TEST(Tsdf, SampleNeedsObservedNeighbours) {
  const auto params = frustum_params();
  auto vol = TsdfVolume::from_params(params);
  EXPECT_FALSE(vol.sample(Vec3(0, 0, 2)));
  tsdf_integrate(vol, constant_depth(2.0), nullptr, kCam, Pose::identity(), params);
  const auto s = vol.sample(Vec3(0.003, -0.002, 1.98));
  ASSERT_TRUE(s);
  EXPECT_NEAR(*s, 0.02 / params.truncation, 0.05);
  EXPECT_FALSE(vol.sample(Vec3(0, 0, 5)));
}

}  // namespace
}  // namespace modslam
