#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "modslam/geometry.hpp"

namespace modslam::test {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Vec3 random_axis_angle(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> a(0, max_angle);
  return random_unit(rng) * a(rng);
}

inline Vec4 random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Vec4 q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

inline Pose random_pose(std::mt19937_64& rng, double max_t = 5.0) {
  std::uniform_real_distribution<double> t(-max_t, max_t);
  return Pose::from_quaternion(random_quat(rng), Vec3(t(rng), t(rng), t(rng)));
}

inline CameraModel small_camera() {
  return CameraModel{80.0, 80.0, 39.5, 29.5, 80, 60, 6553.5};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("modslam_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace modslam::test
