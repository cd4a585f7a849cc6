#pragma once

#include <filesystem>
#include <vector>

#include "modslam/geometry.hpp"

namespace modslam {

/// TUM trajectory: "timestamp tx ty tz qx qy qz qw" per line, '#' comments.
/// Quaternions are scalar-last on disk.
Trajectory read_tum_trajectory(const std::filesystem::path& path);
void write_tum_trajectory(const std::filesystem::path& path,
                          const Trajectory& trajectory);

/// Replica-style trajectory: 16 numbers per line, row-major camera-to-world.
std::vector<Pose> read_matrix_trajectory(const std::filesystem::path& path);
void write_matrix_trajectory(const std::filesystem::path& path,
                             const std::vector<Pose>& poses);

}  // namespace modslam
