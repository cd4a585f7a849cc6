#include "modslam/trajectory_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <string>

#include "modslam/errors.hpp"

namespace modslam {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

bool is_blank_or_comment(const std::string& line) {
  const auto p = line.find_first_not_of(" \t\r");
  return p == std::string::npos || line[p] == '#';
}

}  // namespace

Trajectory read_tum_trajectory(const std::filesystem::path& path) {
  auto in = open_in(path);
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    std::istringstream ls(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected 'timestamp tx ty tz qx qy qz qw'");
    }
    try {
      traj.push_back(t, Pose::from_quaternion(Vec4(qw, qx, qy, qz), Vec3(tx, ty, tz)));
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return traj;
}

void write_tum_trajectory(const std::filesystem::path& path,
                          const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& s : trajectory.samples()) {
    const Vec3& t = s.pose.translation();
    const Vec4 q = s.pose.quaternion();
    out << fmt::format("{:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f}\n",
                       s.timestamp, t.x(), t.y(), t.z(), q[1], q[2], q[3], q[0]);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Pose> read_matrix_trajectory(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Pose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    std::istringstream ls(line);
    Mat4 M;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if (!(ls >> M(r, c))) {
          throw IoError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 16 numbers");
        }
      }
    }
    try {
      poses.push_back(Pose::from_matrix(M));
    } catch (const InvalidArgument& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return poses;
}

void write_matrix_trajectory(const std::filesystem::path& path,
                             const std::vector<Pose>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Pose& p : poses) {
    const Mat4 M = p.matrix();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        out << fmt::format("{:.17g}", M(r, c)) << (r == 3 && c == 3 ? '\n' : ' ');
      }
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace modslam
