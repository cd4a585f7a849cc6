#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <vector>

#include "modslam/image.hpp"

namespace modslam {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Below this rotation angle exp/log switch to second-order Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& w);

/// Rodrigues rotation of an axis-angle vector. Throws InvalidArgument on
/// non-finite input.
Mat3 so3_exp(const Vec3& w);

/// Inverse of so3_exp with angle in [0, pi]. At exactly pi the axis is
/// canonicalized so that its first nonzero component is positive.
/// Throws InvalidArgument when R is not a rotation (tolerance 1e-6).
Vec3 so3_log(const Mat3& R);

/// Quaternions are scalar-first: (w, x, y, z).
Mat3 quat_to_rot(const Vec4& q);
/// Returns the representative with w >= 0 (first nonzero vector part
/// positive when w == 0).
Vec4 rot_to_quat(const Mat3& R);

/// SE(3) exponential of a twist ordered (v, omega): translation part first.
Mat4 se3_exp(const Vec6& xi);

/// Rigid camera-to-world transform with a switchable rotation
/// parameterization. Either representation yields the same matrix.
class Pose {
 public:
  enum class Param { AxisAngle, Quaternion };

  Pose() = default;

  static Pose identity(Param kind = Param::Quaternion);
  static Pose from_axis_angle(const Vec3& w, const Vec3& t);
  static Pose from_quaternion(const Vec4& q_wxyz, const Vec3& t);
  static Pose from_matrix(const Mat4& M, Param kind = Param::Quaternion);
  static Pose from_rt(const Mat3& R, const Vec3& t,
                      Param kind = Param::Quaternion);
  static Pose translation_only(const Vec3& t);

  Param param_kind() const { return kind_; }
  /// Same transform re-expressed in another parameterization.
  Pose as(Param kind) const;

  const Vec3& translation() const { return t_; }
  /// Axis-angle form of the rotation, independent of the stored kind.
  Vec3 axis_angle() const;
  /// Unit quaternion (w, x, y, z), independent of the stored kind.
  Vec4 quaternion() const;
  Mat3 rotation() const;
  Mat4 matrix() const;

  void set_translation(const Vec3& t) { t_ = t; }
  void set_axis_angle(const Vec3& w);
  void set_quaternion(const Vec4& q_wxyz);

  Vec3 apply(const Vec3& p) const { return rotation() * p + t_; }
  Pose inverse() const;
  Pose compose(const Pose& rhs) const;
  Pose operator*(const Pose& rhs) const { return compose(rhs); }

  /// Left-multiplicative twist update: exp(xi) * this.
  Pose left_perturbed(const Vec6& xi) const;

 private:
  Param kind_ = Param::Quaternion;
  Vec3 aa_ = Vec3::Zero();
  Vec4 q_ = Vec4(1, 0, 0, 0);
  Vec3 t_ = Vec3::Zero();
};

inline Pose pose_compose(const Pose& a, const Pose& b) { return a.compose(b); }
inline Pose pose_inverse(const Pose& a) { return a.inverse(); }
inline Vec3 pose_apply(const Pose& a, const Vec3& p) { return a.apply(p); }

/// Pinhole intrinsics. depth_scale is stored-depth units per meter.
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 1.0;

  /// Throws InvalidArgument if an invariant does not hold.
  void validate() const;
  /// Intrinsics for an image downsampled by an integer factor k.
  CameraModel downsampled(int k) const;

  bool operator==(const CameraModel&) const = default;
};

struct Projection {
  double u = 0, v = 0;
  bool valid = false;
};

Projection project(const CameraModel& cam, const Vec3& p_cam);
Vec3 unproject(const CameraModel& cam, double u, double v, double z);

/// Timestamped RGB-D observation. Poses are camera-to-world.
struct Frame {
  long index = 0;
  double timestamp = 0;
  ImageF color;  // H x W x 3, [0, 1]
  ImageF depth;  // H x W, meters, 0 = invalid
  std::optional<Pose> est_pose;
  std::optional<Pose> gt_pose;
};

struct TimedPose {
  double timestamp;
  Pose pose;
};

/// Ordered list of poses with strictly increasing timestamps.
class Trajectory {
 public:
  /// Throws InvalidArgument if t does not exceed the last timestamp.
  void push_back(double t, const Pose& pose);

  const std::vector<TimedPose>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::vector<TimedPose> samples_;
};

}  // namespace modslam
