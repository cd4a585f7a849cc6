#include "modslam/geometry.hpp"

#include <cmath>
#include <string>

#include "modslam/errors.hpp"

namespace modslam {
namespace {

bool all_finite(const auto& m) { return m.array().isFinite().all(); }

Vec3 vee(const Mat3& A) { return Vec3(A(2, 1), A(0, 2), A(1, 0)); }

// First nonzero component positive. Used only where the sign is otherwise
// undetermined (rotation by exactly pi).
Vec3 canonical_axis_sign(Vec3 k) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(k[i]) > 1e-12) {
      return k[i] < 0 ? Vec3(-k) : k;
    }
  }
  return k;
}

void check_rotation(const Mat3& R, double tol) {
  if (!all_finite(R)) throw InvalidArgument("rotation matrix is not finite");
  const double ortho = (R.transpose() * R - Mat3::Identity()).norm();
  const double det = R.determinant();
  if (ortho > tol || std::abs(det - 1.0) > tol) {
    throw InvalidArgument("matrix is not a rotation (orthonormality error " +
                          std::to_string(ortho) + ", det " +
                          std::to_string(det) + ")");
  }
}

Vec4 normalized_quat(const Vec4& q) {
  if (!all_finite(q)) throw InvalidArgument("quaternion is not finite");
  const double n = q.norm();
  if (n < 1e-12) throw InvalidArgument("zero quaternion");
  return q / n;
}

}  // namespace

Mat3 skew(const Vec3& w) {
  Mat3 S;
  S << 0, -w.z(), w.y(),  //
      w.z(), 0, -w.x(),   //
      -w.y(), w.x(), 0;
  return S;
}

Mat3 so3_exp(const Vec3& w) {
  if (!all_finite(w)) throw InvalidArgument("so3_exp: non-finite input");
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(w);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / theta2;
  return Mat3::Identity() + a * W + b * W * W;
}

Vec3 so3_log(const Mat3& R) {
  check_rotation(R, 1e-6);
  const Vec3 v = 0.5 * vee(R - R.transpose());  // sin(theta) * axis
  const double s = v.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) {
    // theta / sin(theta) ~ 1 + theta^2 / 6
    return v * (1.0 + theta * theta / 6.0);
  }
  if (c > -0.5) {
    return v * (theta / s);
  }
  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part (1 - cos) k k^T and take its sign from v.
  const Mat3 B = 0.5 * (R + R.transpose()) - c * Mat3::Identity();
  int col = 0;
  B.diagonal().maxCoeff(&col);
  Vec3 k = B.col(col).normalized();
  if (s > 1e-12 && k.dot(v) < 0) k = -k;
  if (s <= 1e-12) k = canonical_axis_sign(k);
  return k * theta;
}

Mat3 quat_to_rot(const Vec4& q_in) {
  const Vec4 q = normalized_quat(q_in);
  const Eigen::Quaterniond eq(q[0], q[1], q[2], q[3]);
  return eq.toRotationMatrix();
}

Vec4 rot_to_quat(const Mat3& R) {
  check_rotation(R, 1e-6);
  // Shepperd: branch on the largest of (trace, diagonal) for stability.
  Vec4 q;
  const double tr = R.trace();
  if (tr >= R(0, 0) && tr >= R(1, 1) && tr >= R(2, 2)) {
    const double r = std::sqrt(1.0 + tr);
    const double s = 0.5 / r;
    q << 0.5 * r, (R(2, 1) - R(1, 2)) * s, (R(0, 2) - R(2, 0)) * s,
        (R(1, 0) - R(0, 1)) * s;
  } else {
    int i = 0;
    if (R(1, 1) > R(0, 0)) i = 1;
    if (R(2, 2) > R(i, i)) i = 2;
    const int j = (i + 1) % 3;
    const int k = (i + 2) % 3;
    const double r = std::sqrt(1.0 + R(i, i) - R(j, j) - R(k, k));
    const double s = 0.5 / r;
    q[0] = (R(k, j) - R(j, k)) * s;
    q[1 + i] = 0.5 * r;
    q[1 + j] = (R(j, i) + R(i, j)) * s;
    q[1 + k] = (R(k, i) + R(i, k)) * s;
  }
  q.normalize();
  if (q[0] < 0) q = -q;
  if (q[0] == 0.0) {
    const Vec3 axis = canonical_axis_sign(q.tail<3>());
    q.tail<3>() = axis;
  }
  return q;
}

Mat4 se3_exp(const Vec6& xi) {
  const Vec3 v = xi.head<3>();
  const Vec3 w = xi.tail<3>();
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = skew(w);
  Mat3 V;
  if (theta < kSmallAngle) {
    V = Mat3::Identity() + 0.5 * W + W * W / 6.0;
  } else {
    V = Mat3::Identity() + (1.0 - std::cos(theta)) / theta2 * W +
        (theta - std::sin(theta)) / (theta2 * theta) * W * W;
  }
  Mat4 T = Mat4::Identity();
  T.topLeftCorner<3, 3>() = so3_exp(w);
  T.topRightCorner<3, 1>() = V * v;
  return T;
}

// ---------------------------------------------------------------------------
// Pose

Pose Pose::identity(Param kind) {
  Pose p;
  p.kind_ = kind;
  return p;
}

Pose Pose::from_axis_angle(const Vec3& w, const Vec3& t) {
  Pose p;
  p.kind_ = Param::AxisAngle;
  p.set_axis_angle(w);
  p.t_ = t;
  return p;
}

Pose Pose::from_quaternion(const Vec4& q, const Vec3& t) {
  Pose p;
  p.kind_ = Param::Quaternion;
  p.set_quaternion(q);
  p.t_ = t;
  return p;
}

Pose Pose::from_rt(const Mat3& R, const Vec3& t, Param kind) {
  if (!all_finite(t)) throw InvalidArgument("non-finite translation");
  if (kind == Param::AxisAngle) return from_axis_angle(so3_log(R), t);
  return from_quaternion(rot_to_quat(R), t);
}

Pose Pose::from_matrix(const Mat4& M, Param kind) {
  if (!all_finite(M)) throw InvalidArgument("non-finite pose matrix");
  if ((M.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-9) {
    throw InvalidArgument("pose matrix bottom row is not (0 0 0 1)");
  }
  return from_rt(M.topLeftCorner<3, 3>(), M.topRightCorner<3, 1>(), kind);
}

Pose Pose::translation_only(const Vec3& t) {
  Pose p = identity();
  p.t_ = t;
  return p;
}

Pose Pose::as(Param kind) const {
  if (kind == kind_) return *this;
  if (kind == Param::AxisAngle) return from_axis_angle(axis_angle(), t_);
  return from_quaternion(quaternion(), t_);
}

void Pose::set_axis_angle(const Vec3& w) {
  if (!all_finite(w)) throw InvalidArgument("non-finite axis-angle");
  // Canonicalize into [0, pi] by going through the matrix when needed.
  aa_ = w.norm() <= M_PI ? w : so3_log(so3_exp(w));
  kind_ = Param::AxisAngle;
}

void Pose::set_quaternion(const Vec4& q) {
  q_ = normalized_quat(q);
  kind_ = Param::Quaternion;
}

Vec3 Pose::axis_angle() const {
  return kind_ == Param::AxisAngle ? aa_ : so3_log(quat_to_rot(q_));
}

Vec4 Pose::quaternion() const {
  return kind_ == Param::Quaternion ? q_ : rot_to_quat(so3_exp(aa_));
}

Mat3 Pose::rotation() const {
  return kind_ == Param::AxisAngle ? so3_exp(aa_) : quat_to_rot(q_);
}

Mat4 Pose::matrix() const {
  Mat4 M = Mat4::Identity();
  M.topLeftCorner<3, 3>() = rotation();
  M.topRightCorner<3, 1>() = t_;
  return M;
}

Pose Pose::inverse() const {
  const Mat3 Rt = rotation().transpose();
  return from_rt(Rt, -(Rt * t_), kind_);
}

Pose Pose::compose(const Pose& rhs) const {
  const Mat3 R = rotation();
  return from_rt(R * rhs.rotation(), R * rhs.t_ + t_, kind_);
}

Pose Pose::left_perturbed(const Vec6& xi) const {
  return from_matrix(se3_exp(xi) * matrix(), kind_);
}

// ---------------------------------------------------------------------------
// Camera

void CameraModel::validate() const {
  if (!(fx > 0 && fy > 0)) throw InvalidArgument("focal lengths must be > 0");
  if (!(width > 0 && height > 0)) throw InvalidArgument("image size must be > 0");
  if (!(cx > 0 && cx < width && cy > 0 && cy < height)) {
    throw InvalidArgument("principal point outside the image");
  }
  if (!(depth_scale > 0)) throw InvalidArgument("depth_scale must be > 0");
}

CameraModel CameraModel::downsampled(int k) const {
  if (k < 1) throw InvalidArgument("downsample factor must be >= 1");
  CameraModel c = *this;
  c.fx /= k;
  c.fy /= k;
  c.cx /= k;
  c.cy /= k;
  c.width /= k;
  c.height /= k;
  return c;
}

Projection project(const CameraModel& cam, const Vec3& p) {
  Projection out;
  if (!(p.z() > 1e-6)) return out;
  out.u = cam.fx * p.x() / p.z() + cam.cx;
  out.v = cam.fy * p.y() / p.z() + cam.cy;
  out.valid = out.u >= 0 && out.u < cam.width && out.v >= 0 && out.v < cam.height;
  return out;
}

Vec3 unproject(const CameraModel& cam, double u, double v, double z) {
  return Vec3((u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z);
}

void Trajectory::push_back(double t, const Pose& pose) {
  if (!std::isfinite(t)) throw InvalidArgument("non-finite timestamp");
  if (!samples_.empty() && !(t > samples_.back().timestamp)) {
    throw InvalidArgument("trajectory timestamps must be strictly increasing");
  }
  samples_.push_back({t, pose});
}

}  // namespace modslam
