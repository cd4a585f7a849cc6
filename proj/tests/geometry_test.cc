#include "modslam/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "modslam/errors.hpp"
#include "test_util.h"

namespace modslam {
namespace {

TEST(So3, ExpZeroIsIdentity) {
  EXPECT_EQ(so3_exp(Vec3::Zero()), Mat3::Identity());
}

TEST(So3, ExpQuarterTurnAboutZ) {
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((so3_exp(Vec3(0, 0, M_PI / 2)) - expected).norm(), 1e-15);
}

TEST(So3, ExpRejectsNonFinite) {
  EXPECT_THROW(so3_exp(Vec3(std::nan(""), 0, 0)), InvalidArgument);
  EXPECT_THROW(so3_exp(Vec3(0, std::numeric_limits<double>::infinity(), 0)),
               InvalidArgument);
}

TEST(So3, ExpSmallAngleBranchIsOrthonormal) {
  const Mat3 R = so3_exp(Vec3(3e-9, -2e-9, 1e-9));
  EXPECT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
}

TEST(So3, ExpAlwaysOrthonormal) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int n = 0; n < 10000; ++n) {
    const Mat3 R = so3_exp(Vec3(u(rng), u(rng), u(rng)));
    ASSERT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-12);
    ASSERT_NEAR(R.determinant(), 1.0, 1e-12);
  }
}

TEST(So3, LogIdentityIsZero) {
  EXPECT_EQ(so3_log(Mat3::Identity()), Vec3::Zero());
}

TEST(So3, LogHalfTurnAboutXUsesCanonicalSign) {
  const Mat3 R = Vec3(1, -1, -1).asDiagonal();
  EXPECT_LT((so3_log(R) - Vec3(M_PI, 0, 0)).norm(), 1e-12);
  // Axis sign is fixed: the negated axis maps to the same answer.
  EXPECT_LT((so3_log(so3_exp(Vec3(-M_PI, 0, 0))) - Vec3(M_PI, 0, 0)).norm(), 1e-9);
  const Vec3 w = so3_log(so3_exp(Vec3(0, -M_PI / std::sqrt(2.0), -M_PI / std::sqrt(2.0))));
  EXPECT_GT(w.y(), 0);
  EXPECT_NEAR(w.norm(), M_PI, 1e-9);
}

TEST(So3, LogRejectsNonRotation) {
  EXPECT_THROW(so3_log(Mat3::Identity() * 2.0), InvalidArgument);
  const Mat3 reflection = Vec3(1, 1, -1).asDiagonal();
  EXPECT_THROW(so3_log(reflection), InvalidArgument);
}

TEST(So3, RoundTripRandom) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 10000; ++n) {
    const Vec3 w = test::random_axis_angle(rng, M_PI - 1e-6);
    ASSERT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-9) << w.transpose();
  }
}

// Long-double Rodrigues as a higher-precision reference rotation.
Mat3 rodrigues_ld(const Vec3& w) {
  using LD = long double;
  const LD th = std::sqrt(LD(w.x()) * w.x() + LD(w.y()) * w.y() + LD(w.z()) * w.z());
  const LD k[3] = {w.x() / th, w.y() / th, w.z() / th};
  const LD s = std::sin(th), c = std::cos(th);
  Mat3 R;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      LD v = (1 - c) * k[i] * k[j] + (i == j ? c : 0);
      R(i, j) = static_cast<double>(v);
    }
  }
  R(0, 1) -= static_cast<double>(s * k[2]);
  R(1, 0) += static_cast<double>(s * k[2]);
  R(0, 2) += static_cast<double>(s * k[1]);
  R(2, 0) -= static_cast<double>(s * k[1]);
  R(1, 2) -= static_cast<double>(s * k[0]);
  R(2, 1) += static_cast<double>(s * k[0]);
  return R;
}

TEST(So3, LogNearHalfTurnIsStable) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 axis = test::random_unit(rng);
    const double theta = M_PI - 1e-7 * (n % 2 == 0 ? 1.0 : 0.5);
    const Vec3 w = axis * theta;
    const Mat3 R = rodrigues_ld(w);
    const Vec3 got = so3_log(R);
    EXPECT_LT((so3_exp(got) - R).norm(), 1e-6);
    EXPECT_LT((got - w).norm(), 1e-6);
  }
}

TEST(Quaternion, IdentityAndHalfTurn) {
  EXPECT_LT((quat_to_rot(Vec4(1, 0, 0, 0)) - Mat3::Identity()).norm(), 1e-15);
  const Mat3 expected = Vec3(-1, -1, 1).asDiagonal();
  EXPECT_LT((quat_to_rot(Vec4(0, 0, 0, 1)) - expected).norm(), 1e-15);
}

TEST(Quaternion, ZeroRejected) {
  EXPECT_THROW(quat_to_rot(Vec4::Zero()), InvalidArgument);
  EXPECT_THROW(Pose::from_quaternion(Vec4::Zero(), Vec3::Zero()), InvalidArgument);
}

TEST(Quaternion, NonUnitIsRenormalized) {
  const Mat3 R = quat_to_rot(Vec4(2, 0, 0, 0));
  EXPECT_LT((R - Mat3::Identity()).norm(), 1e-15);
}

TEST(Quaternion, RoundTripUpToSign) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 10000; ++n) {
    const Vec4 q = test::random_quat(rng);
    const Vec4 back = rot_to_quat(quat_to_rot(q));
    ASSERT_GE(back[0], 0.0);
    ASSERT_LT(std::min((back - q).norm(), (back + q).norm()), 1e-9);
  }
}

TEST(Pose, ParameterizationsAgree) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 10000; ++n) {
    const Pose a = test::random_pose(rng);
    const Pose aa = a.as(Pose::Param::AxisAngle);
    const Pose qq = a.as(Pose::Param::Quaternion);
    ASSERT_LT((aa.matrix() - qq.matrix()).norm(), 1e-9);
    ASSERT_LE(aa.axis_angle().norm(), M_PI + 1e-12);
    ASSERT_NEAR(qq.quaternion().norm(), 1.0, 1e-9);
  }
}

TEST(Pose, MatrixRoundTrip) {
  std::mt19937_64 rng(4);
  for (int n = 0; n < 1000; ++n) {
    const Pose a = test::random_pose(rng);
    for (auto kind : {Pose::Param::AxisAngle, Pose::Param::Quaternion}) {
      const Pose b = Pose::from_matrix(a.matrix(), kind);
      ASSERT_LT((b.matrix() - a.matrix()).norm(), 1e-9);
    }
  }
}

TEST(Pose, AxisAngleIsCanonicalized) {
  const Pose p = Pose::from_axis_angle(Vec3(0, 0, 1.5 * M_PI), Vec3::Zero());
  EXPECT_NEAR(p.axis_angle().norm(), 0.5 * M_PI, 1e-12);
  EXPECT_LT((p.rotation() - so3_exp(Vec3(0, 0, 1.5 * M_PI))).norm(), 1e-12);
}

TEST(Pose, FromMatrixRejectsBadBottomRow) {
  Mat4 M = Mat4::Identity();
  M(3, 0) = 0.5;
  EXPECT_THROW(Pose::from_matrix(M), InvalidArgument);
}

TEST(Pose, ComposeWithIdentity) {
  std::mt19937_64 rng(6);
  const Pose b = test::random_pose(rng);
  EXPECT_LT((Pose::identity().compose(b).matrix() - b.matrix()).norm(), 1e-12);
}

TEST(Pose, ApplyIsRotationThenTranslation) {
  const Pose p = Pose::translation_only(Vec3(1, 2, 3));
  EXPECT_EQ(p.apply(Vec3::Zero()), Vec3(1, 2, 3));
  const Pose r = Pose::from_axis_angle(Vec3(0, 0, M_PI / 2), Vec3(1, 0, 0));
  EXPECT_LT((r.apply(Vec3(1, 0, 0)) - Vec3(1, 1, 0)).norm(), 1e-15);
}

TEST(Pose, InverseAndAssociativity) {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 10000; ++n) {
    const Pose a = test::random_pose(rng);
    const Pose b = test::random_pose(rng);
    const Pose c = test::random_pose(rng);
    ASSERT_LT((a.compose(a.inverse()).matrix() - Mat4::Identity()).norm(), 1e-9);
    ASSERT_LT((((a * b) * c).matrix() - (a * (b * c)).matrix()).norm(), 1e-9);
  }
}

TEST(Pose, LeftPerturbationMatchesExponential) {
  std::mt19937_64 rng(8);
  const Pose a = test::random_pose(rng);
  Vec6 xi;
  xi << 0.1, -0.2, 0.05, 0.01, 0.02, -0.03;
  EXPECT_LT((a.left_perturbed(xi).matrix() - se3_exp(xi) * a.matrix()).norm(), 1e-12);
}

TEST(Camera, ProjectOpticalAxis) {
  const CameraModel cam = test::small_camera();
  const Projection p = project(cam, Vec3(0, 0, 1));
  EXPECT_TRUE(p.valid);
  EXPECT_DOUBLE_EQ(p.u, cam.cx);
  EXPECT_DOUBLE_EQ(p.v, cam.cy);
}

TEST(Camera, BehindCameraInvalid) {
  EXPECT_FALSE(project(test::small_camera(), Vec3(0, 0, -1)).valid);
  EXPECT_FALSE(project(test::small_camera(), Vec3(0, 0, 1e-7)).valid);
}

TEST(Camera, OutsideImageInvalid) {
  const CameraModel cam = test::small_camera();
  EXPECT_FALSE(project(cam, Vec3(10, 0, 1)).valid);
}

TEST(Camera, ProjectUnprojectRoundTrip) {
  const CameraModel cam = test::small_camera();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uu(0, cam.width), vv(0, cam.height),
      zz(0.1, 8.0);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 p = unproject(cam, uu(rng), vv(rng), zz(rng));
    const Projection pr = project(cam, p);
    ASSERT_TRUE(pr.valid);
    ASSERT_LT((unproject(cam, pr.u, pr.v, p.z()) - p).norm(), 1e-9);
  }
}

TEST(Camera, ValidateAndDownsample) {
  CameraModel cam = test::small_camera();
  EXPECT_NO_THROW(cam.validate());
  const CameraModel half = CameraModel{600, 600, 319.5, 239.5, 640, 480, 5000}.downsampled(2);
  EXPECT_EQ(half.width, 320);
  EXPECT_EQ(half.height, 240);
  EXPECT_DOUBLE_EQ(half.fx, 300);
  EXPECT_DOUBLE_EQ(half.cx, 319.5 / 2);
  cam.fx = 0;
  EXPECT_THROW(cam.validate(), InvalidArgument);
  cam = test::small_camera();
  cam.cx = cam.width + 1;
  EXPECT_THROW(cam.validate(), InvalidArgument);
}

TEST(Trajectory, RejectsNonIncreasingTimestamps) {
  Trajectory t;
  t.push_back(1.0, Pose::identity());
  t.push_back(2.0, Pose::identity());
  EXPECT_THROW(t.push_back(2.0, Pose::identity()), InvalidArgument);
  EXPECT_THROW(t.push_back(1.5, Pose::identity()), InvalidArgument);
  EXPECT_EQ(t.size(), 2u);
}

}  // namespace
}  // namespace modslam
