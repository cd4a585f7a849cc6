#include "modslam/icp.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "modslam/errors.hpp"

namespace modslam {
namespace {

// Smallest/largest eigenvalue ratio of the 6x6 normal matrix below which a
// twist direction is treated as unobservable.
constexpr double kDegenerateRatio = 1e-6;
constexpr int kMaxHalvings = 4;

Vec3 normal_at(const ImageF& normals, int x, int y) {
  return Vec3(normals(x, y, 0), normals(x, y, 1), normals(x, y, 2));
}

struct Correspondence {
  Vec3 p;  // live point, live camera frame
  Vec3 q;  // model point, world
  Vec3 n;  // model normal, world
};

struct Level {
  CameraModel cam;
  ImageF live_depth, live_normals, model_depth, model_normals;
};

std::vector<Correspondence> associate(const Level& lv, const Pose& model_pose,
                                      const Pose& T, const IcpParams& params) {
  std::vector<Correspondence> out;
  const Mat3 R = T.rotation();
  const Vec3 t = T.translation();
  const Pose model_inv = model_pose.inverse();
  const Mat3 Rm = model_pose.rotation();
  const double cos_reject = std::cos(params.normal_reject);
  const CameraModel& cam = lv.cam;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const float d = lv.live_depth(x, y);
      if (!(d > 0)) continue;
      const Vec3 nl = normal_at(lv.live_normals, x, y);
      if (nl.squaredNorm() == 0) continue;
      const Vec3 p = unproject(cam, x, y, d);
      const Vec3 xw = R * p + t;
      const Projection pr = project(cam, model_inv.apply(xw));
      if (!pr.valid) continue;
      const int u = static_cast<int>(std::floor(pr.u + 0.5));
      const int v = static_cast<int>(std::floor(pr.v + 0.5));
      if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
      const float dm = lv.model_depth(u, v);
      if (!(dm > 0)) continue;
      const Vec3 nm_c = normal_at(lv.model_normals, u, v);
      if (nm_c.squaredNorm() == 0) continue;
      const Vec3 q = model_pose.apply(unproject(cam, u, v, dm));
      if ((xw - q).norm() > params.dist_reject) continue;
      const Vec3 n = Rm * nm_c;
      if (n.dot(R * nl) < cos_reject) continue;
      out.push_back({p, q, n});
    }
  }
  return out;
}

double mean_sq_error(const std::vector<Correspondence>& cs, const Pose& T) {
  const Mat3 R = T.rotation();
  const Vec3 t = T.translation();
  double e = 0;
  for (const auto& c : cs) {
    const double r = (R * c.p + t - c.q).dot(c.n);
    e += r * r;
  }
  return e / static_cast<double>(cs.size());
}

}  // namespace

Pose predict_constant_velocity(const std::optional<Pose>& prev1,
                               const std::optional<Pose>& prev2) {
  if (!prev1) return Pose::identity();
  if (!prev2) return *prev1;
  return *prev1 * (prev2->inverse() * *prev1);
}

ImageF estimate_normals(const ImageF& depth, const CameraModel& cam) {
  ImageF out(depth.width(), depth.height(), 3, 0.0f);
  auto point = [&](int x, int y) { return unproject(cam, x, y, depth(x, y)); };
  for (int y = 1; y + 1 < depth.height(); ++y) {
    for (int x = 1; x + 1 < depth.width(); ++x) {
      if (!(depth(x, y) > 0 && depth(x - 1, y) > 0 && depth(x + 1, y) > 0 &&
            depth(x, y - 1) > 0 && depth(x, y + 1) > 0)) {
        continue;
      }
      const Vec3 du = point(x + 1, y) - point(x - 1, y);
      const Vec3 dv = point(x, y + 1) - point(x, y - 1);
      Vec3 n = du.cross(dv);
      const double len = n.norm();
      if (!(len > 0)) continue;
      n /= len;
      if (n.dot(point(x, y)) > 0) n = -n;
      for (int c = 0; c < 3; ++c) out(x, y, c) = static_cast<float>(n[c]);
    }
  }
  return out;
}

ImageF decimate(const ImageF& img, int k) {
  if (k < 1) throw InvalidArgument("decimation factor must be >= 1");
  if (k == 1) return img;
  ImageF out(img.width() / k, img.height() / k, img.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out(x, y, c) = img(k * x, k * y, c);
  return out;
}

void IcpParams::validate() const {
  if (pyramid_levels < 1) throw InvalidArgument("icp pyramid_levels must be >= 1");
  if (static_cast<int>(max_iters.size()) != pyramid_levels) {
    throw InvalidArgument(fmt::format("icp max_iters needs {} entries, got {}",
                                      pyramid_levels, max_iters.size()));
  }
  for (int it : max_iters) {
    if (it < 1) throw InvalidArgument("icp max_iters entries must be >= 1");
  }
  if (!(dist_reject > 0)) throw InvalidArgument("icp dist_reject must be > 0");
  if (!(normal_reject > 0)) throw InvalidArgument("icp normal_reject must be > 0");
  if (!(convergence_eps > 0)) throw InvalidArgument("icp convergence_eps must be > 0");
  if (min_correspondences < 1) throw InvalidArgument("icp min_correspondences must be >= 1");
}

double point_to_plane_residual(const Pose& T, const Vec3& p_live, const Vec3& q,
                               const Vec3& n) {
  return (T.apply(p_live) - q).dot(n);
}

Eigen::Matrix<double, 1, 6> point_to_plane_jacobian(const Pose& T, const Vec3& p_live,
                                                    const Vec3& n) {
  const Vec3 x = T.apply(p_live);
  Eigen::Matrix<double, 1, 6> J;
  J << n.transpose(), x.cross(n).transpose();
  return J;
}

IcpResult icp_point_to_plane(const IcpModel& model, const ImageF& live_depth,
                             const CameraModel& cam, const Pose& init,
                             const IcpParams& params) {
  params.validate();
  if (live_depth.width() != cam.width || live_depth.height() != cam.height ||
      !model.depth.same_shape(live_depth) || model.normals.width() != cam.width ||
      model.normals.height() != cam.height) {
    throw InvalidArgument("icp images must match the camera size");
  }

  const ImageF live_normals = estimate_normals(live_depth, cam);
  std::vector<Level> levels(params.pyramid_levels);
  for (int l = 0; l < params.pyramid_levels; ++l) {
    const int k = 1 << l;
    levels[l] = Level{cam.downsampled(k), decimate(live_depth, k), decimate(live_normals, k),
                      decimate(model.depth, k), decimate(model.normals, k)};
  }

  IcpResult result{init, {}};
  result.stats.iterations.assign(params.pyramid_levels, 0);
  Pose T = init;
  for (int l = params.pyramid_levels - 1; l >= 0; --l) {
    const int slot = params.pyramid_levels - 1 - l;  // coarse to fine
    for (int it = 0; it < params.max_iters[slot]; ++it) {
      const auto cs = associate(levels[l], model.pose, T, params);
      if (cs.size() < 6) break;  // nothing to constrain a twist at this level

      Mat6 H = Mat6::Zero();
      Vec6 g = Vec6::Zero();
      for (const auto& c : cs) {
        const auto J = point_to_plane_jacobian(T, c.p, c.n);
        const double r = point_to_plane_residual(T, c.p, c.q, c.n);
        H.noalias() += J.transpose() * J;
        g.noalias() += J.transpose() * r;
      }
      const Eigen::SelfAdjointEigenSolver<Mat6> eig(H, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(5);
      if (!(hi > 0) || lo < kDegenerateRatio * hi) {
        throw DivergenceError(fmt::format(
            "degenerate geometry: point-to-plane normal matrix is not positive definite "
            "(eigenvalue ratio {:.3g}, {} correspondences)",
            hi > 0 ? lo / hi : 0.0, cs.size()));
      }

      Vec6 xi = -H.ldlt().solve(g);
      const double e0 = mean_sq_error(cs, T);
      bool accepted = false;
      Pose next;
      for (int h = 0; h <= kMaxHalvings; ++h) {
        next = T.left_perturbed(xi);
        if (mean_sq_error(cs, next) <= e0 * (1 + 1e-12) + 1e-30) {
          accepted = true;
          break;
        }
        xi *= 0.5;
      }
      ++result.stats.iterations[slot];
      if (!accepted) {
        if (xi.norm() < params.convergence_eps) break;  // at the minimum already
        throw DivergenceError(fmt::format(
            "point-to-plane error still increasing after {} step halvings", kMaxHalvings));
      }
      T = next;
      if (xi.norm() < params.convergence_eps) break;
    }
  }

  const auto cs = associate(levels[0], model.pose, T, params);
  result.stats.inlier_count = static_cast<int>(cs.size());
  if (result.stats.inlier_count < params.min_correspondences) {
    throw DivergenceError(fmt::format("too few correspondences: {} < {}",
                                      result.stats.inlier_count, params.min_correspondences));
  }
  result.stats.final_error = mean_sq_error(cs, T);
  for (int n : result.stats.iterations) result.stats.total_iterations += n;
  result.pose = T;
  return result;
}

}  // namespace modslam
