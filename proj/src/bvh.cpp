#include "modslam/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace modslam {
namespace {

constexpr int kLeafTriangles = 4;

// Slab test, with the exit distance inflated a little so rounding in the
// box test can never discard a hit the exact triangle test would accept.
bool hits_box(const Eigen::AlignedBox3d& box, const Ray& ray,
              const Vec3& inv_dir, double t_min, double t_max) {
  double t0 = t_min, t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    double a = (box.min()[k] - ray.origin[k]) * inv_dir[k];
    double b = (box.max()[k] - ray.origin[k]) * inv_dir[k];
    if (std::isnan(a) || std::isnan(b)) {
      // Axis-parallel ray starting on the slab boundary.
      if (ray.origin[k] < box.min()[k] || ray.origin[k] > box.max()[k]) return false;
      continue;
    }
    if (a > b) std::swap(a, b);
    b *= 1.0 + 1e-12;
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a,
                                         const Vec3& b, const Vec3& c,
                                         double t_min, double t_max) {
  // Woop, Benthin & Wald watertight test: shear so the ray is +z, then
  // evaluate 2-d edge functions.
  int kz = 0;
  ray.dir.cwiseAbs().maxCoeff(&kz);
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (ray.dir[kz] < 0) std::swap(kx, ky);
  const double sx = ray.dir[kx] / ray.dir[kz];
  const double sy = ray.dir[ky] / ray.dir[kz];
  const double sz = 1.0 / ray.dir[kz];

  const Vec3 A = a - ray.origin, B = b - ray.origin, C = c - ray.origin;
  const double ax = A[kx] - sx * A[kz], ay = A[ky] - sy * A[kz];
  const double bx = B[kx] - sx * B[kz], by = B[ky] - sy * B[kz];
  const double cx = C[kx] - sx * C[kz], cy = C[ky] - sy * C[kz];

  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;
  if (u == 0.0 || v == 0.0 || w == 0.0) {
    using LD = long double;
    u = static_cast<double>(LD(cx) * by - LD(cy) * bx);
    v = static_cast<double>(LD(ax) * cy - LD(ay) * cx);
    w = static_cast<double>(LD(bx) * ay - LD(by) * ax);
  }
  if ((u < 0 || v < 0 || w < 0) && (u > 0 || v > 0 || w > 0)) return std::nullopt;
  const double det = u + v + w;
  if (det == 0.0) return std::nullopt;

  const double t_scaled = u * (sz * A[kz]) + v * (sz * B[kz]) + w * (sz * C[kz]);
  const double t = t_scaled / det;
  if (!(t > t_min && t < t_max)) return std::nullopt;
  return t;
}

Bvh::Bvh(const TriangleMesh& mesh) : mesh_(mesh) {
  const int n = static_cast<int>(mesh.triangles.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Eigen::AlignedBox3d> boxes(n);
  std::vector<Vec3> centroids(n);
  for (int i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[i];
    boxes[i] = Eigen::AlignedBox3d(mesh.vertices[t[0]]);
    boxes[i].extend(mesh.vertices[t[1]]).extend(mesh.vertices[t[2]]);
    centroids[i] = boxes[i].center();
  }
  if (n > 0) {
    nodes_.reserve(2 * n / kLeafTriangles + 1);
    build(0, n, boxes, centroids);
  }
}

int Bvh::build(int first, int count, std::vector<Eigen::AlignedBox3d>& boxes,
               std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box, cbox;
  for (int i = first; i < first + count; ++i) {
    box.extend(boxes[order_[i]]);
    cbox.extend(centroids[order_[i]]);
  }
  const double pad = 1e-9 * box.diagonal().norm() + 1e-12;
  box.min().array() -= pad;
  box.max().array() += pad;
  nodes_[id].box = box;
  nodes_[id].first = first;
  nodes_[id].count = count;

  int axis = 0;
  const Vec3 extent = cbox.diagonal();
  extent.maxCoeff(&axis);
  if (count <= kLeafTriangles || extent[axis] <= 0) return id;

  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid,
                   order_.begin() + first + count, [&](int a, int b) {
                     return centroids[a][axis] < centroids[b][axis];
                   });
  const int left = build(first, mid - first, boxes, centroids);
  const int right = build(mid, first + count - mid, boxes, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].count = 0;
  return id;
}

std::optional<RayHit> Bvh::intersect(const Ray& ray, double t_min) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = ray.dir.cwiseInverse();
  std::optional<RayHit> best;
  double t_max = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!hits_box(node.box, ray, inv_dir, t_min, t_max)) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        const auto hit = intersect_triangle(ray, mesh_.vertices[t[0]],
                                            mesh_.vertices[t[1]],
                                            mesh_.vertices[t[2]], t_min, t_max);
        if (hit) {
          t_max = *hit;
          best = RayHit{*hit, static_cast<std::size_t>(order_[i])};
        }
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  return best;
}

std::optional<RayHit> intersect_brute_force(const TriangleMesh& mesh,
                                            const Ray& ray, double t_min) {
  std::optional<RayHit> best;
  double t_max = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const auto hit = intersect_triangle(ray, mesh.vertices[t[0]],
                                        mesh.vertices[t[1]],
                                        mesh.vertices[t[2]], t_min, t_max);
    if (hit) {
      t_max = *hit;
      best = RayHit{*hit, i};
    }
  }
  return best;
}

Ray camera_ray(const CameraModel& cam, const Pose& cam_to_world, double u,
               double v) {
  const Vec3 d_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  return Ray{cam_to_world.translation(), cam_to_world.rotation() * d_cam};
}

ImageF raycast_mesh_depth(const Bvh& bvh, const CameraModel& cam,
                          const Pose& cam_to_world) {
  ImageF depth(cam.width, cam.height, 1, 0.0f);
  const Mat3 R = cam_to_world.rotation();
  const Vec3 origin = cam_to_world.translation();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 d_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const auto hit = bvh.intersect(Ray{origin, R * d_cam});
      if (hit) depth(x, y) = static_cast<float>(hit->t);
    }
  }
  return depth;
}

}  // namespace modslam
