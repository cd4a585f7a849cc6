#pragma once

#include <optional>
#include <vector>

#include "modslam/mesh.hpp"

namespace modslam {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // need not be unit; hit distances are in units of |dir|
};

struct RayHit {
  double t = 0;
  std::size_t triangle = 0;
};

/// Watertight ray/triangle test (both faces). Returns the ray parameter of
/// the hit when it lies in (t_min, t_max).
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a,
                                         const Vec3& b, const Vec3& c,
                                         double t_min, double t_max);

/// Binary bounding-volume hierarchy over the triangles of a mesh. Holds a
/// reference to the mesh, which must outlive it.
class Bvh {
 public:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1, right = -1;     // children, -1 for leaves
    int first = 0, count = 0;      // leaf range in triangle order
  };

  explicit Bvh(const TriangleMesh& mesh);

  std::optional<RayHit> intersect(const Ray& ray, double t_min = 1e-9) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& triangle_order() const { return order_; }
  const TriangleMesh& mesh() const { return mesh_; }

 private:
  int build(int first, int count, std::vector<Eigen::AlignedBox3d>& boxes,
            std::vector<Vec3>& centroids);

  const TriangleMesh& mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

/// Nearest hit over every triangle, no acceleration. Test oracle for Bvh.
std::optional<RayHit> intersect_brute_force(const TriangleMesh& mesh,
                                            const Ray& ray, double t_min = 1e-9);

/// Camera ray through pixel (u, v) with unit z in the camera frame, so the
/// hit parameter equals camera z-depth.
Ray camera_ray(const CameraModel& cam, const Pose& cam_to_world, double u,
               double v);

/// z-depth image of the mesh seen from cam_to_world; misses are 0.
ImageF raycast_mesh_depth(const Bvh& bvh, const CameraModel& cam,
                          const Pose& cam_to_world);

}  // namespace modslam
