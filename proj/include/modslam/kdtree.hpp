#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "modslam/mesh.hpp"

namespace modslam {

/// Static 3-d tree over a point set; exact Euclidean nearest neighbour.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;
    double distance = std::numeric_limits<double>::infinity();
  };

  /// Throws InvalidArgument for an empty point set.
  explicit KdTree(std::vector<Vec3> points);

  Hit nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    // Leaves own [begin, end) of order_; inner nodes split at `split` on `axis`.
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0;
  };

  int build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Distance from every query point to its nearest reference point.
/// Throws InvalidArgument for an empty reference cloud.
std::vector<double> nearest_distances(const PointCloud& query,
                                      const PointCloud& reference);

}  // namespace modslam
