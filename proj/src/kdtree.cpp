#include "modslam/kdtree.hpp"

#include <cmath>
#include <algorithm>
#include <numeric>

#include "modslam/errors.hpp"

namespace modslam {
namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw InvalidArgument("kd-tree needs at least one point");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

int KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

KdTree::Hit KdTree::nearest(const Vec3& q) const {
  Hit best;
  double best_d2 = std::numeric_limits<double>::infinity();
  struct Item {
    int node;
    double d2_bound;
  };
  Item stack[128];
  int top = 0;
  stack[top++] = {0, 0.0};
  while (top > 0) {
    const Item it = stack[--top];
    if (it.d2_bound > best_d2) continue;
    const Node& n = nodes_[it.node];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d2 = (points_[order_[i]] - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && order_[i] < best.index)) {
          best_d2 = d2;
          best.index = order_[i];
        }
      }
      continue;
    }
    // Points left of mid are <= split, points right are >= split.
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    stack[top++] = {far, std::max(it.d2_bound, diff * diff)};
    stack[top++] = {near, it.d2_bound};
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

std::vector<double> nearest_distances(const PointCloud& query,
                                      const PointCloud& reference) {
  if (reference.empty()) throw InvalidArgument("nearest_distances: empty reference");
  const KdTree tree(reference.points);
  std::vector<double> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    out[i] = tree.nearest(query.points[i]).distance;
  }
  return out;
}

}  // namespace modslam
