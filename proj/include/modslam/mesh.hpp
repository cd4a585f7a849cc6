#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "modslam/geometry.hpp"

namespace modslam {

using Rgb8 = std::array<std::uint8_t, 3>;
using Triangle = std::array<int, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Rgb8> colors;  // empty or one per vertex
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  bool has_colors() const { return !colors.empty(); }

  double triangle_area(std::size_t i) const;
  Vec3 triangle_normal(std::size_t i) const;  // unit, right-handed winding
  /// Appends another mesh, re-indexing its triangles.
  void append(const TriangleMesh& other);
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Binary little-endian PLY: float32 xyz (+ uchar rgb), int32 face indices.
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Accepts ascii and binary_little_endian PLY with vertex x/y/z (any scalar
/// type, optional red/green/blue) and face vertex_indices lists. Triangulates
/// polygons as fans. Throws IoError naming the header line on malformed input.
TriangleMesh read_ply(const std::filesystem::path& path);

/// Area-weighted uniform surface sampling, deterministic in seed.
/// Throws InvalidArgument for an empty mesh.
PointCloud sample_points(const TriangleMesh& mesh, std::size_t n,
                         std::uint64_t seed);

}  // namespace modslam
