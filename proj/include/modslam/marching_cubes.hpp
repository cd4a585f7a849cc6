#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "modslam/mesh.hpp"

namespace modslam {

/// Regular lattice: sample (i, j, k) sits at origin + voxel_size * (i, j, k).
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  std::array<int, 3> dims{0, 0, 0};
  double voxel_size = 0;

  Vec3 position(int i, int j, int k) const {
    return origin + voxel_size * Vec3(i, j, k);
  }
};

namespace mc {

/// Cube corners are numbered dx + 2*dy + 4*dz. Edge e joins kEdgeCorners[e].
extern const std::array<std::array<int, 2>, 12> kEdgeCorners;

/// Triangle list (edge triples, -1 terminated) for each of the 256 inside
/// masks. A corner is inside when its value is below the iso level; the
/// winding gives normals pointing toward increasing value.
const std::array<std::array<std::int8_t, 16>, 256>& triangle_table();

}  // namespace mc

/// Fills one z-slice of samples, row-major in (i, j). valid[n] == 0 marks a
/// sample that no cell may use.
template <typename F>
concept SliceSampler = requires(F f, int k, std::span<float> v,
                                std::span<std::uint8_t> ok) {
  f(k, v, ok);
};

/// Streaming marching cubes over a lattice, two slices at a time. Vertices
/// on shared edges are welded; triangles below 1e-12 m^2 are dropped.
template <SliceSampler Sampler>
TriangleMesh marching_cubes(const GridSpec& grid, Sampler&& sample,
                            double iso = 0.0) {
  TriangleMesh mesh;
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  if (nx < 2 || ny < 2 || nz < 2) return mesh;
  const std::size_t plane = static_cast<std::size_t>(nx) * ny;
  const auto& table = mc::triangle_table();

  std::vector<float> v0(plane), v1(plane);
  std::vector<std::uint8_t> ok0(plane), ok1(plane);
  // Welded vertex ids: x/y edges of the lower and upper slice, z edges between.
  std::vector<int> xe0(plane, -1), ye0(plane, -1), xe1(plane, -1),
      ye1(plane, -1), ze(plane, -1);

  sample(0, std::span<float>(v0), std::span<std::uint8_t>(ok0));
  for (int k = 0; k + 1 < nz; ++k) {
    sample(k + 1, std::span<float>(v1), std::span<std::uint8_t>(ok1));
    std::fill(xe1.begin(), xe1.end(), -1);
    std::fill(ye1.begin(), ye1.end(), -1);
    std::fill(ze.begin(), ze.end(), -1);

    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        float val[8];
        bool usable = true;
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
          const std::size_t idx = std::size_t(j + dj) * nx + (i + di);
          const auto& vals = dk ? v1 : v0;
          const auto& oks = dk ? ok1 : ok0;
          if (!oks[idx]) {
            usable = false;
            break;
          }
          val[c] = vals[idx];
          if (val[c] < iso) mask |= 1 << c;
        }
        if (!usable || mask == 0 || mask == 255) continue;

        auto vertex_on = [&](int e) -> int {
          const int a = mc::kEdgeCorners[e][0], b = mc::kEdgeCorners[e][1];
          const int ai = i + (a & 1), aj = j + ((a >> 1) & 1), ak = (a >> 2) & 1;
          const int axis = (a ^ b) == 1 ? 0 : (a ^ b) == 2 ? 1 : 2;
          const std::size_t idx = std::size_t(aj) * nx + ai;
          int* slot = nullptr;
          if (axis == 0) slot = ak ? &xe1[idx] : &xe0[idx];
          else if (axis == 1) slot = ak ? &ye1[idx] : &ye0[idx];
          else slot = &ze[idx];
          if (*slot >= 0) return *slot;
          const double va = val[a], vb = val[b];
          const double t = (iso - va) / (vb - va);
          const Vec3 pa = grid.position(ai, aj, k + ak);
          Vec3 pb = pa;
          pb[axis] += grid.voxel_size;
          *slot = static_cast<int>(mesh.vertices.size());
          mesh.vertices.push_back(pa + t * (pb - pa));
          return *slot;
        };

        const auto& row = table[static_cast<std::size_t>(mask)];
        for (int n = 0; n < 16 && row[n] >= 0; n += 3) {
          const Triangle tri{vertex_on(row[n]), vertex_on(row[n + 1]),
                             vertex_on(row[n + 2])};
          const Vec3& a = mesh.vertices[tri[0]];
          const double area2 =
              (mesh.vertices[tri[1]] - a).cross(mesh.vertices[tri[2]] - a).norm();
          if (0.5 * area2 >= 1e-12) mesh.triangles.push_back(tri);
        }
      }
    }
    std::swap(v0, v1);
    std::swap(ok0, ok1);
    std::swap(xe0, xe1);
    std::swap(ye0, ye1);
  }
  return mesh;
}

/// Marching cubes of an analytic field f(p) sampled on the lattice.
template <typename Field>
TriangleMesh marching_cubes_field(const GridSpec& grid, Field&& field,
                                  double iso = 0.0) {
  return marching_cubes(
      grid,
      [&](int k, std::span<float> v, std::span<std::uint8_t> ok) {
        for (int j = 0; j < grid.dims[1]; ++j) {
          for (int i = 0; i < grid.dims[0]; ++i) {
            const std::size_t n = std::size_t(j) * grid.dims[0] + i;
            v[n] = static_cast<float>(field(grid.position(i, j, k)));
            ok[n] = 1;
          }
        }
      },
      iso);
}

}  // namespace modslam
