#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "modslam/bvh.hpp"
#include "modslam/errors.hpp"
#include "modslam/kdtree.hpp"
#include "modslam/marching_cubes.hpp"
#include "test_util.h"

namespace modslam {
namespace {

GridSpec cube_grid(double half, double voxel) {
  GridSpec g;
  g.voxel_size = voxel;
  g.origin = Vec3::Constant(-half);
  const int n = static_cast<int>(std::lround(2 * half / voxel)) + 1;
  g.dims = {n, n, n};
  return g;
}

// Each undirected edge used by exactly two triangles, once in each direction.
void expect_closed_oriented(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) ++directed[{t[e], t[(e + 1) % 3]}];
  }
  int bad = 0;
  for (const auto& [edge, count] : directed) {
    const auto rev = directed.find({edge.second, edge.first});
    if (count != 1 || rev == directed.end() || rev->second != 1) ++bad;
  }
  EXPECT_EQ(bad, 0) << "of " << directed.size() << " directed edges";
}

TEST(MarchingCubes, AllPositiveIsEmpty) {
  const auto mesh = marching_cubes_field(cube_grid(0.1, 0.02), [](const Vec3&) { return 1.0; });
  EXPECT_TRUE(mesh.vertices.empty());
  EXPECT_TRUE(mesh.triangles.empty());
}

TEST(MarchingCubes, SphereVerticesNearSurface) {
  const Vec3 c(0.0031, 0.0017, -0.0023);  // off-lattice: no vertex on a corner
  const double r = 0.5, voxel = 0.01;
  const auto mesh = marching_cubes_field(
      cube_grid(0.6, voxel), [&](const Vec3& p) { return (p - c).norm() - r; });
  ASSERT_GT(mesh.triangles.size(), 10000u);
  const double diag = std::sqrt(3.0) * voxel;
  for (const Vec3& v : mesh.vertices) {
    const double rad = (v - c).norm();
    ASSERT_GE(rad, r - diag);
    ASSERT_LE(rad, r + diag);
  }
  expect_closed_oriented(mesh);
  // Normals point toward increasing field value, i.e. outward.
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 centroid =
        (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3;
    ASSERT_GT(mesh.triangle_normal(t).dot(centroid - c), 0) << "triangle " << t;
  }
}

TEST(MarchingCubes, PlaneNormalsAndPositions) {
  const double voxel = 0.02, z0 = 0.0123;
  const auto mesh =
      marching_cubes_field(cube_grid(0.3, voxel), [&](const Vec3& p) { return p.z() - z0; });
  ASSERT_FALSE(mesh.triangles.empty());
  for (const Vec3& v : mesh.vertices) ASSERT_LE(std::abs(v.z() - z0), voxel);
  const double cos1deg = std::cos(M_PI / 180);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    ASSERT_GE(mesh.triangle_normal(t).dot(Vec3::UnitZ()), cos1deg);
  }
}

TEST(MarchingCubes, RandomFieldIsClosedManifold) {
  // Noise inside a positive shell exercises every ambiguous configuration;
  // shared faces must be split identically by both neighbours.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1, 1);
  const int n = 14;
  std::vector<float> field(n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const bool border = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
        field[(k * n + j) * n + i] = border ? 1.0f : u(rng);
      }
  GridSpec g;
  g.dims = {n, n, n};
  g.voxel_size = 1.0;
  const auto mesh = marching_cubes(g, [&](int k, std::span<float> v, std::span<std::uint8_t> ok) {
    for (int idx = 0; idx < n * n; ++idx) {
      v[idx] = field[k * n * n + idx];
      ok[idx] = 1;
    }
  });
  ASSERT_GT(mesh.triangles.size(), 1000u);
  expect_closed_oriented(mesh);
}

TEST(MarchingCubes, TableCoversEveryCase) {
  const auto& table = mc::triangle_table();
  EXPECT_EQ(table[0][0], -1);
  EXPECT_EQ(table[255][0], -1);
  for (int m = 1; m < 255; ++m) {
    int n = 0;
    while (n < 16 && table[m][n] >= 0) ++n;
    EXPECT_GT(n, 0) << "case " << m;
    EXPECT_EQ(n % 3, 0) << "case " << m;
  }
}

TEST(MarchingCubes, TranslationShiftsVertices) {
  const double voxel = 0.015625;  // dyadic: grid positions are exact
  auto field = [](const Vec3& p) { return (p - Vec3(0.31, 0.27, 0.29)).norm() - 0.2; };
  GridSpec a;
  a.voxel_size = voxel;
  a.origin = Vec3::Zero();
  a.dims = {40, 40, 40};
  GridSpec b = a;
  const Vec3 shift = voxel * Vec3(16, 0, 0);
  b.origin = a.origin + shift;
  const auto ma = marching_cubes_field(a, field);
  const auto mb = marching_cubes_field(b, [&](const Vec3& p) { return field(p - shift); });
  ASSERT_EQ(ma.vertices.size(), mb.vertices.size());
  ASSERT_EQ(ma.triangles, mb.triangles);
  for (std::size_t i = 0; i < ma.vertices.size(); ++i) {
    ASSERT_LT((mb.vertices[i] - ma.vertices[i] - shift).cwiseAbs().maxCoeff(), 1e-12);
  }
}

std::vector<Vec3> random_cloud(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

TEST(KdTree, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial * 25;
    const auto ref = random_cloud(rng, n, 1.0);
    const KdTree tree(ref);
    for (const Vec3& q : random_cloud(rng, 200, 1.5)) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = (ref[i] - q).norm();
        if (d < best_d) best_d = d, best = i;
      }
      const auto hit = tree.nearest(q);
      ASSERT_EQ(hit.distance, best_d);
      ASSERT_EQ(hit.index, best);
    }
  }
}

TEST(KdTree, DuplicatePointsTieBreakByIndex) {
  std::vector<Vec3> pts(30, Vec3(1, 2, 3));
  pts.push_back(Vec3(0, 0, 0));
  const KdTree tree(pts);
  EXPECT_EQ(tree.nearest(Vec3(1, 2, 3.1)).index, 0u);
}

TEST(KdTree, SelfQueryIsZero) {
  std::mt19937_64 rng(4);
  PointCloud cloud{random_cloud(rng, 500, 2.0)};
  for (double d : nearest_distances(cloud, cloud)) ASSERT_EQ(d, 0.0);
}

TEST(KdTree, ShiftedPlaneDistances) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  PointCloud plane, shifted;
  for (int i = 0; i < 5000; ++i) {
    plane.points.emplace_back(0.0, u(rng), u(rng));
    shifted.points.push_back(plane.points.back() + Vec3(0.01, 0, 0));
  }
  for (double d : nearest_distances(shifted, plane)) ASSERT_NEAR(d, 0.01, 1e-12);
}

TEST(KdTree, EmptyReferenceThrows) {
  EXPECT_THROW(nearest_distances(PointCloud{{Vec3::Zero()}}, PointCloud{}), InvalidArgument);
}

TEST(SamplePoints, MeanDistanceToVerticesBoundedByCircumradius) {
  const Vec3 c(0.001, 0.002, 0.003);
  const auto mesh = marching_cubes_field(
      cube_grid(0.3, 0.02), [&](const Vec3& p) { return (p - c).norm() - 0.2; });
  double max_circ = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &cc = mesh.vertices[t[2]];
    const double la = (b - cc).norm(), lb = (a - cc).norm(), lc = (a - b).norm();
    const double area = 0.5 * (b - a).cross(cc - a).norm();
    max_circ = std::max(max_circ, la * lb * lc / (4 * area));
  }
  const auto samples = sample_points(mesh, 20000, 11);
  const auto d = nearest_distances(samples, PointCloud{mesh.vertices});
  double mean = 0;
  for (double x : d) mean += x;
  mean /= d.size();
  EXPECT_LE(mean, max_circ);
}

TriangleMesh frontal_square(double z, double half) {
  TriangleMesh m;
  m.vertices = {Vec3(-half, -half, z), Vec3(half, -half, z), Vec3(half, half, z),
                Vec3(-half, half, z)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

TEST(Bvh, FrontalSquareDepth) {
  const auto mesh = frontal_square(2.0, 10.0);
  const Bvh bvh(mesh);
  const auto cam = test::small_camera();
  const ImageF depth = raycast_mesh_depth(bvh, cam, Pose::identity());
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) ASSERT_NEAR(depth(x, y), 2.0, 1e-6);
}

TEST(Bvh, MissIsZero) {
  const auto mesh = frontal_square(2.0, 0.1);
  const Bvh bvh(mesh);
  const auto cam = test::small_camera();
  const ImageF depth = raycast_mesh_depth(bvh, cam, Pose::identity());
  EXPECT_EQ(depth(0, 0), 0.0f);
  EXPECT_NEAR(depth(40, 30), 2.0, 1e-6);
  EXPECT_FALSE(bvh.intersect(Ray{Vec3::Zero(), Vec3(0, 0, -1)}));
}

TriangleMesh oracle_scene(std::mt19937_64& rng) {
  const Vec3 c(0.0013, -0.0021, 0.0007);
  TriangleMesh mesh = marching_cubes_field(
      cube_grid(1.2, 0.05), [&](const Vec3& p) { return 1.0 - (p - c).norm(); });
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int i = 0; i < 200; ++i) {
    const int base = static_cast<int>(mesh.vertices.size());
    const Vec3 p(u(rng), u(rng), u(rng));
    for (int k = 0; k < 3; ++k) mesh.vertices.push_back(p + 0.15 * Vec3(u(rng), u(rng), u(rng)));
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  return mesh;
}

TEST(Bvh, MatchesBruteForceOnImage) {
  std::mt19937_64 rng(9);
  const TriangleMesh mesh = oracle_scene(rng);
  const Bvh bvh(mesh);
  const CameraModel cam{40.0, 40.0, 31.5, 23.5, 64, 48, 1000.0};
  for (int view = 0; view < 4; ++view) {
    const Pose pose = test::random_pose(rng, 0.3);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const Ray ray = camera_ray(cam, pose, x, y);
        const auto a = bvh.intersect(ray);
        const auto b = intersect_brute_force(mesh, ray);
        ASSERT_EQ(a.has_value(), b.has_value());
        if (!a) continue;
        ASSERT_NEAR(a->t, b->t, 1e-9);
        // Equal distances on a shared edge may report either triangle.
        if (a->triangle != b->triangle) ASSERT_EQ(a->t, b->t);
      }
    }
    const ImageF depth = raycast_mesh_depth(bvh, cam, pose);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const auto b = intersect_brute_force(mesh, camera_ray(cam, pose, x, y));
        ASSERT_NEAR(depth(x, y), b ? b->t : 0.0, 1e-5);  // float image
      }
    }
  }
}

TEST(Bvh, StructureInvariants) {
  std::mt19937_64 rng(10);
  const TriangleMesh mesh = oracle_scene(rng);
  const Bvh bvh(mesh);
  std::vector<int> seen(mesh.triangles.size(), 0);
  for (const auto& node : bvh.nodes()) {
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int t = bvh.triangle_order()[i];
        ++seen[t];
        for (int v : mesh.triangles[t]) EXPECT_TRUE(node.box.contains(mesh.vertices[v]));
      }
    } else {
      EXPECT_TRUE(node.box.contains(bvh.nodes()[node.left].box));
      EXPECT_TRUE(node.box.contains(bvh.nodes()[node.right].box));
    }
  }
  for (int s : seen) ASSERT_EQ(s, 1);
}

TEST(Bvh, WatertightOnSharedEdge) {
  // A ray through the exact shared diagonal must hit one of the two triangles.
  const auto mesh = frontal_square(1.0, 1.0);
  const Bvh bvh(mesh);
  for (double s : {-0.5, 0.0, 0.25, 0.75}) {
    EXPECT_TRUE(bvh.intersect(Ray{Vec3(s, s, 0), Vec3(0, 0, 1)})) << s;
  }
}

}  // namespace
}  // namespace modslam
