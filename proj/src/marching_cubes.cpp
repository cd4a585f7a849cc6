#include "modslam/marching_cubes.hpp"

#include <stdexcept>
#include <vector>

namespace modslam::mc {
namespace {

constexpr std::array<std::array<int, 2>, 12> make_edges() {
  std::array<std::array<int, 2>, 12> edges{};
  int n = 0;
  for (int a = 0; a < 8; ++a) {
    for (int bit = 1; bit < 8; bit <<= 1) {
      if (!(a & bit)) edges[n++] = {a, a | bit};
    }
  }
  return edges;
}

int edge_between(int a, int b) {
  if (a > b) std::swap(a, b);
  for (int e = 0; e < 12; ++e) {
    if (kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) return e;
  }
  throw std::logic_error("corners are not adjacent");
}

Vec3 corner_pos(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

Vec3 edge_mid(int e) {
  return 0.5 * (corner_pos(kEdgeCorners[e][0]) + corner_pos(kEdgeCorners[e][1]));
}

// Two edge vertices lie in a common cube face when all four end corners
// agree on one coordinate.
bool share_face(int ea, int eb) {
  const int c[4] = {kEdgeCorners[ea][0], kEdgeCorners[ea][1], kEdgeCorners[eb][0],
                    kEdgeCorners[eb][1]};
  for (int bit = 1; bit < 8; bit <<= 1) {
    const int v = c[0] & bit;
    if ((c[1] & bit) == v && (c[2] & bit) == v && (c[3] & bit) == v) return true;
  }
  return false;
}

// Triangulates a loop of edge vertices, minimizing chords that lie in a cube
// face: such a triangle would coincide with the neighbouring cell's and
// pinch the surface.
std::vector<std::array<int, 3>> triangulate_loop(const std::vector<int>& loop) {
  const int n = static_cast<int>(loop.size());
  constexpr int kInf = 1 << 20;
  std::vector<std::vector<int>> cost(n, std::vector<int>(n, 0)), split(n, std::vector<int>(n, -1));
  auto chord = [&](int i, int j) { return j - i > 1 && !(i == 0 && j == n - 1) && share_face(loop[i], loop[j]) ? 1 : 0; };
  for (int len = 2; len < n; ++len) {
    for (int i = 0; i + len < n; ++i) {
      const int j = i + len;
      cost[i][j] = kInf;
      for (int k = i + 1; k < j; ++k) {
        const int c = cost[i][k] + cost[k][j] + chord(i, k) + chord(k, j);
        if (c < cost[i][j]) cost[i][j] = c, split[i][j] = k;
      }
    }
  }
  std::vector<std::array<int, 3>> tris;
  std::vector<std::pair<int, int>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    if (j - i < 2) continue;
    const int k = split[i][j];
    tris.push_back({loop[i], loop[k], loop[j]});
    stack.emplace_back(i, k);
    stack.emplace_back(k, j);
  }
  return tris;
}

// Builds the triangulation of one inside-mask. Each cube face contributes
// iso-line segments between its crossed edges; faces with two diagonal
// inside corners cut each inside corner off separately. Because that rule
// only looks at the face itself, neighbouring cells agree on the shared
// face. Segments are oriented so the inside lies to a fixed side, chained
// into loops and fan-triangulated.
std::array<std::int8_t, 16> triangulate(int mask) {
  int next[12];
  std::fill(std::begin(next), std::end(next), -1);

  auto add_segment = [&](int ea, int eb, const Vec3& outward,
                         const Vec3& inside_ref) {
    const Vec3 a = edge_mid(ea), b = edge_mid(eb);
    if ((b - a).cross(outward).dot(inside_ref - 0.5 * (a + b)) < 0) {
      std::swap(ea, eb);
    }
    if (next[ea] != -1) throw std::logic_error("edge has two successors");
    next[ea] = eb;
  };

  for (int axis = 0; axis < 3; ++axis) {
    const int u = 1 << ((axis + 1) % 3);
    const int v = 1 << ((axis + 2) % 3);
    for (int side = 0; side < 2; ++side) {
      const int base = side ? (1 << axis) : 0;
      const int ring[4] = {base, base | u, base | u | v, base | v};
      Vec3 outward = Vec3::Zero();
      outward[axis] = side ? 1.0 : -1.0;

      bool in[4];
      int n_in = 0;
      Vec3 in_centroid = Vec3::Zero();
      for (int q = 0; q < 4; ++q) {
        in[q] = (mask >> ring[q]) & 1;
        if (in[q]) {
          ++n_in;
          in_centroid += corner_pos(ring[q]);
        }
      }
      if (n_in == 0 || n_in == 4) continue;
      in_centroid /= n_in;

      auto ring_edge = [&](int q) {
        return edge_between(ring[q], ring[(q + 1) % 4]);
      };
      if (n_in == 2 && in[0] == in[2]) {
        // Ambiguous face: separate both inside corners.
        for (int q = 0; q < 4; ++q) {
          if (!in[q]) continue;
          add_segment(ring_edge((q + 3) % 4), ring_edge(q), outward,
                      corner_pos(ring[q]));
        }
        continue;
      }
      int crossed[2];
      int nc = 0;
      for (int q = 0; q < 4; ++q) {
        if (in[q] != in[(q + 1) % 4]) crossed[nc++] = ring_edge(q);
      }
      add_segment(crossed[0], crossed[1], outward, in_centroid);
    }
  }

  std::array<std::int8_t, 16> row;
  row.fill(-1);
  int n = 0;
  bool used[12] = {};
  for (int start = 0; start < 12; ++start) {
    if (next[start] == -1 || used[start]) continue;
    std::vector<int> loop;
    for (int e = start; !used[e]; e = next[e]) {
      used[e] = true;
      loop.push_back(e);
      if (next[e] == -1) throw std::logic_error("open iso-line loop");
    }
    for (const auto& tri : triangulate_loop(loop)) {
      if (n + 3 > 15) throw std::logic_error("triangle table row overflow");
      for (int e : tri) row[n++] = static_cast<std::int8_t>(e);
    }
  }
  return row;
}

}  // namespace

const std::array<std::array<int, 2>, 12> kEdgeCorners = make_edges();

const std::array<std::array<std::int8_t, 16>, 256>& triangle_table() {
  static const auto table = [] {
    std::array<std::array<std::int8_t, 16>, 256> t{};
    for (int mask = 0; mask < 256; ++mask) t[mask] = triangulate(mask);
    return t;
  }();
  return table;
}

}  // namespace modslam::mc
