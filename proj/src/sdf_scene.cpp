#include <cmath>
#include <random>

#include "modslam/dataset.hpp"
#include "modslam/errors.hpp"
#include "modslam/marching_cubes.hpp"

namespace modslam {
namespace {

double box_sdf(const Vec3& p, const Vec3& center, const Vec3& half) {
  const Vec3 q = (p - center).cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

struct Evaluator {
  const Vec3& p;
  double operator()(const InvertedBox& b) const {
    return -box_sdf(p, b.center, b.half_extents);
  }
  double operator()(const Sphere& s) const { return (p - s.center).norm() - s.radius; }
  double operator()(const Box& b) const { return box_sdf(p, b.center, b.half_extents); }
};

const InvertedBox* find_room(const SdfScene& scene) {
  for (const auto& prim : scene.primitives) {
    if (const auto* room = std::get_if<InvertedBox>(&prim)) return room;
  }
  return nullptr;
}

// Deterministic per-primitive albedo drawn from the seed.
std::vector<Vec3> albedos(const SdfScene& scene, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.35, 0.9);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    out.emplace_back(u(rng), u(rng), u(rng));
  }
  return out;
}

// Sphere tracing with a minimum step of the surface tolerance. A step can
// only cross the surface when it exceeds the local distance, so a sign change
// brackets the first hit, which is then refined by Illinois false position.
// Rays grazing past an edge never change sign and keep marching.
std::optional<double> trace(const SdfScene& scene, const Vec3& o, const Vec3& dir) {
  auto f = [&](double t) { return sdf_eval(scene, o + t * dir); };
  double t = 0, ft = f(0);
  if (ft <= 0) return std::nullopt;  // origin inside matter
  for (int step = 0; step < kSdfMaxSteps; ++step) {
    const double tn = t + std::max(ft, kSdfSurfaceTol);
    if (tn > kSdfMaxRange) return std::nullopt;
    const double fn = f(tn);
    if (fn <= 0) {
      double a = t, fa = ft, b = tn, fb = fn;
      int side = 0;
      for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
        const double c = (a * fb - b * fa) / (fb - fa);
        const double fc = f(c);
        if (fc == 0) return c;
        if (fc > 0) {
          a = c, fa = fc;
          if (side == 1) fb *= 0.5;
          side = 1;
        } else {
          b = c, fb = fc;
          if (side == -1) fa *= 0.5;
          side = -1;
        }
        if (std::abs(fc) < 1e-12) break;
      }
      const double root = std::abs(fa) < std::abs(fb) ? a : b;
      return root > kSdfMaxRange ? std::nullopt : std::optional<double>(root);
    }
    t = tn;
    ft = fn;
  }
  return std::nullopt;
}

}  // namespace

void SdfScene::validate() const {
  const InvertedBox* room = nullptr;
  int rooms = 0;
  for (const auto& prim : primitives) {
    if (const auto* r = std::get_if<InvertedBox>(&prim)) {
      room = r;
      ++rooms;
    }
  }
  if (rooms != 1) throw InvalidArgument("scene needs exactly one room");
  if (!(room->half_extents.array() > 0).all()) {
    throw InvalidArgument("room extents must be positive");
  }
  const Eigen::AlignedBox3d rb(room->center - room->half_extents,
                               room->center + room->half_extents);
  for (const auto& prim : primitives) {
    if (const auto* s = std::get_if<Sphere>(&prim)) {
      if (!(s->radius > 0)) throw InvalidArgument("sphere radius must be > 0");
      const Eigen::AlignedBox3d sb(s->center - Vec3::Constant(s->radius),
                                   s->center + Vec3::Constant(s->radius));
      if (!rb.contains(sb)) throw InvalidArgument("sphere outside the room");
    } else if (const auto* b = std::get_if<Box>(&prim)) {
      if (!(b->half_extents.array() > 0).all()) {
        throw InvalidArgument("box extents must be positive");
      }
      const Eigen::AlignedBox3d bb(b->center - b->half_extents,
                                   b->center + b->half_extents);
      if (!rb.contains(bb)) throw InvalidArgument("box outside the room");
    }
  }
}

Eigen::AlignedBox3d SdfScene::bounds() const {
  const InvertedBox* room = find_room(*this);
  if (!room) throw InvalidArgument("scene has no room");
  return Eigen::AlignedBox3d(room->center - room->half_extents,
                             room->center + room->half_extents);
}

double sdf_eval(const SdfPrimitive& prim, const Vec3& p) {
  return std::visit(Evaluator{p}, prim);
}

double sdf_eval(const SdfScene& scene, const Vec3& p, int* nearest) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const double d = sdf_eval(scene.primitives[i], p);
    if (d < best) {
      best = d;
      if (nearest) *nearest = static_cast<int>(i);
    }
  }
  return best;
}

Vec3 sdf_normal(const SdfScene& scene, const Vec3& p) {
  constexpr double h = 1e-4;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 d = Vec3::Zero();
    d[a] = h;
    g[a] = sdf_eval(scene, p + d) - sdf_eval(scene, p - d);
  }
  const double n = g.norm();
  return n > 0 ? Vec3(g / n) : Vec3::UnitZ();
}

ImageF raycast_sdf(const SdfScene& scene, const CameraModel& cam,
                   const Pose& cam_to_world) {
  ImageF depth(cam.width, cam.height, 1, 0.0f);
  const Mat3 R = cam_to_world.rotation();
  const Vec3 o = cam_to_world.translation();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 d_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const double len = d_cam.norm();
      if (const auto t = trace(scene, o, R * d_cam / len)) {
        depth(x, y) = static_cast<float>(*t / len);
      }
    }
  }
  return depth;
}

SdfRender render_sdf(const SdfScene& scene, const CameraModel& cam,
                     const Pose& cam_to_world, std::uint64_t seed) {
  SdfRender out{ImageF(cam.width, cam.height, 1, 0.0f),
                ImageF(cam.width, cam.height, 3, 0.0f)};
  const auto albedo = albedos(scene, seed);
  const Vec3 light = Vec3(0.4, -0.3, 0.85).normalized();
  constexpr double kAmbient = 0.3;
  constexpr double kChecker = 0.2;
  const Mat3 R = cam_to_world.rotation();
  const Vec3 o = cam_to_world.translation();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 d_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const double len = d_cam.norm();
      const auto t = trace(scene, o, R * d_cam / len);
      if (!t) continue;
      out.depth(x, y) = static_cast<float>(*t / len);
      const Vec3 p = o + *t * (R * d_cam / len);
      int prim = 0;
      sdf_eval(scene, p, &prim);
      const Vec3 n = sdf_normal(scene, p);
      const long cell = std::lround(std::floor(p.x() / kChecker)) +
                        std::lround(std::floor(p.y() / kChecker)) +
                        std::lround(std::floor(p.z() / kChecker));
      const double checker = (cell & 1) ? 0.75 : 1.0;
      const double shade = kAmbient + (1 - kAmbient) * std::max(0.0, n.dot(light));
      const Vec3 c = albedo[prim] * checker * shade;
      for (int ch = 0; ch < 3; ++ch) {
        out.color(x, y, ch) = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
      }
    }
  }
  return out;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R << x, y, z;
  return Pose::from_rt(R, eye);
}

std::vector<Pose> trajectory_poses(const TrajectorySpec& spec, int n_frames) {
  std::vector<Pose> poses;
  poses.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const double s = n_frames > 1 ? double(i) / n_frames : 0.0;
    if (const auto* orbit = std::get_if<OrbitSpec>(&spec)) {
      const double a = orbit->start_angle + orbit->total_angle * s;
      const Vec3 eye = orbit->center + Vec3(orbit->radius * std::cos(a),
                                            orbit->radius * std::sin(a),
                                            orbit->height);
      Vec3 target = orbit->target;
      target.z() += orbit->target_bob * std::sin(2 * M_PI * orbit->bob_cycles * s);
      poses.push_back(look_at(eye, target));
    } else {
      const auto& line = std::get<LineSpec>(spec);
      const double u = n_frames > 1 ? double(i) / (n_frames - 1) : 0.0;
      poses.push_back(look_at(line.start + u * (line.end - line.start), line.target));
    }
  }
  return poses;
}

TriangleMesh scene_mesh(const SdfScene& scene, double voxel) {
  const Eigen::AlignedBox3d b = scene.bounds();
  GridSpec grid;
  grid.voxel_size = voxel;
  grid.origin = b.min() - Vec3::Constant(2 * voxel);
  for (int a = 0; a < 3; ++a) {
    grid.dims[a] = static_cast<int>(std::ceil((b.max()[a] - b.min()[a]) / voxel)) + 5;
  }
  return marching_cubes_field(grid, [&](const Vec3& p) { return sdf_eval(scene, p); });
}

std::vector<std::string> synthetic_presets() { return {"room-sphere", "room-boxes"}; }

SyntheticPreset synthetic_preset(const std::string& name) {
  SyntheticPreset preset;
  preset.camera = CameraModel{90.0, 90.0, 79.5, 59.5, 160, 120, 6553.5};
  const InvertedBox room{Vec3::Zero(), Vec3(1.5, 1.5, 1.0)};
  OrbitSpec orbit;
  orbit.radius = 0.6;
  orbit.height = 0.1;
  orbit.total_angle = 2 * M_PI;
  orbit.target = Vec3(0, 0, -0.3);
  orbit.target_bob = 0.6;
  orbit.bob_cycles = 3;
  if (name == "room-sphere") {
    preset.scene.primitives = {room, Sphere{Vec3(0, 0, -0.55), 0.35}};
  } else if (name == "room-boxes") {
    preset.scene.primitives = {room, Box{Vec3(0.1, -0.2, -0.75), Vec3(0.3, 0.25, 0.25)},
                               Box{Vec3(-0.9, 0.8, -0.5), Vec3(0.2, 0.2, 0.5)},
                               Sphere{Vec3(0.9, 0.9, -0.8), 0.2}};
  } else {
    std::string names;
    for (const auto& n : synthetic_presets()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scene preset '" + name + "' (available: " + names + ")");
  }
  preset.trajectory = orbit;
  return preset;
}

}  // namespace modslam
