#include "modslam/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "modslam/errors.hpp"

namespace modslam {

void TsdfParams::validate() const {
  if (!(voxel_size > 0)) throw InvalidArgument("tsdf voxel_size must be > 0");
  if (!(truncation > voxel_size)) {
    throw InvalidArgument("tsdf truncation must exceed voxel_size");
  }
  if (!(max_weight > 0)) throw InvalidArgument("tsdf max_weight must be > 0");
  if (!(extents.array() > 0).all()) {
    throw InvalidArgument("tsdf extents must be positive");
  }
}

TsdfVolume::TsdfVolume(const Vec3& origin, std::array<int, 3> dims,
                       double voxel_size) {
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) {
    throw InvalidArgument("tsdf volume needs at least 2 voxels per axis");
  }
  if (!(voxel_size > 0)) throw InvalidArgument("voxel size must be > 0");
  grid_ = GridSpec{origin, dims, voxel_size};
  const std::size_t n = std::size_t(dims[0]) * dims[1] * dims[2];
  tsdf_.assign(n, 1.0f);
  weight_.assign(n, 0.0f);
  color_.assign(n, Rgb8{0, 0, 0});
}

TsdfVolume TsdfVolume::from_params(const TsdfParams& params) {
  params.validate();
  std::array<int, 3> dims;
  for (int a = 0; a < 3; ++a) {
    dims[a] = static_cast<int>(std::ceil(params.extents[a] / params.voxel_size - 1e-9)) + 1;
  }
  return TsdfVolume(params.origin, dims, params.voxel_size);
}

bool TsdfVolume::empty() const {
  return std::none_of(weight_.begin(), weight_.end(), [](float w) { return w > 0; });
}

double TsdfVolume::weight_sum() const {
  double s = 0;
  for (float w : weight_) s += w;
  return s;
}

std::uint64_t TsdfVolume::state_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(tsdf_.data(), tsdf_.size() * sizeof(float));
  mix(weight_.data(), weight_.size() * sizeof(float));
  mix(color_.data(), color_.size() * sizeof(Rgb8));
  return h;
}

std::optional<double> TsdfVolume::sample(const Vec3& p) const {
  const Vec3 g = (p - grid_.origin) / grid_.voxel_size;
  const int i = static_cast<int>(std::floor(g.x()));
  const int j = static_cast<int>(std::floor(g.y()));
  const int k = static_cast<int>(std::floor(g.z()));
  if (i < 0 || j < 0 || k < 0 || i + 1 >= grid_.dims[0] ||
      j + 1 >= grid_.dims[1] || k + 1 >= grid_.dims[2]) {
    return std::nullopt;
  }
  const double fx = g.x() - i, fy = g.y() - j, fz = g.z() - k;
  const std::size_t sx = 1, sy = grid_.dims[0], sz = std::size_t(grid_.dims[0]) * grid_.dims[1];
  const std::size_t base = index(i, j, k);
  double acc = 0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const std::size_t n = base + dx * sx + dy * sy + dz * sz;
    if (weight_[n] <= 0) return std::nullopt;
    const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
    acc += w * tsdf_[n];
  }
  return acc;
}

Vec3 TsdfVolume::sample_color(const Vec3& p) const {
  Vec3 g = (p - grid_.origin) / grid_.voxel_size;
  for (int a = 0; a < 3; ++a) g[a] = std::clamp(g[a], 0.0, grid_.dims[a] - 1.000001);
  const int i = static_cast<int>(g.x()), j = static_cast<int>(g.y()),
            k = static_cast<int>(g.z());
  const double fx = g.x() - i, fy = g.y() - j, fz = g.z() - k;
  Vec3 acc = Vec3::Zero();
  double wsum = 0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const std::size_t n = index(i + dx, j + dy, k + dz);
    if (weight_[n] <= 0) continue;
    const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
    acc += w * Vec3(color_[n][0], color_[n][1], color_[n][2]) / 255.0;
    wsum += w;
  }
  return wsum > 0 ? Vec3(acc / wsum) : Vec3::Zero();
}

std::optional<Vec3> TsdfVolume::gradient(const Vec3& p) const {
  const double h = grid_.voxel_size;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 d = Vec3::Zero();
    d[a] = h;
    const auto f1 = sample(p + d);
    const auto f0 = sample(p - d);
    if (!f1 || !f0) return std::nullopt;
    g[a] = *f1 - *f0;
  }
  const double n = g.norm();
  if (!(n > 0)) return std::nullopt;
  return Vec3(g / n);
}

void tsdf_integrate(TsdfVolume& volume, const ImageF& depth, const ImageF* color,
                    const CameraModel& cam, const Pose& cam_to_world,
                    const TsdfParams& params, float frame_weight) {
  const GridSpec& grid = volume.grid();
  const Mat3 Rt = cam_to_world.rotation().transpose();
  const Vec3 t_wc = -(Rt * cam_to_world.translation());
  const Vec3 step_i = Rt.col(0) * grid.voxel_size;
  const double trunc = params.truncation;
  const float max_w = static_cast<float>(params.max_weight);
  const bool use_color = color != nullptr && color->channels() == 3 &&
                         color->width() == depth.width() &&
                         color->height() == depth.height();

  for (int k = 0; k < grid.dims[2]; ++k) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      Vec3 pc = Rt * grid.position(0, j, k) + t_wc;
      for (int i = 0; i < grid.dims[0]; ++i, pc += step_i) {
        if (pc.z() <= 1e-6) continue;
        const double u = cam.fx * pc.x() / pc.z() + cam.cx;
        const double v = cam.fy * pc.y() / pc.z() + cam.cy;
        const int px = static_cast<int>(std::floor(u + 0.5));
        const int py = static_cast<int>(std::floor(v + 0.5));
        if (px < 0 || py < 0 || px >= depth.width() || py >= depth.height()) continue;
        const float d = depth(px, py);
        if (!(d > 0)) continue;
        const double sdf = d - pc.z();
        if (sdf < -trunc) continue;

        float& w = volume.weight(i, j, k);
        float& f = volume.tsdf(i, j, k);
        const float obs = static_cast<float>(std::clamp(sdf / trunc, -1.0, 1.0));
        f = (w * f + frame_weight * obs) / (w + frame_weight);
        if (use_color) {
          Rgb8& c = volume.color(i, j, k);
          for (int ch = 0; ch < 3; ++ch) {
            const float obs_c = std::clamp((*color)(px, py, ch), 0.0f, 1.0f) * 255.0f;
            const float mixed = (w * c[ch] + frame_weight * obs_c) / (w + frame_weight);
            c[ch] = static_cast<std::uint8_t>(std::lround(mixed));
          }
        }
        w = std::min(w + frame_weight, max_w);
      }
    }
  }
}

ModelRender raycast_tsdf(const TsdfVolume& volume, const CameraModel& cam,
                         const Pose& cam_to_world, double truncation,
                         double max_range) {
  ModelRender out{ImageF(cam.width, cam.height, 1, 0.0f),
                  ImageF(cam.width, cam.height, 3, 0.0f),
                  ImageF(cam.width, cam.height, 3, 0.0f)};
  if (volume.voxel_count() == 0) return out;
  const Mat3 R = cam_to_world.rotation();
  const Vec3 o = cam_to_world.translation();
  const double step = 0.5 * truncation;
  const GridSpec& grid = volume.grid();
  const Vec3 lo = grid.origin;
  const Vec3 hi = grid.position(grid.dims[0] - 1, grid.dims[1] - 1, grid.dims[2] - 1);

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 d_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const double len = d_cam.norm();
      const Vec3 dir = R * d_cam / len;

      // Clip the ray against the grid box.
      double t0 = 0.0, t1 = max_range;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-12) {
          if (o[a] < lo[a] || o[a] > hi[a]) t1 = -1;
          continue;
        }
        double ta = (lo[a] - o[a]) / dir[a], tb = (hi[a] - o[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (t0 >= t1) continue;

      std::optional<double> f_prev;
      double t_prev = t0;
      for (double t = t0; t <= t1; t += step) {
        const auto f = volume.sample(o + t * dir);
        if (f && f_prev) {
          if (*f_prev > 0 && *f <= 0) {
            const double t_hit = t_prev + step * (*f_prev / (*f_prev - *f));
            const Vec3 p = o + t_hit * dir;
            out.depth(x, y) = static_cast<float>(t_hit / len);
            if (const auto g = volume.gradient(p)) {
              const Vec3 n_cam = R.transpose() * *g;
              for (int c = 0; c < 3; ++c) out.normals(x, y, c) = static_cast<float>(n_cam[c]);
            }
            const Vec3 col = volume.sample_color(p);
            for (int c = 0; c < 3; ++c) out.color(x, y, c) = static_cast<float>(col[c]);
            break;
          }
          if (*f_prev < 0 && *f > 0) break;  // exited through a back face
        }
        f_prev = f;
        t_prev = t;
      }
    }
  }
  return out;
}

TriangleMesh marching_cubes(const TsdfVolume& volume, double iso) {
  const GridSpec& grid = volume.grid();
  TriangleMesh mesh = marching_cubes(
      grid,
      [&](int k, std::span<float> v, std::span<std::uint8_t> ok) {
        const std::size_t plane = std::size_t(grid.dims[0]) * grid.dims[1];
        const std::size_t base = volume.index(0, 0, k);
        for (std::size_t n = 0; n < plane; ++n) {
          v[n] = volume.tsdf_values()[base + n];
          ok[n] = volume.weights()[base + n] > 0;
        }
      },
      iso);
  mesh.colors.reserve(mesh.vertices.size());
  for (const Vec3& p : mesh.vertices) {
    const Vec3 c = volume.sample_color(p) * 255.0;
    mesh.colors.push_back({static_cast<std::uint8_t>(std::lround(c[0])),
                           static_cast<std::uint8_t>(std::lround(c[1])),
                           static_cast<std::uint8_t>(std::lround(c[2]))});
  }
  return mesh;
}

}  // namespace modslam
