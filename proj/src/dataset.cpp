#include "modslam/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "modslam/errors.hpp"
#include "modslam/png_io.hpp"
#include "modslam/trajectory_io.hpp"

namespace modslam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTumDepthScale = 5000.0;
constexpr double kReplicaDepthScale = 6553.5;
constexpr double kReplicaFrameRate = 30.0;
constexpr const char* kSyntheticMeta = "synthetic.json";
constexpr const char* kGtMeshName = "gt_mesh.ply";

struct TumIntrinsics {
  const char* family;
  double fx, fy, cx, cy;
};
// Published per-sensor calibration of the TUM RGB-D benchmark.
constexpr TumIntrinsics kTumTable[] = {
    {"freiburg1", 517.3, 516.5, 318.6, 255.3},
    {"freiburg2", 520.9, 521.0, 325.1, 249.7},
    {"freiburg3", 535.4, 539.2, 320.1, 247.6},
};

std::vector<TimestampedEntry> read_tum_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TimestampedEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '#') continue;
    std::istringstream ls(line);
    TimestampedEntry e;
    if (!(ls >> e.timestamp >> e.path)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected 'timestamp path'");
    }
    if (!out.empty() && e.timestamp <= out.back().timestamp) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": timestamps not increasing");
    }
    out.push_back(std::move(e));
  }
  return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json scene_json(const SdfScene& scene) {
  json prims = json::array();
  for (const auto& prim : scene.primitives) {
    if (const auto* r = std::get_if<InvertedBox>(&prim)) {
      prims.push_back({{"type", "room"}, {"center", vec_json(r->center)},
                       {"half_extents", vec_json(r->half_extents)}});
    } else if (const auto* s = std::get_if<Sphere>(&prim)) {
      prims.push_back({{"type", "sphere"}, {"center", vec_json(s->center)},
                       {"radius", s->radius}});
    } else {
      const auto& b = std::get<Box>(prim);
      prims.push_back({{"type", "box"}, {"center", vec_json(b.center)},
                       {"half_extents", vec_json(b.half_extents)}});
    }
  }
  return prims;
}

SdfScene json_scene(const json& prims) {
  SdfScene scene;
  for (const auto& p : prims) {
    const std::string type = p.at("type").get<std::string>();
    if (type == "room") {
      scene.primitives.push_back(
          InvertedBox{json_vec(p.at("center")), json_vec(p.at("half_extents"))});
    } else if (type == "sphere") {
      scene.primitives.push_back(
          Sphere{json_vec(p.at("center")), p.at("radius").get<double>()});
    } else if (type == "box") {
      scene.primitives.push_back(
          Box{json_vec(p.at("center")), json_vec(p.at("half_extents"))});
    } else {
      throw IoError("unknown primitive type '" + type + "'");
    }
  }
  return scene;
}

json trajectory_json(const TrajectorySpec& spec) {
  if (const auto* o = std::get_if<OrbitSpec>(&spec)) {
    return {{"type", "orbit"},        {"center", vec_json(o->center)},
            {"radius", o->radius},    {"height", o->height},
            {"start_angle", o->start_angle}, {"total_angle", o->total_angle},
            {"target", vec_json(o->target)}, {"target_bob", o->target_bob},
            {"bob_cycles", o->bob_cycles}};
  }
  const auto& l = std::get<LineSpec>(spec);
  return {{"type", "line"},
          {"start", vec_json(l.start)},
          {"end", vec_json(l.end)},
          {"target", vec_json(l.target)}};
}

json camera_json(const CameraModel& c) {
  return {{"w", c.width}, {"h", c.height}, {"fx", c.fx},   {"fy", c.fy},
          {"cx", c.cx},   {"cy", c.cy},    {"scale", c.depth_scale}};
}

std::optional<CameraModel> read_cam_params(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    const json j = json::parse(in);
    const json& c = j.contains("camera") ? j.at("camera") : j;
    CameraModel cam;
    cam.width = c.at("w").get<int>();
    cam.height = c.at("h").get<int>();
    cam.fx = c.at("fx").get<double>();
    cam.fy = c.at("fy").get<double>();
    cam.cx = c.at("cx").get<double>();
    cam.cy = c.at("cy").get<double>();
    cam.depth_scale = c.value("scale", kReplicaDepthScale);
    return cam;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Image files under dir whose stem is prefix, optional '_', then digits,
// sorted by the numeric index.
std::vector<fs::path> indexed_files(const fs::path& dir, const std::string& prefix,
                                    const std::vector<std::string>& exts) {
  const std::regex pattern(prefix + "_?([0-9]+)");
  std::vector<std::pair<long, fs::path>> found;
  if (!fs::is_directory(dir)) return {};
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (std::find(exts.begin(), exts.end(), p.extension().string()) == exts.end()) continue;
    std::smatch m;
    const std::string stem = p.stem().string();
    if (std::regex_match(stem, m, pattern)) found.emplace_back(std::stol(m[1]), p);
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [idx, p] : found) out.push_back(std::move(p));
  return out;
}

void apply_overrides(const DatasetConfig& config, CameraModel& cam) {
  if (config.fx) cam.fx = *config.fx;
  if (config.fy) cam.fy = *config.fy;
  if (config.cx) cam.cx = *config.cx;
  if (config.cy) cam.cy = *config.cy;
  if (config.depth_scale) cam.depth_scale = *config.depth_scale;
}

bool all_intrinsics_overridden(const DatasetConfig& c) {
  return c.fx && c.fy && c.cx && c.cy;
}

std::pair<int, int> image_size(const fs::path& path) {
  const ImageF img = read_color_image(path);
  return {img.width(), img.height()};
}

void open_tum(const DatasetConfig& config, DatasetDescriptor& desc) {
  const fs::path& root = config.root;
  const auto color = read_tum_list(root / "rgb.txt");
  const auto depth = read_tum_list(root / "depth.txt");
  Trajectory gt;
  if (fs::exists(root / "groundtruth.txt")) gt = read_tum_trajectory(root / "groundtruth.txt");
  desc.associations = associate_tum(color, depth, gt, config.max_dt);

  CameraModel cam;
  cam.depth_scale = kTumDepthScale;
  const std::string name = fs::absolute(root).lexically_normal().string();
  bool known = false;
  for (const auto& row : kTumTable) {
    if (name.find(row.family) != std::string::npos) {
      cam.fx = row.fx, cam.fy = row.fy, cam.cx = row.cx, cam.cy = row.cy;
      known = true;
    }
  }
  if (!known && !all_intrinsics_overridden(config)) {
    throw IoError("missing intrinsics: cannot infer the TUM sensor family from '" +
                  root.string() + "'; set dataset.fx, fy, cx, cy");
  }
  apply_overrides(config, cam);
  const auto [w, h] = image_size(root / desc.associations.front().color_path);
  cam.width = w;
  cam.height = h;
  desc.raw_camera = cam;

  for (const auto& rec : desc.associations) {
    desc.timestamps.push_back(rec.t_color);
    desc.color_paths.push_back(root / rec.color_path);
    desc.depth_paths.push_back(root / rec.depth_path);
    desc.gt_poses.push_back(rec.gt_pose);
  }
}

void open_replica(const DatasetConfig& config, DatasetDescriptor& desc) {
  const fs::path& root = config.root;
  const fs::path results = fs::is_directory(root / "results") ? root / "results" : root;
  auto colors = indexed_files(results, "frame", {".png", ".jpg", ".jpeg"});
  auto depths = indexed_files(results, "depth", {".png"});
  if (colors.empty()) throw IoError("empty sequence: no color frames in " + results.string());
  if (colors.size() != depths.size()) {
    throw IoError(fmt::format("{}: {} color frames but {} depth frames", results.string(),
                              colors.size(), depths.size()));
  }

  std::optional<CameraModel> cam = read_cam_params(root / "cam_params.json");
  if (!cam) cam = read_cam_params(root.parent_path() / "cam_params.json");
  double frame_rate = kReplicaFrameRate;
  if (desc.kind == DatasetKind::Synthetic) {
    const fs::path meta_path = root / kSyntheticMeta;
    std::ifstream in(meta_path);
    if (!in) throw IoError("missing synthetic metadata " + meta_path.string());
    try {
      const json meta = json::parse(in);
      desc.scene = json_scene(meta.at("scene"));
      desc.seed = meta.at("seed").get<std::uint64_t>();
      frame_rate = meta.value("frame_rate", kReplicaFrameRate);
    } catch (const json::exception& e) {
      throw IoError(meta_path.string() + ": " + e.what());
    }
    if (fs::exists(root / kGtMeshName)) desc.gt_mesh_path = root / kGtMeshName;
  }
  if (!cam) {
    if (!all_intrinsics_overridden(config)) {
      throw IoError("missing intrinsics: no cam_params.json for " + root.string());
    }
    cam = CameraModel{};
    cam->depth_scale = kReplicaDepthScale;
    const auto [w, h] = image_size(colors.front());
    cam->width = w;
    cam->height = h;
  }
  apply_overrides(config, *cam);
  desc.raw_camera = *cam;

  std::vector<Pose> poses;
  if (fs::exists(root / "traj.txt")) {
    poses = read_matrix_trajectory(root / "traj.txt");
    if (poses.size() < colors.size()) {
      throw IoError(fmt::format("traj.txt has {} poses for {} frames", poses.size(),
                                colors.size()));
    }
  }
  for (std::size_t i = 0; i < colors.size(); ++i) {
    desc.timestamps.push_back(static_cast<double>(i) / frame_rate);
    desc.color_paths.push_back(colors[i]);
    desc.depth_paths.push_back(depths[i]);
    desc.gt_poses.push_back(poses.empty() ? std::nullopt : std::optional<Pose>(poses[i]));
  }
}

template <typename T>
void slice(std::vector<T>& v, std::size_t first, std::size_t last) {
  v = std::vector<T>(v.begin() + first, v.begin() + last);
}

}  // namespace

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Tum: return "tum";
    case DatasetKind::Replica: return "replica";
    case DatasetKind::Synthetic: return "synthetic";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "tum") return DatasetKind::Tum;
  if (s == "replica") return DatasetKind::Replica;
  if (s == "synthetic") return DatasetKind::Synthetic;
  throw ConfigError("unknown dataset kind '" + s + "' (available: tum, replica, synthetic)");
}

Trajectory DatasetDescriptor::gt_trajectory() const {
  Trajectory traj;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (gt_poses[i]) traj.push_back(timestamps[i], *gt_poses[i]);
  }
  return traj;
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_associate(
    const std::vector<double>& a, const std::vector<double>& b, double max_dt) {
  struct Candidate {
    double dt;
    std::size_t i, j;
  };
  std::vector<Candidate> cands;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (lo < b.size() && b[lo] < a[i] - max_dt) ++lo;
    for (std::size_t j = lo; j < b.size() && b[j] <= a[i] + max_dt; ++j) {
      cands.push_back({std::abs(a[i] - b[j]), i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(x.dt, x.i, x.j) < std::tie(y.dt, y.i, y.j);
  });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : cands) {
    if (c.dt > max_dt || used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = 1;
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<AssociationRecord> associate_tum(const std::vector<TimestampedEntry>& color,
                                             const std::vector<TimestampedEntry>& depth,
                                             const Trajectory& gt, double max_dt) {
  if (!(max_dt >= 0)) throw InvalidArgument("max_dt must be >= 0");
  auto stamps = [](const auto& list) {
    std::vector<double> t;
    for (const auto& e : list) t.push_back(e.timestamp);
    return t;
  };
  const auto cd = greedy_associate(stamps(color), stamps(depth), max_dt);
  std::vector<AssociationRecord> records;
  for (const auto& [i, j] : cd) {
    AssociationRecord r;
    r.t_color = color[i].timestamp;
    r.t_depth = depth[j].timestamp;
    r.color_path = color[i].path;
    r.depth_path = depth[j].path;
    records.push_back(std::move(r));
  }
  if (!gt.empty()) {
    std::vector<double> tc, tg;
    for (const auto& r : records) tc.push_back(r.t_color);
    for (const auto& s : gt.samples()) tg.push_back(s.timestamp);
    for (const auto& [i, g] : greedy_associate(tc, tg, max_dt)) {
      records[i].t_gt = tg[g];
      records[i].gt_pose = gt[g].pose;
    }
  }
  if (records.empty()) throw IoError("no associable frames");
  return records;
}

DatasetDescriptor open_dataset(const DatasetConfig& config) {
  if (!fs::is_directory(config.root)) {
    throw IoError("dataset root not found: " + config.root.string());
  }
  if (config.downsample < 1) throw ConfigError("dataset.downsample must be >= 1");
  DatasetDescriptor desc;
  desc.kind = config.kind;
  desc.root = config.root;
  desc.downsample = config.downsample;
  if (config.kind == DatasetKind::Tum) {
    open_tum(config, desc);
  } else {
    open_replica(config, desc);
  }
  desc.raw_camera.validate();
  desc.camera = desc.raw_camera.downsampled(config.downsample);
  desc.camera.validate();

  const long total = static_cast<long>(desc.timestamps.size());
  const long first = std::max(0L, config.first_frame);
  const long last = config.last_frame < 0 ? total : std::min(total, config.last_frame);
  if (first >= last) {
    throw IoError(fmt::format("empty sequence: frame range [{}, {}) of {} frames",
                              config.first_frame, config.last_frame, total));
  }
  slice(desc.timestamps, first, last);
  slice(desc.color_paths, first, last);
  slice(desc.depth_paths, first, last);
  slice(desc.gt_poses, first, last);
  if (!desc.associations.empty()) slice(desc.associations, first, last);
  desc.frame_count = last - first;
  return desc;
}

Frame load_frame(const DatasetDescriptor& desc, long i) {
  if (i < 0 || i >= desc.frame_count) {
    throw InvalidArgument(fmt::format("frame index {} out of range [0, {})", i,
                                      desc.frame_count));
  }
  Frame frame;
  frame.index = i;
  frame.timestamp = desc.timestamps[i];
  frame.gt_pose = desc.gt_poses[i];
  ImageF color;
  DecodedPng depth_raw;
  try {
    color = read_color_image(desc.color_paths[i]);
    depth_raw = read_png(desc.depth_paths[i]);
  } catch (const IoError& e) {
    throw IoError(fmt::format("frame {}: {}", i, e.what()));
  }
  const CameraModel& raw = desc.raw_camera;
  if (color.width() != raw.width || color.height() != raw.height ||
      depth_raw.pixels.width() != raw.width || depth_raw.pixels.height() != raw.height) {
    throw IoError(fmt::format("frame {}: image size differs from the camera ({}x{})", i,
                              raw.width, raw.height));
  }
  if (depth_raw.pixels.channels() != 1) {
    throw IoError(fmt::format("frame {}: depth image is not single channel", i));
  }

  const int k = desc.downsample;
  const CameraModel& cam = desc.camera;
  frame.color = ImageF(cam.width, cam.height, 3);
  frame.depth = ImageF(cam.width, cam.height, 1);
  const float inv_area = 1.0f / static_cast<float>(k * k);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      frame.depth(x, y) = static_cast<float>(depth_raw.pixels(k * x, k * y) / raw.depth_scale);
      for (int c = 0; c < 3; ++c) {
        float acc = 0;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) acc += color(k * x + dx, k * y + dy, c);
        }
        frame.color(x, y, c) = acc * inv_area;
      }
    }
  }
  return frame;
}

DatasetDescriptor generate_synthetic(const SdfScene& scene, const TrajectorySpec& trajectory,
                                     const CameraModel& cam, int n_frames,
                                     const fs::path& out_dir, std::uint64_t seed,
                                     const SyntheticOptions& options) {
  scene.validate();
  cam.validate();
  if (n_frames < 1) throw InvalidArgument("n_frames must be >= 1");
  CameraModel stored = cam;
  stored.depth_scale = options.depth_scale;

  std::error_code ec;
  fs::create_directories(out_dir / "results", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "results").string() + ": " + ec.message());

  const auto poses = trajectory_poses(trajectory, n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const SdfRender r = render_sdf(scene, stored, poses[i], seed);
    write_png(out_dir / "results" / fmt::format("frame_{:06d}.png", i), to_rgb8(r.color));
    write_png(out_dir / "results" / fmt::format("depth_{:06d}.png", i),
              to_depth16(r.depth, stored.depth_scale));
  }
  write_matrix_trajectory(out_dir / "traj.txt", poses);
  write_text(out_dir / "cam_params.json", json{{"camera", camera_json(stored)}}.dump(2) + "\n");
  const json meta = {{"format", "modslam-synthetic"},
                     {"version", 1},
                     {"seed", seed},
                     {"n_frames", n_frames},
                     {"frame_rate", options.frame_rate},
                     {"mesh_voxel", options.mesh_voxel},
                     {"camera", camera_json(stored)},
                     {"scene", scene_json(scene)},
                     {"trajectory", trajectory_json(trajectory)}};
  write_text(out_dir / kSyntheticMeta, meta.dump(2) + "\n");
  write_ply(scene_mesh(scene, options.mesh_voxel), out_dir / kGtMeshName);

  DatasetConfig config;
  config.kind = DatasetKind::Synthetic;
  config.root = out_dir;
  return open_dataset(config);
}

}  // namespace modslam
