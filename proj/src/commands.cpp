#include "modslam/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "modslam/bvh.hpp"
#include "modslam/errors.hpp"
#include "modslam/mesh.hpp"
#include "modslam/pipeline.hpp"
#include "modslam/png_io.hpp"
#include "modslam/trajectory_io.hpp"

namespace modslam {
namespace fs = std::filesystem;

DatasetKind detect_dataset_kind(const fs::path& root) {
  if (fs::exists(root / "synthetic.json")) return DatasetKind::Synthetic;
  if (fs::exists(root / "rgb.txt")) return DatasetKind::Tum;
  return DatasetKind::Replica;
}

DatasetDescriptor open_dataset_dir(const fs::path& root) {
  DatasetConfig c;
  c.root = root;
  c.kind = detect_dataset_kind(root);
  return open_dataset(c);
}

TrajectoryEval evaluate_trajectory(const Trajectory& gt, const Trajectory& est, AlignMode align,
                                   double max_dt) {
  const PosePairs pairs = associate_trajectories(gt, est, max_dt);
  TrajectoryEval out;
  out.pairs = static_cast<int>(pairs.gt.size());
  out.ate_cm = ate_rmse(pairs.gt, pairs.est, align);
  if (align != AlignMode::None && pairs.gt != pairs.est)
    out.alignment = umeyama(pairs.est, pairs.gt, align == AlignMode::Sim3);
  return out;
}

RenderEval evaluate_renders(const fs::path& renders_dir, const DatasetDescriptor& desc,
                            int stride) {
  if (stride < 1) throw InvalidArgument("render stride must be >= 1");
  if (!fs::is_directory(renders_dir))
    throw IoError("renders directory not found: " + renders_dir.string());
  static const std::regex pattern(R"(render_color_(\d+)\.png)");
  std::map<long, fs::path> renders;  // ordered by frame index
  for (const auto& e : fs::directory_iterator(renders_dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (std::regex_match(name, m, pattern)) renders[std::stol(m[1])] = e.path();
  }
  RenderEval out;
  double psnr_sum = 0, ssim_sum = 0;
  for (const auto& [index, path] : renders) {
    if (index % stride != 0) continue;
    if (index >= desc.frame_count)
      throw InvalidArgument(fmt::format("render {} has no dataset frame (dataset has {} frames)",
                                        index, desc.frame_count));
    const ImageF rendered = read_color_image(path);
    const Frame frame = load_frame(desc, index);
    const PsnrResult p = psnr(rendered, frame.color);
    psnr_sum += p.db;
    out.capped = out.capped || p.capped;
    ssim_sum += ssim(rendered, frame.color);
    ++out.views;
  }
  if (out.views == 0)
    throw DegenerateInput("no render pairs in " + renders_dir.string());
  out.psnr_db = psnr_sum / out.views;
  out.ssim = ssim_sum / out.views;
  return out;
}

namespace {

TriangleMesh transformed(TriangleMesh mesh, const Similarity& s) {
  for (auto& v : mesh.vertices) v = s.apply(v);
  return mesh;
}

}  // namespace

MetricsReport evaluate_run(const fs::path& run_dir) {
  const RunConfig config = load_config(run_dir / artifact::kConfig);
  const EvaluationConfig& ec = config.evaluation;
  const DatasetDescriptor desc = open_dataset(config.dataset);

  MetricsReport report;
  report.parameters = {{"align", align_label(ec.align)},
                       {"max_dt_s", ec.max_dt},
                       {"tau_f_m", ec.tau_f},
                       {"tau_c_m", ec.tau_c},
                       {"samples", ec.samples},
                       {"seed", config.seed},
                       {"depth_l1_stride", ec.depth_l1_stride},
                       {"algorithm", config.algorithm.name},
                       {"mesh_alignment", "none"}};

  Similarity to_gt;
  const fs::path est_path = run_dir / artifact::kTrajectory;
  const fs::path gt_path = run_dir / artifact::kGtTrajectory;
  if (fs::exists(est_path) && fs::exists(gt_path)) {
    const TrajectoryEval t = evaluate_trajectory(read_tum_trajectory(gt_path),
                                                 read_tum_trajectory(est_path), ec.align, ec.max_dt);
    report.ate_rmse_cm = t.ate_cm;
    report.ate_pairs = t.pairs;
    to_gt = t.alignment;
    if (ec.align != AlignMode::None) report.parameters["mesh_alignment"] = align_label(ec.align);
  }

  const fs::path renders = run_dir / artifact::kRenders;
  if (fs::is_directory(renders) && !fs::is_empty(renders)) {
    const RenderEval r = evaluate_renders(renders, desc);
    report.psnr_db = r.psnr_db;
    report.psnr_capped = r.capped;
    report.ssim = r.ssim;
    report.render_views = r.views;
  }

  const fs::path mesh_path = run_dir / artifact::kMesh;
  if (fs::exists(mesh_path) && desc.gt_mesh_path) {
    const TriangleMesh recon = transformed(read_ply(mesh_path), to_gt);
    ReconParams rp;
    rp.samples = static_cast<std::size_t>(ec.samples);
    rp.tau_f = ec.tau_f;
    rp.tau_c = ec.tau_c;
    rp.seed = config.seed;
    report.recon = reconstruction_metrics(recon, read_ply(*desc.gt_mesh_path), rp);
    const bool has_gt = std::any_of(desc.gt_poses.begin(), desc.gt_poses.end(),
                                    [](const auto& p) { return p.has_value(); });
    if (has_gt) report.depth_l1_cm = depth_l1(recon, desc, ec.depth_l1_stride).cm;
  }

  const fs::path stats = run_dir / artifact::kStats;
  if (fs::exists(stats)) {
    const auto rows = read_stats(stats);
    if (!rows.empty()) {
      report.fps = rows.back().cumulative_fps;
      double peak = 0;
      for (const auto& r : rows) peak = std::max(peak, r.peak_rss_bytes);
      report.peak_memory_bytes = peak;
    }
  }
  return report;
}

int replay(const std::vector<Pose>& poses, const TriangleMesh& mesh, const CameraModel& cam,
           const fs::path& out_dir, int stride) {
  if (mesh.triangles.empty()) throw InvalidArgument("replay: mesh has no triangles");
  if (stride < 1) throw InvalidArgument("replay: stride must be >= 1");
  cam.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create " + out_dir.string());
  const Bvh bvh(mesh);
  int written = 0;
  for (std::size_t k = 0; k < poses.size(); k += static_cast<std::size_t>(stride)) {
    const Pose& pose = poses[k];
    ImageF depth(cam.width, cam.height, 1, 0.0f);
    ImageF shade(cam.width, cam.height, 3, 0.0f);
    for (int v = 0; v < cam.height; ++v)
      for (int u = 0; u < cam.width; ++u) {
        const Ray ray = camera_ray(cam, pose, u, v);
        const auto hit = bvh.intersect(ray);
        if (!hit) continue;
        depth(u, v, 0) = static_cast<float>(hit->t);
        const Vec3 n = mesh.triangle_normal(hit->triangle);
        // Headlight: brightness is the cosine between normal and view ray.
        const float s = static_cast<float>(std::abs(n.dot(ray.dir.normalized())));
        for (int c = 0; c < 3; ++c) shade(u, v, c) = s;
      }
    write_png(out_dir / fmt::format("depth_{:06d}.png", k), to_depth16(depth, cam.depth_scale));
    write_png(out_dir / fmt::format("shaded_{:06d}.png", k), to_rgb8(shade));
    ++written;
  }
  return written;
}

std::vector<Pose> read_any_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trajectory " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int columns = 0;
    for (double x; ss >> x;) ++columns;
    if (columns == 16) return read_matrix_trajectory(path);
    std::vector<Pose> poses;
    for (const auto& s : read_tum_trajectory(path).samples()) poses.push_back(s.pose);
    return poses;
  }
  throw IoError("trajectory file is empty: " + path.string());
}

CameraModel read_intrinsics(const fs::path& path, double depth_scale) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read intrinsics " + path.string());
  CameraModel cam;
  if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height))
    throw IoError(path.string() + ": expected \"fx fy cx cy width height\"");
  cam.depth_scale = depth_scale;
  try {
    cam.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return cam;
}

}  // namespace modslam
