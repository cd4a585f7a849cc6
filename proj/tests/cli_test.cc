#include "modslam/cli.hpp"

#include <fmt/format.h>
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "modslam/commands.hpp"
#include "modslam/mesh.hpp"
#include "modslam/pipeline.hpp"
#include "modslam/png_io.hpp"
#include "modslam/trajectory_io.hpp"
#include "test_util.h"

namespace modslam {
namespace {
namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& s, const std::string& needle) {
  return s.find(needle) != std::string::npos;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// 12-frame sequence of the sphere room at 32x24.
fs::path tiny_dataset(const std::string& tag) {
  const fs::path dir = test::temp_dir(tag);
  const auto preset = synthetic_preset("room-sphere");
  SyntheticOptions opt;
  opt.mesh_voxel = 0.05;
  generate_synthetic(preset.scene, preset.trajectory, CameraModel{24, 24, 15.5, 11.5, 32, 24, 6553.5},
                     12, dir, 1, opt);
  return dir;
}

fs::path write_config(const fs::path& dir, const fs::path& dataset, const std::string& extra = "") {
  const fs::path path = dir / "run.toml";
  std::ofstream(path) << "output_dir = \"out\"\n\n[dataset]\nkind = \"synthetic\"\nroot = \""
                      << dataset.string()
                      << "\"\n\n[algorithm]\nname = \"gt_tsdf\"\nvoxel_size = 0.05\n"
                      << extra << "\n[pipeline]\nrender_eval_interval = 5\n";
  return path;
}

Trajectory line_trajectory(int n, double scale, const Vec3& shift) {
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    const double a = 0.1 * i;
    const Vec3 p(std::cos(a), std::sin(2 * a), 0.1 * i);
    t.push_back(0.1 * i, Pose::from_axis_angle(Vec3(0, 0, a), scale * p + shift));
  }
  return t;
}

TEST(Cli, HelpExitsZeroWithoutTouchingFiles) {
  const fs::path probe = fs::temp_directory_path() / "modslam_help_probe";
  fs::remove_all(probe);
  const auto top = cli({"--help"});
  EXPECT_EQ(top.code, 0);
  EXPECT_TRUE(contains(top.out, "Usage"));
  for (const char* sub :
       {"run", "eval-traj", "eval-recon", "eval-render", "eval-all", "replay", "synth"}) {
    const auto r = cli({sub, "--help", "--out", (probe / "x").string(), "--config",
                        (probe / "c.toml").string()});
    EXPECT_EQ(r.code, 0) << sub << r.err;
    EXPECT_TRUE(contains(r.out, "Usage")) << sub;
  }
  EXPECT_FALSE(fs::exists(probe));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"fly"}).code, 2);
  EXPECT_EQ(cli({"eval-traj", "--gt", "a.txt"}).code, 2);  // missing --est
  EXPECT_EQ(cli({"synth", "--scene", "room-sphere", "--frames", "0", "--out", "/tmp/x"}).code, 2);
  const auto r = cli({"synth", "--scene", "cave", "--frames", "3", "--out", "/tmp/x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "room-sphere") && contains(r.err, "room-boxes")) << r.err;
  EXPECT_EQ(cli({"eval-traj", "--gt", "a", "--est", "b", "--align", "affine"}).code, 2);
}

TEST(Cli, SynthIsReproducible) {
  const fs::path a = test::temp_dir("cli_synth_a"), b = test::temp_dir("cli_synth_b");
  for (const auto& dir : {a, b}) {
    const auto r = cli({"synth", "--scene", "room-sphere", "--frames", "3", "--out", dir.string(),
                        "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const DatasetDescriptor d = open_dataset_dir(a);
  EXPECT_EQ(d.frame_count, 3);
  ASSERT_TRUE(d.gt_mesh_path);
  EXPECT_FALSE(read_ply(*d.gt_mesh_path).empty());
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_GT(files, 6);
}

TEST(Cli, EvalTrajCases) {
  const fs::path dir = test::temp_dir("cli_traj");
  const Trajectory gt = line_trajectory(30, 1.0, Vec3::Zero());
  write_tum_trajectory(dir / "gt.txt", gt);
  write_tum_trajectory(dir / "shifted.txt", line_trajectory(30, 1.0, Vec3(1, -2, 0.5)));
  write_tum_trajectory(dir / "scaled.txt", line_trajectory(30, 2.5, Vec3(0.3, 0, 0)));
  const std::string g = (dir / "gt.txt").string();

  auto self = cli({"eval-traj", "--gt", g, "--est", g, "--report", (dir / "r.json").string()});
  EXPECT_EQ(self.code, 0);
  EXPECT_TRUE(contains(self.out, "ATE 0.0000 cm")) << self.out;
  const MetricsReport rep = read_report(dir / "r.json");
  EXPECT_EQ(rep.ate_rmse_cm, 0.0);
  EXPECT_EQ(rep.ate_pairs, 30);

  EXPECT_TRUE(contains(cli({"eval-traj", "--gt", g, "--est", (dir / "shifted.txt").string(),
                            "--align", "se3"}).out,
                       "ATE 0.0000 cm"));
  const std::string scaled = (dir / "scaled.txt").string();
  EXPECT_TRUE(contains(cli({"eval-traj", "--gt", g, "--est", scaled, "--align", "sim3"}).out,
                       "ATE 0.0000 cm"));
  const auto se3 = cli({"eval-traj", "--gt", g, "--est", scaled, "--align", "se3"});
  EXPECT_EQ(se3.code, 0);
  EXPECT_FALSE(contains(se3.out, "ATE 0.0000 cm")) << se3.out;

  // Timestamps that never associate.
  Trajectory late;
  for (int i = 0; i < 5; ++i) late.push_back(100.0 + i, Pose::identity());
  write_tum_trajectory(dir / "late.txt", late);
  EXPECT_EQ(cli({"eval-traj", "--gt", g, "--est", (dir / "late.txt").string()}).code, 1);
  EXPECT_EQ(cli({"eval-traj", "--gt", g, "--est", (dir / "missing.txt").string()}).code, 1);
}

TEST(Cli, EvalReconCases) {
  const fs::path dir = test::temp_dir("cli_recon");
  TriangleMesh plane;
  plane.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  plane.triangles = {{0, 1, 2}, {0, 2, 3}};
  TriangleMesh shifted = plane;
  for (auto& v : shifted.vertices) v.z() += 0.02;
  write_ply(plane, dir / "plane.ply");
  write_ply(shifted, dir / "shifted.ply");
  write_ply(TriangleMesh{}, dir / "empty.ply");
  const std::string p = (dir / "plane.ply").string(), s = (dir / "shifted.ply").string();

  const auto same = cli({"eval-recon", "--recon", p, "--gt-mesh", p, "--samples", "5000"});
  ASSERT_EQ(same.code, 0) << same.err;
  EXPECT_TRUE(contains(same.out, "Accuracy     0.00 cm"));
  EXPECT_TRUE(contains(same.out, "Completion   0.00 cm"));
  EXPECT_TRUE(contains(same.out, "Comp. ratio  100.00 %"));
  EXPECT_TRUE(contains(same.out, "F1           100.00 %"));
  EXPECT_TRUE(contains(same.out, "Depth L1     n/a"));

  // Printed values agree with the library at the same settings.
  const auto r = cli({"eval-recon", "--recon", s, "--gt-mesh", p, "--samples", "5000", "--tau-f",
                      "1", "--report", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ReconParams rp;
  rp.samples = 5000;
  rp.tau_f = 0.01;
  const ReconMetrics m = reconstruction_metrics(shifted, plane, rp);
  EXPECT_TRUE(contains(r.out, fmt::format("Accuracy     {:.2f} cm", m.accuracy_cm))) << r.out;
  EXPECT_TRUE(contains(r.out, fmt::format("F1           {:.2f} %", m.f1_pct))) << r.out;
  EXPECT_NEAR(read_report(dir / "r.json").recon->accuracy_cm, 2.0, 0.2);

  EXPECT_EQ(cli({"eval-recon", "--recon", (dir / "empty.ply").string(), "--gt-mesh", p}).code, 1);
}

TEST(Cli, RunEvalAndRender) {
  const fs::path data = tiny_dataset("cli_run_data");
  const fs::path dir = test::temp_dir("cli_run");
  const fs::path config = write_config(dir, data);

  const auto run = cli({"run", "--config", config.string()});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_TRUE(contains(run.out, "FPS"));
  const fs::path out = dir / "out";  // relative to the config file
  for (const char* f : {artifact::kTrajectory, artifact::kMesh, artifact::kStats})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_TRUE(contains(run.out, (out / artifact::kMesh).string()));

  const auto all = cli({"eval-all", out.string()});
  ASSERT_EQ(all.code, 0) << all.err;
  const auto j = nlohmann::json::parse(slurp(out / artifact::kReport));
  for (const char* s : {"trajectory", "rendering", "reconstruction", "performance", "parameters"})
    EXPECT_TRUE(j.contains(s)) << s;
  EXPECT_EQ(j["trajectory"]["ate_rmse_cm"], 0.0);
  EXPECT_EQ(j["rendering"]["views"], 3);  // frames 0, 5, 10
  EXPECT_TRUE(j["reconstruction"]["f1_pct"].is_number());
  EXPECT_TRUE(j["reconstruction"]["depth_l1_cm"].is_number());
  EXPECT_TRUE(j["performance"]["fps"].is_number());

  const auto render = cli({"eval-render", "--renders", (out / artifact::kRenders).string(),
                           "--dataset", data.string(), "--report", (dir / "r.json").string()});
  ASSERT_EQ(render.code, 0) << render.err;
  const MetricsReport rr = read_report(dir / "r.json");
  EXPECT_TRUE(std::isfinite(*rr.psnr_db));
  EXPECT_GT(*rr.ssim, 0.0);

  // Renders that are copies of the input frames score perfectly.
  const fs::path copies = test::temp_dir("cli_render_copies");
  const DatasetDescriptor d = open_dataset_dir(data);
  for (long i : {0, 4, 8}) fs::copy_file(d.color_paths[i], copies / render_color_name(i));
  const auto perfect = cli({"eval-render", "--renders", copies.string(), "--dataset", data.string()});
  ASSERT_EQ(perfect.code, 0) << perfect.err;
  EXPECT_TRUE(contains(perfect.out, "PSNR 100.00 dB (capped)  SSIM 1.0000  (3 views)"))
      << perfect.out;
  EXPECT_TRUE(contains(cli({"eval-render", "--renders", copies.string(), "--dataset",
                            data.string(), "--stride", "4"})
                           .out,
                       "(3 views)"));
  fs::copy_file(d.color_paths[1], copies / render_color_name(40));
  const auto mismatch = cli({"eval-render", "--renders", copies.string(), "--dataset", data.string()});
  EXPECT_EQ(mismatch.code, 1);
  EXPECT_TRUE(contains(mismatch.err, "render 40")) << mismatch.err;
  EXPECT_EQ(cli({"eval-render", "--renders", test::temp_dir("cli_none").string(), "--dataset",
                 data.string()})
                .code,
            1);
}

TEST(Cli, RunErrors) {
  const fs::path data = tiny_dataset("cli_err_data");
  const fs::path dir = test::temp_dir("cli_err");
  const auto bad_key = cli({"run", "--config", write_config(dir, data, "voxle_size = 0.1\n").string()});
  EXPECT_EQ(bad_key.code, 2);
  EXPECT_TRUE(contains(bad_key.err, "voxle_size")) << bad_key.err;

  const fs::path config = write_config(dir, data);
  const auto bad_set = cli({"run", "--config", config.string(), "--set", "pipeline.queue_capacity=0"});
  EXPECT_EQ(bad_set.code, 2);

  const auto missing = cli({"run", "--config", config.string(), "--set",
                            "dataset.root=" + (dir / "nowhere").string()});
  EXPECT_EQ(missing.code, 1);
  EXPECT_TRUE(contains(missing.err, (dir / "nowhere").string())) << missing.err;
  EXPECT_EQ(cli({"run", "--config", (dir / "absent.toml").string()}).code, 1);

  // A stage failure reports the frame.
  write_png(open_dataset_dir(data).depth_paths[3], Image<std::uint16_t>(32, 24, 1, 0));
  const auto stage = cli({"run", "--config", config.string()});
  EXPECT_EQ(stage.code, 1);
  EXPECT_TRUE(contains(stage.err, "frame 3")) << stage.err;
}

TEST(Cli, ReplayWritesStridedPairs) {
  const fs::path dir = test::temp_dir("cli_replay");
  const auto preset = synthetic_preset("room-sphere");
  write_ply(scene_mesh(preset.scene, 0.1), dir / "scene.ply");
  write_matrix_trajectory(dir / "traj.txt", trajectory_poses(preset.trajectory, 100));
  std::ofstream(dir / "cam.txt") << "20 20 15.5 11.5 32 24\n";
  const std::vector<std::string> base = {"replay", "--trajectory", (dir / "traj.txt").string(),
                                         "--mesh", (dir / "scene.ply").string(), "--camera",
                                         (dir / "cam.txt").string(), "--stride", "10"};
  auto with_out = [&](const fs::path& out) {
    auto a = base;
    a.insert(a.end(), {"--out", out.string()});
    return cli(a);
  };
  ASSERT_EQ(with_out(dir / "a").code, 0);
  ASSERT_EQ(with_out(dir / "b").code, 0);
  int pairs = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    const std::string name = e.path().filename().string();
    pairs += name.rfind("depth_", 0) == 0;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / name)) << name;
  }
  EXPECT_EQ(pairs, 10);
  EXPECT_TRUE(fs::exists(dir / "a" / "shaded_000090.png"));
  // Depth is valid inside a closed room.
  const DecodedPng depth = read_png(dir / "a" / "depth_000000.png");
  EXPECT_GT(depth.pixels(16, 12), 0);

  write_ply(TriangleMesh{}, dir / "empty.ply");
  auto a = base;
  a[4] = (dir / "empty.ply").string();
  a.insert(a.end(), {"--out", (dir / "c").string()});
  EXPECT_EQ(cli(a).code, 1);
  EXPECT_EQ(read_any_trajectory(dir / "traj.txt").size(), 100u);
}

}  // namespace
}  // namespace modslam
