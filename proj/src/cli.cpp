#include "modslam/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <optional>

#include "modslam/commands.hpp"
#include "modslam/errors.hpp"
#include "modslam/mesh.hpp"
#include "modslam/pipeline.hpp"
#include "modslam/trajectory_io.hpp"

namespace modslam {
namespace fs = std::filesystem;

namespace {

std::string fmt_opt(const std::optional<double>& v, int digits, const char* unit) {
  return v ? fmt::format("{:.{}f}{}", *v, digits, unit) : std::string("n/a");
}

void print_report(std::ostream& out, const MetricsReport& r) {
  out << "ATE          " << fmt_opt(r.ate_rmse_cm, 4, " cm") << "\n";
  out << "PSNR         " << fmt_opt(r.psnr_db, 2, " dB")
      << (r.psnr_capped.value_or(false) ? " (capped)" : "") << "\n";
  out << "SSIM         " << fmt_opt(r.ssim, 4, "") << "\n";
  const auto m = [&](double ReconMetrics::*f) -> std::optional<double> {
    return r.recon ? std::optional<double>((*r.recon).*f) : std::nullopt;
  };
  out << "Accuracy     " << fmt_opt(m(&ReconMetrics::accuracy_cm), 2, " cm") << "\n";
  out << "Completion   " << fmt_opt(m(&ReconMetrics::completion_cm), 2, " cm") << "\n";
  out << "Comp. ratio  " << fmt_opt(m(&ReconMetrics::completion_ratio_pct), 2, " %") << "\n";
  out << "Precision    " << fmt_opt(m(&ReconMetrics::precision_pct), 2, " %") << "\n";
  out << "Recall       " << fmt_opt(m(&ReconMetrics::recall_pct), 2, " %") << "\n";
  out << "F1           " << fmt_opt(m(&ReconMetrics::f1_pct), 2, " %") << "\n";
  out << "Depth L1     " << fmt_opt(r.depth_l1_cm, 2, " cm") << "\n";
  out << "FPS          " << fmt_opt(r.fps, 2, "") << "\n";
}

void print_recon(std::ostream& out, const MetricsReport& r) {
  const ReconMetrics& m = *r.recon;
  out << fmt::format("Accuracy     {:.2f} cm\n", m.accuracy_cm);
  out << fmt::format("Completion   {:.2f} cm\n", m.completion_cm);
  out << fmt::format("Comp. ratio  {:.2f} %\n", m.completion_ratio_pct);
  out << fmt::format("Precision    {:.2f} %\n", m.precision_pct);
  out << fmt::format("Recall       {:.2f} %\n", m.recall_pct);
  out << fmt::format("F1           {:.2f} %\n", m.f1_pct);
  out << "Depth L1     " << fmt_opt(r.depth_l1_cm, 2, " cm") << "\n";
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modular RGB-D SLAM runner and evaluator", "modslam"};
  app.require_subcommand(1, 1);

  // run
  std::string config_path, output_override;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run a configured pipeline over a dataset");
  run->add_option("--config", config_path, "TOML configuration file")->required();
  run->add_option("--set", overrides, "Override as section.key=value (repeatable)");
  run->add_option("--output", output_override, "Output directory (overrides output_dir)");

  // eval-traj
  std::string gt_path, est_path, align_name = "se3", report_path;
  double max_dt = 0.02;
  auto* traj = app.add_subcommand("eval-traj", "ATE RMSE of an estimated TUM trajectory");
  traj->add_option("--gt", gt_path, "Ground-truth TUM trajectory")->required();
  traj->add_option("--est", est_path, "Estimated TUM trajectory")->required();
  traj->add_option("--align", align_name, "none, se3 or sim3")->capture_default_str();
  traj->add_option("--max-dt", max_dt, "Association window in seconds")->capture_default_str();
  traj->add_option("--report", report_path, "Write a JSON report");

  // eval-recon
  std::string recon_path, gt_mesh_path, dataset_dir;
  double tau_f_cm = 5, tau_c_cm = 5;
  int samples = 200000, depth_stride = 50;
  std::uint64_t seed = 0;
  auto* recon = app.add_subcommand("eval-recon", "Mesh accuracy, completion and F-score");
  recon->add_option("--recon", recon_path, "Reconstructed mesh (PLY)")->required();
  recon->add_option("--gt-mesh", gt_mesh_path, "Reference mesh (PLY)")->required();
  recon->add_option("--dataset", dataset_dir, "Dataset directory for depth L1");
  recon->add_option("--tau-f", tau_f_cm, "Precision/recall threshold in cm")->capture_default_str();
  recon->add_option("--tau-c", tau_c_cm, "Completion ratio threshold in cm")->capture_default_str();
  recon->add_option("--samples", samples, "Surface samples per mesh")->capture_default_str();
  recon->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  recon->add_option("--stride", depth_stride, "Frames between depth L1 views")
      ->capture_default_str();
  recon->add_option("--report", report_path, "Write a JSON report");

  // eval-render
  std::string renders_dir;
  int render_stride = 1;
  auto* render = app.add_subcommand("eval-render", "PSNR and SSIM of exported renders");
  render->add_option("--renders", renders_dir, "Directory of render_color_<index>.png")
      ->required();
  render->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  render->add_option("--stride", render_stride, "Use renders whose index is a multiple of n")
      ->capture_default_str();
  render->add_option("--report", report_path, "Write a JSON report");

  // eval-all
  std::string run_dir;
  auto* all = app.add_subcommand("eval-all", "Every metric of a run directory in one report");
  all->add_option("run_dir", run_dir, "Output directory of a finished run")->required();
  all->add_option("--report", report_path, "Report path (default <run_dir>/metrics.json)");

  // replay
  std::string replay_traj, replay_mesh, camera_path, replay_out;
  int replay_stride = 1;
  double replay_depth_scale = 1000;
  auto* rep = app.add_subcommand("replay", "Render a mesh along a trajectory to PNGs");
  rep->add_option("--trajectory", replay_traj, "TUM or 4x4-matrix trajectory")->required();
  rep->add_option("--mesh", replay_mesh, "Mesh (PLY)")->required();
  rep->add_option("--camera", camera_path, "Intrinsics file: fx fy cx cy width height")
      ->required();
  rep->add_option("--out", replay_out, "Output directory")->required();
  rep->add_option("--stride", replay_stride, "Render every n-th pose")->capture_default_str();
  rep->add_option("--depth-scale", replay_depth_scale, "Depth PNG units per meter")
      ->capture_default_str();

  // synth
  std::string scene, synth_out;
  int frames = 100;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic RGB-D sequence");
  synth->add_option("--scene", scene, "Preset: room-sphere or room-boxes")->required();
  synth->add_option("--frames", frames, "Number of frames")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Noise seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto write_if = [&](const MetricsReport& r) {
    if (!report_path.empty()) {
      write_report(r, report_path);
      out << "report: " << report_path << "\n";
    }
  };

  try {
    if (*run) {
      std::vector<std::string> all_overrides = overrides;
      RunConfig config = load_config(config_path, all_overrides);
      if (!output_override.empty()) config.output_dir = output_override;
      const RunArtifacts a = run_pipeline(config);
      out << fmt::format("frames {}  keyframes integrated {}  FPS {:.2f}  wall {:.2f} s\n",
                         a.frames.size(), a.integrated_keyframes.size(), a.fps, a.wall_seconds);
      out << "trajectory: " << a.trajectory.string() << "\n";
      if (a.gt_trajectory) out << "gt trajectory: " << a.gt_trajectory->string() << "\n";
      if (a.mesh) out << "mesh: " << a.mesh->string() << "\n";
      if (a.renders_dir)
        out << "renders: " << a.renders_dir->string() << " (" << a.render_pairs << " pairs)\n";
      out << "stats: " << a.stats.string() << "\n";
      out << "monitor: " << a.monitor_dir.string() << "\n";
    } else if (*traj) {
      const AlignMode align = parse_align_mode(align_name);
      const TrajectoryEval t = evaluate_trajectory(read_tum_trajectory(gt_path),
                                                   read_tum_trajectory(est_path), align, max_dt);
      out << fmt::format("ATE {:.4f} cm ({} pairs, {} alignment)\n", t.ate_cm, t.pairs,
                         align_label(align));
      MetricsReport r;
      r.ate_rmse_cm = t.ate_cm;
      r.ate_pairs = t.pairs;
      r.parameters = {{"align", align_label(align)}, {"max_dt_s", max_dt}};
      write_if(r);
    } else if (*recon) {
      if (samples < 1) throw ConfigError("--samples must be >= 1");
      if (tau_f_cm <= 0 || tau_c_cm <= 0) throw ConfigError("--tau-f and --tau-c must be > 0");
      ReconParams rp;
      rp.samples = static_cast<std::size_t>(samples);
      rp.tau_f = tau_f_cm / 100.0;
      rp.tau_c = tau_c_cm / 100.0;
      rp.seed = seed;
      const TriangleMesh mesh = read_ply(recon_path);
      MetricsReport r;
      r.recon = reconstruction_metrics(mesh, read_ply(gt_mesh_path), rp);
      if (!dataset_dir.empty())
        r.depth_l1_cm = depth_l1(mesh, open_dataset_dir(dataset_dir), depth_stride).cm;
      r.parameters = {{"tau_f_m", rp.tau_f}, {"tau_c_m", rp.tau_c}, {"samples", samples},
                      {"seed", seed},        {"depth_l1_stride", depth_stride}};
      print_recon(out, r);
      write_if(r);
    } else if (*render) {
      const RenderEval e = evaluate_renders(renders_dir, open_dataset_dir(dataset_dir),
                                            render_stride);
      out << fmt::format("PSNR {:.2f} dB{}  SSIM {:.4f}  ({} views)\n", e.psnr_db,
                         e.capped ? " (capped)" : "", e.ssim, e.views);
      MetricsReport r;
      r.psnr_db = e.psnr_db;
      r.psnr_capped = e.capped;
      r.ssim = e.ssim;
      r.render_views = e.views;
      r.parameters = {{"render_stride", render_stride}};
      write_if(r);
    } else if (*all) {
      const MetricsReport r = evaluate_run(run_dir);
      print_report(out, r);
      if (report_path.empty()) report_path = (fs::path(run_dir) / artifact::kReport).string();
      write_if(r);
    } else if (*rep) {
      const CameraModel cam = read_intrinsics(camera_path, replay_depth_scale);
      const int n = replay(read_any_trajectory(replay_traj), read_ply(replay_mesh), cam,
                           replay_out, replay_stride);
      out << fmt::format("{} image pairs written to {}\n", n, replay_out);
    } else if (*synth) {
      const SyntheticPreset preset = synthetic_preset(scene);
      const DatasetDescriptor d = generate_synthetic(preset.scene, preset.trajectory,
                                                     preset.camera, frames, synth_out, synth_seed);
      out << fmt::format("{} frames written to {}\n", d.frame_count, synth_out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace modslam
