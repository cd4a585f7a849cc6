#include "modslam/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <thread>

#include "modslam/errors.hpp"
#include "modslam/png_io.hpp"
#include "modslam/queues.hpp"
#include "modslam/trajectory_io.hpp"
#include "test_util.h"

namespace modslam {
namespace {
namespace fs = std::filesystem;

/// 100-frame slow orbit in the boxes room, cached in the temp directory.
fs::path sequence() {
  const fs::path dir = fs::temp_directory_path() / "modslam_pipeline_seq";
  if (fs::exists(dir / "done")) return dir;
  fs::remove_all(dir);
  const auto preset = synthetic_preset("room-boxes");
  OrbitSpec orbit;
  orbit.radius = 0.5;
  orbit.height = 0.1;
  orbit.total_angle = 100 * 0.8 * M_PI / 180;
  orbit.target = Vec3(0, 0, -0.3);
  SyntheticOptions opt;
  opt.mesh_voxel = 0.05;
  generate_synthetic(preset.scene, orbit, CameraModel{60.0, 60.0, 39.5, 29.5, 80, 60, 6553.5},
                     100, dir, 3, opt);
  std::ofstream(dir / "done") << "ok\n";
  return dir;
}

RunConfig base_config(const std::string& algorithm, const std::string& out) {
  RunConfig c;
  c.dataset.kind = DatasetKind::Synthetic;
  c.dataset.root = sequence();
  c.algorithm.name = algorithm;
  c.algorithm.params["voxel_size"] = 0.03;
  c.output_dir = test::temp_dir(out);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int count_files(const fs::path& dir, const std::string& prefix) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    n += e.path().filename().string().rfind(prefix, 0) == 0;
  return n;
}

TEST(Queues, BoundedBlocksAndDrains) {
  BoundedQueue<int> q(2);
  EXPECT_EQ(q.push(1), 1u);
  EXPECT_EQ(q.push(2), 2u);
  std::thread consumer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    EXPECT_EQ(q.pop(), 1);
  });
  EXPECT_EQ(q.push(3), 2u);  // blocked until the consumer made room
  consumer.join();
  q.close();
  EXPECT_EQ(q.push(4), 0u);
  EXPECT_EQ(q.pop(), 2);
  EXPECT_EQ(q.pop(), 3);
  EXPECT_EQ(q.pop(), std::nullopt);
  EXPECT_EQ(q.max_depth(), 2u);
  EXPECT_THROW(BoundedQueue<int>(0), std::invalid_argument);
}

TEST(Queues, NewestWinsDropsOldest) {
  NewestWinsQueue<int> q(2);
  for (int i = 0; i < 5; ++i) q.push(i);
  EXPECT_EQ(q.dropped(), 3u);
  EXPECT_EQ(q.pop(), 3);
  EXPECT_EQ(q.pop(), 4);
  q.close();
  EXPECT_EQ(q.pop(), std::nullopt);
}

TEST(Pipeline, LockstepRunsAreByteIdentical) {
  RunConfig a = base_config("icp_tsdf", "pipe_det_a");
  a.dataset.last_frame = 30;
  a.pipeline.render_eval_interval = 10;
  RunConfig b = a;
  b.output_dir = test::temp_dir("pipe_det_b");
  const RunArtifacts ra = run_pipeline(a);
  const RunArtifacts rb = run_pipeline(b);
  ASSERT_TRUE(ra.mesh && rb.mesh);
  EXPECT_EQ(slurp(ra.trajectory), slurp(rb.trajectory));
  EXPECT_EQ(slurp(*ra.mesh), slurp(*rb.mesh));
  EXPECT_EQ(ra.render_pairs, 3);
  for (long i : {0, 10, 20}) {
    EXPECT_EQ(slurp(*ra.renders_dir / render_color_name(i)),
              slurp(*rb.renders_dir / render_color_name(i)));
    EXPECT_EQ(slurp(*ra.renders_dir / render_depth_name(i)),
              slurp(*rb.renders_dir / render_depth_name(i)));
  }
  EXPECT_EQ(ra.integrated_keyframes, rb.integrated_keyframes);
  // The tracker follows the slow orbit.
  const Trajectory gt = read_tum_trajectory(*ra.gt_trajectory);
  const Trajectory est = read_tum_trajectory(ra.trajectory);
  ASSERT_EQ(gt.size(), 30u);
  const Pose anchor = gt[0].pose;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Pose expect = anchor.inverse() * gt[i].pose;
    EXPECT_LT((expect.translation() - est[i].pose.translation()).norm(), 0.01) << i;
  }
}

TEST(Pipeline, PipelinedKeepsKeyframesAndMap) {
  RunConfig lock = base_config("gt_tsdf", "pipe_mode_lock");
  lock.dataset.last_frame = 40;
  RunConfig free = lock;
  free.pipeline.sync = SyncMode::Pipelined;
  free.output_dir = test::temp_dir("pipe_mode_free");
  const RunArtifacts rl = run_pipeline(lock);
  const RunArtifacts rf = run_pipeline(free);
  EXPECT_EQ(rl.integrated_keyframes, rf.integrated_keyframes);
  // Ground-truth poses make the map independent of scheduling.
  EXPECT_EQ(slurp(*rl.mesh), slurp(*rf.mesh));
  EXPECT_EQ(slurp(rl.trajectory), slurp(rf.trajectory));

  RunConfig icp = free;
  icp.algorithm.name = "icp_tsdf";
  icp.output_dir = test::temp_dir("pipe_mode_icp");
  EXPECT_EQ(run_pipeline(icp).integrated_keyframes, rl.integrated_keyframes);
}

TEST(Pipeline, CapacityOneBoundsTrackerLead) {
  RunConfig c = base_config("gt_tsdf", "pipe_cap1");
  c.dataset.last_frame = 30;
  c.pipeline.sync = SyncMode::Pipelined;
  c.pipeline.queue_capacity = 1;
  const RunArtifacts r = run_pipeline(c);
  EXPECT_GE(r.max_tracker_lead, 1);
  EXPECT_LE(r.max_tracker_lead, 1);
  EXPECT_LE(r.max_map_queue_depth, 1u);
  EXPECT_EQ(r.frames.size(), 30u);
}

TEST(Pipeline, EveryFifthFrameIntegratedOverHundred) {
  RunConfig c = base_config("gt_tsdf", "pipe_every5");
  c.pipeline.render_eval_interval = 50;
  const RunArtifacts r = run_pipeline(c);
  ASSERT_EQ(r.integrated_keyframes.size(), 20u);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(r.integrated_keyframes[k], long(5 * k));
  EXPECT_EQ(r.render_pairs, 2);
  EXPECT_TRUE(fs::exists(*r.renders_dir / render_color_name(50)));
  EXPECT_FALSE(fs::exists(*r.renders_dir / render_color_name(100)));
  // Ten snapshot pairs at viz_interval 10, none lost in lockstep.
  EXPECT_EQ(r.viz_written, 10u);
  EXPECT_EQ(r.viz_dropped, 0u);
  EXPECT_EQ(count_files(r.monitor_dir, "color_"), 10);
  EXPECT_EQ(count_files(r.monitor_dir, "depth_"), 10);
  // The resolved configuration reloads to the same run.
  EXPECT_EQ(load_config(r.config), c);
}

TEST(Pipeline, StatsFpsMatchesRecordedTimes) {
  RunConfig c = base_config("gt_tsdf", "pipe_stats");
  c.dataset.last_frame = 25;
  const RunArtifacts r = run_pipeline(c);
  const auto rows = read_stats(r.stats);
  ASSERT_EQ(rows.size(), 25u);
  double total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].index, long(i));
    EXPECT_GT(rows[i].tracker_seconds, 0);
    total += rows[i].tracker_seconds + rows[i].mapper_seconds;
    const double fps = double(i + 1) / total;
    EXPECT_NEAR(rows[i].cumulative_fps, fps, 0.01 * fps) << i;
    EXPECT_GT(rows[i].peak_rss_bytes, 0);
  }
  EXPECT_NEAR(r.fps, rows.back().cumulative_fps, 0.01 * r.fps);
}

TEST(Pipeline, OdometryOnlyWritesTrajectoryOnly) {
  RunConfig c = base_config("icp_odometry", "pipe_odo");
  c.dataset.last_frame = 20;
  c.pipeline.odometry_only = true;
  const RunArtifacts r = run_pipeline(c);
  EXPECT_TRUE(fs::exists(r.trajectory));
  EXPECT_FALSE(r.mesh);
  EXPECT_FALSE(r.renders_dir);
  EXPECT_FALSE(fs::exists(c.output_dir / artifact::kMesh));
  EXPECT_EQ(r.render_pairs, 0);
  EXPECT_TRUE(r.integrated_keyframes.empty());
  EXPECT_EQ(read_tum_trajectory(r.trajectory).size(), 20u);
  EXPECT_EQ(count_files(r.monitor_dir, "depth_"), 2);  // live depth without a map
}

TEST(Pipeline, StageFailureNamesFrame) {
  const fs::path copy = test::temp_dir("pipe_broken_seq");
  fs::copy(sequence(), copy, fs::copy_options::recursive);
  RunConfig c = base_config("gt_tsdf", "pipe_broken");
  c.dataset.root = copy;
  c.dataset.last_frame = 20;
  const auto desc = open_dataset(c.dataset);
  // Frame 7 without any valid depth.
  write_png(desc.depth_paths[7], Image<std::uint16_t>(desc.raw_camera.width,
                                                      desc.raw_camera.height, 1, 0));
  for (SyncMode mode : {SyncMode::Lockstep, SyncMode::Pipelined}) {
    c.pipeline.sync = mode;
    try {
      run_pipeline(c);
      FAIL() << "expected a stage error";
    } catch (const StageError& e) {
      EXPECT_EQ(e.stage(), "tracker");
      EXPECT_EQ(e.frame(), 7);
    }
  }
  // An unreadable frame surfaces the same way.
  std::ofstream(desc.color_paths[12], std::ios::binary) << "not an image";
  write_png(desc.depth_paths[7], Image<std::uint16_t>(desc.raw_camera.width,
                                                      desc.raw_camera.height, 1, 1000));
  try {
    run_pipeline(c);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.frame(), 12);
  }
}

}  // namespace
}  // namespace modslam
