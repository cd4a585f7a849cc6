#include "modslam/pipeline.hpp"

#include <sys/resource.h>

#include <atomic>
#include <cassert>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "modslam/errors.hpp"
#include "modslam/mesh.hpp"
#include "modslam/png_io.hpp"
#include "modslam/queues.hpp"
#include "modslam/trajectory_io.hpp"

namespace modslam {
namespace fs = std::filesystem;

double peak_rss_bytes() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) * 1024.0;  // Linux reports KiB
}

std::string render_color_name(long index) { return fmt::format("render_color_{:06d}.png", index); }
std::string render_depth_name(long index) { return fmt::format("render_depth_{:06d}.png", index); }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// First failure wins; later ones are consequences of the cancellation.
class FailureSlot {
 public:
  bool set(const std::string& stage, long frame, const std::string& what) {
    std::lock_guard lock(m_);
    if (error_) return false;
    error_.emplace(stage, frame, what);
    return true;
  }
  std::optional<StageError> get() const {
    std::lock_guard lock(m_);
    return error_;
  }

 private:
  mutable std::mutex m_;
  std::optional<StageError> error_;
};

/// Mapper-to-tracker acknowledgement used in lockstep mode.
class Handshake {
 public:
  void ack(long index) {
    {
      std::lock_guard lock(m_);
      processed_ = index;
    }
    cv_.notify_all();
  }
  /// False when cancelled before the mapper reached index.
  bool wait(long index) {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return cancelled_ || processed_ >= index; });
    return processed_ >= index;
  }
  void cancel() {
    {
      std::lock_guard lock(m_);
      cancelled_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  long processed_ = -1;
  bool cancelled_ = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_stats(const fs::path& path, const std::vector<FrameRecord>& frames) {
  std::string text = "# index\ttracker_s\tmapper_s\tcumulative_fps\tpeak_rss_bytes\n";
  double total = 0;
  for (const auto& f : frames) {
    total += f.tracker_seconds + f.mapper_seconds;
    const double fps = total > 0 ? static_cast<double>(f.index + 1) / total : 0.0;
    text += fmt::format("{}\t{:.9g}\t{:.9g}\t{:.9g}\t{:.0f}\n", f.index, f.tracker_seconds,
                        f.mapper_seconds, fps, f.peak_rss_bytes);
  }
  write_text(path, text);
}

void write_summary(const fs::path& path, const RunArtifacts& a, const ComponentGraph& g) {
  nlohmann::json j;
  j["algorithm"] = g.algorithm->name();
  j["sync"] = to_string(g.pipeline.sync);
  j["frames"] = a.frames.size();
  j["keyframes_integrated"] = a.integrated_keyframes.size();
  j["max_map_queue_depth"] = a.max_map_queue_depth;
  j["max_tracker_lead"] = a.max_tracker_lead;
  j["viz_written"] = a.viz_written;
  j["viz_dropped"] = a.viz_dropped;
  j["monitor_errors"] = a.monitor_errors;
  j["render_pairs"] = a.render_pairs;
  j["wall_seconds"] = a.wall_seconds;
  j["fps"] = a.fps;
  j["peak_rss_bytes"] = a.peak_rss_bytes;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace

RunArtifacts run_pipeline(ComponentGraph& graph, const RunConfig& config) {
  const DatasetDescriptor& desc = graph.dataset;
  const PipelineConfig& pc = graph.pipeline;
  Algorithm& alg = *graph.algorithm;
  const CameraModel& cam = desc.camera;
  const long n = desc.frame_count;
  const bool mapping = alg.has_mapper();
  const bool lockstep = pc.sync == SyncMode::Lockstep;

  RunArtifacts art;
  art.out_dir = config.output_dir;
  art.monitor_dir = art.out_dir / artifact::kMonitor;
  std::error_code ec;
  fs::create_directories(art.out_dir, ec);
  // Stale snapshots or renders from an earlier run would be mistaken for ours.
  fs::remove_all(art.monitor_dir, ec);
  fs::remove_all(art.out_dir / artifact::kRenders, ec);
  fs::create_directories(art.monitor_dir, ec);
  if (ec || !fs::is_directory(art.monitor_dir))
    throw IoError("cannot create output directory " + art.out_dir.string());

  art.frames.resize(static_cast<std::size_t>(n));  // fixed: workers index it concurrently
  BoundedQueue<FramePacket> map_queue(static_cast<std::size_t>(pc.queue_capacity));
  NewestWinsQueue<VizPacket> viz_queue(static_cast<std::size_t>(pc.queue_capacity));
  Handshake handshake;
  FailureSlot failure;
  std::atomic<bool> cancelled{false};
  std::atomic<long> max_lead{0};

  auto cancel_all = [&] {
    cancelled = true;
    map_queue.close();
    viz_queue.close();
    handshake.cancel();
    alg.cancel();
  };
  auto fail = [&](const std::string& stage, long frame, const std::string& what) {
    if (failure.set(stage, frame, what)) cancel_all();
  };

  const auto wall0 = Clock::now();

  std::thread tracker([&] {
    double tracker_total = 0;
    for (long i = 0; i < n && !cancelled; ++i) {
      FrameRecord& rec = art.frames[static_cast<std::size_t>(i)];
      Frame frame;
      try {
        frame = load_frame(desc, i);
      } catch (const std::exception& e) {
        fail("tracker", i, e.what());
        break;
      }
      FramePacket packet;
      try {
        const auto t0 = Clock::now();
        frame = alg.pre_process(std::move(frame));
        const Pose pose = alg.track(frame);
        packet.is_keyframe = alg.keyframe_policy(frame, pose);
        packet.tracker_time = seconds_since(t0);
        frame.est_pose = pose;
      } catch (const std::exception& e) {
        fail("tracker", i, e.what());
        break;
      }
      rec.index = i;
      rec.timestamp = frame.timestamp;
      rec.est_pose = *frame.est_pose;
      rec.gt_pose = frame.gt_pose;
      rec.tracker_seconds = packet.tracker_time;
      rec.keyframe = packet.is_keyframe;
      tracker_total += packet.tracker_time;

      const bool viz = i % pc.viz_interval == 0;
      ImageF live_color, live_depth;
      if (viz) {
        live_color = frame.color;
        if (!mapping) live_depth = frame.depth;
      }
      if (mapping) {
        packet.frame = std::move(frame);
        const std::size_t depth = map_queue.push(std::move(packet));
        if (depth == 0) break;  // cancelled
        // Queue indices are contiguous, so the depth after insertion is how
        // many frames the tracker runs ahead of the mapper.
        long prev = max_lead.load();
        while (static_cast<long>(depth) > prev &&
               !max_lead.compare_exchange_weak(prev, static_cast<long>(depth))) {
        }
        if (lockstep && !handshake.wait(i)) break;
      }
      rec.peak_rss_bytes = peak_rss_bytes();

      if (viz) {
        VizPacket vp;
        vp.index = i;
        vp.est_pose = rec.est_pose;
        vp.color = std::move(live_color);
        try {
          if (mapping) {
            if (auto r = alg.get_model_outputs(rec.est_pose, cam)) vp.model_depth = std::move(r->depth);
          } else {
            vp.model_depth = std::move(live_depth);
          }
        } catch (const std::exception& e) {
          fail("tracker", i, e.what());
          break;
        }
        // Mapper times are only final here in lockstep mode.
        double total = tracker_total;
        if (lockstep && mapping) {
          for (long k = 0; k <= i; ++k) total += art.frames[static_cast<std::size_t>(k)].mapper_seconds;
          vp.frame_seconds = rec.tracker_seconds + rec.mapper_seconds;
        } else {
          vp.frame_seconds = rec.tracker_seconds;
        }
        vp.cumulative_fps = total > 0 ? static_cast<double>(i + 1) / total : 0.0;
        viz_queue.push(std::move(vp));
      }
    }
    map_queue.close();
    viz_queue.close();
  });

  std::thread mapper;
  if (mapping) {
    mapper = std::thread([&] {
      [[maybe_unused]] long expected = 0;
      while (auto packet = map_queue.pop()) {
        if (cancelled) break;
        const long i = packet->frame.index;
        assert(i == expected && "map buffer must preserve frame order");
        expected = i + 1;
        FrameRecord& rec = art.frames[static_cast<std::size_t>(i)];
        try {
          const auto t0 = Clock::now();
          rec.integrated = alg.map_update(*packet);
          rec.mapper_seconds = seconds_since(t0);
        } catch (const std::exception& e) {
          fail("mapper", i, e.what());
          break;
        }
        handshake.ack(i);
      }
    });
  }

  std::size_t viz_written = 0, monitor_errors = 0;
  std::thread monitor([&] {
    const fs::path tsv = art.monitor_dir / "monitor.tsv";
    std::ofstream log(tsv);
    if (log) log << "# index\tframe_s\tcumulative_fps\tdropped\n";
    while (auto vp = viz_queue.pop()) {
      // Display failures never stop the run.
      try {
        write_png(art.monitor_dir / fmt::format("color_{:06d}.png", vp->index), to_rgb8(vp->color));
        if (!vp->model_depth.empty())
          write_png(art.monitor_dir / fmt::format("depth_{:06d}.png", vp->index),
                    to_depth16(vp->model_depth, cam.depth_scale));
        ++viz_written;
      } catch (const std::exception& e) {
        ++monitor_errors;
        std::cerr << "monitor: " << e.what() << "\n";
      }
      if (log)
        log << fmt::format("{}\t{:.9g}\t{:.9g}\t{}\n", vp->index, vp->frame_seconds,
                           vp->cumulative_fps, viz_queue.dropped());
    }
  });

  tracker.join();
  if (mapper.joinable()) mapper.join();
  monitor.join();
  art.wall_seconds = seconds_since(wall0);

  if (auto err = failure.get()) throw *err;

  art.max_map_queue_depth = map_queue.max_depth();
  art.max_tracker_lead = max_lead.load();
  art.viz_written = viz_written;
  art.viz_dropped = viz_queue.dropped();
  art.monitor_errors = monitor_errors;

  double total = 0;
  for (const auto& f : art.frames) {
    total += f.tracker_seconds + f.mapper_seconds;
    if (f.integrated) art.integrated_keyframes.push_back(f.index);
    art.peak_rss_bytes = std::max(art.peak_rss_bytes, f.peak_rss_bytes);
  }
  art.fps = total > 0 ? static_cast<double>(n) / total : 0.0;

  // Export.
  Trajectory est, gt;
  for (const auto& f : art.frames) {
    est.push_back(f.timestamp, f.est_pose);
    if (f.gt_pose) gt.push_back(f.timestamp, *f.gt_pose);
  }
  art.trajectory = art.out_dir / artifact::kTrajectory;
  write_tum_trajectory(art.trajectory, est);
  if (!gt.empty()) {
    art.gt_trajectory = art.out_dir / artifact::kGtTrajectory;
    write_tum_trajectory(*art.gt_trajectory, gt);
  }

  if (auto mesh = alg.post_process()) {
    art.mesh = art.out_dir / artifact::kMesh;
    write_ply(*mesh, *art.mesh);
  }

  if (mapping) {
    art.renders_dir = art.out_dir / artifact::kRenders;
    fs::create_directories(*art.renders_dir);
    for (long i = 0; i < n; i += pc.render_eval_interval) {
      const auto& f = art.frames[static_cast<std::size_t>(i)];
      auto r = alg.get_model_outputs(f.est_pose, cam);
      if (!r) break;
      write_png(*art.renders_dir / render_color_name(i), to_rgb8(r->color));
      write_png(*art.renders_dir / render_depth_name(i), to_depth16(r->depth, cam.depth_scale));
      ++art.render_pairs;
    }
  }

  art.stats = art.out_dir / artifact::kStats;
  write_stats(art.stats, art.frames);
  art.config = art.out_dir / artifact::kConfig;
  // Absolute paths keep the copy meaningful when read from the run directory.
  RunConfig resolved = config;
  resolved.dataset.root = fs::absolute(config.dataset.root).lexically_normal();
  resolved.output_dir = fs::absolute(config.output_dir).lexically_normal();
  write_text(art.config, serialize_config(resolved));
  art.summary = art.out_dir / artifact::kSummary;
  write_summary(art.summary, art, graph);
  return art;
}

RunArtifacts run_pipeline(const RunConfig& config) {
  ComponentGraph graph = instantiate(config);
  return run_pipeline(graph, config);
}

std::vector<StatsRow> read_stats(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<StatsRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    StatsRow r;
    if (!(ss >> r.index >> r.tracker_seconds >> r.mapper_seconds >> r.cumulative_fps >>
          r.peak_rss_bytes))
      throw IoError(fmt::format("{}:{}: malformed stats line", path.string(), lineno));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace modslam
