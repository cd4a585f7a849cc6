#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "modslam/dataset.hpp"
#include "modslam/icp.hpp"
#include "modslam/param_table.hpp"
#include "modslam/tsdf.hpp"

namespace modslam {

// ---------------------------------------------------------------------------
// Keyframe policy

struct KeyframePolicyParams {
  enum class Combine { EveryN, MotionThreshold, Either };
  int every_n = 5;
  double min_translation = 0.05;  // meters
  double min_rotation = 0.087;    // radians
  Combine combine = Combine::EveryN;

  /// Throws InvalidArgument unless every_n >= 1 and thresholds are >= 0.
  void validate() const;
};

std::string to_string(KeyframePolicyParams::Combine c);
/// Accepts "every_n", "motion", "either". Throws ConfigError otherwise.
KeyframePolicyParams::Combine parse_keyframe_combine(const std::string& s);

/// Pure decision. Frame 0, or any frame when there is no previous keyframe,
/// is a keyframe.
bool keyframe_decide(const KeyframePolicyParams& params, long index, const Pose& pose,
                     const std::optional<Pose>& last_kf_pose);

/// keyframe_decide plus the last-keyframe state it needs.
class KeyframePolicy {
 public:
  explicit KeyframePolicy(KeyframePolicyParams params);
  bool decide(long index, const Pose& pose);
  const KeyframePolicyParams& params() const { return params_; }

 private:
  KeyframePolicyParams params_;
  std::optional<Pose> last_kf_;
};

// ---------------------------------------------------------------------------
// Shared map

/// TSDF volume shared by tracker and mapper. Rendering takes a shared lock,
/// integration an exclusive one.
class SharedMap {
 public:
  explicit SharedMap(const TsdfParams& params);

  ModelRender render(const CameraModel& cam, const Pose& pose) const;
  void integrate(const ImageF& depth, const ImageF* color, const CameraModel& cam,
                 const Pose& pose);
  TriangleMesh extract_mesh() const;

  long integrations() const;
  double weight_sum() const;
  std::uint64_t state_hash() const;
  const TsdfParams& params() const { return params_; }

  /// Blocks until at least n integrations happened. Returns false when
  /// cancelled first.
  bool wait_for_integrations(long n) const;
  void cancel();

 private:
  TsdfParams params_;
  TsdfVolume volume_;
  mutable std::shared_mutex rw_;
  mutable std::mutex count_mutex_;
  mutable std::condition_variable count_cv_;
  long integrations_ = 0;
  bool cancelled_ = false;
};

// ---------------------------------------------------------------------------
// Trackers and mapper

/// Tracker output handed to the mapper.
struct FramePacket {
  Frame frame;  // est_pose set
  double tracker_time = 0;
  bool is_keyframe = false;
};

class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual std::string name() const = 0;
  /// Estimated camera-to-world pose. Frames arrive in index order. Never
  /// mutates the map.
  virtual Pose track(const Frame& frame) = 0;
};

/// Returns the frame's ground-truth pose unchanged.
class GtTracker : public Tracker {
 public:
  std::string name() const override { return "gt"; }
  Pose track(const Frame& frame) override;
};

/// Frame-to-model point-to-plane ICP against a raycast of the shared map at
/// the constant-velocity prediction. The first frame defines the world.
class IcpTracker : public Tracker {
 public:
  IcpTracker(std::shared_ptr<const SharedMap> map, CameraModel cam, IcpParams params);
  std::string name() const override { return "icp"; }
  Pose track(const Frame& frame) override;
  const IcpStats& last_stats() const { return last_stats_; }

 private:
  std::shared_ptr<const SharedMap> map_;
  CameraModel cam_;
  IcpParams params_;
  std::optional<Pose> prev1_, prev2_;
  IcpStats last_stats_;
};

/// Frame-to-frame point-to-plane ICP against the previous depth image.
class IcpOdometryTracker : public Tracker {
 public:
  IcpOdometryTracker(CameraModel cam, IcpParams params);
  std::string name() const override { return "icp_odometry"; }
  Pose track(const Frame& frame) override;
  const IcpStats& last_stats() const { return last_stats_; }

 private:
  CameraModel cam_;
  IcpParams params_;
  std::optional<Pose> prev1_, prev2_;
  ImageF prev_depth_, prev_normals_;
  IcpStats last_stats_;
};

/// Integrates keyframes into the shared map; other packets are acknowledged
/// without touching it.
class TsdfMapper {
 public:
  TsdfMapper(std::shared_ptr<SharedMap> map, CameraModel cam);
  /// Returns whether the packet was integrated.
  bool map_update(const FramePacket& packet);
  TriangleMesh post_process() const;
  ModelRender get_model_outputs(const Pose& pose, const CameraModel& cam) const;
  const SharedMap& map() const { return *map_; }

 private:
  std::shared_ptr<SharedMap> map_;
  CameraModel cam_;
};

// ---------------------------------------------------------------------------
// Algorithm contract and registry

struct AlgorithmParams {
  TsdfParams tsdf;
  bool volume_explicit = false;  // origin/extents given rather than derived
  IcpParams icp;
  KeyframePolicyParams keyframe;
};

/// Reads `algorithm.*` parameters. Throws ConfigError for unknown keys, type
/// mismatches and values failing validation.
AlgorithmParams parse_algorithm_params(const ParamTable& table);
/// Inverse of parse_algorithm_params for the keys it understands.
ParamTable algorithm_params_table(const AlgorithmParams& params);

/// Registered names: "gt_tsdf", "icp_tsdf", "icp_odometry".
std::vector<std::string> registered_algorithms();

/// One tracker plus an optional mapper sharing one map.
class Algorithm {
 public:
  Algorithm(std::string name, std::unique_ptr<Tracker> tracker, std::shared_ptr<SharedMap> map,
            std::unique_ptr<TsdfMapper> mapper, KeyframePolicyParams keyframe);

  const std::string& name() const { return name_; }
  bool has_mapper() const { return mapper_ != nullptr; }
  Tracker& tracker() { return *tracker_; }
  /// Null in odometry-only mode.
  const SharedMap* map() const { return map_.get(); }

  /// Throws InvalidArgument "no valid depth" when no pixel has depth.
  Frame pre_process(Frame frame) const;
  Pose track(const Frame& frame) { return tracker_->track(frame); }
  bool keyframe_policy(const Frame& frame, const Pose& pose);
  /// Returns whether the packet was integrated; a no-op without a mapper.
  bool map_update(const FramePacket& packet);
  /// Final mesh; nullopt without a mapper.
  std::optional<TriangleMesh> post_process() const;
  /// Raycast of the map; nullopt without a mapper.
  std::optional<ModelRender> get_model_outputs(const Pose& pose, const CameraModel& cam) const;
  /// Wakes a tracker blocked on the map.
  void cancel();

 private:
  std::string name_;
  std::unique_ptr<Tracker> tracker_;
  std::shared_ptr<SharedMap> map_;
  std::unique_ptr<TsdfMapper> mapper_;
  KeyframePolicy keyframe_;
};

struct AlgorithmOptions {
  bool odometry_only = false;
  bool use_gt_pose = false;
};

/// Volume bounds used when none are configured. With scene metadata: the
/// room bounds plus a 0.1 m margin, expressed in the world of the tracker
/// (the first camera for ICP). Otherwise a 4 m cube centred on the first
/// camera.
std::pair<Vec3, Vec3> default_volume(const DatasetDescriptor& desc, bool anchored_at_first_camera);

/// Throws ConfigError for an unregistered name (listing the registered
/// ones) and for frame-to-model tracking without a map.
std::unique_ptr<Algorithm> make_algorithm(const std::string& name, const AlgorithmParams& params,
                                          const DatasetDescriptor& desc,
                                          const AlgorithmOptions& options);

}  // namespace modslam
