#include "modslam/algorithms.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "modslam/errors.hpp"

namespace modslam {

// ---------------------------------------------------------------------------
// Keyframe policy

void KeyframePolicyParams::validate() const {
  if (every_n < 1) throw InvalidArgument("keyframe every_n must be >= 1");
  if (!(min_translation >= 0)) throw InvalidArgument("keyframe min_translation must be >= 0");
  if (!(min_rotation >= 0)) throw InvalidArgument("keyframe min_rotation must be >= 0");
}

std::string to_string(KeyframePolicyParams::Combine c) {
  switch (c) {
    case KeyframePolicyParams::Combine::EveryN: return "every_n";
    case KeyframePolicyParams::Combine::MotionThreshold: return "motion";
    case KeyframePolicyParams::Combine::Either: return "either";
  }
  return "?";
}

KeyframePolicyParams::Combine parse_keyframe_combine(const std::string& s) {
  using C = KeyframePolicyParams::Combine;
  for (C c : {C::EveryN, C::MotionThreshold, C::Either}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(
      fmt::format("unknown keyframe mode '{}' (expected every_n, motion or either)", s));
}

bool keyframe_decide(const KeyframePolicyParams& params, long index, const Pose& pose,
                     const std::optional<Pose>& last_kf_pose) {
  if (index == 0 || !last_kf_pose) return true;
  const bool cadence = index % params.every_n == 0;
  const Pose rel = last_kf_pose->inverse() * pose;
  const bool moved = rel.translation().norm() > params.min_translation ||
                     rel.axis_angle().norm() > params.min_rotation;
  switch (params.combine) {
    case KeyframePolicyParams::Combine::EveryN: return cadence;
    case KeyframePolicyParams::Combine::MotionThreshold: return moved;
    case KeyframePolicyParams::Combine::Either: return cadence || moved;
  }
  return false;
}

KeyframePolicy::KeyframePolicy(KeyframePolicyParams params) : params_(params) {
  params_.validate();
}

bool KeyframePolicy::decide(long index, const Pose& pose) {
  const bool kf = keyframe_decide(params_, index, pose, last_kf_);
  if (kf) last_kf_ = pose;
  return kf;
}

// ---------------------------------------------------------------------------
// Shared map

SharedMap::SharedMap(const TsdfParams& params)
    : params_(params), volume_(TsdfVolume::from_params(params)) {}

ModelRender SharedMap::render(const CameraModel& cam, const Pose& pose) const {
  std::shared_lock lock(rw_);
  return raycast_tsdf(volume_, cam, pose, params_.truncation);
}

void SharedMap::integrate(const ImageF& depth, const ImageF* color, const CameraModel& cam,
                          const Pose& pose) {
  {
    std::unique_lock lock(rw_);
    tsdf_integrate(volume_, depth, color, cam, pose, params_);
  }
  {
    std::lock_guard lock(count_mutex_);
    ++integrations_;
  }
  count_cv_.notify_all();
}

TriangleMesh SharedMap::extract_mesh() const {
  std::shared_lock lock(rw_);
  return marching_cubes(volume_);
}

long SharedMap::integrations() const {
  std::lock_guard lock(count_mutex_);
  return integrations_;
}

double SharedMap::weight_sum() const {
  std::shared_lock lock(rw_);
  return volume_.weight_sum();
}

std::uint64_t SharedMap::state_hash() const {
  std::shared_lock lock(rw_);
  return volume_.state_hash();
}

bool SharedMap::wait_for_integrations(long n) const {
  std::unique_lock lock(count_mutex_);
  count_cv_.wait(lock, [&] { return cancelled_ || integrations_ >= n; });
  return integrations_ >= n;
}

void SharedMap::cancel() {
  {
    std::lock_guard lock(count_mutex_);
    cancelled_ = true;
  }
  count_cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Trackers and mapper

Pose GtTracker::track(const Frame& frame) {
  if (!frame.gt_pose) {
    throw InvalidArgument(
        fmt::format("ground-truth mode requires poses (frame {} has none)", frame.index));
  }
  return *frame.gt_pose;
}

IcpTracker::IcpTracker(std::shared_ptr<const SharedMap> map, CameraModel cam, IcpParams params)
    : map_(std::move(map)), cam_(cam), params_(std::move(params)) {
  params_.validate();
}

Pose IcpTracker::track(const Frame& frame) {
  Pose pose = Pose::identity();
  if (prev1_) {
    // The first keyframe must be fused before there is a model to track.
    if (!map_->wait_for_integrations(1)) throw DivergenceError("cancelled while waiting for map");
    const Pose init = predict_constant_velocity(prev1_, prev2_);
    const ModelRender model = map_->render(cam_, init);
    const IcpResult r =
        icp_point_to_plane(IcpModel{model.depth, model.normals, init}, frame.depth, cam_, init,
                           params_);
    pose = r.pose;
    last_stats_ = r.stats;
  }
  prev2_ = prev1_;
  prev1_ = pose;
  return pose;
}

IcpOdometryTracker::IcpOdometryTracker(CameraModel cam, IcpParams params)
    : cam_(cam), params_(std::move(params)) {
  params_.validate();
}

Pose IcpOdometryTracker::track(const Frame& frame) {
  Pose pose = Pose::identity();
  if (prev1_) {
    const Pose init = predict_constant_velocity(prev1_, prev2_);
    const IcpResult r = icp_point_to_plane(IcpModel{prev_depth_, prev_normals_, *prev1_},
                                           frame.depth, cam_, init, params_);
    pose = r.pose;
    last_stats_ = r.stats;
  }
  prev_depth_ = frame.depth;
  prev_normals_ = estimate_normals(frame.depth, cam_);
  prev2_ = prev1_;
  prev1_ = pose;
  return pose;
}

TsdfMapper::TsdfMapper(std::shared_ptr<SharedMap> map, CameraModel cam)
    : map_(std::move(map)), cam_(cam) {}

bool TsdfMapper::map_update(const FramePacket& packet) {
  if (!packet.frame.est_pose) {
    throw InvalidArgument(fmt::format("frame {} reached the mapper without a pose",
                                      packet.frame.index));
  }
  if (!packet.is_keyframe) return false;
  const ImageF* color = packet.frame.color.empty() ? nullptr : &packet.frame.color;
  map_->integrate(packet.frame.depth, color, cam_, *packet.frame.est_pose);
  return true;
}

TriangleMesh TsdfMapper::post_process() const { return map_->extract_mesh(); }

ModelRender TsdfMapper::get_model_outputs(const Pose& pose, const CameraModel& cam) const {
  return map_->render(cam, pose);
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

const std::vector<std::string> kAlgorithmKeys = {
    "name",
    "voxel_size",
    "truncation",
    "max_weight",
    "volume_origin",
    "volume_extents",
    "keyframe_mode",
    "keyframe_every_n",
    "keyframe_min_translation",
    "keyframe_min_rotation",
    "icp_pyramid_levels",
    "icp_max_iters",
    "icp_dist_reject",
    "icp_normal_reject",
    "icp_convergence_eps",
    "icp_min_correspondences",
};

std::vector<double> to_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

AlgorithmParams parse_algorithm_params(const ParamTable& table) {
  const ParamReader r(table, "algorithm");
  r.reject_unknown(kAlgorithmKeys);
  AlgorithmParams p;
  p.tsdf.voxel_size = r.number("voxel_size", p.tsdf.voxel_size);
  p.tsdf.truncation = r.number("truncation", 4 * p.tsdf.voxel_size);
  p.tsdf.max_weight = r.number("max_weight", p.tsdf.max_weight);
  if (r.has("volume_origin") != r.has("volume_extents")) {
    throw ConfigError("algorithm.volume_origin and algorithm.volume_extents go together");
  }
  p.volume_explicit = r.has("volume_origin");
  p.tsdf.origin = r.vec3("volume_origin", p.tsdf.origin);
  p.tsdf.extents = r.vec3("volume_extents", p.tsdf.extents);

  p.keyframe.combine = parse_keyframe_combine(r.string("keyframe_mode", "every_n"));
  p.keyframe.every_n = static_cast<int>(r.integer("keyframe_every_n", p.keyframe.every_n));
  p.keyframe.min_translation = r.number("keyframe_min_translation", p.keyframe.min_translation);
  p.keyframe.min_rotation = r.number("keyframe_min_rotation", p.keyframe.min_rotation);

  p.icp.pyramid_levels = static_cast<int>(r.integer("icp_pyramid_levels", p.icp.pyramid_levels));
  if (r.has("icp_max_iters")) {
    p.icp.max_iters.clear();
    for (double v : r.numbers("icp_max_iters", {})) {
      if (v != std::floor(v)) throw ConfigError("algorithm.icp_max_iters: expected integers");
      p.icp.max_iters.push_back(static_cast<int>(v));
    }
  } else if (p.icp.pyramid_levels != static_cast<int>(p.icp.max_iters.size())) {
    p.icp.max_iters.resize(std::max(p.icp.pyramid_levels, 0), p.icp.max_iters.back());
  }
  p.icp.dist_reject = r.number("icp_dist_reject", p.icp.dist_reject);
  p.icp.normal_reject = r.number("icp_normal_reject", p.icp.normal_reject);
  p.icp.convergence_eps = r.number("icp_convergence_eps", p.icp.convergence_eps);
  p.icp.min_correspondences =
      static_cast<int>(r.integer("icp_min_correspondences", p.icp.min_correspondences));

  try {
    p.tsdf.validate();
    p.keyframe.validate();
    p.icp.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(fmt::format("algorithm: {}", e.what()));
  }
  return p;
}

ParamTable algorithm_params_table(const AlgorithmParams& p) {
  ParamTable t;
  t["voxel_size"] = p.tsdf.voxel_size;
  t["truncation"] = p.tsdf.truncation;
  t["max_weight"] = p.tsdf.max_weight;
  if (p.volume_explicit) {
    t["volume_origin"] = std::vector<double>{p.tsdf.origin.x(), p.tsdf.origin.y(), p.tsdf.origin.z()};
    t["volume_extents"] =
        std::vector<double>{p.tsdf.extents.x(), p.tsdf.extents.y(), p.tsdf.extents.z()};
  }
  t["keyframe_mode"] = to_string(p.keyframe.combine);
  t["keyframe_every_n"] = std::int64_t{p.keyframe.every_n};
  t["keyframe_min_translation"] = p.keyframe.min_translation;
  t["keyframe_min_rotation"] = p.keyframe.min_rotation;
  t["icp_pyramid_levels"] = std::int64_t{p.icp.pyramid_levels};
  t["icp_max_iters"] = to_doubles(p.icp.max_iters);
  t["icp_dist_reject"] = p.icp.dist_reject;
  t["icp_normal_reject"] = p.icp.normal_reject;
  t["icp_convergence_eps"] = p.icp.convergence_eps;
  t["icp_min_correspondences"] = std::int64_t{p.icp.min_correspondences};
  return t;
}

std::vector<std::string> registered_algorithms() { return {"gt_tsdf", "icp_tsdf", "icp_odometry"}; }

// ---------------------------------------------------------------------------
// Algorithm

Algorithm::Algorithm(std::string name, std::unique_ptr<Tracker> tracker,
                     std::shared_ptr<SharedMap> map, std::unique_ptr<TsdfMapper> mapper,
                     KeyframePolicyParams keyframe)
    : name_(std::move(name)),
      tracker_(std::move(tracker)),
      map_(std::move(map)),
      mapper_(std::move(mapper)),
      keyframe_(keyframe) {}

Frame Algorithm::pre_process(Frame frame) const {
  const auto& d = frame.depth.data();
  if (std::none_of(d.begin(), d.end(), [](float v) { return v > 0; })) {
    throw InvalidArgument(fmt::format("no valid depth in frame {}", frame.index));
  }
  return frame;
}

bool Algorithm::keyframe_policy(const Frame& frame, const Pose& pose) {
  return keyframe_.decide(frame.index, pose);
}

bool Algorithm::map_update(const FramePacket& packet) {
  return mapper_ ? mapper_->map_update(packet) : false;
}

std::optional<TriangleMesh> Algorithm::post_process() const {
  if (!mapper_) return std::nullopt;
  return mapper_->post_process();
}

std::optional<ModelRender> Algorithm::get_model_outputs(const Pose& pose,
                                                        const CameraModel& cam) const {
  if (!mapper_) return std::nullopt;
  return mapper_->get_model_outputs(pose, cam);
}

void Algorithm::cancel() {
  if (map_) map_->cancel();
}

std::pair<Vec3, Vec3> default_volume(const DatasetDescriptor& desc, bool anchored_at_first_camera) {
  const std::optional<Pose> first =
      desc.gt_poses.empty() ? std::nullopt : desc.gt_poses.front();
  if (desc.scene && (first || !anchored_at_first_camera)) {
    constexpr double kMargin = 0.1;
    const Eigen::AlignedBox3d room = desc.scene->bounds();
    const Pose to_world = anchored_at_first_camera ? first->inverse() : Pose::identity();
    Eigen::AlignedBox3d box;
    for (int c = 0; c < 8; ++c) {
      box.extend(to_world.apply(room.corner(static_cast<Eigen::AlignedBox3d::CornerType>(c))));
    }
    const Vec3 lo = box.min() - Vec3::Constant(kMargin);
    return {lo, box.max() + Vec3::Constant(kMargin) - lo};
  }
  constexpr double kHalf = 2.0;
  const Vec3 centre = (!anchored_at_first_camera && first) ? first->translation() : Vec3::Zero();
  return {centre - Vec3::Constant(kHalf), Vec3::Constant(2 * kHalf)};
}

std::unique_ptr<Algorithm> make_algorithm(const std::string& name, const AlgorithmParams& params,
                                          const DatasetDescriptor& desc,
                                          const AlgorithmOptions& options) {
  const auto names = registered_algorithms();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError(fmt::format("unknown algorithm '{}' (registered: {})", name,
                                  fmt::join(names, ", ")));
  }
  const bool icp = !options.use_gt_pose && name != "gt_tsdf";
  if (icp && name == "icp_tsdf" && options.odometry_only) {
    throw ConfigError(
        "icp_tsdf tracks against the map and cannot run odometry_only; use icp_odometry");
  }

  std::shared_ptr<SharedMap> map;
  std::unique_ptr<TsdfMapper> mapper;
  if (!options.odometry_only) {
    TsdfParams tsdf = params.tsdf;
    if (!params.volume_explicit) {
      std::tie(tsdf.origin, tsdf.extents) = default_volume(desc, icp);
    }
    map = std::make_shared<SharedMap>(tsdf);
    mapper = std::make_unique<TsdfMapper>(map, desc.camera);
  }

  std::unique_ptr<Tracker> tracker;
  if (!icp) {
    tracker = std::make_unique<GtTracker>();
  } else if (name == "icp_tsdf") {
    tracker = std::make_unique<IcpTracker>(map, desc.camera, params.icp);
  } else {
    tracker = std::make_unique<IcpOdometryTracker>(desc.camera, params.icp);
  }
  return std::make_unique<Algorithm>(name, std::move(tracker), std::move(map), std::move(mapper),
                                     params.keyframe);
}

}  // namespace modslam
