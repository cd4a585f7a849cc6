#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "modslam/dataset.hpp"
#include "modslam/mesh.hpp"

namespace modslam {

// ---------------------------------------------------------------------------
// Trajectory accuracy

enum class AlignMode { None, SE3, Sim3 };
/// "none", "se3", "sim3".
std::string to_string(AlignMode m);
/// "None", "SE3", "Sim3".
std::string align_label(AlignMode m);
/// Case-insensitive. Throws ConfigError otherwise.
AlignMode parse_align_mode(const std::string& s);

struct PosePairs {
  std::vector<double> timestamps;  // of the ground-truth side
  std::vector<Vec3> gt, est;
};

/// Greedy nearest-timestamp pairing (the dataset association policy).
/// Throws DegenerateInput when fewer than 3 pairs fall within max_dt.
PosePairs associate_trajectories(const Trajectory& gt, const Trajectory& est, double max_dt);

/// p -> scale * R * p + t.
struct Similarity {
  double scale = 1;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 apply(const Vec3& p) const { return scale * (R * p) + t; }
};

/// Least-squares similarity (rigid when !with_scale) mapping src onto dst.
/// Throws InvalidArgument for mismatched or short lists and DegenerateInput
/// for coincident sources or a vanishing cross-covariance.
Similarity umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, bool with_scale);

/// Translational RMSE in centimeters after aligning est onto gt.
double ate_rmse(const std::vector<Vec3>& gt, const std::vector<Vec3>& est, AlignMode align);

// ---------------------------------------------------------------------------
// Rendering quality

struct PsnrResult {
  double db = 0;
  bool capped = false;  // MSE below 1e-10 reports 100 dB
};
inline constexpr double kPsnrCapDb = 100.0;

/// Throws InvalidArgument on a shape mismatch.
PsnrResult psnr(const ImageF& a, const ImageF& b);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5) and channels,
/// dynamic range 1. Throws InvalidArgument on a shape mismatch or a side
/// shorter than the window.
double ssim(const ImageF& a, const ImageF& b);

// ---------------------------------------------------------------------------
// Reconstruction quality

struct ReconParams {
  std::size_t samples = 200000;
  double tau_f = 0.05;  // meters
  double tau_c = 0.05;  // meters
  std::uint64_t seed = 0;
};

struct ReconMetrics {
  double accuracy_cm = 0;    // recon -> gt
  double completion_cm = 0;  // gt -> recon
  double completion_ratio_pct = 0;
  double precision_pct = 0;
  double recall_pct = 0;
  double f1_pct = 0;
};

/// Both meshes are sampled with the same seed. Throws InvalidArgument for an
/// empty mesh.
ReconMetrics reconstruction_metrics(const TriangleMesh& recon, const TriangleMesh& gt,
                                    const ReconParams& params);

/// Same statistics from precomputed nearest distances (meters).
ReconMetrics reconstruction_metrics_from_distances(const std::vector<double>& recon_to_gt,
                                                   const std::vector<double>& gt_to_recon,
                                                   double tau_f, double tau_c);

struct DepthL1Result {
  double cm = 0;
  int views_used = 0;
  int views_skipped = 0;  // no gt pose or no overlapping valid pixel
};

/// Mean |rendered - gt| depth over pixels valid in both, at every stride-th
/// frame's ground-truth pose. Throws DegenerateInput when no view overlaps.
DepthL1Result depth_l1(const TriangleMesh& recon, const DatasetDescriptor& desc, int stride);

// ---------------------------------------------------------------------------
// Report

struct MetricsReport {
  // trajectory
  std::optional<double> ate_rmse_cm;
  std::optional<int> ate_pairs;
  // rendering
  std::optional<double> psnr_db;
  std::optional<bool> psnr_capped;  // true when any view hit the cap
  std::optional<double> ssim;
  std::optional<int> render_views;
  // reconstruction
  std::optional<ReconMetrics> recon;
  std::optional<double> depth_l1_cm;
  // performance
  std::optional<double> fps;
  std::optional<double> peak_memory_bytes;
  // thresholds, sample counts, seeds, alignment mode
  nlohmann::json parameters = nlohmann::json::object();

  bool operator==(const MetricsReport&) const;
};

/// Stable schema: sections trajectory, rendering, reconstruction,
/// performance, parameters; absent values are null.
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
/// Throws IoError on write failure.
void write_report(const MetricsReport& r, const std::filesystem::path& path);
/// Throws IoError when unreadable or malformed.
MetricsReport read_report(const std::filesystem::path& path);

}  // namespace modslam
