#include "modslam/evaluation.hpp"

#include <fmt/format.h>

#include <Eigen/SVD>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "modslam/bvh.hpp"
#include "modslam/errors.hpp"
#include "modslam/kdtree.hpp"

namespace modslam {

// ---------------------------------------------------------------------------
// Trajectory accuracy

std::string to_string(AlignMode m) {
  switch (m) {
    case AlignMode::None: return "none";
    case AlignMode::SE3: return "se3";
    case AlignMode::Sim3: return "sim3";
  }
  return "?";
}

std::string align_label(AlignMode m) {
  switch (m) {
    case AlignMode::None: return "None";
    case AlignMode::SE3: return "SE3";
    case AlignMode::Sim3: return "Sim3";
  }
  return "?";
}

AlignMode parse_align_mode(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (AlignMode m : {AlignMode::None, AlignMode::SE3, AlignMode::Sim3}) {
    if (to_string(m) == lower) return m;
  }
  throw ConfigError(fmt::format("unknown alignment '{}' (expected none, se3 or sim3)", s));
}

PosePairs associate_trajectories(const Trajectory& gt, const Trajectory& est, double max_dt) {
  std::vector<double> tg, te;
  for (const auto& s : gt.samples()) tg.push_back(s.timestamp);
  for (const auto& s : est.samples()) te.push_back(s.timestamp);
  PosePairs out;
  for (const auto& [i, j] : greedy_associate(tg, te, max_dt)) {
    out.timestamps.push_back(tg[i]);
    out.gt.push_back(gt[i].pose.translation());
    out.est.push_back(est[j].pose.translation());
  }
  if (out.gt.size() < 3) {
    throw DegenerateInput(fmt::format(
        "only {} trajectory poses associate within {} s (need 3)", out.gt.size(), max_dt));
  }
  return out;
}

Similarity umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, bool with_scale) {
  if (src.size() != dst.size()) {
    throw InvalidArgument(
        fmt::format("umeyama needs paired points, got {} and {}", src.size(), dst.size()));
  }
  if (src.size() < 3) throw InvalidArgument("umeyama needs at least 3 point pairs");
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  double var_s = 0, scale_ref = 0;
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_s, b = dst[i] - mu_d;
    var_s += a.squaredNorm();
    scale_ref = std::max({scale_ref, src[i].norm(), dst[i].norm()});
    cov += b * a.transpose();
  }
  var_s /= n;
  cov /= n;
  const double eps = 1e-24 * std::max(1.0, scale_ref * scale_ref);
  if (var_s <= eps) throw DegenerateInput("umeyama: source points are coincident");

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (d[0] <= eps) throw DegenerateInput("umeyama: cross-covariance has rank 0");
  Vec3 sign = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) sign[2] = -1;

  Similarity s;
  s.R = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  s.scale = with_scale ? d.dot(sign) / var_s : 1.0;
  s.t = mu_d - s.scale * (s.R * mu_s);
  return s;
}

double ate_rmse(const std::vector<Vec3>& gt, const std::vector<Vec3>& est, AlignMode align) {
  if (gt.size() != est.size() || gt.empty()) {
    throw InvalidArgument(fmt::format("ATE needs paired positions, got {} and {}", gt.size(),
                                      est.size()));
  }
  // Identical sets: the identity is optimal, and skipping the SVD keeps ATE exactly 0.
  if (gt == est) return 0.0;
  Similarity s;
  if (align != AlignMode::None) s = umeyama(est, gt, align == AlignMode::Sim3);
  double sum = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += (gt[i] - s.apply(est[i])).squaredNorm();
  return 100.0 * std::sqrt(sum / static_cast<double>(gt.size()));
}

// ---------------------------------------------------------------------------
// Rendering quality

namespace {

void require_same_shape(const ImageF& a, const ImageF& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(fmt::format("{}: image shapes differ ({}x{}x{} vs {}x{}x{})", what,
                                      a.width(), a.height(), a.channels(), b.width(), b.height(),
                                      b.channels()));
  }
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    w[i] = std::exp(-x * x / (2 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-region filter of a W x H plane into (W-10) x (H-10).
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                 const std::array<double, kSsimWindow>& k) {
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(std::size_t(ow) * h), out(std::size_t(ow) * oh);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in[std::size_t(y) * w + x + i];
      tmp[std::size_t(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[std::size_t(y + i) * ow + x];
      out[std::size_t(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

PsnrResult psnr(const ImageF& a, const ImageF& b) {
  require_same_shape(a, b, "psnr");
  if (a.data().empty()) throw InvalidArgument("psnr: empty images");
  double sum = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = double(a.data()[i]) - double(b.data()[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data().size());
  if (mse < 1e-10) return {kPsnrCapDb, true};
  return {std::min(10.0 * std::log10(1.0 / mse), kPsnrCapDb), false};
}

double ssim(const ImageF& a, const ImageF& b) {
  require_same_shape(a, b, "ssim");
  const int w = a.width(), h = a.height();
  if (w < kSsimWindow || h < kSsimWindow) {
    throw InvalidArgument(fmt::format("ssim: {}x{} image is smaller than the {}x{} window", w, h,
                                      kSsimWindow, kSsimWindow));
  }
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const auto k = gaussian_window();
  const std::size_t n = std::size_t(w) * h;
  double total = 0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const std::size_t i = std::size_t(py) * w + px;
        x[i] = a(px, py, c);
        y[i] = b(px, py, c);
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
    const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k),
               sxy = filter_valid(xy, w, h, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      total += ((2 * mx[i] * my[i] + C1) * (2 * cxy + C2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
    }
    count += mx.size();
  }
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Reconstruction quality

ReconMetrics reconstruction_metrics_from_distances(const std::vector<double>& recon_to_gt,
                                                   const std::vector<double>& gt_to_recon,
                                                   double tau_f, double tau_c) {
  if (recon_to_gt.empty() || gt_to_recon.empty()) {
    throw InvalidArgument("reconstruction metrics need samples on both meshes");
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double d : v) s += d;
    return s / static_cast<double>(v.size());
  };
  auto pct_below = [](const std::vector<double>& v, double tau) {
    const auto k = std::count_if(v.begin(), v.end(), [&](double d) { return d < tau; });
    return 100.0 * static_cast<double>(k) / static_cast<double>(v.size());
  };
  ReconMetrics m;
  m.accuracy_cm = 100.0 * mean(recon_to_gt);
  m.completion_cm = 100.0 * mean(gt_to_recon);
  m.completion_ratio_pct = pct_below(gt_to_recon, tau_c);
  m.precision_pct = pct_below(recon_to_gt, tau_f);
  m.recall_pct = pct_below(gt_to_recon, tau_f);
  const double pr = m.precision_pct + m.recall_pct;
  m.f1_pct = pr > 0 ? 2 * m.precision_pct * m.recall_pct / pr : 0.0;
  return m;
}

ReconMetrics reconstruction_metrics(const TriangleMesh& recon, const TriangleMesh& gt,
                                    const ReconParams& params) {
  if (recon.empty()) throw InvalidArgument("reconstructed mesh is empty");
  if (gt.empty()) throw InvalidArgument("reference mesh is empty");
  if (params.samples == 0) throw InvalidArgument("reconstruction metrics need samples > 0");
  const PointCloud r = sample_points(recon, params.samples, params.seed);
  const PointCloud g = sample_points(gt, params.samples, params.seed);
  return reconstruction_metrics_from_distances(nearest_distances(r, g), nearest_distances(g, r),
                                               params.tau_f, params.tau_c);
}

DepthL1Result depth_l1(const TriangleMesh& recon, const DatasetDescriptor& desc, int stride) {
  if (stride < 1) throw InvalidArgument("depth-L1 stride must be >= 1");
  if (recon.empty()) throw InvalidArgument("reconstructed mesh is empty");
  const Bvh bvh(recon);
  DepthL1Result r;
  double sum = 0;
  std::size_t pixels = 0;
  for (long i = 0; i < desc.frame_count; i += stride) {
    const auto& pose = desc.gt_poses[static_cast<std::size_t>(i)];
    if (!pose) {
      ++r.views_skipped;
      continue;
    }
    const ImageF gt = load_frame(desc, i).depth;
    const ImageF rendered = raycast_mesh_depth(bvh, desc.camera, *pose);
    std::size_t used = 0;
    for (std::size_t k = 0; k < gt.data().size(); ++k) {
      const float a = gt.data()[k], b = rendered.data()[k];
      if (a > 0 && b > 0) {
        sum += std::abs(double(a) - double(b));
        ++used;
      }
    }
    if (used == 0) {
      ++r.views_skipped;
    } else {
      ++r.views_used;
      pixels += used;
    }
  }
  if (r.views_used == 0) throw DegenerateInput("depth-L1: no view overlaps the reconstruction");
  r.cm = 100.0 * sum / static_cast<double>(pixels);
  return r;
}

// ---------------------------------------------------------------------------
// Report

namespace {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& section, const char* key) {
  if (!section.contains(key) || section.at(key).is_null()) return std::nullopt;
  return section.at(key).get<T>();
}

const char* kReconKeys[] = {"accuracy_cm",   "completion_cm", "completion_ratio_pct",
                            "precision_pct", "recall_pct",    "f1_pct"};

}  // namespace

json report_to_json(const MetricsReport& r) {
  json j;
  j["trajectory"] = {{"ate_rmse_cm", opt(r.ate_rmse_cm)}, {"pairs", opt(r.ate_pairs)}};
  j["rendering"] = {{"psnr_db", opt(r.psnr_db)},
                    {"psnr_capped", opt(r.psnr_capped)},
                    {"ssim", opt(r.ssim)},
                    {"views", opt(r.render_views)}};
  json rec;
  const double* vals[] = {nullptr, nullptr, nullptr, nullptr, nullptr, nullptr};
  if (r.recon) {
    vals[0] = &r.recon->accuracy_cm;
    vals[1] = &r.recon->completion_cm;
    vals[2] = &r.recon->completion_ratio_pct;
    vals[3] = &r.recon->precision_pct;
    vals[4] = &r.recon->recall_pct;
    vals[5] = &r.recon->f1_pct;
  }
  for (int i = 0; i < 6; ++i) rec[kReconKeys[i]] = vals[i] ? json(*vals[i]) : json(nullptr);
  rec["depth_l1_cm"] = opt(r.depth_l1_cm);
  j["reconstruction"] = rec;
  j["performance"] = {{"fps", opt(r.fps)}, {"peak_memory_bytes", opt(r.peak_memory_bytes)}};
  j["parameters"] = r.parameters;
  return j;
}

MetricsReport report_from_json(const json& j) {
  for (const char* s : {"trajectory", "rendering", "reconstruction", "performance", "parameters"}) {
    if (!j.contains(s)) throw IoError(fmt::format("report is missing section '{}'", s));
  }
  MetricsReport r;
  const json& t = j.at("trajectory");
  r.ate_rmse_cm = get_opt<double>(t, "ate_rmse_cm");
  r.ate_pairs = get_opt<int>(t, "pairs");
  const json& v = j.at("rendering");
  r.psnr_db = get_opt<double>(v, "psnr_db");
  r.psnr_capped = get_opt<bool>(v, "psnr_capped");
  r.ssim = get_opt<double>(v, "ssim");
  r.render_views = get_opt<int>(v, "views");
  const json& rec = j.at("reconstruction");
  if (get_opt<double>(rec, "accuracy_cm")) {
    ReconMetrics m;
    double* slots[] = {&m.accuracy_cm,   &m.completion_cm, &m.completion_ratio_pct,
                       &m.precision_pct, &m.recall_pct,    &m.f1_pct};
    for (int i = 0; i < 6; ++i) *slots[i] = rec.at(kReconKeys[i]).get<double>();
    r.recon = m;
  }
  r.depth_l1_cm = get_opt<double>(rec, "depth_l1_cm");
  const json& p = j.at("performance");
  r.fps = get_opt<double>(p, "fps");
  r.peak_memory_bytes = get_opt<double>(p, "peak_memory_bytes");
  r.parameters = j.at("parameters");
  return r;
}

bool MetricsReport::operator==(const MetricsReport& o) const {
  return report_to_json(*this) == report_to_json(o);
}

void write_report(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << report_to_json(r).dump(2) << "\n";
  if (!out) throw IoError(fmt::format("cannot write report {}", path.string()));
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read report {}", path.string()));
  try {
    return report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw IoError(fmt::format("malformed report {}: {}", path.string(), e.what()));
  }
}

}  // namespace modslam
