#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "core/errors.hpp"

namespace splatprint {

double registration_distance(const MinutiaPairSet& pairs) {
  require(!pairs.empty(), ErrorCode::EmptySet, "registration distance needs at least one pair");
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::hypot(p.x - p.gx, p.y - p.gy);
  return sum / static_cast<double>(pairs.size());
}

MinutiaPairSet register_and_project(const Pointmap& self_map_a, const CameraView& view_a,
                                    const CameraView& view_b, const Sim3Transform& b_from_a) {
  std::map<int, std::pair<double, double>> mated;
  for (const auto& m : view_b.minutiae_px) mated[m.id] = {m.x, m.y};

  MinutiaPairSet out;
  for (const auto& m : view_a.minutiae_px) {
    auto it = mated.find(m.id);
    if (it == mated.end()) continue;
    int px = static_cast<int>(m.x), py = static_cast<int>(m.y);
    if (px < 0 || py < 0 || px >= self_map_a.width || py >= self_map_a.height) continue;
    size_t idx = self_map_a.idx(px, py);
    if (!self_map_a.valid.bits[idx]) continue;
    Vec3 in_b = b_from_a.apply(self_map_a.points[idx]);
    if (in_b.z <= 1e-9) continue;
    auto [u, v] = project(view_b.intrinsics, in_b);
    out.push_back({m.id, u, v, it->second.first, it->second.second});
  }
  require(!out.empty(), ErrorCode::NoSharedMinutiae,
          "the two views share no liftable minutiae");
  return out;
}

double baseline_2d_similarity_distance(const CameraView& view_a, const CameraView& view_b) {
  std::map<int, std::pair<double, double>> mated;
  for (const auto& m : view_b.minutiae_px) mated[m.id] = {m.x, m.y};
  std::vector<std::pair<double, double>> src, dst;
  for (const auto& m : view_a.minutiae_px) {
    auto it = mated.find(m.id);
    if (it == mated.end()) continue;
    src.push_back({m.x, m.y});
    dst.push_back(it->second);
  }
  require(src.size() >= 2, ErrorCode::NoSharedMinutiae,
          "2D similarity baseline needs at least two shared minutiae");

  // 2D Umeyama via complex least squares: dst ~ s e^{i phi} src + t.
  const double n = static_cast<double>(src.size());
  double mx = 0, my = 0, gx = 0, gy = 0;
  for (size_t i = 0; i < src.size(); ++i) {
    mx += src[i].first;
    my += src[i].second;
    gx += dst[i].first;
    gy += dst[i].second;
  }
  mx /= n; my /= n; gx /= n; gy /= n;
  double cr = 0, ci = 0, var = 0;
  for (size_t i = 0; i < src.size(); ++i) {
    double ax = src[i].first - mx, ay = src[i].second - my;
    double bx = dst[i].first - gx, by = dst[i].second - gy;
    cr += ax * bx + ay * by;   // Re(conj(a) b)
    ci += ax * by - ay * bx;   // Im(conj(a) b)
    var += ax * ax + ay * ay;
  }
  require(var > 1e-12, ErrorCode::DegenerateCorrespondences,
          "2D baseline minutiae are coincident");
  double zr = cr / var, zi = ci / var;  // complex similarity coefficient

  double err = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    double ax = src[i].first - mx, ay = src[i].second - my;
    double px = zr * ax - zi * ay + gx;
    double py = zi * ax + zr * ay + gy;
    err += std::hypot(px - dst[i].first, py - dst[i].second);
  }
  return err / n;
}

double weighted_depth_error(const DepthPair& dp, bool scale_align) {
  require(dp.predicted.size() == dp.ground_truth.size() &&
              dp.predicted.size() == dp.valid.size() && dp.predicted.size() == dp.weights.size(),
          ErrorCode::DimensionMismatch, "depth pair arrays must share the grid");
  std::vector<std::pair<double, double>> ratios;  // (gt/pred, weight)
  double w_sum = 0.0;
  for (size_t i = 0; i < dp.predicted.size(); ++i) {
    if (!dp.valid[i] || dp.weights[i] <= 0.0) continue;
    w_sum += dp.weights[i];
    if (scale_align && dp.predicted[i] > 1e-12)
      ratios.push_back({dp.ground_truth[i] / dp.predicted[i], dp.weights[i]});
  }
  require(w_sum > 0.0, ErrorCode::EmptyOverlap, "no valid weighted depth pixels");

  double scale = 1.0;
  if (scale_align) {
    require(!ratios.empty(), ErrorCode::EmptyOverlap, "no positive predicted depths to align");
    std::sort(ratios.begin(), ratios.end());
    double total = 0.0;
    for (const auto& [r, w] : ratios) total += w;
    double acc = 0.0;
    for (const auto& [r, w] : ratios) {
      acc += w;
      if (acc >= 0.5 * total) { scale = r; break; }
    }
  }

  double err = 0.0;
  for (size_t i = 0; i < dp.predicted.size(); ++i) {
    if (!dp.valid[i] || dp.weights[i] <= 0.0) continue;
    err += dp.weights[i] * std::abs(scale * dp.predicted[i] - dp.ground_truth[i]);
  }
  return err / w_sum;
}

std::vector<Sim3Transform> novel_view_poses(const Sim3Transform& left,
                                            const Sim3Transform& center,
                                            const Sim3Transform& right, int n) {
  require(n >= 2, ErrorCode::InvalidCount, "need at least two interpolated poses");
  std::vector<Sim3Transform> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    double t = static_cast<double>(k) / (n - 1);
    const Sim3Transform& a = t < 0.5 ? left : center;
    const Sim3Transform& b = t < 0.5 ? center : right;
    double u = t < 0.5 ? 2.0 * t : 2.0 * t - 1.0;
    Rotation r = slerp(a.rotation, b.rotation, u);
    Vec3 pos = a.translation + u * (b.translation - a.translation);
    out.push_back(Sim3Transform::rigid(r, pos));
  }
  return out;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require(a.width == b.width && a.height == b.height, ErrorCode::DimensionMismatch,
          "image dimensions differ");
  double mse = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double psnr_masked(const ImageBuffer& a, const ImageBuffer& b, const BitMask& mask) {
  require(a.width == b.width && a.height == b.height && a.width == mask.width &&
              a.height == mask.height,
          ErrorCode::DimensionMismatch, "image dimensions differ");
  double mse = 0.0;
  size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (!mask.get(x, y)) continue;
      const double* pa = a.at(x, y);
      const double* pb = b.at(x, y);
      for (int c = 0; c < 3; ++c) {
        double d = pa[c] - pb[c];
        mse += d * d;
      }
      n += 3;
    }
  require(n > 0, ErrorCode::EmptyOverlap, "mask selects no pixels");
  mse /= static_cast<double>(n);
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

Sim3Transform fit_gauge(const std::vector<Sim3Transform>& reconstructed,
                        const std::vector<Sim3Transform>& ground_truth) {
  require(reconstructed.size() == ground_truth.size() && reconstructed.size() >= 2,
          ErrorCode::InvalidArgument, "gauge fitting needs matched pose lists (>= 2)");
  const size_t n = reconstructed.size();

  // Rotation: average the per-view offsets R_rec R_gt^-1 (sign-aligned).
  double qw = 0, qx = 0, qy = 0, qz = 0;
  for (size_t i = 0; i < n; ++i) {
    Rotation d = reconstructed[i].rotation * ground_truth[i].rotation.inverse();
    double sign = 1.0;
    if (i > 0 && (qw * d.w + qx * d.x + qy * d.y + qz * d.z) < 0.0) sign = -1.0;
    qw += sign * d.w; qx += sign * d.x; qy += sign * d.y; qz += sign * d.z;
  }
  Rotation r_g = Rotation::from_unnormalized(qw, qx, qy, qz);

  // Scale from the spread of camera centers about their centroid.
  Vec3 mu_rec{}, mu_gt{};
  for (size_t i = 0; i < n; ++i) {
    mu_rec += reconstructed[i].apply(Vec3{});
    mu_gt += ground_truth[i].apply(Vec3{});
  }
  mu_rec = mu_rec / static_cast<double>(n);
  mu_gt = mu_gt / static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += norm2(reconstructed[i].apply(Vec3{}) - mu_rec);
    den += norm2(ground_truth[i].apply(Vec3{}) - mu_gt);
  }
  require(den > 1e-12, ErrorCode::DegenerateCorrespondences,
          "ground-truth camera centers are coincident");
  double s = std::sqrt(num / den);
  require(s > 0.0 && std::isfinite(s), ErrorCode::DegenerateCorrespondences,
          "gauge scale is not positive");

  // c_rec = s (R_g c_gt + t_g)  =>  t_g = mu_rec / s - R_g mu_gt.
  Vec3 t_g = mu_rec / s - r_g.apply(mu_gt);
  return Sim3Transform(s, r_g, t_g);
}

std::vector<PoseError> pose_errors_after_gauge(const std::vector<Sim3Transform>& reconstructed,
                                               const std::vector<Sim3Transform>& ground_truth) {
  Sim3Transform g = fit_gauge(reconstructed, ground_truth);
  std::vector<PoseError> out;
  for (size_t i = 0; i < reconstructed.size(); ++i) {
    PoseError e;
    Rotation mapped = g.rotation * ground_truth[i].rotation;
    e.rotation_deg = rad_to_deg(rotation_angle_between(mapped, reconstructed[i].rotation));
    Vec3 c_mapped = g.apply(ground_truth[i].apply(Vec3{}));
    Vec3 c_rec = reconstructed[i].apply(Vec3{});
    e.translation_mm = norm(c_mapped - c_rec) / g.scale;
    out.push_back(e);
  }
  return out;
}

}  // namespace splatprint
