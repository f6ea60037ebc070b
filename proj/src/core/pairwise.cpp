#include "core/pairwise.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace splatprint {

double eq1_objective(const Sim3Transform& t, const std::vector<Vec3>& src,
                     const std::vector<Vec3>& dst, const std::vector<double>& weights) {
  double obj = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    obj += weights[i] * norm2(t.apply(src[i]) - dst[i]);
  }
  return obj;
}

PairAlignment weighted_procrustes(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                                  const std::vector<double>& weights) {
  require(src.size() == dst.size() && src.size() == weights.size(), ErrorCode::InvalidArgument,
          "correspondence arrays must have equal length");

  double w_sum = 0.0;
  size_t positive = 0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorCode::InvalidArgument,
            "weights must be finite and non-negative");
    if (w > 0.0) ++positive;
    w_sum += w;
  }
  require(positive >= 3 && w_sum > 0.0, ErrorCode::DegenerateCorrespondences,
          "need at least 3 positively weighted correspondences");

  Vec3 mu_src{}, mu_dst{};
  for (size_t i = 0; i < src.size(); ++i) {
    mu_src += weights[i] * src[i];
    mu_dst += weights[i] * dst[i];
  }
  mu_src = mu_src / w_sum;
  mu_dst = mu_dst / w_sum;

  // Weighted cross-covariance (target x source) and source variance.
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_src = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    if (weights[i] == 0.0) continue;
    Vec3 a = src[i] - mu_src;
    Vec3 b = dst[i] - mu_dst;
    Eigen::Vector3d ea(a.x, a.y, a.z), eb(b.x, b.y, b.z);
    cov += weights[i] * eb * ea.transpose();
    var_src += weights[i] * norm2(a);
  }
  cov /= w_sum;
  var_src /= w_sum;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sing = svd.singularValues();
  require(sing(0) > 0.0 && sing(2) >= 1e-9 * sing(0), ErrorCode::DegenerateCorrespondences,
          "correspondences are collinear or otherwise rank-deficient");

  Eigen::Vector3d flip(1.0, 1.0, 1.0);
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) flip(2) = -1.0;
  Eigen::Matrix3d r = svd.matrixU() * flip.asDiagonal() * svd.matrixV().transpose();

  double scale = (sing(0) * flip(0) + sing(1) * flip(1) + sing(2) * flip(2)) / var_src;
  require(std::isfinite(scale) && scale > 0.0, ErrorCode::DegenerateCorrespondences,
          "recovered scale is not positive");

  Mat3 rm;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rm(i, j) = r(i, j);
  Rotation rot = Rotation::from_matrix(rm);

  // Classical solution y = s R x + t'; our convention stores t = t'/s.
  Vec3 t_prime = mu_dst - scale * rot.apply(mu_src);
  PairAlignment out;
  out.transform = Sim3Transform(scale, rot, t_prime / scale);
  out.inlier_weight_sum = w_sum;
  out.weighted_residual = eq1_objective(out.transform, src, dst, weights);
  return out;
}

PairAlignment procrustes_align(const Pointmap& pm1, const Pointmap& pm2,
                               const std::vector<PixelCorrespondence>& correspondences) {
  std::vector<Vec3> src, dst;
  std::vector<double> weights;
  src.reserve(correspondences.size());
  dst.reserve(correspondences.size());
  weights.reserve(correspondences.size());
  for (const auto& c : correspondences) {
    require(c.index_1 < pm1.points.size() && c.index_2 < pm2.points.size(),
            ErrorCode::IndexOutOfRange, "correspondence index out of range");
    src.push_back(pm1.points[c.index_1]);
    dst.push_back(pm2.points[c.index_2]);
    weights.push_back(pm1.confidence[c.index_1] * pm2.confidence[c.index_2]);
  }
  return weighted_procrustes(src, dst, weights);
}

PairAlignment align_views(const Pointmap& pm_self, const Pointmap& pm_cross, double tau_c) {
  require(pm_self.width == pm_cross.width && pm_self.height == pm_cross.height,
          ErrorCode::DimensionMismatch, "pointmaps must share the pixel grid");
  std::vector<Vec3> src, dst;
  std::vector<double> weights;
  for (size_t i = 0; i < pm_self.points.size(); ++i) {
    if (!pm_self.valid.bits[i] || !pm_cross.valid.bits[i]) continue;
    double c1 = pm_self.confidence[i], c2 = pm_cross.confidence[i];
    if (c1 < tau_c || c2 < tau_c) continue;
    src.push_back(pm_self.points[i]);
    dst.push_back(pm_cross.points[i]);
    weights.push_back(c1 * c2);
  }
  return weighted_procrustes(src, dst, weights);
}

double recover_focal(const Pointmap& pm, double cx, double cy) {
  struct Sample {
    double f_estimate, weight;
    double au, av;  // pixel offset from the principal point
    double bu, bv;  // lateral direction x/z, y/z
  };
  std::vector<Sample> samples;
  samples.reserve(pm.points.size());
  for (int y = 0; y < pm.height; ++y) {
    for (int x = 0; x < pm.width; ++x) {
      size_t i = pm.idx(x, y);
      if (!pm.valid.bits[i] || pm.confidence[i] <= 0.0) continue;
      const Vec3& p = pm.points[i];
      if (p.z <= 1e-9) continue;
      double au = x + 0.5 - cx, av = y + 0.5 - cy;
      double bu = p.x / p.z, bv = p.y / p.z;
      double r_img = std::hypot(au, av);
      double r_lat = std::hypot(bu, bv);
      if (r_img < 1e-9 || r_lat < 1e-12) continue;
      samples.push_back({r_img / r_lat, pm.confidence[i], au, av, bu, bv});
    }
  }
  require(samples.size() >= 100, ErrorCode::DegeneratePointmap,
          "focal recovery needs at least 100 off-axis pixels with positive depth");

  // Weighted median of the closed-form per-pixel estimates.
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) { return a.f_estimate < b.f_estimate; });
  double w_total = 0.0;
  for (const auto& s : samples) w_total += s.weight;
  double acc = 0.0;
  double focal = samples.back().f_estimate;
  for (const auto& s : samples) {
    acc += s.weight;
    if (acc >= 0.5 * w_total) { focal = s.f_estimate; break; }
  }

  // IRLS on sum_i C_i |a_i - f b_i| (robust, un-squared).
  for (int iter = 0; iter < 10; ++iter) {
    double num = 0.0, den = 0.0;
    for (const auto& s : samples) {
      double ru = s.au - focal * s.bu, rv = s.av - focal * s.bv;
      double w = s.weight / std::max(std::hypot(ru, rv), 1e-9);
      num += w * (s.au * s.bu + s.av * s.bv);
      den += w * (s.bu * s.bu + s.bv * s.bv);
    }
    require(den > 1e-12, ErrorCode::DegeneratePointmap, "focal refinement is degenerate");
    focal = num / den;
  }
  require(std::isfinite(focal) && focal > 0.0, ErrorCode::DegeneratePointmap,
          "recovered focal length is not positive");
  return focal;
}

}  // namespace splatprint
