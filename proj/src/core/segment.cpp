#include "core/segment.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/rasterizer.hpp"

namespace splatprint {

namespace {

constexpr double kChi2_99 = 9.21034037;

// In-mask fraction of the 99% ellipse, counted at pixel centers. Pixels
// outside the image are ignored; a sub-pixel footprint falls back to the
// pixel containing the mean.
double footprint_fraction(const Splat2D& s, const BitMask& mask) {
  double half_tr = 0.5 * (s.a + s.c);
  double det = s.a * s.c - s.b * s.b;
  double lam_max = half_tr + std::sqrt(std::max(0.0, half_tr * half_tr - det));
  double r = std::sqrt(kChi2_99 * lam_max);
  int x0 = std::max(0, static_cast<int>(std::floor(s.mx - r)));
  int x1 = std::min(mask.width - 1, static_cast<int>(std::floor(s.mx + r)));
  int y0 = std::max(0, static_cast<int>(std::floor(s.my - r)));
  int y1 = std::min(mask.height - 1, static_cast<int>(std::floor(s.my + r)));
  long long inside = 0, total = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double dx = x + 0.5 - s.mx, dy = y + 0.5 - s.my;
      double q = s.la * dx * dx + 2.0 * s.lb * dx * dy + s.lc * dy * dy;
      if (q > kChi2_99) continue;
      ++total;
      if (mask.get(x, y)) ++inside;
    }
  }
  if (total == 0) {
    int px = static_cast<int>(s.mx), py = static_cast<int>(s.my);
    if (px < 0 || py < 0 || px >= mask.width || py >= mask.height) return 0.0;
    return mask.get(px, py) ? 1.0 : 0.0;
  }
  return static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace

double VoteRecord::min_fraction() const {
  double m = 1.0;
  for (double f : in_mask_fraction) m = std::min(m, f);
  return views_seen > 0 ? m : 0.0;
}

std::vector<VoteRecord> vote_labels(const GaussianCloud& cloud,
                                    const std::vector<CameraView>& views) {
  require(!views.empty(), ErrorCode::NoViews, "label voting needs at least one masked view");
  std::vector<VoteRecord> records;
  records.reserve(cloud.size());
  for (size_t g = 0; g < cloud.size(); ++g) {
    VoteRecord rec;
    rec.gaussian = static_cast<int>(g);
    for (size_t v = 0; v < views.size(); ++v) {
      auto splat =
          project_gaussian(cloud.gaussians[g], views[v].intrinsics, views[v].world_from_camera);
      if (!splat) continue;  // culled in this view
      rec.in_mask_fraction.push_back(footprint_fraction(*splat, views[v].mask));
      rec.view_ids.push_back(static_cast<int>(v));
      ++rec.views_seen;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

GaussianCloud decompose_boundary(const GaussianCloud& cloud,
                                 const std::vector<VoteRecord>& records,
                                 const std::vector<CameraView>& views, double theta_lo,
                                 double theta_hi) {
  require(theta_lo <= theta_hi, ErrorCode::InvalidArgument, "theta_lo must be <= theta_hi");
  require(records.size() == cloud.size(), ErrorCode::InvalidArgument,
          "one vote record per gaussian required");

  GaussianCloud out;
  GaussianCloud children;
  for (size_t g = 0; g < cloud.size(); ++g) {
    double f = records[g].min_fraction();
    bool straddles = records[g].views_seen > 0 && f > theta_lo && f < theta_hi;
    if (!straddles) {
      out.gaussians.push_back(cloud.gaussians[g]);
      out.source_ids.push_back(cloud.source_ids[g]);
      continue;
    }
    const Gaussian3D& gs = cloud.gaussians[g];
    Vec3 sc = gs.scales();
    int axis = sc.x >= sc.y && sc.x >= sc.z ? 0 : (sc.y >= sc.z ? 1 : 2);
    double s_axis = axis == 0 ? sc.x : (axis == 1 ? sc.y : sc.z);
    Vec3 dir = gs.rotation.matrix().col(axis);
    for (int k = 0; k < 2; ++k) {
      Gaussian3D child = gs;
      child.mean = gs.mean + (k == 0 ? 0.6 : -0.6) * s_axis * dir;
      double halved = std::log(0.5 * s_axis);
      if (axis == 0) child.log_scales.x = halved;
      if (axis == 1) child.log_scales.y = halved;
      if (axis == 2) child.log_scales.z = halved;
      children.gaussians.push_back(child);
      children.source_ids.push_back(cloud.source_ids[g]);
    }
  }
  if (children.gaussians.empty()) return out;

  // One re-vote round over the children; the low-overlap side is dropped.
  std::vector<VoteRecord> child_votes = vote_labels(children, views);
  for (size_t c = 0; c < children.gaussians.size(); ++c) {
    if (child_votes[c].views_seen > 0 && child_votes[c].min_fraction() < theta_lo) continue;
    out.gaussians.push_back(children.gaussians[c]);
    out.source_ids.push_back(children.source_ids[c]);
  }
  return out;
}

GaussianCloud prune_background(const GaussianCloud& cloud,
                               const std::vector<VoteRecord>& records, double theta_keep) {
  require(records.size() == cloud.size(), ErrorCode::InvalidArgument,
          "one vote record per gaussian required");
  GaussianCloud out;
  for (size_t g = 0; g < cloud.size(); ++g) {
    if (records[g].min_fraction() < theta_keep) continue;
    out.gaussians.push_back(cloud.gaussians[g]);
    out.source_ids.push_back(cloud.source_ids[g]);
  }
  require(!out.gaussians.empty(), ErrorCode::AllPruned,
          "label voting pruned every gaussian");
  return out;
}

GaussianCloud segment_pass(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                           const SegmentOpts& opts) {
  std::vector<VoteRecord> votes = vote_labels(cloud, views);
  GaussianCloud decomposed = decompose_boundary(cloud, votes, views, opts.theta_lo, opts.theta_hi);
  std::vector<VoteRecord> votes2 = vote_labels(decomposed, views);
  return prune_background(decomposed, votes2, opts.theta_keep);
}

}  // namespace splatprint
