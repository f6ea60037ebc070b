#pragma once

#include <vector>

#include "core/camera.hpp"
#include "core/gaussian.hpp"

namespace splatprint {

// Multi-view mask overlap of one gaussian's projected footprint.
struct VoteRecord {
  int gaussian = 0;
  std::vector<double> in_mask_fraction;  // one entry per view where visible
  std::vector<int> view_ids;
  int views_seen = 0;

  double min_fraction() const;
};

struct SegmentOpts {
  double theta_keep = 0.5;
  // Straddle interval is open: gaussians with theta_lo < min fraction <
  // theta_hi are decomposed. theta_hi defaults to theta_keep so a second pass
  // finds nothing left to split.
  double theta_lo = 0.2;
  double theta_hi = 0.5;
};

// Rasterizes each visible gaussian's 99% footprint ellipse at pixel centers
// and measures the in-mask fraction per view. Throws NoViews.
std::vector<VoteRecord> vote_labels(const GaussianCloud& cloud,
                                    const std::vector<CameraView>& views);

// Splits straddling gaussians in two along their longest principal axis
// (children at +-0.6 sigma, that axis halved), re-votes once, and drops
// children below theta_lo. Keep/drop of the rest is prune_background's job.
GaussianCloud decompose_boundary(const GaussianCloud& cloud,
                                 const std::vector<VoteRecord>& records,
                                 const std::vector<CameraView>& views, double theta_lo,
                                 double theta_hi);

// Keeps gaussians whose minimum observed in-mask fraction is >= theta_keep.
// Gaussians seen in no view count as background. Throws AllPruned.
GaussianCloud prune_background(const GaussianCloud& cloud,
                               const std::vector<VoteRecord>& records, double theta_keep);

// vote -> decompose -> re-vote -> prune.
GaussianCloud segment_pass(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                           const SegmentOpts& opts);

}  // namespace splatprint
