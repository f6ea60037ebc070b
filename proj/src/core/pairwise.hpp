#pragma once

#include <cstddef>
#include <vector>

#include "core/linalg.hpp"
#include "core/scene.hpp"

namespace splatprint {

// Result of the confidence-weighted Procrustes solve between two pointmaps.
// transform maps frame-1 coordinates into frame-2 coordinates.
struct PairAlignment {
  Sim3Transform transform;
  double weighted_residual = 0.0;  // sum_i w_i |sigma(R x_i + t) - y_i|^2 at the optimum
  double inlier_weight_sum = 0.0;
};

// Closed-form weighted Umeyama adapted to the sigma*(R x + t) convention.
// Throws DegenerateCorrespondences for < 3 weighted points or a weighted
// cross-covariance whose smallest singular value is < 1e-9 x the largest.
PairAlignment weighted_procrustes(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                                  const std::vector<double>& weights);

struct PixelCorrespondence {
  size_t index_1 = 0, index_2 = 0;
};

PairAlignment procrustes_align(const Pointmap& pm1, const Pointmap& pm2,
                               const std::vector<PixelCorrespondence>& correspondences);

// Aligns a view's self-frame pointmap against its cross-frame pointmap; the
// two share the pixel grid, so correspondences are per-pixel. Rows where
// either confidence is below tau_c are dropped.
PairAlignment align_views(const Pointmap& pm_self, const Pointmap& pm_cross, double tau_c = 0.5);

// Confidence-weighted focal recovery from a self-frame pointmap: weighted
// median of per-pixel closed-form estimates, then 10 IRLS refinement steps on
// the robust reprojection objective. Needs >= 100 usable pixels.
double recover_focal(const Pointmap& pm, double cx, double cy);

double eq1_objective(const Sim3Transform& t, const std::vector<Vec3>& src,
                     const std::vector<Vec3>& dst, const std::vector<double>& weights);

}  // namespace splatprint
