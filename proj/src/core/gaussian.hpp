#pragma once

#include <vector>

#include "core/global_align.hpp"
#include "core/linalg.hpp"

namespace splatprint {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Anisotropic 3D gaussian with base color only (no spherical harmonics).
// Opacity and color live in logit space so training stays unconstrained.
struct Gaussian3D {
  Vec3 mean;                 // mm
  Vec3 log_scales;           // per-axis std dev, log mm
  Rotation rotation;
  double opacity_logit = 0.0;
  Vec3 color_logits;

  Vec3 scales() const {
    return {std::exp(log_scales.x), std::exp(log_scales.y), std::exp(log_scales.z)};
  }
  double opacity() const { return sigmoid(opacity_logit); }
  Vec3 color() const {
    return {sigmoid(color_logits.x), sigmoid(color_logits.y), sigmoid(color_logits.z)};
  }
  // Sigma = R diag(s^2) R^T. Throws SingularCovariance below 1e-9 mm.
  Mat3 covariance() const;
};

// alpha * exp(-1/2 (p-x)^T Sigma^-1 (p-x))
double eval_gaussian(const Gaussian3D& g, const Vec3& p);

struct GaussianCloud {
  std::vector<Gaussian3D> gaussians;
  std::vector<int> source_ids;  // creation provenance (fused-point index or tag)

  size_t size() const { return gaussians.size(); }
};

struct CloudInitOpts {
  double opacity = 0.65;
  double scale_factor = 0.6;    // times the mean 3-NN distance
  double min_scale_mm = 0.05;
  double max_scale_mm = 2.0;
};

GaussianCloud init_cloud_from_points(const ColoredPointCloud& points,
                                     const CloudInitOpts& opts = {});

}  // namespace splatprint
