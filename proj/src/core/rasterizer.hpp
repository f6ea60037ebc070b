#pragma once

#include <optional>
#include <vector>

#include "core/camera.hpp"
#include "core/gaussian.hpp"
#include "core/image.hpp"
#include "core/loss.hpp"

namespace splatprint {

// 2D footprint of a projected gaussian. Covariance [[a,b],[b,c]] includes the
// 0.3 px^2 isotropic dilation; the conic is its inverse.
struct Splat2D {
  double mx = 0.0, my = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  double la = 0.0, lb = 0.0, lc = 0.0;
  double depth = 0.0;
  double radius_px = 0.0;  // binning extent (covers weights down to ~1e-7)
  int gaussian = -1;
};

// Projects one gaussian; nullopt when culled (behind the near plane at 0.1 mm
// or with its 99% footprint off-image). world_from_camera must be rigid.
std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const CameraIntrinsics& intr,
                                        const Sim3Transform& world_from_camera);

// Front-to-back alpha compositing over 16x16 tiles; per-pixel effective alpha
// is capped at 0.99 and compositing stops below transmittance 1e-4.
ImageBuffer render(const GaussianCloud& cloud, const CameraView& view, const Vec3& background);

struct RenderGrads {
  std::vector<Vec3> mean;
  std::vector<Vec3> log_scales;
  std::vector<Vec3> rotation;  // left tangent: R <- exp([w]) R
  std::vector<double> opacity_logit;
  std::vector<Vec3> color_logits;
  // Camera tangent: R_wc <- R_wc exp([omega]), center <- center + R_wc delta.
  Vec3 cam_omega, cam_delta;
  // Mean 2D-position gradient magnitude per gaussian (densification signal).
  std::vector<double> mean2d_norm;
  std::vector<int> touched;  // pixels composited per gaussian

  void resize(size_t n);
};

// Renders, evaluates (1-lambda) L1 + lambda (1 - SSIM) against gt, and
// backpropagates analytically into every gaussian parameter group and the
// camera pose tangent. Optionally returns the rendered image.
LossParts render_backward(const GaussianCloud& cloud, const CameraView& view,
                              const ImageBuffer& gt, double lambda_ssim, const Vec3& background,
                              RenderGrads* grads, ImageBuffer* rendered_out = nullptr);

}  // namespace splatprint
