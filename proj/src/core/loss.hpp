#pragma once

#include "core/image.hpp"
#include "core/linalg.hpp"

namespace splatprint {

struct LossParts {
  double total = 0.0, l1 = 0.0, dssim = 0.0;
};

// (1 - lambda) * L1 + lambda * (1 - SSIM). L1 is the mean absolute error over
// all pixel-channels. SSIM uses the reference constants: 11x11 Gaussian
// window, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1, fully-interior
// windows, averaged over channels.
LossParts loss(const ImageBuffer& rendered, const ImageBuffer& gt, double lambda_ssim);

// Same value, optionally filling d(total)/d(rendered pixel).
LossParts loss_with_gradient(const ImageBuffer& rendered, const ImageBuffer& gt,
                             double lambda_ssim, ImageBuffer* grad_out);

// Mean SSIM over channels (exposed for tests and reports).
double ssim(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace splatprint
