#include "core/loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "core/errors.hpp"

namespace splatprint {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& window() {
  static const std::array<double, kWin> w = [] {
    std::array<double, kWin> out{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
      double d = i - (kWin - 1) / 2.0;
      out[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
  }();
  return w;
}

using Plane = std::vector<double>;

// Correlation with fully-interior windows: (W x H) -> (W-10 x H-10).
Plane corr_valid(const Plane& in, int w, int h) {
  const auto& g = window();
  const int vw = w - kWin + 1, vh = h - kWin + 1;
  Plane tmp(static_cast<size_t>(vw) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWin; ++i) s += g[i] * in[static_cast<size_t>(y) * w + x + i];
      tmp[static_cast<size_t>(y) * vw + x] = s;
    }
  Plane out(static_cast<size_t>(vw) * vh, 0.0);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int j = 0; j < kWin; ++j) s += g[j] * tmp[static_cast<size_t>(y + j) * vw + x];
      out[static_cast<size_t>(y) * vw + x] = s;
    }
  return out;
}

// Adjoint of corr_valid: scatters a valid-grid field back onto the image.
Plane scatter_full(const Plane& field, int w, int h) {
  const auto& g = window();
  const int vw = w - kWin + 1, vh = h - kWin + 1;
  Plane tmp(static_cast<size_t>(vw) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    int p0 = std::max(0, y - kWin + 1), p1 = std::min(vh - 1, y);
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int py = p0; py <= p1; ++py)
        s += g[y - py] * field[static_cast<size_t>(py) * vw + x];
      tmp[static_cast<size_t>(y) * vw + x] = s;
    }
  }
  Plane out(static_cast<size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int p0 = std::max(0, x - kWin + 1), p1 = std::min(vw - 1, x);
      double s = 0.0;
      for (int px = p0; px <= p1; ++px)
        s += g[x - px] * tmp[static_cast<size_t>(y) * vw + px];
      out[static_cast<size_t>(y) * w + x] = s;
    }
  }
  return out;
}

Plane channel(const ImageBuffer& img, int ch) {
  Plane out(static_cast<size_t>(img.width) * img.height);
  for (size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[3 * i + ch];
  return out;
}

Plane hadamard(const Plane& a, const Plane& b) {
  Plane out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

LossParts loss_with_gradient(const ImageBuffer& rendered, const ImageBuffer& gt,
                             double lambda_ssim, ImageBuffer* grad_out) {
  require(rendered.width == gt.width && rendered.height == gt.height,
          ErrorCode::DimensionMismatch, "image dimensions differ");
  require(lambda_ssim >= 0.0 && lambda_ssim <= 1.0, ErrorCode::InvalidArgument,
          "lambda_ssim must be in [0, 1]");
  const int w = rendered.width, h = rendered.height;
  const size_t n = rendered.pixels.size();

  LossParts parts;
  for (size_t i = 0; i < n; ++i) parts.l1 += std::abs(gt.pixels[i] - rendered.pixels[i]);
  parts.l1 /= static_cast<double>(n);

  if (grad_out) {
    *grad_out = ImageBuffer(w, h);
    double coef = (1.0 - lambda_ssim) / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      double d = rendered.pixels[i] - gt.pixels[i];
      grad_out->pixels[i] = d > 0.0 ? coef : (d < 0.0 ? -coef : 0.0);
    }
  }

  // D-SSIM is reported whenever the image fits the window, even at lambda 0.
  const bool ssim_possible = w >= kWin && h >= kWin;
  require(ssim_possible || lambda_ssim == 0.0, ErrorCode::InvalidArgument,
          "image smaller than the SSIM window");
  const bool want_ssim_grad = grad_out != nullptr && lambda_ssim > 0.0;
  if (ssim_possible) {
    const int vw = w - kWin + 1, vh = h - kWin + 1;
    const size_t np = static_cast<size_t>(vw) * vh;
    double ssim_sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      Plane x = channel(gt, ch), y = channel(rendered, ch);
      Plane mu_x = corr_valid(x, w, h), mu_y = corr_valid(y, w, h);
      Plane xx = corr_valid(hadamard(x, x), w, h);
      Plane yy = corr_valid(hadamard(y, y), w, h);
      Plane xy = corr_valid(hadamard(x, y), w, h);

      Plane f1, f2, f3;  // dS/dmu_y, dS/dsigma_y2, dS/dsigma_xy per position
      if (want_ssim_grad) {
        f1.assign(np, 0.0);
        f2.assign(np, 0.0);
        f3.assign(np, 0.0);
      }
      double ch_sum = 0.0;
      for (size_t p = 0; p < np; ++p) {
        double sx2 = xx[p] - mu_x[p] * mu_x[p];
        double sy2 = yy[p] - mu_y[p] * mu_y[p];
        double sxy = xy[p] - mu_x[p] * mu_y[p];
        double a1 = 2.0 * mu_x[p] * mu_y[p] + kC1;
        double a2 = 2.0 * sxy + kC2;
        double b1 = mu_x[p] * mu_x[p] + mu_y[p] * mu_y[p] + kC1;
        double b2 = sx2 + sy2 + kC2;
        double s = (a1 * a2) / (b1 * b2);
        ch_sum += s;
        if (want_ssim_grad) {
          f1[p] = (2.0 * mu_x[p] * a2) / (b1 * b2) - s * 2.0 * mu_y[p] / b1;
          f2[p] = -s / b2;
          f3[p] = 2.0 * a1 / (b1 * b2);
        }
      }
      ssim_sum += ch_sum / static_cast<double>(np);

      if (want_ssim_grad) {
        // dSSIM/dy_j = sum_p w(p-j) [F1 + 2 (y_j - mu_y) F2 + (x_j - mu_x) F3].
        Plane s1 = scatter_full(f1, w, h);
        Plane s2 = scatter_full(f2, w, h);
        Plane s2m = scatter_full(hadamard(f2, mu_y), w, h);
        Plane s3 = scatter_full(f3, w, h);
        Plane s3m = scatter_full(hadamard(f3, mu_x), w, h);
        // total = (1-l) L1 + l (1 - SSIM); SSIM averages 3 channels x np.
        double coef = -lambda_ssim / (3.0 * static_cast<double>(np));
        for (size_t j = 0; j < static_cast<size_t>(w) * h; ++j) {
          double dssim_dy =
              s1[j] + 2.0 * (y[j] * s2[j] - s2m[j]) + (x[j] * s3[j] - s3m[j]);
          grad_out->pixels[3 * j + ch] += coef * dssim_dy;
        }
      }
    }
    parts.dssim = 1.0 - ssim_sum / 3.0;
  }

  parts.total = (1.0 - lambda_ssim) * parts.l1 + lambda_ssim * parts.dssim;
  require(std::isfinite(parts.total), ErrorCode::NonFiniteLoss, "loss is not finite");
  return parts;
}

LossParts loss(const ImageBuffer& rendered, const ImageBuffer& gt, double lambda_ssim) {
  return loss_with_gradient(rendered, gt, lambda_ssim, nullptr);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  LossParts p = loss_with_gradient(b, a, 1.0, nullptr);
  return 1.0 - p.dssim;
}

}  // namespace splatprint
