#include "core/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/loss.hpp"
#include "core/parallel.hpp"

namespace splatprint {

namespace {

constexpr double kNearPlane = 0.1;       // mm
constexpr double kDilation = 0.3;        // px^2 isotropic
constexpr double kChi2_99 = 9.21034037;  // 2-dof 99% quantile
constexpr double kAlphaCap = 0.99;
constexpr double kMinTransmittance = 1e-4;
constexpr int kTile = 16;
// Binning keeps every pixel where alpha * weight could exceed ~1e-7, so the
// discrete footprint boundary contributes nothing measurable to gradients.
constexpr double kBinWeightFloor = 1e-7;

struct CameraFrame {
  Mat3 r_cw;       // camera-from-world rotation
  Vec3 t_cw;
  double f, cx, cy;
  int w, h;
};

CameraFrame make_frame(const CameraIntrinsics& intr, const Sim3Transform& wfc) {
  require(std::abs(wfc.scale - 1.0) < 1e-9, ErrorCode::InvalidArgument,
          "camera pose must be rigid");
  Sim3Transform cfw = wfc.inverse();
  return {cfw.rotation.matrix(), cfw.translation, intr.focal_px, intr.cx, intr.cy,
          intr.width, intr.height};
}

struct SplatGeom {
  Splat2D s;
  Vec3 p_cam;
  Mat3 sigma_cam;
  Mat3 sigma_world;
};

std::optional<SplatGeom> project_full(const Gaussian3D& g, const CameraFrame& cam) {
  SplatGeom out;
  out.p_cam = cam.r_cw * g.mean + cam.t_cw;
  const Vec3& p = out.p_cam;
  if (p.z <= kNearPlane) return std::nullopt;

  out.sigma_world = g.covariance();
  out.sigma_cam = cam.r_cw * out.sigma_world * cam.r_cw.transposed();

  double iz = 1.0 / p.z;
  double fiz = cam.f * iz;
  // J = [[f/z, 0, -f x/z^2], [0, f/z, -f y/z^2]]
  double j02 = -cam.f * p.x * iz * iz;
  double j12 = -cam.f * p.y * iz * iz;
  const Mat3& S = out.sigma_cam;
  // Sigma2D = J Sigma_cam J^T + dilation
  double a = fiz * (fiz * S(0, 0) + j02 * S(2, 0)) + j02 * (fiz * S(0, 2) + j02 * S(2, 2));
  double b = fiz * (fiz * S(0, 1) + j02 * S(2, 1)) + j12 * (fiz * S(0, 2) + j02 * S(2, 2));
  double c = fiz * (fiz * S(1, 1) + j12 * S(2, 1)) + j12 * (fiz * S(1, 2) + j12 * S(2, 2));
  a += kDilation;
  c += kDilation;

  double det = a * c - b * b;
  if (det <= 1e-12) return std::nullopt;  // numerically flat footprint

  Splat2D& s = out.s;
  s.mx = cam.f * p.x * iz + cam.cx;
  s.my = cam.f * p.y * iz + cam.cy;
  s.a = a;
  s.b = b;
  s.c = c;
  s.la = c / det;
  s.lb = -b / det;
  s.lc = a / det;
  s.depth = p.z;

  double half_tr = 0.5 * (a + c);
  double lam_max = half_tr + std::sqrt(std::max(0.0, half_tr * half_tr - det));
  double r99 = std::sqrt(kChi2_99 * lam_max);
  if (s.mx + r99 < 0.0 || s.mx - r99 > cam.w || s.my + r99 < 0.0 || s.my - r99 > cam.h)
    return std::nullopt;  // 99% footprint misses the image

  double alpha = g.opacity();
  double qmax = std::max(kChi2_99, 2.0 * std::log(std::max(alpha, 1e-6) / kBinWeightFloor));
  s.radius_px = std::sqrt(qmax * lam_max);
  return out;
}

struct TileBins {
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<int>> bins;  // splat indices per tile, depth-sorted
};

// Canonical composite order: depth, then the full parameter tuple, so the
// output is independent of the input permutation.
bool splat_less(const GaussianCloud& cloud, const std::vector<SplatGeom>& splats, int ia, int ib) {
  const Splat2D& a = splats[ia].s;
  const Splat2D& b = splats[ib].s;
  if (a.depth != b.depth) return a.depth < b.depth;
  const Gaussian3D& ga = cloud.gaussians[a.gaussian];
  const Gaussian3D& gb = cloud.gaussians[b.gaussian];
  auto tup = [](const Gaussian3D& g) {
    return std::make_tuple(g.mean.x, g.mean.y, g.mean.z, g.opacity_logit, g.color_logits.x,
                           g.color_logits.y, g.color_logits.z, g.log_scales.x, g.log_scales.y,
                           g.log_scales.z, g.rotation.w, g.rotation.x, g.rotation.y,
                           g.rotation.z);
  };
  return tup(ga) < tup(gb);
}

TileBins bin_splats(const GaussianCloud& cloud, const std::vector<SplatGeom>& splats,
                    int width, int height) {
  TileBins tb;
  tb.tiles_x = (width + kTile - 1) / kTile;
  tb.tiles_y = (height + kTile - 1) / kTile;
  tb.bins.assign(static_cast<size_t>(tb.tiles_x) * tb.tiles_y, {});
  for (size_t i = 0; i < splats.size(); ++i) {
    const Splat2D& s = splats[i].s;
    int x0 = std::max(0, static_cast<int>(std::floor((s.mx - s.radius_px) / kTile)));
    int x1 = std::min(tb.tiles_x - 1, static_cast<int>(std::floor((s.mx + s.radius_px) / kTile)));
    int y0 = std::max(0, static_cast<int>(std::floor((s.my - s.radius_px) / kTile)));
    int y1 = std::min(tb.tiles_y - 1, static_cast<int>(std::floor((s.my + s.radius_px) / kTile)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        tb.bins[static_cast<size_t>(ty) * tb.tiles_x + tx].push_back(static_cast<int>(i));
  }
  for (auto& bin : tb.bins)
    std::sort(bin.begin(), bin.end(),
              [&](int a, int b) { return splat_less(cloud, splats, a, b); });
  return tb;
}

struct Composited {
  int splat;
  double w, alpha_eff, t_before;
};

}  // namespace

void RenderGrads::resize(size_t n) {
  mean.assign(n, Vec3{});
  log_scales.assign(n, Vec3{});
  rotation.assign(n, Vec3{});
  opacity_logit.assign(n, 0.0);
  color_logits.assign(n, Vec3{});
  cam_omega = Vec3{};
  cam_delta = Vec3{};
  mean2d_norm.assign(n, 0.0);
  touched.assign(n, 0);
}

std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const CameraIntrinsics& intr,
                                        const Sim3Transform& world_from_camera) {
  auto geom = project_full(g, make_frame(intr, world_from_camera));
  if (!geom) return std::nullopt;
  return geom->s;
}

ImageBuffer render(const GaussianCloud& cloud, const CameraView& view, const Vec3& background) {
  const CameraFrame cam = make_frame(view.intrinsics, view.world_from_camera);
  ImageBuffer img(cam.w, cam.h, background.x, background.y, background.z);

  std::vector<SplatGeom> splats;
  splats.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    auto geom = project_full(cloud.gaussians[i], cam);
    if (!geom) continue;
    geom->s.gaussian = static_cast<int>(i);
    splats.push_back(*geom);
  }
  if (splats.empty()) return img;
  TileBins tb = bin_splats(cloud, splats, cam.w, cam.h);

  std::vector<Vec3> colors(splats.size());
  std::vector<double> alphas(splats.size());
  for (size_t i = 0; i < splats.size(); ++i) {
    colors[i] = cloud.gaussians[splats[i].s.gaussian].color();
    alphas[i] = cloud.gaussians[splats[i].s.gaussian].opacity();
  }

  parallel_for_chunks(tb.tiles_x * tb.tiles_y, [&](int tile) {
    int tx = tile % tb.tiles_x, ty = tile / tb.tiles_x;
    const auto& bin = tb.bins[tile];
    if (bin.empty()) return;
    int px0 = tx * kTile, py0 = ty * kTile;
    int px1 = std::min(px0 + kTile, cam.w), py1 = std::min(py0 + kTile, cam.h);
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        double t = 1.0;
        Vec3 c{};
        for (int si : bin) {
          const Splat2D& s = splats[si].s;
          double dx = px + 0.5 - s.mx, dy = py + 0.5 - s.my;
          double q = s.la * dx * dx + 2.0 * s.lb * dx * dy + s.lc * dy * dy;
          double w = std::exp(-0.5 * q);
          double ae = std::min(kAlphaCap, alphas[si] * w);
          c += colors[si] * (ae * t);
          t *= 1.0 - ae;
          if (t < kMinTransmittance) break;
        }
        c += background * t;
        double* out = img.at(px, py);
        out[0] = c.x;
        out[1] = c.y;
        out[2] = c.z;
      }
    }
  });
  return img;
}

LossParts render_backward(const GaussianCloud& cloud, const CameraView& view,
                          const ImageBuffer& gt, double lambda_ssim, const Vec3& background,
                          RenderGrads* grads, ImageBuffer* rendered_out) {
  const CameraFrame cam = make_frame(view.intrinsics, view.world_from_camera);
  require(gt.width == cam.w && gt.height == cam.h, ErrorCode::DimensionMismatch,
          "ground-truth image does not match the view");

  ImageBuffer img = render(cloud, view, background);
  ImageBuffer loss_grad(cam.w, cam.h);
  LossParts lb = loss_with_gradient(img, gt, lambda_ssim, grads ? &loss_grad : nullptr);
  if (rendered_out) *rendered_out = img;
  if (!grads) return lb;

  grads->resize(cloud.size());

  // Re-project (cheap) to rebuild the splat set the forward pass used.
  std::vector<SplatGeom> splats;
  splats.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    auto geom = project_full(cloud.gaussians[i], cam);
    if (!geom) continue;
    geom->s.gaussian = static_cast<int>(i);
    splats.push_back(*geom);
  }
  if (splats.empty()) return lb;
  TileBins tb = bin_splats(cloud, splats, cam.w, cam.h);

  std::vector<Vec3> colors(splats.size());
  std::vector<double> alphas(splats.size());
  for (size_t i = 0; i < splats.size(); ++i) {
    colors[i] = cloud.gaussians[splats[i].s.gaussian].color();
    alphas[i] = cloud.gaussians[splats[i].s.gaussian].opacity();
  }

  // Per-splat accumulators, written tile-by-tile. A splat can live in several
  // tiles; tiles are processed in fixed chunk order with per-tile partials
  // merged serially afterwards, keeping accumulation order deterministic.
  const int n_tiles = tb.tiles_x * tb.tiles_y;
  struct SplatAcc {
    Vec3 d_color{};
    double d_alpha = 0.0;
    Vec3 d_mean2d_from{};  // dL/d(mx,my) packed in x,y
    double d_la = 0.0, d_lb = 0.0, d_lc = 0.0;
    int touched = 0;
  };
  std::vector<std::vector<std::pair<int, SplatAcc>>> tile_partials(n_tiles);

  parallel_for_chunks(n_tiles, [&](int tile) {
    const auto& bin = tb.bins[tile];
    if (bin.empty()) return;
    std::vector<SplatAcc> acc(bin.size());
    std::vector<Composited> stack;
    stack.reserve(bin.size());
    int tx = tile % tb.tiles_x, ty = tile / tb.tiles_x;
    int px0 = tx * kTile, py0 = ty * kTile;
    int px1 = std::min(px0 + kTile, cam.w), py1 = std::min(py0 + kTile, cam.h);
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const double* gl = loss_grad.at(px, py);
        Vec3 dldc{gl[0], gl[1], gl[2]};
        // Forward replay to collect the composited chain.
        stack.clear();
        double t = 1.0;
        for (size_t k = 0; k < bin.size(); ++k) {
          const Splat2D& s = splats[bin[k]].s;
          double dx = px + 0.5 - s.mx, dy = py + 0.5 - s.my;
          double q = s.la * dx * dx + 2.0 * s.lb * dx * dy + s.lc * dy * dy;
          double w = std::exp(-0.5 * q);
          double ae = std::min(kAlphaCap, alphas[bin[k]] * w);
          stack.push_back({static_cast<int>(k), w, ae, t});
          t *= 1.0 - ae;
          if (t < kMinTransmittance) break;
        }
        // Reverse sweep with the suffix color sum.
        Vec3 suffix = background * t;
        for (size_t r = stack.size(); r-- > 0;) {
          const Composited& cp = stack[r];
          int k = cp.splat;
          const Splat2D& s = splats[bin[k]].s;
          SplatAcc& a = acc[k];
          ++a.touched;
          double at = cp.alpha_eff * cp.t_before;
          a.d_color += dldc * at;
          double g_ae = dot(dldc, colors[bin[k]] * cp.t_before - suffix / (1.0 - cp.alpha_eff));
          suffix += colors[bin[k]] * at;
          if (alphas[bin[k]] * cp.w >= kAlphaCap) continue;  // clamped: no flow
          double g_w = g_ae * alphas[bin[k]];
          a.d_alpha += g_ae * cp.w;
          double g_q = -0.5 * cp.w * g_w;
          double dx = px + 0.5 - s.mx, dy = py + 0.5 - s.my;
          // q = la dx^2 + 2 lb dx dy + lc dy^2 ; d = pixel - mean2d
          a.d_mean2d_from.x -= g_q * (2.0 * s.la * dx + 2.0 * s.lb * dy);
          a.d_mean2d_from.y -= g_q * (2.0 * s.lb * dx + 2.0 * s.lc * dy);
          a.d_la += g_q * dx * dx;
          a.d_lb += g_q * 2.0 * dx * dy;
          a.d_lc += g_q * dy * dy;
        }
      }
    }
    auto& out = tile_partials[tile];
    for (size_t k = 0; k < bin.size(); ++k)
      if (acc[k].touched > 0) out.emplace_back(bin[k], acc[k]);
  });

  // Merge tile partials (serial, fixed order), then chain through projection.
  std::vector<SplatAcc> total(splats.size());
  for (int tile = 0; tile < n_tiles; ++tile)
    for (const auto& [si, a] : tile_partials[tile]) {
      SplatAcc& t = total[si];
      t.d_color += a.d_color;
      t.d_alpha += a.d_alpha;
      t.d_mean2d_from += a.d_mean2d_from;
      t.d_la += a.d_la;
      t.d_lb += a.d_lb;
      t.d_lc += a.d_lc;
      t.touched += a.touched;
    }

  for (size_t si = 0; si < splats.size(); ++si) {
    const SplatAcc& acc = total[si];
    if (acc.touched == 0) continue;
    const SplatGeom& geom = splats[si];
    const Splat2D& s = geom.s;
    int gi = s.gaussian;
    const Gaussian3D& g = cloud.gaussians[gi];

    grads->touched[gi] += acc.touched;
    grads->mean2d_norm[gi] += norm(Vec3{acc.d_mean2d_from.x, acc.d_mean2d_from.y, 0.0});

    // Color and opacity logits through the logistic.
    Vec3 col = colors[si];
    grads->color_logits[gi] += Vec3{acc.d_color.x * col.x * (1.0 - col.x),
                                    acc.d_color.y * col.y * (1.0 - col.y),
                                    acc.d_color.z * col.z * (1.0 - col.z)};
    double alpha = alphas[si];
    grads->opacity_logit[gi] += acc.d_alpha * alpha * (1.0 - alpha);

    // Conic -> 2D covariance: dL/dSigma = -Lambda Ghat Lambda with
    // Ghat = [[g_la, g_lb/2], [g_lb/2, g_lc]].
    double ga_ = acc.d_la, gb_ = 0.5 * acc.d_lb, gc_ = acc.d_lc;
    double la = s.la, lb = s.lb, lc = s.lc;
    // M = -[ [la,lb],[lb,lc] ] * [ [ga_,gb_],[gb_,gc_] ] * [ [la,lb],[lb,lc] ]
    double m00 = -(la * (ga_ * la + gb_ * lb) + lb * (gb_ * la + gc_ * lb));
    double m01 = -(la * (ga_ * lb + gb_ * lc) + lb * (gb_ * lb + gc_ * lc));
    double m11 = -(lb * (ga_ * lb + gb_ * lc) + lc * (gb_ * lb + gc_ * lc));
    // Scalar grads on (a, b, c): dL = m00 da + 2 m01 db + m11 dc.

    // Sigma2D = J Sigma_cam J^T + dilation. Build J rows.
    const Vec3& p = geom.p_cam;
    double iz = 1.0 / p.z;
    double fiz = cam.f * iz;
    double j02 = -cam.f * p.x * iz * iz;
    double j12 = -cam.f * p.y * iz * iz;
    // dL/dSigma_cam = J^T M J with M = [[m00, m01],[m01, m11]].
    Vec3 j0{fiz, 0.0, j02}, j1{0.0, fiz, j12};
    Mat3 m_cam{};
    for (int r = 0; r < 3; ++r)
      for (int cidx = 0; cidx < 3; ++cidx) {
        double jr0 = (r == 0 ? j0.x : (r == 1 ? j0.y : j0.z));
        double jr1 = (r == 0 ? j1.x : (r == 1 ? j1.y : j1.z));
        double jc0 = (cidx == 0 ? j0.x : (cidx == 1 ? j0.y : j0.z));
        double jc1 = (cidx == 0 ? j1.x : (cidx == 1 ? j1.y : j1.z));
        m_cam(r, cidx) = jr0 * (m00 * jc0 + m01 * jc1) + jr1 * (m01 * jc0 + m11 * jc1);
      }

    // dL/dJ = 2 M J Sigma_cam (2x3), needed for the p_cam dependence of J.
    const Mat3& S = geom.sigma_cam;
    double jrow0[3] = {j0.x, j0.y, j0.z};
    double jrow1[3] = {j1.x, j1.y, j1.z};
    double mj[2][3];
    for (int cidx = 0; cidx < 3; ++cidx) {
      mj[0][cidx] = m00 * jrow0[cidx] + m01 * jrow1[cidx];
      mj[1][cidx] = m01 * jrow0[cidx] + m11 * jrow1[cidx];
    }
    double gJ[2][3];
    for (int r = 0; r < 2; ++r)
      for (int cidx = 0; cidx < 3; ++cidx) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += mj[r][k] * S(k, cidx);
        gJ[r][cidx] = 2.0 * v;
      }

    // mean2d = pi(p_cam): dL/dp_cam += J^T dL/dmean2d, plus J's own p_cam
    // dependence.
    Vec3 g_pcam{fiz * acc.d_mean2d_from.x, fiz * acc.d_mean2d_from.y,
                j02 * acc.d_mean2d_from.x + j12 * acc.d_mean2d_from.y};
    double fz2 = cam.f * iz * iz;
    g_pcam.x += gJ[0][2] * (-fz2);
    g_pcam.y += gJ[1][2] * (-fz2);
    g_pcam.z += -fz2 * (gJ[0][0] + gJ[1][1]) +
                2.0 * cam.f * iz * iz * iz * (p.x * gJ[0][2] + p.y * gJ[1][2]);

    // Camera rotation also moves Sigma_cam: dSigma_cam/domega_k =
    // -E_k Sigma_cam + Sigma_cam E_k.
    for (int k = 0; k < 3; ++k) {
      Vec3 e{k == 0 ? 1.0 : 0.0, k == 1 ? 1.0 : 0.0, k == 2 ? 1.0 : 0.0};
      Mat3 ek = Mat3::skew(e);
      Mat3 d_sigma = S * ek - ek * S;
      double v = frobenius_dot(m_cam, d_sigma);
      if (k == 0) grads->cam_omega.x += v;
      if (k == 1) grads->cam_omega.y += v;
      if (k == 2) grads->cam_omega.z += v;
    }
    // p_cam = R_cw p_w + t_cw: world mean and camera tangent.
    grads->mean[gi] += cam.r_cw.transposed() * g_pcam;
    grads->cam_omega += cross(g_pcam, p);
    grads->cam_delta -= g_pcam;

    // Sigma_cam -> world covariance -> scales and rotation tangent.
    Mat3 g_sw = cam.r_cw.transposed() * m_cam * cam.r_cw;
    Mat3 rot = g.rotation.matrix();
    Vec3 sc = g.scales();
    for (int k = 0; k < 3; ++k) {
      Vec3 rk = rot.col(k);
      double rgr = dot(rk, g_sw * rk);
      double sk = k == 0 ? sc.x : (k == 1 ? sc.y : sc.z);
      double v = 2.0 * sk * sk * rgr;
      if (k == 0) grads->log_scales[gi].x += v;
      if (k == 1) grads->log_scales[gi].y += v;
      if (k == 2) grads->log_scales[gi].z += v;
    }
    const Mat3& sw = geom.sigma_world;
    for (int k = 0; k < 3; ++k) {
      Vec3 e{k == 0 ? 1.0 : 0.0, k == 1 ? 1.0 : 0.0, k == 2 ? 1.0 : 0.0};
      Mat3 ek = Mat3::skew(e);
      Mat3 d_sigma = ek * sw - sw * ek;
      double v = frobenius_dot(g_sw, d_sigma);
      if (k == 0) grads->rotation[gi].x += v;
      if (k == 1) grads->rotation[gi].y += v;
      if (k == 2) grads->rotation[gi].z += v;
    }
  }
  return lb;
}

}  // namespace splatprint
