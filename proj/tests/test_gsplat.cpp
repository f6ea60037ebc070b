#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/errors.hpp"
#include "core/gaussian.hpp"
#include "core/loss.hpp"
#include "core/metrics.hpp"
#include "core/rasterizer.hpp"
#include "core/train.hpp"

using namespace splatprint;

namespace {

CameraView plain_view(int size, double focal) {
  CameraView v;
  v.intrinsics = CameraIntrinsics(focal, size / 2.0, size / 2.0, size, size);
  v.world_from_camera = Sim3Transform::identity();  // camera frame == world
  return v;
}

Gaussian3D make_gaussian(Vec3 mean, Vec3 scales, Rotation rot, double opacity, Vec3 color) {
  Gaussian3D g;
  g.mean = mean;
  g.log_scales = {std::log(scales.x), std::log(scales.y), std::log(scales.z)};
  g.rotation = rot;
  g.opacity_logit = logit(opacity);
  g.color_logits = {logit(color.x), logit(color.y), logit(color.z)};
  return g;
}

// 3x3 inverse by cofactors: the independent quadratic-form oracle.
Mat3 cofactor_inverse(const Mat3& m) {
  Mat3 inv;
  inv(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  inv(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  inv(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  inv(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  inv(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  inv(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  inv(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  inv(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  inv(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double det = m(0, 0) * inv(0, 0) + m(0, 1) * inv(1, 0) + m(0, 2) * inv(2, 0);
  return inv * (1.0 / det);
}

ImageBuffer noise_image(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  ImageBuffer img(w, h);
  for (double& p : img.pixels) p = d(rng);
  return img;
}

// Scalar reference for the combined loss: direct nested loops, no shared
// machinery with the implementation.
double reference_l1(const ImageBuffer& rendered, const ImageBuffer& gt) {
  double s = 0.0;
  for (size_t i = 0; i < gt.pixels.size(); ++i) s += std::abs(gt.pixels[i] - rendered.pixels[i]);
  return s / static_cast<double>(gt.pixels.size());
}

double reference_ssim(const ImageBuffer& x_img, const ImageBuffer& y_img) {
  const int win = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double w[11][11], wsum = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      double di = i - 5.0, dj = j - 5.0;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      wsum += w[i][j];
    }
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) w[i][j] /= wsum;

  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    double ch_sum = 0.0;
    int count = 0;
    for (int py = 0; py + win <= x_img.height; ++py) {
      for (int px = 0; px + win <= x_img.width; ++px) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            double xv = x_img.at(px + j, py + i)[ch];
            double yv = y_img.at(px + j, py + i)[ch];
            mx += w[i][j] * xv;
            my += w[i][j] * yv;
            xx += w[i][j] * xv * xv;
            yy += w[i][j] * yv * yv;
            xy += w[i][j] * xv * yv;
          }
        double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
        ch_sum += ((2 * mx * my + c1) * (2 * sxy + c2)) /
                  ((mx * mx + my * my + c1) * (sx + sy + c2));
        ++count;
      }
    }
    total += ch_sum / count;
  }
  return total / 3.0;
}

// The 8-gaussian 32x32 gradient fixture: spread out, moderate opacity, away
// from clamp/termination/cull boundaries.
GaussianCloud gradient_fixture() {
  GaussianCloud cloud;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  int idx = 0;
  for (int gy = 0; gy < 3; ++gy) {
    for (int gx = 0; gx < 3; ++gx) {
      if (idx == 8) break;
      double x = (gx - 1) * 2.2 + jitter(rng);
      double y = (gy - 1) * 2.2 + jitter(rng);
      double z = 9.0 + 1.2 * idx * ((idx % 2) ? 1.0 : -0.4);
      Vec3 scales{0.5 + 0.12 * (idx % 3), 0.7 + 0.1 * (idx % 2), 0.45 + 0.07 * idx};
      Rotation rot = Rotation::from_axis_angle({0.3, 1.0, 0.2 + 0.1 * idx}, 0.25 * idx);
      double opacity = 0.35 + 0.06 * idx;  // max 0.77: never clamps at 0.99
      Vec3 color{0.2 + 0.09 * idx, 0.8 - 0.07 * idx, 0.35 + 0.05 * idx};
      cloud.gaussians.push_back(make_gaussian({x, y, z}, scales, rot, opacity, color));
      cloud.source_ids.push_back(idx);
      ++idx;
    }
  }
  return cloud;
}

double fixture_loss(const GaussianCloud& cloud, const CameraView& view, const ImageBuffer& gt,
                    double lambda) {
  return loss(render(cloud, view, Vec3{0.1, 0.1, 0.1}), gt, lambda).total;
}

}  // namespace

TEST_CASE("eval_gaussian closed forms and matrix oracle") {
  Gaussian3D g = make_gaussian({1, 2, 3}, {1, 1, 1}, Rotation::identity(), 0.8, {0.5, 0.5, 0.5});
  CHECK(eval_gaussian(g, {1, 2, 3}) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(eval_gaussian(g, {2, 2, 3}) == doctest::Approx(0.8 * std::exp(-0.5)).epsilon(1e-12));

  Gaussian3D a = make_gaussian({0.5, -1, 2}, {1, 2, 3},
                               Rotation::from_axis_angle({1, 0, 0}, deg_to_rad(30.0)), 0.7,
                               {0.5, 0.5, 0.5});
  Mat3 r = a.rotation.matrix();
  Mat3 sigma = r * Mat3::diag({1, 4, 9}) * r.transposed();
  Mat3 sigma_inv = cofactor_inverse(sigma);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    Vec3 p{d(rng), d(rng), d(rng)};
    Vec3 diff = p - a.mean;
    double q = dot(diff, sigma_inv * diff);
    double expected = 0.7 * std::exp(-0.5 * q);
    CHECK(eval_gaussian(a, p) == doctest::Approx(expected).epsilon(1e-12));
  }

  Gaussian3D tiny = a;
  tiny.log_scales = {-30.0, 0.0, 0.0};  // exp(-30) << 1e-9
  CHECK_THROWS_AS(eval_gaussian(tiny, {0, 0, 0}), Error);
}

TEST_CASE("gaussian rotation invariance of the quadratic form") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  Gaussian3D g = make_gaussian({0, 0, 0}, {0.5, 1.5, 2.5},
                               Rotation::from_axis_angle({1, 2, 3}, 0.8), 0.6, {0.5, 0.5, 0.5});
  for (int i = 0; i < 30; ++i) {
    Rotation rq = Rotation::from_axis_angle({d(rng), d(rng), 1.0 + std::abs(d(rng))}, d(rng));
    Vec3 p{d(rng), d(rng), d(rng)};
    Gaussian3D gr = g;
    gr.rotation = rq * g.rotation;
    CHECK(eval_gaussian(gr, rq.apply(p)) == doctest::Approx(eval_gaussian(g, p)).epsilon(1e-12));
  }
}

TEST_CASE("projection matches the pinhole scaling oracle on axis") {
  CameraView view = plain_view(640, 500.0);
  double s = 0.5, dist = 10.0;
  Gaussian3D g = make_gaussian({0, 0, dist}, {s, s, s}, Rotation::identity(), 0.9,
                               {0.5, 0.5, 0.5});
  auto splat = project_gaussian(g, view.intrinsics, view.world_from_camera);
  REQUIRE(splat.has_value());
  double expected = (500.0 * s / dist) * (500.0 * s / dist);
  CHECK(splat->a == doctest::Approx(expected).epsilon(0.01));
  CHECK(splat->c == doctest::Approx(expected).epsilon(0.01));
  CHECK(std::abs(splat->b) < 1e-9);
  CHECK(splat->mx == doctest::Approx(320.0).epsilon(1e-9));

  Gaussian3D behind = g;
  behind.mean = {0, 0, -5};
  CHECK(!project_gaussian(behind, view.intrinsics, view.world_from_camera).has_value());

  // Far off-image: the 99% footprint misses entirely.
  Gaussian3D off = g;
  off.mean = {100, 0, 10};
  CHECK(!project_gaussian(off, view.intrinsics, view.world_from_camera).has_value());

  // Image-corner gaussian with its footprint inside stays alive.
  Gaussian3D corner = g;
  corner.mean = {-5.9, -5.9, 10};  // near the 640px corner at f=500
  auto corner_splat = project_gaussian(corner, view.intrinsics, view.world_from_camera);
  CHECK(corner_splat.has_value());
}

TEST_CASE("empty cloud renders the background") {
  CameraView view = plain_view(64, 80.0);
  GaussianCloud empty;
  ImageBuffer img = render(empty, view, {0.2, 0.4, 0.6});
  for (int i = 0; i < 64 * 64; ++i) {
    CHECK(img.pixels[3 * i] == 0.2);
    CHECK(img.pixels[3 * i + 1] == 0.4);
    CHECK(img.pixels[3 * i + 2] == 0.6);
  }
}

TEST_CASE("single gaussian render matches the compositing formula") {
  CameraView view = plain_view(65, 90.0);  // principal point at a pixel center
  Gaussian3D g = make_gaussian({0, 0, 10}, {1.2, 1.2, 1.2}, Rotation::identity(), 0.9,
                               {0.9, 0.4, 0.2});
  GaussianCloud cloud;
  cloud.gaussians.push_back(g);
  cloud.source_ids.push_back(0);
  ImageBuffer img = render(cloud, view, Vec3{});

  auto splat = project_gaussian(g, view.intrinsics, view.world_from_camera);
  REQUIRE(splat.has_value());
  double alpha = g.opacity();
  Vec3 color = g.color();
  for (int x = 0; x < 65; ++x) {
    double dx = x + 0.5 - splat->mx, dy = 32.5 - splat->my;
    double q = splat->la * dx * dx + 2 * splat->lb * dx * dy + splat->lc * dy * dy;
    double ae = std::min(0.99, alpha * std::exp(-0.5 * q));
    CHECK(img.at(x, 32)[0] == doctest::Approx(color.x * ae).epsilon(1e-12));
  }
  // Brightest pixel sits at the principal point, decaying monotonically.
  int best_x = 0;
  double best = -1.0;
  for (int x = 0; x < 65; ++x)
    if (img.at(x, 32)[0] > best) { best = img.at(x, 32)[0]; best_x = x; }
  CHECK(best_x == 32);
  for (int x = 33; x < 64; ++x) CHECK(img.at(x, 32)[0] > img.at(x + 1, 32)[0]);
}

TEST_CASE("two stacked gaussians: the front one dominates at the cap") {
  CameraView view = plain_view(64, 80.0);
  GaussianCloud cloud;
  cloud.gaussians.push_back(make_gaussian({0, 0, 8}, {2, 2, 2}, Rotation::identity(), 0.995,
                                          {0.9, 0.1, 0.1}));
  cloud.gaussians.push_back(make_gaussian({0, 0, 16}, {2, 2, 2}, Rotation::identity(), 0.9,
                                          {0.1, 0.9, 0.1}));
  cloud.source_ids = {0, 1};
  ImageBuffer img = render(cloud, view, Vec3{});
  // At the shared center: alpha' clamps to 0.99, so 0.99 front + 0.01 rest.
  const double* c = img.at(32, 32);
  Vec3 front = cloud.gaussians[0].color();
  Vec3 back = cloud.gaussians[1].color();
  CHECK(std::abs(c[0] - front.x) < 0.015);  // within 1.5% of the front color
  CHECK(std::abs(c[1] - front.y) < 0.015);
  CHECK(std::abs(c[2] - front.z) < 0.015);

  // Exact hand compositing at the pixel center.
  auto sf = project_gaussian(cloud.gaussians[0], view.intrinsics, view.world_from_camera);
  auto sb = project_gaussian(cloud.gaussians[1], view.intrinsics, view.world_from_camera);
  REQUIRE(sf.has_value());
  REQUIRE(sb.has_value());
  auto alpha_at = [](const Splat2D& s, double alpha, double px, double py) {
    double dx = px - s.mx, dy = py - s.my;
    double q = s.la * dx * dx + 2 * s.lb * dx * dy + s.lc * dy * dy;
    return std::min(0.99, alpha * std::exp(-0.5 * q));
  };
  double af = alpha_at(*sf, cloud.gaussians[0].opacity(), 32.5, 32.5);
  double ab = alpha_at(*sb, cloud.gaussians[1].opacity(), 32.5, 32.5);
  CHECK(af == doctest::Approx(0.99).epsilon(1e-12));  // the cap engages
  for (int ch = 0; ch < 3; ++ch) {
    double expect = (ch == 0 ? front.x : (ch == 1 ? front.y : front.z)) * af +
                    (ch == 0 ? back.x : (ch == 1 ? back.y : back.z)) * ab * (1.0 - af);
    CHECK(c[ch] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("compositing conserves weight: colors plus transmittance sum to one") {
  CameraView view = plain_view(48, 60.0);
  GaussianCloud cloud;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-2.5, 2.5), zd(6.0, 14.0), od(0.2, 0.9);
  for (int i = 0; i < 12; ++i) {
    cloud.gaussians.push_back(make_gaussian({d(rng), d(rng), zd(rng)},
                                            {0.8, 0.8, 0.8}, Rotation::identity(), od(rng),
                                            {1.0 - 1e-9, 1.0 - 1e-9, 1.0 - 1e-9}));
    cloud.source_ids.push_back(i);
  }
  // color_logits of ~1.0 saturate; force them genuinely white via huge logits.
  for (auto& g : cloud.gaussians) g.color_logits = {18.0, 18.0, 18.0};

  ImageBuffer on_black = render(cloud, view, Vec3{});
  ImageBuffer on_white = render(cloud, view, {1, 1, 1});
  for (int i = 0; i < 48 * 48; ++i) {
    double transmittance = on_white.pixels[3 * i] - on_black.pixels[3 * i];
    CHECK(on_black.pixels[3 * i] + transmittance == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("rendering is invariant to the input gaussian order") {
  CameraView view = plain_view(48, 60.0);
  GaussianCloud cloud;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> d(-2.0, 2.0), zd(5.0, 15.0), od(0.2, 0.9);
  for (int i = 0; i < 20; ++i) {
    cloud.gaussians.push_back(make_gaussian({d(rng), d(rng), zd(rng)},
                                            {0.5 + 0.1 * (i % 4), 0.6, 0.7},
                                            Rotation::from_axis_angle({1, 1, 0}, 0.1 * i),
                                            od(rng), {0.3, 0.6, 0.8}));
    cloud.source_ids.push_back(i);
  }
  ImageBuffer ref = render(cloud, view, {0.1, 0.2, 0.3});

  GaussianCloud shuffled = cloud;
  std::shuffle(shuffled.gaussians.begin(), shuffled.gaussians.end(), rng);
  ImageBuffer out = render(shuffled, view, {0.1, 0.2, 0.3});
  CHECK(ref.pixels == out.pixels);  // byte-identical
}

TEST_CASE("loss closed forms") {
  ImageBuffer a = noise_image(16, 16, 1);
  LossParts same = loss(a, a, 0.2);
  CHECK(same.total == 0.0);
  CHECK(same.l1 == 0.0);
  CHECK(same.dssim == 0.0);

  ImageBuffer flat_a(16, 16, 0.2, 0.2, 0.2), flat_b(16, 16, 0.3, 0.3, 0.3);
  LossParts l = loss(flat_a, flat_b, 0.0);
  CHECK(l.l1 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(l.total == doctest::Approx(0.1).epsilon(1e-12));

  ImageBuffer big(8, 8), wrong(9, 8);
  CHECK_THROWS_AS(loss(big, wrong, 0.2), Error);
}

TEST_CASE("loss matches the scalar reference implementation") {
  ImageBuffer gt = noise_image(16, 16, 7);
  ImageBuffer rendered = noise_image(16, 16, 8);
  LossParts l = loss(rendered, gt, 0.2);
  double ref_l1 = reference_l1(rendered, gt);
  double ref_dssim = 1.0 - reference_ssim(gt, rendered);
  CHECK(std::abs(l.l1 - ref_l1) < 1e-9);
  CHECK(std::abs(l.dssim - ref_dssim) < 1e-9);
  CHECK(std::abs(l.total - (0.8 * ref_l1 + 0.2 * ref_dssim)) < 1e-9);
}

TEST_CASE("loss bounds hold on random pairs") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    ImageBuffer a = noise_image(20, 14, 100 + rep);
    ImageBuffer b = noise_image(20, 14, 200 + rep);
    double lam = rep / 10.0;
    LossParts l = loss(a, b, lam);
    CHECK(l.total >= 0.0);
    CHECK(l.total <= (1.0 - lam) * 1.0 + lam * 2.0);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  GaussianCloud cloud = gradient_fixture();
  CameraView view = plain_view(32, 60.0);
  // Ground truth: the same fixture mildly deformed, so gradients are nonzero
  // but the images stay close.
  GaussianCloud target = cloud;
  for (size_t i = 0; i < target.size(); ++i) {
    target.gaussians[i].mean += Vec3{0.05 * ((i % 3) - 1.0), -0.04 * ((i % 2) * 1.0), 0.06};
    target.gaussians[i].color_logits += Vec3{0.2, -0.15, 0.1};
  }
  ImageBuffer gt = render(target, view, Vec3{0.1, 0.1, 0.1});
  // Keep every pixel residual one-signed and clear of the L1 kink: absolute
  // differences stay far above the image motion an h-perturbation causes.
  for (double& px : gt.pixels) px += 0.15;
  const double lambda = 0.2;
  const Vec3 bg{0.1, 0.1, 0.1};
  const double h = 1e-4;

  RenderGrads grads;
  render_backward(cloud, view, gt, lambda, bg, &grads);

  auto rel_err = [](double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
  };
  double worst = 0.0;

  for (size_t gi = 0; gi < cloud.size(); ++gi) {
    for (int k = 0; k < 3; ++k) {
      auto poke = [&](double eps, auto member) {
        GaussianCloud c = cloud;
        member(c.gaussians[gi], eps);
        return fixture_loss(c, view, gt, lambda);
      };
      // mean
      auto mean_mut = [k](Gaussian3D& g, double eps) {
        if (k == 0) g.mean.x += eps;
        if (k == 1) g.mean.y += eps;
        if (k == 2) g.mean.z += eps;
      };
      double fd = (poke(h, mean_mut) - poke(-h, mean_mut)) / (2 * h);
      worst = std::max(worst, rel_err(grads.mean[gi][k], fd));

      // log scales
      auto scale_mut = [k](Gaussian3D& g, double eps) {
        if (k == 0) g.log_scales.x += eps;
        if (k == 1) g.log_scales.y += eps;
        if (k == 2) g.log_scales.z += eps;
      };
      fd = (poke(h, scale_mut) - poke(-h, scale_mut)) / (2 * h);
      worst = std::max(worst, rel_err(grads.log_scales[gi][k], fd));

      // rotation tangent (left perturbation)
      auto rot_mut = [k](Gaussian3D& g, double eps) {
        Vec3 w{k == 0 ? eps : 0.0, k == 1 ? eps : 0.0, k == 2 ? eps : 0.0};
        g.rotation = Rotation::exp(w) * g.rotation;
      };
      fd = (poke(h, rot_mut) - poke(-h, rot_mut)) / (2 * h);
      worst = std::max(worst, rel_err(grads.rotation[gi][k], fd));

      // color logits
      auto col_mut = [k](Gaussian3D& g, double eps) {
        if (k == 0) g.color_logits.x += eps;
        if (k == 1) g.color_logits.y += eps;
        if (k == 2) g.color_logits.z += eps;
      };
      fd = (poke(h, col_mut) - poke(-h, col_mut)) / (2 * h);
      worst = std::max(worst, rel_err(grads.color_logits[gi][k], fd));
    }
    auto op_mut = [](Gaussian3D& g, double eps) { g.opacity_logit += eps; };
    GaussianCloud cp = cloud, cm = cloud;
    op_mut(cp.gaussians[gi], h);
    op_mut(cm.gaussians[gi], -h);
    double fd = (fixture_loss(cp, view, gt, lambda) - fixture_loss(cm, view, gt, lambda)) / (2 * h);
    worst = std::max(worst, rel_err(grads.opacity_logit[gi], fd));
  }

  // Camera tangent: R <- R exp([w]), c <- c + R delta.
  for (int k = 0; k < 6; ++k) {
    auto poke_cam = [&](double eps) {
      CameraView v = view;
      Vec3 w{}, delta{};
      if (k < 3) (k == 0 ? w.x : (k == 1 ? w.y : w.z)) = eps;
      else (k == 3 ? delta.x : (k == 4 ? delta.y : delta.z)) = eps;
      Rotation r = v.world_from_camera.rotation * Rotation::exp(w);
      Vec3 t = v.world_from_camera.translation + v.world_from_camera.rotation.apply(delta);
      v.world_from_camera = Sim3Transform::rigid(r, t);
      return fixture_loss(cloud, v, gt, lambda);
    };
    double fd = (poke_cam(h) - poke_cam(-h)) / (2 * h);
    double analytic = k < 3 ? grads.cam_omega[k] : grads.cam_delta[k - 3];
    worst = std::max(worst, rel_err(analytic, fd));
  }

  CHECK(worst < 1e-3);
}

TEST_CASE("gradients vanish at the global minimum") {
  GaussianCloud cloud = gradient_fixture();
  CameraView view = plain_view(32, 60.0);
  ImageBuffer gt = render(cloud, view, Vec3{0.1, 0.1, 0.1});
  RenderGrads grads;
  render_backward(cloud, view, gt, 0.2, {0.1, 0.1, 0.1}, &grads);
  double worst = 0.0;
  for (size_t g = 0; g < cloud.size(); ++g) {
    worst = std::max({worst, norm(grads.mean[g]), norm(grads.log_scales[g]),
                      norm(grads.rotation[g]), std::abs(grads.opacity_logit[g]),
                      norm(grads.color_logits[g])});
  }
  worst = std::max({worst, norm(grads.cam_omega), norm(grads.cam_delta)});
  CHECK(worst < 1e-8);
}

TEST_CASE("loss gradient is linear in lambda") {
  GaussianCloud cloud = gradient_fixture();
  CameraView view = plain_view(32, 60.0);
  GaussianCloud target = cloud;
  target.gaussians[0].mean.x += 0.2;
  ImageBuffer gt = render(target, view, Vec3{0.1, 0.1, 0.1});

  RenderGrads g0, g1, gmix;
  render_backward(cloud, view, gt, 0.0, {0.1, 0.1, 0.1}, &g0);
  render_backward(cloud, view, gt, 1.0, {0.1, 0.1, 0.1}, &g1);
  render_backward(cloud, view, gt, 0.2, {0.1, 0.1, 0.1}, &gmix);
  for (size_t g = 0; g < cloud.size(); ++g) {
    Vec3 expect = 0.8 * g0.mean[g] + 0.2 * g1.mean[g];
    CHECK(norm(gmix.mean[g] - expect) < 1e-12 * (1.0 + norm(expect)) + 1e-15);
  }
}

TEST_CASE("training: zero iterations is the identity") {
  GaussianCloud cloud = gradient_fixture();
  CameraView view = plain_view(32, 60.0);
  view.image = render(cloud, view, Vec3{});
  TrainConfig cfg;
  cfg.iters = 0;
  TrainResult r = train(cloud, {view}, cfg);
  REQUIRE(r.cloud.size() == cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(norm(r.cloud.gaussians[i].mean - cloud.gaussians[i].mean) == 0.0);
    CHECK(r.cloud.gaussians[i].opacity_logit == cloud.gaussians[i].opacity_logit);
  }
}

TEST_CASE("training reduces the loss on a deformed fixture") {
  GaussianCloud target = gradient_fixture();
  CameraView view_a = plain_view(48, 80.0);
  CameraView view_b = plain_view(48, 80.0);
  view_b.world_from_camera =
      Sim3Transform::rigid(Rotation::from_axis_angle({0, 1, 0}, deg_to_rad(8.0)), {1.5, 0, 0.5});
  view_a.image = render(target, view_a, Vec3{});
  view_b.image = render(target, view_b, Vec3{});

  GaussianCloud init = target;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(-0.15, 0.15);
  for (auto& g : init.gaussians) {
    g.mean += Vec3{d(rng), d(rng), d(rng)};
    g.color_logits += Vec3{d(rng), d(rng), d(rng)};
  }
  TrainConfig cfg;
  cfg.iters = 120;
  cfg.refine_poses = false;
  TrainResult r = train(init, {view_a, view_b}, cfg);
  CHECK(r.trace.back().total < r.trace.front().total);
  CHECK(r.trace.back().psnr > r.trace.front().psnr);
}

TEST_CASE("pose refinement pulls a perturbed camera back") {
  GaussianCloud cloud = gradient_fixture();
  CameraView true_view = plain_view(48, 80.0);
  true_view.image = render(cloud, true_view, Vec3{});

  CameraView wrong = true_view;
  Rotation true_rot = true_view.world_from_camera.rotation;
  wrong.world_from_camera = Sim3Transform::rigid(
      true_rot * Rotation::from_axis_angle({0, 1, 0}, deg_to_rad(1.0)),
      true_view.world_from_camera.translation);

  TrainConfig cfg;
  cfg.iters = 400;
  cfg.lr_means = 0.0;  // isolate the pose path: the cloud is already right
  cfg.lr_scales = 0.0;
  cfg.lr_rotations = 0.0;
  cfg.lr_opacities = 0.0;
  cfg.lr_colors = 0.0;
  cfg.lr_pose = 1e-3;
  TrainResult r = train(cloud, {wrong}, cfg);
  double before = rotation_angle_between(wrong.world_from_camera.rotation, true_rot);
  double after = rotation_angle_between(r.poses[0].rotation, true_rot);
  CHECK(after < before);
}
