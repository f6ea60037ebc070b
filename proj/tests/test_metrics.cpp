#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/errors.hpp"
#include "core/metrics.hpp"
#include "core/pairwise.hpp"
#include "core/scene.hpp"

using namespace splatprint;

namespace {

SceneConfig small_config(uint64_t seed = 7) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.rig.image_size = 96;
  return cfg;
}

double pose_yaw_deg(const Sim3Transform& wfc) {
  Vec3 fwd = wfc.rotation.apply({0, 0, 1});
  return rad_to_deg(std::atan2(-fwd.x, -fwd.z));
}

}  // namespace

TEST_CASE("registration distance closed forms") {
  MinutiaPairSet coincident{{0, 5, 5, 5, 5}, {1, -2, 3, -2, 3}};
  CHECK(registration_distance(coincident) == 0.0);

  MinutiaPairSet triangle{{0, 3, 4, 0, 0}};
  CHECK(registration_distance(triangle) == doctest::Approx(5.0).epsilon(1e-12));

  MinutiaPairSet two{{0, 3, 4, 0, 0}, {1, 7, 7, 7, 7}};
  CHECK(registration_distance(two) == doctest::Approx(2.5).epsilon(1e-12));

  CHECK_THROWS_AS(registration_distance({}), Error);
}

TEST_CASE("registration distance is translation-equivariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  MinutiaPairSet pairs, shifted;
  for (int i = 0; i < 20; ++i) {
    MinutiaPair p{i, d(rng), d(rng), d(rng), d(rng)};
    pairs.push_back(p);
    MinutiaPair q = p;
    q.x += 13.5; q.gx += 13.5;
    q.y -= 7.25; q.gy -= 7.25;
    shifted.push_back(q);
  }
  CHECK(std::abs(registration_distance(pairs) - registration_distance(shifted)) < 1e-12);
}

TEST_CASE("register_and_project: oracle transform, identity, recovered") {
  SceneConfig cfg;  // full default resolution: the misalignment scale is in pixels
  cfg.seed = 7;
  cfg.rig.yaw_deg = {0.0, 30.0};
  FingerScene scene = FingerScene::generate(cfg);
  Pointmap self0 = scene.oracle_pointmap(0, 0);

  MinutiaPairSet oracle = register_and_project(self0, scene.view(0), scene.view(1),
                                               scene.relative_pose(0, 1));
  double d_oracle = registration_distance(oracle);
  CHECK(d_oracle < 0.51);  // pixel-center lift quantization only

  MinutiaPairSet ident = register_and_project(self0, scene.view(0), scene.view(1),
                                              Sim3Transform::identity());
  // Measured misalignment baseline on this scene: ~17.6 px, two orders above
  // the oracle residual.
  double d_ident = registration_distance(ident);
  CHECK(d_ident > 15.0);
  CHECK(d_ident > 20.0 * d_oracle);

  Pointmap self1 = scene.oracle_pointmap(1, 1);
  Pointmap cross10 = scene.oracle_pointmap(1, 0);
  PairAlignment pa = align_views(self1, cross10);  // frame 1 -> frame 0
  MinutiaPairSet recovered = register_and_project(self0, scene.view(0), scene.view(1),
                                                  sim3_inverse(pa.transform));
  CHECK(registration_distance(recovered) <= 2.0 * d_oracle + 1e-9);
}

TEST_CASE("register_and_project rejects disjoint minutiae sets") {
  FingerScene scene = FingerScene::generate(small_config());
  Pointmap self0 = scene.oracle_pointmap(0, 0);
  CameraView a = scene.view(0), b = scene.view(2);
  for (auto& m : a.minutiae_px) m.id += 5000;  // no shared ids remain
  CHECK_THROWS_AS(
      register_and_project(self0, a, b, scene.relative_pose(0, 2)), Error);
}

TEST_CASE("2D similarity baseline is exact on similarity data, poor at 45 degrees") {
  CameraView a, b;
  a.intrinsics = CameraIntrinsics(100.0, 32, 32, 64, 64);
  b.intrinsics = a.intrinsics;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(5.0, 60.0);
  double s = 1.3, phi = 0.4, tx = 3.0, ty = -2.0;
  for (int i = 0; i < 12; ++i) {
    double x = d(rng), y = d(rng);
    a.minutiae_px.push_back({i, x, y});
    b.minutiae_px.push_back({i, s * (std::cos(phi) * x - std::sin(phi) * y) + tx,
                             s * (std::sin(phi) * x + std::cos(phi) * y) + ty});
  }
  CHECK(baseline_2d_similarity_distance(a, b) < 1e-9);

  FingerScene scene = FingerScene::generate(small_config());
  // 45-degree pair: curvature makes a plane similarity a bad model.
  CHECK(baseline_2d_similarity_distance(scene.view(1), scene.view(2)) > 1.0);
}

TEST_CASE("weighted depth error closed forms") {
  DepthPair same;
  same.width = 2;
  same.height = 2;
  same.predicted = {1, 2, 3, 4};
  same.ground_truth = {1, 2, 3, 4};
  same.valid = {1, 1, 1, 1};
  same.weights = {1, 1, 1, 1};
  CHECK(weighted_depth_error(same, false) == 0.0);

  DepthPair offset = same;
  offset.predicted = {2, 3, 4, 5};
  CHECK(weighted_depth_error(offset, false) == doctest::Approx(1.0).epsilon(1e-12));

  DepthPair fixture = same;
  fixture.predicted = {1, 2, 3, 4};
  fixture.ground_truth = {1, 2, 3, 5};
  fixture.weights = {1, 1, 1, 2};
  CHECK(weighted_depth_error(fixture, false) == doctest::Approx(0.4).epsilon(1e-12));

  DepthPair empty = same;
  empty.valid = {0, 0, 0, 0};
  CHECK_THROWS_AS(weighted_depth_error(empty, false), Error);
}

TEST_CASE("weighted depth error: uniform weights equal the plain MAE") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(1.0, 30.0);
  DepthPair dp;
  dp.width = 10;
  dp.height = 10;
  double mae = 0.0;
  for (int i = 0; i < 100; ++i) {
    dp.predicted.push_back(d(rng));
    dp.ground_truth.push_back(d(rng));
    dp.valid.push_back(1);
    dp.weights.push_back(0.37);
    mae += std::abs(dp.predicted.back() - dp.ground_truth.back());
  }
  mae /= 100.0;
  CHECK(std::abs(weighted_depth_error(dp, false) - mae) < 1e-12);
}

TEST_CASE("scale alignment removes any global depth scale") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(5.0, 25.0), jitter(-0.2, 0.2), w(0.1, 1.0);
  DepthPair dp;
  dp.width = 20;
  dp.height = 5;
  for (int i = 0; i < 100; ++i) {
    double gt = d(rng);
    dp.ground_truth.push_back(gt);
    dp.predicted.push_back(gt + jitter(rng));
    dp.valid.push_back(1);
    dp.weights.push_back(w(rng));
  }
  double base = weighted_depth_error(dp, true);
  DepthPair scaled = dp;
  for (double& p : scaled.predicted) p *= 4.2;
  CHECK(std::abs(weighted_depth_error(scaled, true) - base) < 1e-9);
}

TEST_CASE("novel view poses: endpoints, uniform yaw grid, count guard") {
  FingerScene scene = FingerScene::generate(small_config());
  Sim3Transform left = scene.view(0).world_from_camera;
  Sim3Transform center = scene.view(1).world_from_camera;
  Sim3Transform right = scene.view(2).world_from_camera;

  auto three = novel_view_poses(left, center, right, 3);
  REQUIRE(three.size() == 3);
  CHECK(rotation_angle_between(three[0].rotation, left.rotation) < 1e-12);
  CHECK(rotation_angle_between(three[1].rotation, center.rotation) < 1e-12);
  CHECK(rotation_angle_between(three[2].rotation, right.rotation) < 1e-12);
  CHECK(norm(three[0].translation - left.translation) < 1e-12);

  auto twelve = novel_view_poses(left, center, right, 12);
  REQUIRE(twelve.size() == 12);
  std::vector<double> yaws;
  for (const auto& p : twelve) yaws.push_back(pose_yaw_deg(p));
  // Equal intervals from -45 to +45: step 90/11.
  for (int k = 0; k < 12; ++k)
    CHECK(yaws[k] == doctest::Approx(-45.0 + 90.0 * k / 11.0).epsilon(1e-9));
  for (int k = 0; k + 1 < 12; ++k)
    CHECK(yaws[k + 1] - yaws[k] == doctest::Approx(90.0 / 11.0).epsilon(1e-9));

  CHECK_THROWS_AS(novel_view_poses(left, center, right, 1), Error);
}

TEST_CASE("psnr closed forms and scalar oracle") {
  ImageBuffer a(8, 8, 0.5, 0.5, 0.5);
  CHECK(psnr(a, a) == 99.0);

  ImageBuffer zero(8, 8), tenth(8, 8, 0.1, 0.1, 0.1);
  CHECK(psnr(zero, tenth) == doctest::Approx(20.0).epsilon(1e-9));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  ImageBuffer x(12, 9), y(12, 9);
  for (size_t i = 0; i < x.pixels.size(); ++i) {
    x.pixels[i] = d(rng);
    y.pixels[i] = d(rng);
  }
  double mse = 0.0;
  for (size_t i = 0; i < x.pixels.size(); ++i) {
    double diff = x.pixels[i] - y.pixels[i];
    mse += diff * diff;
  }
  mse /= static_cast<double>(x.pixels.size());
  CHECK(psnr(x, y) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));

  ImageBuffer wrong(9, 12);
  CHECK_THROWS_AS(psnr(x, wrong), Error);
}

TEST_CASE("gauge fitting recovers a known sim3 offset") {
  FingerScene scene = FingerScene::generate(small_config());
  std::vector<Sim3Transform> gt, rec;
  Sim3Transform g(1.6, Rotation::from_axis_angle({0.2, 1.0, -0.3}, 0.5), {4.0, -2.0, 7.0});
  for (int v = 0; v < scene.view_count(); ++v) {
    gt.push_back(scene.view(v).world_from_camera);
    rec.push_back(sim3_compose(g, gt.back()));
  }
  Sim3Transform fitted = fit_gauge(rec, gt);
  CHECK(fitted.scale == doctest::Approx(g.scale).epsilon(1e-9));
  CHECK(rotation_angle_between(fitted.rotation, g.rotation) < 1e-9);
  CHECK(norm(fitted.translation - g.translation) < 1e-7);

  auto errors = pose_errors_after_gauge(rec, gt);
  for (const auto& e : errors) {
    CHECK(e.rotation_deg < 1e-7);
    CHECK(e.translation_mm < 1e-7);
  }
}
