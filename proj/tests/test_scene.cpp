#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "core/errors.hpp"
#include "core/scene.hpp"

using namespace splatprint;

namespace {

SceneConfig small_config(uint64_t seed = 7) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.rig.image_size = 96;  // keep the suite quick
  return cfg;
}

bool images_equal(const ImageBuffer& a, const ImageBuffer& b) {
  return a.width == b.width && a.height == b.height && a.pixels == b.pixels;
}

}  // namespace

TEST_CASE("generation is deterministic for a fixed seed") {
  FingerScene s1 = FingerScene::generate(small_config());
  FingerScene s2 = FingerScene::generate(small_config());
  REQUIRE(s1.view_count() == s2.view_count());
  for (int v = 0; v < s1.view_count(); ++v) {
    CHECK(images_equal(s1.view(v).image, s2.view(v).image));
    CHECK(s1.view(v).mask.bits == s2.view(v).mask.bits);
  }
  REQUIRE(s1.minutiae().size() == s2.minutiae().size());
  for (size_t i = 0; i < s1.minutiae().size(); ++i)
    CHECK(norm(s1.minutiae()[i].position - s2.minutiae()[i].position) == 0.0);
}

TEST_CASE("default yaw set and minutiae count follow the config") {
  SceneConfig cfg = small_config();
  cfg.texture.minutiae_count = 30;
  FingerScene scene = FingerScene::generate(cfg);
  CHECK(scene.view_count() == 3);
  CHECK(scene.minutiae().size() == 30);
  // Camera yaw convention: left -45, front 0, right +45.
  for (int v = 0; v < 3; ++v) {
    Vec3 c = scene.view(v).world_from_camera.translation;
    double yaw = rad_to_deg(std::atan2(c.x, c.z));
    CHECK(yaw == doctest::Approx(cfg.rig.yaw_deg[v]).epsilon(1e-9));
  }
}

TEST_CASE("a single camera is rejected") {
  SceneConfig cfg = small_config();
  cfg.rig.yaw_deg = {0.0};
  CHECK_THROWS_AS(FingerScene::generate(cfg), Error);
  try {
    FingerScene::generate(cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("rendered views are bounded, masked and reproducible") {
  FingerScene scene = FingerScene::generate(small_config());
  for (int v = 0; v < scene.view_count(); ++v) {
    const CameraView& view = scene.view(v);
    CHECK(view.mask.count() > 0);
    for (double p : view.image.pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    CameraView again = scene.render_view(v);
    CHECK(images_equal(view.image, again.image));
  }
  CHECK_THROWS_AS(scene.render_view(99), Error);
}

TEST_CASE("minutiae are on the surface, inside masks, and occlusion-tested") {
  FingerScene scene = FingerScene::generate(small_config());
  std::set<int> seen_anywhere;
  bool some_absent = false;
  for (int v = 0; v < scene.view_count(); ++v) {
    const CameraView& view = scene.view(v);
    std::set<int> ids;
    for (const auto& m : view.minutiae_px) {
      ids.insert(m.id);
      seen_anywhere.insert(m.id);
      CHECK(view.mask.get(static_cast<int>(m.x), static_cast<int>(m.y)));
      // The 3D minutia is reachable by a ray from this camera (unoccluded
      // and on the surface within ray-cast tolerance).
      Vec3 center = view.world_from_camera.translation;
      Vec3 p = scene.minutiae()[m.id].position;
      double dist = norm(p - center);
      double t;
      REQUIRE(scene.raycast(center, (p - center) / dist, &t, nullptr));
      CHECK(norm(center + t * ((p - center) / dist) - p) < 1e-6 + 0.05);
    }
    if (ids.size() < scene.minutiae().size()) some_absent = true;
  }
  CHECK(some_absent);  // far-side minutiae drop out of at least one view
  CHECK(!seen_anywhere.empty());
}

TEST_CASE("self pointmap depth equals the depth map exactly") {
  FingerScene scene = FingerScene::generate(small_config());
  Pointmap pm = scene.oracle_pointmap(1, 1);
  std::vector<double> depth = scene.depth_map(1);
  for (size_t i = 0; i < pm.points.size(); ++i) {
    if (pm.valid.bits[i]) {
      CHECK(pm.points[i].z == depth[i]);
    } else {
      CHECK(depth[i] == 0.0);
    }
  }
}

TEST_CASE("mask equals pointmap validity exactly and confidence is gated") {
  FingerScene scene = FingerScene::generate(small_config());
  for (int v = 0; v < scene.view_count(); ++v) {
    Pointmap pm = scene.oracle_pointmap(v, v);
    CHECK(pm.valid.bits == scene.view(v).mask.bits);
    double min_conf = 1.0;
    for (size_t i = 0; i < pm.confidence.size(); ++i) {
      if (pm.valid.bits[i]) {
        CHECK(pm.confidence[i] > 0.0);
        CHECK(pm.confidence[i] <= 1.0);
        min_conf = std::min(min_conf, pm.confidence[i]);
      } else {
        CHECK(pm.confidence[i] == 0.0);
      }
    }
    CHECK(min_conf == doctest::Approx(0.2).epsilon(1e-9));  // silhouette floor
  }
}

TEST_CASE("cross-frame pointmap equals the ground-truth transport") {
  FingerScene scene = FingerScene::generate(small_config());
  Pointmap self = scene.oracle_pointmap(0, 0);
  Pointmap cross = scene.oracle_pointmap(0, 2);
  Sim3Transform rel = scene.relative_pose(0, 2);  // frame 0 -> frame 2
  CHECK(rel.scale == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 0; i < self.points.size(); ++i) {
    if (!self.valid.bits[i]) continue;
    CHECK(norm(sim3_apply(rel, self.points[i]) - cross.points[i]) < 1e-9);
  }
}

TEST_CASE("valid pixels back-project to their own pixel centers") {
  FingerScene scene = FingerScene::generate(small_config());
  const CameraIntrinsics& intr = scene.view(0).intrinsics;
  Pointmap pm = scene.oracle_pointmap(0, 0);
  for (int y = 0; y < pm.height; ++y) {
    for (int x = 0; x < pm.width; ++x) {
      if (!pm.valid.get(x, y)) continue;
      auto [u, v] = project(intr, pm.points[pm.idx(x, y)]);
      CHECK(std::hypot(u - (x + 0.5), v - (y + 0.5)) < 0.51);
    }
  }
}

TEST_CASE("additive noise matches the half-normal mean within 5 percent") {
  FingerScene scene = FingerScene::generate(small_config());
  NoiseConfig noise;
  noise.sigma_mm = 0.05;
  double abs_sum = 0.0;
  long n = 0;
  for (int v = 0; v < scene.view_count(); ++v) {
    Pointmap clean = scene.oracle_pointmap(v, v);
    Pointmap noisy = scene.oracle_pointmap(v, v, noise);
    for (size_t i = 0; i < clean.points.size(); ++i) {
      if (!clean.valid.bits[i]) continue;
      Vec3 d = noisy.points[i] - clean.points[i];
      abs_sum += std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
      n += 3;
    }
  }
  REQUIRE(n >= 3 * 10000);
  double expected = 0.05 * std::sqrt(2.0 / kPi);
  CHECK(abs_sum / n == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("seed changes the texture but not the rig") {
  FingerScene a = FingerScene::generate(small_config(7));
  FingerScene b = FingerScene::generate(small_config(8));
  for (int v = 0; v < a.view_count(); ++v) {
    Vec3 da = a.view(v).world_from_camera.translation;
    Vec3 db = b.view(v).world_from_camera.translation;
    CHECK(norm(da - db) == 0.0);
  }
  bool any_differ = false;
  for (int v = 0; v < a.view_count() && !any_differ; ++v)
    any_differ = !images_equal(a.view(v).image, b.view(v).image);
  CHECK(any_differ);
}

TEST_CASE("pointmap index bounds are checked") {
  FingerScene scene = FingerScene::generate(small_config());
  CHECK_THROWS_AS(scene.oracle_pointmap(0, 5), Error);
  CHECK_THROWS_AS(scene.oracle_pointmap(-1, 0), Error);
}
