#include "core/scene.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace splatprint {

namespace {

constexpr double kRayTMin = 1e-6;
constexpr int kSilhouetteWindow = 8;  // px; confidence falloffs beyond this saturate
const Vec3 kLightDir = normalized(Vec3{0.25, 0.15, 1.0});
constexpr double kAmbient = 0.35;

}  // namespace

SceneConfig SceneConfig::from_config(const Config& cfg) {
  SceneConfig sc;
  sc.seed = cfg.get_u64("scene.seed", sc.seed);
  sc.surface.radius_mm = cfg.get_double("surface.radius_mm", sc.surface.radius_mm);
  sc.surface.length_mm = cfg.get_double("surface.length_mm", sc.surface.length_mm);
  sc.surface.cap_mm = cfg.get_double("surface.cap_mm", sc.surface.cap_mm);
  auto skin = cfg.get_doubles("texture.skin_color",
                              {sc.texture.skin_color.x, sc.texture.skin_color.y,
                               sc.texture.skin_color.z});
  auto ridge = cfg.get_doubles("texture.ridge_color",
                               {sc.texture.ridge_color.x, sc.texture.ridge_color.y,
                                sc.texture.ridge_color.z});
  require(skin.size() == 3 && ridge.size() == 3, ErrorCode::InvalidConfig,
          "texture colors must be RGB triples");
  sc.texture.skin_color = {skin[0], skin[1], skin[2]};
  sc.texture.ridge_color = {ridge[0], ridge[1], ridge[2]};
  sc.texture.ridge_freq_cpmm = cfg.get_double("texture.ridge_freq_cpmm", sc.texture.ridge_freq_cpmm);
  sc.texture.wave_amp_mm = cfg.get_double("texture.wave_amp_mm", sc.texture.wave_amp_mm);
  sc.texture.wave_period_mm = cfg.get_double("texture.wave_period_mm", sc.texture.wave_period_mm);
  sc.texture.minutiae_count = cfg.get_int("texture.minutiae", sc.texture.minutiae_count);
  sc.rig.yaw_deg = cfg.get_doubles("rig.yaw_deg", sc.rig.yaw_deg);
  sc.rig.distance_mm = cfg.get_double("rig.distance_mm", sc.rig.distance_mm);
  sc.rig.look_at_mm = cfg.get_double("rig.look_at_mm", sc.rig.look_at_mm);
  sc.rig.image_size = cfg.get_int("rig.image_size", sc.rig.image_size);
  sc.rig.focal_px = cfg.get_double("rig.focal_px", sc.rig.focal_px);
  sc.validate();
  return sc;
}

void SceneConfig::validate() const {
  require(surface.radius_mm > 0 && surface.length_mm > 0 && surface.cap_mm > 0,
          ErrorCode::InvalidConfig, "surface dimensions must be positive");
  require(surface.cap_mm < surface.length_mm, ErrorCode::InvalidConfig,
          "fingertip cap must be shorter than the finger");
  require(texture.ridge_freq_cpmm > 0, ErrorCode::InvalidConfig,
          "ridge frequency must be positive");
  require(texture.wave_period_mm > 0, ErrorCode::InvalidConfig,
          "wave period must be positive");
  require(texture.minutiae_count >= 0, ErrorCode::InvalidConfig,
          "minutiae count cannot be negative");
  require(rig.yaw_deg.size() >= 2, ErrorCode::InvalidConfig,
          "rig needs at least two cameras for pairwise alignment");
  require(rig.distance_mm > surface.radius_mm, ErrorCode::InvalidConfig,
          "cameras must sit outside the finger");
  require(rig.image_size >= 16, ErrorCode::InvalidConfig, "image size too small");
  require(rig.focal_px > 0, ErrorCode::InvalidConfig, "focal length must be positive");
}

double FingerScene::radius_at(double y) const {
  const auto& s = cfg_.surface;
  double y_cap = s.length_mm - s.cap_mm;
  if (y <= y_cap) return s.radius_mm;
  double f = (y - y_cap) / s.cap_mm;
  return s.radius_mm * std::sqrt(std::max(0.0, 1.0 - f * f));
}

bool FingerScene::raycast(const Vec3& o, const Vec3& d, double* t_hit, Vec3* normal) const {
  const auto& s = cfg_.surface;
  const double R = s.radius_mm;
  const double y_cap = s.length_mm - s.cap_mm;
  double best_t = -1.0;
  int best_prim = -1;  // 0 = cylinder wall, 1 = cap ellipsoid

  // Cylinder wall x^2 + z^2 = R^2, y in [0, y_cap].
  double a = d.x * d.x + d.z * d.z;
  if (a > 1e-16) {
    double b = 2.0 * (o.x * d.x + o.z * d.z);
    double c = o.x * o.x + o.z * o.z - R * R;
    double disc = b * b - 4 * a * c;
    if (disc >= 0.0) {
      double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t <= kRayTMin) continue;
        double y = o.y + t * d.y;
        if (y < 0.0 || y > y_cap) continue;
        if (best_t < 0.0 || t < best_t) { best_t = t; best_prim = 0; }
      }
    }
  }

  // Fingertip half-ellipsoid centered at (0, y_cap, 0), semi-axes (R, cap, R).
  {
    Vec3 os{o.x / R, (o.y - y_cap) / s.cap_mm, o.z / R};
    Vec3 ds{d.x / R, d.y / s.cap_mm, d.z / R};
    double ea = dot(ds, ds);
    double eb = 2.0 * dot(os, ds);
    double ec = dot(os, os) - 1.0;
    double disc = eb * eb - 4 * ea * ec;
    if (disc >= 0.0) {
      double sq = std::sqrt(disc);
      for (double t : {(-eb - sq) / (2 * ea), (-eb + sq) / (2 * ea)}) {
        if (t <= kRayTMin) continue;
        double y = o.y + t * d.y;
        if (y < y_cap) continue;
        if (best_t < 0.0 || t < best_t) { best_t = t; best_prim = 1; }
      }
    }
  }

  if (best_prim < 0) return false;
  if (t_hit) *t_hit = best_t;
  if (normal) {
    Vec3 p = o + best_t * d;
    if (best_prim == 0) {
      *normal = normalized(Vec3{p.x, 0.0, p.z});
    } else {
      *normal = normalized(Vec3{p.x / (R * R),
                                (p.y - y_cap) / (s.cap_mm * s.cap_mm),
                                p.z / (R * R)});
    }
  }
  return true;
}

double FingerScene::ridge_phase(double u, double v) const {
  const auto& t = cfg_.texture;
  double psi = 2.0 * kPi * t.ridge_freq_cpmm *
               (v + t.wave_amp_mm * std::sin(2.0 * kPi * u / t.wave_period_mm + wave_phase_));
  for (const auto& m : minutiae_) {
    psi += m.polarity * std::atan2(v - m.v, u - m.u);
  }
  return psi;
}

Vec3 FingerScene::texture_color(const Vec3& p) const {
  double theta = std::atan2(p.x, p.z);
  double u = theta * cfg_.surface.radius_mm;
  double tau = 0.5 + 0.5 * std::cos(ridge_phase(u, p.y));
  const auto& t = cfg_.texture;
  return t.ridge_color + tau * (t.skin_color - t.ridge_color);
}

Vec3 FingerScene::shaded_color(const Vec3& p, const Vec3& n) const {
  double shade = kAmbient + (1.0 - kAmbient) * std::max(0.0, dot(n, kLightDir));
  Vec3 c = texture_color(p) * shade;
  return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
}

FingerScene::ViewCache FingerScene::cast_view(int i) const {
  return cast_pose(rig_intrinsics_[i], rig_poses_[i]);
}

CameraView FingerScene::render_at(const CameraIntrinsics& intr,
                                  const Sim3Transform& world_from_camera) const {
  return cast_pose(intr, world_from_camera).view;
}

FingerScene::ViewCache FingerScene::cast_pose(const CameraIntrinsics& intr,
                                              const Sim3Transform& wfc) const {
  const int w = intr.width, h = intr.height;

  ViewCache vc;
  vc.view.intrinsics = intr;
  vc.view.world_from_camera = wfc;
  vc.view.image = ImageBuffer(w, h);
  vc.view.mask = BitMask(w, h);
  vc.world_points.assign(static_cast<size_t>(w) * h, Vec3{});
  vc.base_confidence.assign(static_cast<size_t>(w) * h, 0.0);

  const Vec3 center = wfc.translation;  // scale is 1
  const Mat3 r_wc = wfc.rotation.matrix();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Vec3 dir_cam{(x + 0.5 - intr.cx) / intr.focal_px, (y + 0.5 - intr.cy) / intr.focal_px, 1.0};
      Vec3 dir = normalized(r_wc * dir_cam);
      double t;
      Vec3 n;
      if (!raycast(center, dir, &t, &n)) continue;
      Vec3 p = center + t * dir;
      Vec3 c = shaded_color(p, n);
      double* px = vc.view.image.at(x, y);
      px[0] = c.x; px[1] = c.y; px[2] = c.z;
      vc.view.mask.set(x, y, true);
      vc.world_points[vc.view.mask.width * static_cast<size_t>(y) + x] = p;
    }
  }

  // Distance to the nearest background pixel; drives the confidence falloff.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!vc.view.mask.get(x, y)) continue;
      double d2_min = 1e30;
      for (int dy = -kSilhouetteWindow; dy <= kSilhouetteWindow; ++dy) {
        for (int dx = -kSilhouetteWindow; dx <= kSilhouetteWindow; ++dx) {
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (vc.view.mask.get(nx, ny)) continue;
          double d2 = double(dx) * dx + double(dy) * dy;
          d2_min = std::min(d2_min, d2);
        }
      }
      vc.base_confidence[static_cast<size_t>(y) * w + x] =
          d2_min < 1e29 ? std::sqrt(d2_min) : 1e9;
    }
  }

  // Visible minutiae: in front of the camera, inside the image, not occluded,
  // and landing on a masked pixel.
  Sim3Transform cfw = wfc.inverse();
  for (const auto& m : minutiae_) {
    Vec3 p_cam = cfw.apply(m.position);
    if (p_cam.z <= 1e-9) continue;
    auto [u, v] = project(intr, p_cam);
    if (u < 0.0 || v < 0.0 || u >= w || v >= h) continue;
    Vec3 to_m = m.position - center;
    double dist = norm(to_m);
    double t;
    if (!raycast(center, to_m / dist, &t, nullptr)) continue;
    if (std::abs(t - dist) > 0.05) continue;  // occluded by nearer surface
    int px = static_cast<int>(u), py = static_cast<int>(v);
    if (!vc.view.mask.get(px, py)) continue;
    vc.view.minutiae_px.push_back({m.id, u, v});
  }
  return vc;
}

FingerScene FingerScene::generate(const SceneConfig& cfg) {
  cfg.validate();
  FingerScene scene;
  scene.cfg_ = cfg;

  Rng tex_rng = make_rng(cfg.seed, 2);
  scene.wave_phase_ = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(tex_rng);

  // Minutiae on the camera-facing band, separated in texture coordinates.
  Rng min_rng = make_rng(cfg.seed, 1);
  std::uniform_real_distribution<double> theta_dist(deg_to_rad(-70.0), deg_to_rad(70.0));
  std::uniform_real_distribution<double> y_dist(0.45 * cfg.surface.length_mm,
                                                0.93 * cfg.surface.length_mm);
  std::uniform_int_distribution<int> pol_dist(0, 1);
  const double min_sep = 1.2;
  int attempts = 0;
  while (static_cast<int>(scene.minutiae_.size()) < cfg.texture.minutiae_count) {
    require(++attempts < 20000, ErrorCode::InvalidConfig,
            "cannot place the requested minutiae count with the required separation");
    double theta = theta_dist(min_rng);
    double y = y_dist(min_rng);
    double u = theta * cfg.surface.radius_mm;
    bool ok = true;
    for (const auto& m : scene.minutiae_) {
      double du = u - m.u, dv = y - m.v;
      if (du * du + dv * dv < min_sep * min_sep) { ok = false; break; }
    }
    if (!ok) continue;
    Minutia3D m;
    m.id = static_cast<int>(scene.minutiae_.size());
    m.u = u;
    m.v = y;
    m.polarity = pol_dist(min_rng) ? 1 : -1;
    m.type = m.polarity > 0 ? Minutia3D::Type::Ending : Minutia3D::Type::Bifurcation;
    double r = scene.radius_at(y);
    m.position = {r * std::sin(theta), y, r * std::cos(theta)};
    scene.minutiae_.push_back(m);
  }

  for (double yaw_deg : cfg.rig.yaw_deg) {
    double yaw = deg_to_rad(yaw_deg);
    Vec3 center{cfg.rig.distance_mm * std::sin(yaw), cfg.rig.look_at_mm,
                cfg.rig.distance_mm * std::cos(yaw)};
    Vec3 target{0.0, cfg.rig.look_at_mm, 0.0};
    scene.rig_poses_.push_back(look_at_pose(center, target, {0.0, 1.0, 0.0}));
    double half = cfg.rig.image_size / 2.0;
    scene.rig_intrinsics_.emplace_back(cfg.rig.focal_px, half, half, cfg.rig.image_size,
                                       cfg.rig.image_size);
  }

  for (int i = 0; i < static_cast<int>(scene.rig_poses_.size()); ++i) {
    scene.views_.push_back(scene.cast_view(i));
    require(scene.views_.back().view.mask.count() > 0, ErrorCode::InvalidConfig,
            "camera " + std::to_string(i) + " does not see the finger");
  }
  return scene;
}

void FingerScene::check_index(int i) const {
  require(i >= 0 && i < view_count(), ErrorCode::IndexOutOfRange,
          "view index " + std::to_string(i) + " out of range");
}

const CameraView& FingerScene::view(int i) const {
  check_index(i);
  return views_[i].view;
}

CameraView FingerScene::render_view(int i) const {
  check_index(i);
  return cast_view(i).view;
}

Sim3Transform FingerScene::relative_pose(int view_v, int view_e) const {
  check_index(view_v);
  check_index(view_e);
  return sim3_compose(rig_poses_[view_e].inverse(), rig_poses_[view_v]);
}

Pointmap FingerScene::oracle_pointmap(int view_v, int ref_view_e, const NoiseConfig& noise) const {
  check_index(view_v);
  check_index(ref_view_e);
  const ViewCache& vc = views_[view_v];
  const int w = vc.view.intrinsics.width, h = vc.view.intrinsics.height;

  Pointmap pm;
  pm.width = w;
  pm.height = h;
  pm.points.assign(static_cast<size_t>(w) * h, Vec3{});
  pm.confidence.assign(static_cast<size_t>(w) * h, 0.0);
  pm.valid = vc.view.mask;

  Sim3Transform e_from_world = rig_poses_[ref_view_e].inverse();
  Rng rng = make_rng(cfg_.seed ^ noise.seed, static_cast<uint64_t>(view_v),
                     static_cast<uint64_t>(ref_view_e));
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (size_t i = 0; i < pm.points.size(); ++i) {
    if (!pm.valid.bits[i]) continue;
    Vec3 p = e_from_world.apply(vc.world_points[i]);
    if (noise.sigma_mm > 0.0) {
      p.x += noise.sigma_mm * gauss(rng);
      p.y += noise.sigma_mm * gauss(rng);
      p.z += noise.sigma_mm * gauss(rng);
    }
    pm.points[i] = p;
    double d = vc.base_confidence[i];
    double conf = 1.0;
    if (noise.edge_falloff_px > 0.0) {
      double f = (d - 1.0) / noise.edge_falloff_px;
      conf = noise.edge_floor + (1.0 - noise.edge_floor) * std::clamp(f, 0.0, 1.0);
    }
    pm.confidence[i] = conf;
  }
  return pm;
}

std::vector<double> FingerScene::depth_map(int view) const {
  Pointmap self = oracle_pointmap(view, view);
  std::vector<double> depth(self.points.size(), 0.0);
  for (size_t i = 0; i < self.points.size(); ++i) {
    if (self.valid.bits[i]) depth[i] = self.points[i].z;
  }
  return depth;
}

std::vector<FingerScene::SurfaceSample> FingerScene::sample_surface(int count) const {
  std::vector<SurfaceSample> out;
  out.reserve(count);
  Rng rng = make_rng(cfg_.seed, 3);
  std::uniform_real_distribution<double> theta_dist(-kPi, kPi);
  std::uniform_real_distribution<double> y_dist(0.0, cfg_.surface.length_mm);
  const double y_cap = cfg_.surface.length_mm - cfg_.surface.cap_mm;
  while (static_cast<int>(out.size()) < count) {
    double theta = theta_dist(rng);
    double y = y_dist(rng);
    double r = radius_at(y);
    if (r <= 1e-9) continue;
    SurfaceSample s;
    s.position = {r * std::sin(theta), y, r * std::cos(theta)};
    if (y <= y_cap) {
      s.normal = {std::sin(theta), 0.0, std::cos(theta)};
    } else {
      double R = cfg_.surface.radius_mm, C = cfg_.surface.cap_mm;
      s.normal = normalized(Vec3{s.position.x / (R * R), (y - y_cap) / (C * C),
                                 s.position.z / (R * R)});
    }
    s.color = texture_color(s.position);
    out.push_back(s);
  }
  return out;
}

}  // namespace splatprint
