#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/camera.hpp"
#include "core/config.hpp"
#include "core/image.hpp"
#include "core/linalg.hpp"

namespace splatprint {

// Per-pixel 3D points expressed in a reference camera frame, with confidence.
// Confidence is 0 exactly where valid is 0.
struct Pointmap {
  int width = 0, height = 0;
  std::vector<Vec3> points;
  std::vector<double> confidence;
  BitMask valid;

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

struct SurfaceParams {
  double radius_mm = 8.0;
  double length_mm = 40.0;
  double cap_mm = 12.0;  // height of the half-ellipsoid fingertip cap
};

struct TextureParams {
  Vec3 skin_color{0.85, 0.62, 0.50};
  Vec3 ridge_color{0.45, 0.25, 0.20};
  double ridge_freq_cpmm = 0.8;   // ridge cycles per mm along the flow normal
  double wave_amp_mm = 0.8;       // orientation-field waviness amplitude
  double wave_period_mm = 15.0;   // orientation-field waviness period
  int minutiae_count = 30;
};

struct RigParams {
  std::vector<double> yaw_deg{-45.0, 0.0, 45.0};
  double distance_mm = 60.0;
  double look_at_mm = 28.0;  // height on the finger axis the cameras fixate
  int image_size = 128;
  double focal_px = 300.0;
};

struct SceneConfig {
  uint64_t seed = 7;
  SurfaceParams surface;
  TextureParams texture;
  RigParams rig;

  static SceneConfig from_config(const Config& cfg);
  void validate() const;  // InvalidConfig on violation
};

struct Minutia3D {
  enum class Type { Ending, Bifurcation };
  int id = 0;
  Vec3 position;  // on the surface, world frame, mm
  Type type = Type::Ending;
  double u = 0.0, v = 0.0;  // surface texture coordinates (arc mm, height mm)
  int polarity = 1;         // sign of the phase spiral that realizes it
};

struct NoiseConfig {
  double sigma_mm = 0.0;       // additive Gaussian noise per point axis
  double edge_falloff_px = 3.0;
  double edge_floor = 0.2;     // confidence at the silhouette
  uint64_t seed = 0;
};

// Synthetic ground truth: a capped-cylinder finger with a procedural ridge
// texture (phase spirals realize the minutiae), a yaw-ring camera rig, and
// exact ray-cast pointmaps standing in for a learned pointmap regressor.
class FingerScene {
 public:
  static FingerScene generate(const SceneConfig& cfg);

  const SceneConfig& config() const { return cfg_; }
  int view_count() const { return static_cast<int>(views_.size()); }
  const CameraView& view(int i) const;
  CameraView render_view(int i) const;  // fresh ray cast, bypassing the cache
  const std::vector<Minutia3D>& minutiae() const { return minutiae_; }

  Pointmap oracle_pointmap(int view_v, int ref_view_e, const NoiseConfig& noise = {}) const;
  std::vector<double> depth_map(int view) const;  // z per pixel, 0 where invalid
  // Ground-truth render from an arbitrary rigid pose (novel-view reference).
  CameraView render_at(const CameraIntrinsics& intr, const Sim3Transform& world_from_camera) const;
  // Maps camera-frame coordinates of view v into the frame of view e.
  Sim3Transform relative_pose(int view_v, int view_e) const;

  bool raycast(const Vec3& origin, const Vec3& dir, double* t_hit, Vec3* normal) const;
  Vec3 texture_color(const Vec3& surface_point) const;
  // Surface samples (position, normal, unshaded color) for export.
  struct SurfaceSample { Vec3 position, normal, color; };
  std::vector<SurfaceSample> sample_surface(int count) const;

 private:
  struct ViewCache {
    CameraView view;
    std::vector<Vec3> world_points;     // hit per pixel (undefined where invalid)
    std::vector<double> base_confidence;  // silhouette falloff, pre-noise config
  };

  double radius_at(double y) const;
  double ridge_phase(double u, double v) const;
  Vec3 shaded_color(const Vec3& p, const Vec3& n) const;
  ViewCache cast_pose(const CameraIntrinsics& intr, const Sim3Transform& wfc) const;
  ViewCache cast_view(int i) const;
  void check_index(int i) const;

  SceneConfig cfg_;
  std::vector<Minutia3D> minutiae_;
  std::vector<CameraIntrinsics> rig_intrinsics_;
  std::vector<Sim3Transform> rig_poses_;  // world_from_camera
  std::vector<ViewCache> views_;
  double wave_phase_ = 0.0;
};

}  // namespace splatprint
