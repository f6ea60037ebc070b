#pragma once

#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/linalg.hpp"

namespace splatprint {

// Pinhole with square pixels and zero skew; a single focal length in pixels.
struct CameraIntrinsics {
  double focal_px = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double f, double cx_, double cy_, int w, int h);
};

// Projects a camera-frame point; requires z > 1e-9 (NonPositiveDepth otherwise).
std::pair<double, double> project(const CameraIntrinsics& intr, const Vec3& p_cam);
// Inverse of project at the given depth.
Vec3 unproject(const CameraIntrinsics& intr, double u, double v, double depth);

struct PixelMinutia {
  int id = 0;
  double x = 0.0, y = 0.0;  // continuous pixel coordinates
};

struct CameraView {
  CameraIntrinsics intrinsics;
  Sim3Transform world_from_camera;  // scale fixed to 1
  ImageBuffer image;
  BitMask mask;
  std::vector<PixelMinutia> minutiae_px;
};

// Camera frame: +z forward, +x right, image v grows downward.
Sim3Transform look_at_pose(const Vec3& camera_center, const Vec3& target, const Vec3& world_up);

}  // namespace splatprint
