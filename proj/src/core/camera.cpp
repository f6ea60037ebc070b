#include "core/camera.hpp"

#include "core/errors.hpp"

namespace splatprint {

CameraIntrinsics::CameraIntrinsics(double f, double cx_, double cy_, int w, int h)
    : focal_px(f), cx(cx_), cy(cy_), width(w), height(h) {
  require(w > 0 && h > 0, ErrorCode::InvalidArgument, "image dimensions must be positive");
  require(f > 0.0, ErrorCode::InvalidArgument, "focal length must be positive");
  require(cx_ > 0.0 && cx_ < w && cy_ > 0.0 && cy_ < h, ErrorCode::InvalidArgument,
          "principal point must lie inside the image");
}

std::pair<double, double> project(const CameraIntrinsics& intr, const Vec3& p_cam) {
  require(p_cam.z > 1e-9, ErrorCode::NonPositiveDepth,
          "cannot project a point at or behind the camera plane");
  return {intr.focal_px * p_cam.x / p_cam.z + intr.cx,
          intr.focal_px * p_cam.y / p_cam.z + intr.cy};
}

Vec3 unproject(const CameraIntrinsics& intr, double u, double v, double depth) {
  require(depth > 0.0, ErrorCode::NonPositiveDepth, "unproject needs positive depth");
  return {(u - intr.cx) * depth / intr.focal_px, (v - intr.cy) * depth / intr.focal_px, depth};
}

Sim3Transform look_at_pose(const Vec3& camera_center, const Vec3& target, const Vec3& world_up) {
  Vec3 forward = normalized(target - camera_center);
  Vec3 right = cross(forward, world_up);
  require(norm(right) > 1e-9, ErrorCode::InvalidArgument,
          "camera forward axis is parallel to world up");
  right = normalized(right);
  Vec3 down = cross(forward, right);
  Mat3 r_wc = Mat3::from_cols(right, down, forward);
  return Sim3Transform::rigid(Rotation::from_matrix(r_wc), camera_center);
}

}  // namespace splatprint
