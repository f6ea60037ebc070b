#include "core/linalg.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace splatprint {

Rotation::Rotation(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  require(std::isfinite(n) && n > 0.0, ErrorCode::InvalidArgument,
          "rotation quaternion must be finite and nonzero");
  require(std::abs(n - 1.0) < 1e-6, ErrorCode::InvalidArgument,
          "rotation quaternion must be unit length");
  w /= n; x /= n; y /= n; z /= n;
  if (w < 0.0) { w = -w; x = -x; y = -y; z = -z; }
}

Rotation Rotation::from_stored(double w, double x, double y, double z) {
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  require(std::isfinite(n) && std::abs(n - 1.0) < 1e-6 && w >= 0.0, ErrorCode::InvalidArgument,
          "stored quaternion must be canonical unit form");
  Rotation r;
  r.w = w; r.x = x; r.y = y; r.z = z;
  return r;
}

Rotation Rotation::from_unnormalized(double w, double x, double y, double z) {
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  require(std::isfinite(n) && n > 1e-300, ErrorCode::InvalidArgument,
          "quaternion must be finite and nonzero");
  return Rotation(w / n, x / n, y / n, z / n);
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle_rad) {
  double n = splatprint::norm(axis);
  require(n > 0.0, ErrorCode::InvalidArgument, "rotation axis must be nonzero");
  double half = 0.5 * angle_rad;
  double s = std::sin(half) / n;
  return Rotation(std::cos(half), axis.x * s, axis.y * s, axis.z * s);
}

Rotation Rotation::exp(const Vec3& omega) {
  double theta = splatprint::norm(omega);
  if (theta < 1e-12) {
    // First-order quaternion; constructor renormalizes.
    return Rotation(1.0, 0.5 * omega.x, 0.5 * omega.y, 0.5 * omega.z);
  }
  return from_axis_angle(omega, theta);
}

Mat3 Rotation::matrix() const {
  Mat3 m;
  double xx = x * x, yy = y * y, zz = z * z;
  double xy = x * y, xz = x * z, yz = y * z;
  double wx = w * x, wy = w * y, wz = w * z;
  m.m = {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
         2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
         2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
  return m;
}

Rotation Rotation::from_matrix(const Mat3& m) {
  // Shepperd's method: pick the numerically largest quaternion component.
  double t = m.trace();
  double qw, qx, qy, qz;
  if (t > 0.0) {
    double s = std::sqrt(t + 1.0) * 2.0;
    qw = 0.25 * s;
    qx = (m(2, 1) - m(1, 2)) / s;
    qy = (m(0, 2) - m(2, 0)) / s;
    qz = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
    qw = (m(2, 1) - m(1, 2)) / s;
    qx = 0.25 * s;
    qy = (m(0, 1) + m(1, 0)) / s;
    qz = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
    qw = (m(0, 2) - m(2, 0)) / s;
    qx = (m(0, 1) + m(1, 0)) / s;
    qy = 0.25 * s;
    qz = (m(1, 2) + m(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
    qw = (m(1, 0) - m(0, 1)) / s;
    qx = (m(0, 2) + m(2, 0)) / s;
    qy = (m(1, 2) + m(2, 1)) / s;
    qz = 0.25 * s;
  }
  return Rotation(qw, qx, qy, qz);
}

Rotation Rotation::operator*(const Rotation& o) const {
  return Rotation(w * o.w - x * o.x - y * o.y - z * o.z,
                  w * o.x + x * o.w + y * o.z - z * o.y,
                  w * o.y - x * o.z + y * o.w + z * o.x,
                  w * o.z + x * o.y - y * o.x + z * o.w);
}

double Rotation::angle_rad() const {
  double c = std::clamp(std::abs(w), 0.0, 1.0);
  return 2.0 * std::acos(c);
}

Rotation slerp(const Rotation& a, const Rotation& b, double t) {
  double cw = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  double bw = b.w, bx = b.x, by = b.y, bz = b.z;
  if (cw < 0.0) { cw = -cw; bw = -bw; bx = -bx; by = -by; bz = -bz; }
  double k0, k1;
  if (cw > 1.0 - 1e-12) {
    k0 = 1.0 - t;  // nearly parallel: lerp, renormalized by the constructor
    k1 = t;
  } else {
    double theta = std::acos(std::clamp(cw, -1.0, 1.0));
    double s = std::sin(theta);
    k0 = std::sin((1.0 - t) * theta) / s;
    k1 = std::sin(t * theta) / s;
  }
  return Rotation(k0 * a.w + k1 * bw, k0 * a.x + k1 * bx, k0 * a.y + k1 * by,
                  k0 * a.z + k1 * bz);
}

double rotation_angle_between(const Rotation& a, const Rotation& b) {
  return (a.inverse() * b).angle_rad();
}

Sim3Transform::Sim3Transform(double s, const Rotation& r, const Vec3& t)
    : scale(s), rotation(r), translation(t) {
  require(std::isfinite(s) && s > 0.0, ErrorCode::InvalidArgument,
          "sim3 scale must be finite and positive");
  require(finite(t), ErrorCode::InvalidArgument, "sim3 translation must be finite");
}

Sim3Transform Sim3Transform::inverse() const { return sim3_inverse(*this); }

Vec3 sim3_apply(const Sim3Transform& t, const Vec3& p) { return t.apply(p); }

Sim3Transform sim3_compose(const Sim3Transform& a, const Sim3Transform& b) {
  // a(b(p)) = sa*sb * (Ra Rb p + Ra tb + ta/sb)
  Sim3Transform c;
  c.scale = a.scale * b.scale;
  c.rotation = a.rotation * b.rotation;
  c.translation = a.rotation.apply(b.translation) + a.translation / b.scale;
  return c;
}

Sim3Transform sim3_inverse(const Sim3Transform& a) {
  Sim3Transform inv;
  inv.scale = 1.0 / a.scale;
  inv.rotation = a.rotation.inverse();
  inv.translation = inv.rotation.apply(a.translation) * (-a.scale);
  return inv;
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegeneratePointmap: return "DegeneratePointmap";
    case ErrorCode::DegenerateCorrespondences: return "DegenerateCorrespondences";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::AllPruned: return "AllPruned";
    case ErrorCode::NoViews: return "NoViews";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NoSharedMinutiae: return "NoSharedMinutiae";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::InvalidCount: return "InvalidCount";
    case ErrorCode::StageFailed: return "StageFailed";
  }
  return "Unknown";
}

}  // namespace splatprint
