#pragma once

#include <array>
#include <cmath>

namespace splatprint {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }
inline bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }
  static Mat3 zero() { return Mat3{}; }
  static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    Mat3 r;
    r.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
    return r;
  }
  static Mat3 from_cols(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 r;
    r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return r;
  }
  static Mat3 diag(const Vec3& d) {
    Mat3 r;
    r.m = {d.x, 0, 0, 0, d.y, 0, 0, 0, d.z};
    return r;
  }
  // Cross-product matrix: skew(a) * b == cross(a, b).
  static Mat3 skew(const Vec3& a) {
    Mat3 r;
    r.m = {0, -a.z, a.y, a.z, 0, -a.x, -a.y, a.x, 0};
    return r;
  }
  static Mat3 outer(const Vec3& a, const Vec3& b) {
    Mat3 r;
    r.m = {a.x * b.x, a.x * b.y, a.x * b.z,
           a.y * b.x, a.y * b.y, a.y * b.z,
           a.z * b.x, a.z * b.y, a.z * b.z};
    return r;
  }

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  Vec3 row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
  Vec3 col(int c) const { return {m[c], m[c + 3], m[c + 6]}; }

  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
    return r;
  }
  Mat3 operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
    return r;
  }
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  double trace() const { return m[0] + m[4] + m[8]; }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

inline double frobenius_dot(const Mat3& a, const Mat3& b) {
  double s = 0;
  for (int i = 0; i < 9; ++i) s += a.m[i] * b.m[i];
  return s;
}

// Unit quaternion, canonicalized to w >= 0 so serialization is unique.
struct Rotation {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Rotation() = default;
  Rotation(double w_, double x_, double y_, double z_);

  static Rotation identity() { return Rotation(); }
  // Normalizes an arbitrary nonzero quaternion (used by interpolation/averaging).
  static Rotation from_unnormalized(double w, double x, double y, double z);
  // Trusts an already-canonical unit quaternion bit-for-bit (deserialization);
  // still validated to unit length within 1e-6 and w >= 0.
  static Rotation from_stored(double w, double x, double y, double z);
  static Rotation from_axis_angle(const Vec3& axis, double angle_rad);
  // Exponential map of a rotation tangent vector (axis * angle).
  static Rotation exp(const Vec3& omega);
  static Rotation from_matrix(const Mat3& m);

  Mat3 matrix() const;
  Vec3 apply(const Vec3& p) const { return matrix() * p; }
  Rotation inverse() const { return Rotation(w, -x, -y, -z); }
  Rotation operator*(const Rotation& o) const;

  double angle_rad() const;  // rotation magnitude in [0, pi]
  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

Rotation slerp(const Rotation& a, const Rotation& b, double t);
double rotation_angle_between(const Rotation& a, const Rotation& b);

// Similarity transform applied as p -> scale * (R * p + t): scale multiplies
// the rotated-and-translated point, so the stored translation is pre-scale.
struct Sim3Transform {
  double scale = 1.0;
  Rotation rotation;
  Vec3 translation;

  Sim3Transform() = default;
  Sim3Transform(double s, const Rotation& r, const Vec3& t);

  static Sim3Transform identity() { return {}; }
  static Sim3Transform rigid(const Rotation& r, const Vec3& t) { return {1.0, r, t}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation.apply(p) + translation); }
  Sim3Transform inverse() const;
};

Vec3 sim3_apply(const Sim3Transform& t, const Vec3& p);
// compose(a, b) applies b first: apply(compose(a,b), p) == apply(a, apply(b, p)).
Sim3Transform sim3_compose(const Sim3Transform& a, const Sim3Transform& b);
Sim3Transform sim3_inverse(const Sim3Transform& a);

constexpr double kPi = 3.14159265358979323846;
inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace splatprint
