#pragma once

// Quaternion and pose math for camera localization: log/exp maps, hemisphere
// canonicalization, relative poses, and the position/rotation error metrics.
//
// Conventions:
//  * Quaternions are scalar-first (u, vx, vy, vz), Hamilton convention.
//  * Canonical form: u >= 0; at u == 0 the first nonzero imaginary component
//    is made positive so every rotation has exactly one representative.
//  * The log map follows log q = (v/||v||) * arccos(u), half the rotation
//    angle in magnitude; exp is its exact inverse.
//  * All functions are pure and thread-safe.

#include <array>
#include <cmath>
#include <vector>

#include "attnpose/errors.hpp"

namespace attnpose {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr Vec3 operator+(const Vec3& b) const { return {x + b.x, y + b.y, z + b.z}; }
  constexpr Vec3 operator-(const Vec3& b) const { return {x - b.x, y - b.y, z - b.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& b) {
    x += b.x;
    y += b.y;
    z += b.z;
    return *this;
  }

  constexpr double dot(const Vec3& b) const { return x * b.x + y * b.y + z * b.z; }
  constexpr Vec3 cross(const Vec3& b) const {
    return {y * b.z - z * b.y, z * b.x - x * b.z, x * b.y - y * b.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  constexpr double squared_norm() const { return dot(*this); }
  double l1_norm() const { return std::abs(x) + std::abs(y) + std::abs(z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Unit quaternion, scalar part u and imaginary part v.
struct UnitQuaternion {
  double u = 1.0;
  Vec3 v;

  constexpr UnitQuaternion() = default;
  constexpr UnitQuaternion(double u_, const Vec3& v_) : u(u_), v(v_) {}

  double norm() const { return std::sqrt(u * u + v.squared_norm()); }
  UnitQuaternion negated() const { return {-u, -v}; }

  static UnitQuaternion identity() { return {}; }
};

// Tangent-space rotation representation; ||w|| <= pi/2 for canonical inputs.
struct LogQuaternion {
  Vec3 w;

  constexpr LogQuaternion() = default;
  constexpr explicit LogQuaternion(const Vec3& w_) : w(w_) {}
  constexpr LogQuaternion(double a, double b, double c) : w(a, b, c) {}
};

// Row-major 3x3 matrix, used for rotation-matrix pose files and rendering.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[static_cast<size_t>(r) * 3 + static_cast<size_t>(c)]; }
  double operator()(int r, int c) const {
    return m[static_cast<size_t>(r) * 3 + static_cast<size_t>(c)];
  }
  Vec3 operator*(const Vec3& p) const {
    return {m[0] * p.x + m[1] * p.y + m[2] * p.z, m[3] * p.x + m[4] * p.y + m[5] * p.z,
            m[6] * p.x + m[7] * p.y + m[8] * p.z};
  }
  Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }
};

// Tolerance for accepting an input quaternion as unit-norm.
inline constexpr double kUnitNormTolerance = 1e-6;
// Below this imaginary-part norm the log map returns the zero vector.
inline constexpr double kLogEpsilon = 1e-8;

// Maps q to its canonical-hemisphere representative (u >= 0; tie-break at
// u == 0 makes the first nonzero imaginary component positive). Throws
// InvalidQuaternionError when ||q|| deviates from 1 by more than 1e-6.
UnitQuaternion canonicalize(const UnitQuaternion& q);

// log q = (v/||v||) * arccos(u), zero vector when ||v|| <= 1e-8.
LogQuaternion quat_log(const UnitQuaternion& q);

// exp w = (cos||w||, (w/||w||) sin||w||); exact inverse of quat_log on the
// canonical hemisphere. Throws NumericError on non-finite input.
UnitQuaternion quat_exp(const LogQuaternion& w);

// Hamilton product a*b (apply b first, then a, for column-vector rotation).
UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b);

// Rotation of `angle_rad` radians about `axis` (need not be unit length).
UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad);

Mat3 to_rotation_matrix(const UnitQuaternion& q);

// Shepperd-style conversion; `tol` bounds the allowed deviation of R^T R
// from identity (and of det R from +1). Throws InvalidQuaternionError.
UnitQuaternion from_rotation_matrix(const Mat3& r, double tol = 1e-4);

// Euclidean distance ||p - p_hat||, meters.
double position_error(const Vec3& p, const Vec3& p_hat);

// Geodesic angle 2*arccos(|<q, q_hat>|) in degrees, in [0, 180].
double rotation_error(const UnitQuaternion& q, const UnitQuaternion& q_hat);

// Camera pose: position in meters plus canonical orientation. The
// constructor canonicalizes, so a stored pose always satisfies u >= 0.
struct Pose {
  Vec3 p;
  UnitQuaternion q;

  Pose() = default;
  Pose(const Vec3& p_, const UnitQuaternion& q_) : p(p_), q(canonicalize(q_)) {}
};

// Differences consumed by the temporal loss: dp in position space, dq in
// log-quaternion space (difference of the canonical log maps).
struct RelativePose {
  Vec3 dp;
  Vec3 dq;
};

RelativePose relative_pose(const Pose& a, const Pose& b);

}  // namespace attnpose
