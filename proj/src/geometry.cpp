#include "attnpose/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace attnpose {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

void require_unit(const UnitQuaternion& q, const char* op) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitNormTolerance) {
    throw InvalidQuaternionError(std::string(op) + ": quaternion norm " + std::to_string(n) +
                                 " deviates from 1 beyond 1e-6");
  }
}

UnitQuaternion renormalized(const UnitQuaternion& q) {
  const double n = q.norm();
  return {q.u / n, q.v / n};
}

}  // namespace

UnitQuaternion canonicalize(const UnitQuaternion& q) {
  require_unit(q, "canonicalize");
  UnitQuaternion r = renormalized(q);
  if (r.u > 0.0) return r;
  if (r.u < 0.0) return r.negated();
  // u == 0: make the first nonzero imaginary component positive.
  const double c[3] = {r.v.x, r.v.y, r.v.z};
  for (double ci : c) {
    if (ci != 0.0) return ci > 0.0 ? r : r.negated();
  }
  return r;
}

LogQuaternion quat_log(const UnitQuaternion& q) {
  require_unit(q, "quat_log");
  const UnitQuaternion r = renormalized(q);
  const double vn = r.v.norm();
  if (vn <= kLogEpsilon) return LogQuaternion{};
  const double angle = std::acos(std::clamp(r.u, -1.0, 1.0));
  return LogQuaternion{r.v * (angle / vn)};
}

UnitQuaternion quat_exp(const LogQuaternion& w) {
  if (!w.w.finite()) throw NumericError("quat_exp: non-finite input");
  const double wn = w.w.norm();
  if (wn <= kLogEpsilon) return renormalized({1.0, w.w});
  return {std::cos(wn), w.w * (std::sin(wn) / wn)};
}

UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.u * b.u - a.v.dot(b.v), a.u * b.v + b.u * a.v + a.v.cross(b.v)};
}

UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (n == 0.0) return UnitQuaternion::identity();
  const double half = 0.5 * angle_rad;
  return {std::cos(half), axis * (std::sin(half) / n)};
}

Mat3 to_rotation_matrix(const UnitQuaternion& q) {
  const double u = q.u, x = q.v.x, y = q.v.y, z = q.v.z;
  Mat3 r;
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - u * z);
  r(0, 2) = 2 * (x * z + u * y);
  r(1, 0) = 2 * (x * y + u * z);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - u * x);
  r(2, 0) = 2 * (x * z - u * y);
  r(2, 1) = 2 * (y * z + u * x);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

UnitQuaternion from_rotation_matrix(const Mat3& r, double tol) {
  // Orthonormality: max |R^T R - I| entry within tol, det within tol of +1.
  double max_dev = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += r(k, i) * r(k, j);
      max_dev = std::max(max_dev, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                     r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                     r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  if (!std::isfinite(max_dev) || max_dev > tol || std::abs(det - 1.0) > 10.0 * tol) {
    throw InvalidQuaternionError("from_rotation_matrix: matrix not orthonormal (dev " +
                                 std::to_string(max_dev) + ", det " + std::to_string(det) + ")");
  }

  // Shepperd's method: branch on the largest of trace and diagonal entries.
  const double t = r(0, 0) + r(1, 1) + r(2, 2);
  UnitQuaternion q;
  if (t >= r(0, 0) && t >= r(1, 1) && t >= r(2, 2)) {
    const double s = std::sqrt(t + 1.0) * 2.0;
    q = {0.25 * s, {(r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s}};
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = {(r(2, 1) - r(1, 2)) / s,
         {0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s}};
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q = {(r(0, 2) - r(2, 0)) / s,
         {(r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s}};
  } else {
    const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q = {(r(1, 0) - r(0, 1)) / s,
         {(r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s}};
  }
  return canonicalize(q);
}

double position_error(const Vec3& p, const Vec3& p_hat) { return (p - p_hat).norm(); }

double rotation_error(const UnitQuaternion& q, const UnitQuaternion& q_hat) {
  const double dot = q.u * q_hat.u + q.v.dot(q_hat.v);
  constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
  return 2.0 * std::acos(clamp01(std::abs(dot))) * kRadToDeg;
}

RelativePose relative_pose(const Pose& a, const Pose& b) {
  return {a.p - b.p, quat_log(a.q).w - quat_log(b.q).w};
}

}  // namespace attnpose
