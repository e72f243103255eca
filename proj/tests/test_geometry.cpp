#include <cmath>
#include <cstdio>
#include <filesystem>

#include "attnpose/geometry.hpp"
#include "attnpose/pose_io.hpp"
#include "attnpose/rng.hpp"
#include "doctest.h"

using namespace attnpose;

namespace {

constexpr double kPi = 3.14159265358979323846;

UnitQuaternion random_unit(Rng& rng) {
  double u, x, y, z, n;
  do {
    u = rng.normal();
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n = std::sqrt(u * u + x * x + y * y + z * z);
  } while (n < 1e-3);
  return {u / n, {x / n, y / n, z / n}};
}

double quat_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double du = a.u - b.u;
  return std::sqrt(du * du + (a.v - b.v).squared_norm());
}

}  // namespace

TEST_CASE("canonicalize maps both hemisphere representatives to one form") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const UnitQuaternion q = random_unit(rng);
    const UnitQuaternion c1 = canonicalize(q);
    const UnitQuaternion c2 = canonicalize(q.negated());
    CHECK(c1.u == c2.u);
    CHECK(c1.v.x == c2.v.x);
    CHECK(c1.v.y == c2.v.y);
    CHECK(c1.v.z == c2.v.z);
    CHECK(c1.u >= 0.0);
  }
}

TEST_CASE("canonicalize tie-break at zero scalar part") {
  const UnitQuaternion a = canonicalize({0.0, {-1.0, 0.0, 0.0}});
  CHECK(a.v.x == 1.0);
  const UnitQuaternion b = canonicalize({0.0, {0.0, -0.6, 0.8}});
  CHECK(b.v.y == 0.6);
  CHECK(b.v.z == -0.8);
  const UnitQuaternion c = canonicalize({0.0, {0.0, 0.0, -1.0}});
  CHECK(c.v.z == 1.0);
  const UnitQuaternion d = canonicalize({0.0, {0.0, 0.6, -0.8}});
  CHECK(d.v.y == 0.6);
  CHECK(d.v.z == -0.8);
}

TEST_CASE("canonicalize rejects non-unit input") {
  CHECK_THROWS_AS(canonicalize({1.1, {0.0, 0.0, 0.0}}), InvalidQuaternionError);
  CHECK_THROWS_AS(canonicalize({0.5, {0.5, 0.5, 0.0}}), InvalidQuaternionError);
  CHECK_NOTHROW(canonicalize({1.0 + 5e-7, {0.0, 0.0, 0.0}}));
}

TEST_CASE("log map of a rotation about x") {
  const UnitQuaternion q = from_axis_angle({1.0, 0.0, 0.0}, 0.6);
  const LogQuaternion w = quat_log(q);
  CHECK(w.w.x == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(w.w.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.w.z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("log of identity is zero, exp of zero is identity") {
  const LogQuaternion w = quat_log(UnitQuaternion::identity());
  CHECK(w.w.x == 0.0);
  CHECK(w.w.y == 0.0);
  CHECK(w.w.z == 0.0);
  const UnitQuaternion q = quat_exp(LogQuaternion{});
  CHECK(q.u == 1.0);
  CHECK(q.v.norm() == 0.0);
}

TEST_CASE("exp(log q) round-trips canonical quaternions") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const UnitQuaternion q = canonicalize(random_unit(rng));
    const UnitQuaternion r = quat_exp(quat_log(q));
    CHECK(quat_distance(q, r) < 1e-9);
  }
}

TEST_CASE("log(exp w) round-trips tangent vectors inside the injectivity ball") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    Vec3 w{rng.normal(), rng.normal(), rng.normal()};
    const double n = w.norm();
    if (n > 0.0) {
      const double scale = rng.uniform(0.0, kPi / 2 - 1e-3) / n;
      w = w * scale;
    }
    const LogQuaternion back = quat_log(quat_exp(LogQuaternion{w}));
    CHECK((back.w - w).norm() < 1e-9);
  }
}

TEST_CASE("exp rejects non-finite input") {
  CHECK_THROWS_AS(quat_exp(LogQuaternion{std::nan(""), 0.0, 0.0}), NumericError);
}

TEST_CASE("compose accumulates angles about a shared axis") {
  const UnitQuaternion a = from_axis_angle({0.0, 0.0, 1.0}, 0.4);
  const UnitQuaternion b = from_axis_angle({0.0, 0.0, 1.0}, 0.5);
  const UnitQuaternion c = compose(a, b);
  const UnitQuaternion expect = from_axis_angle({0.0, 0.0, 1.0}, 0.9);
  CHECK(quat_distance(c, expect) < 1e-12);
}

TEST_CASE("rotation matrix of a 90 degree yaw") {
  const UnitQuaternion q = from_axis_angle({0.0, 0.0, 1.0}, kPi / 2);
  const Mat3 r = to_rotation_matrix(q);
  CHECK(r(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r(2, 2) == doctest::Approx(1.0).epsilon(1e-12));

  const UnitQuaternion back = from_rotation_matrix(r);
  const double s = std::sqrt(0.5);
  CHECK(back.u == doctest::Approx(s).epsilon(1e-12));
  CHECK(back.v.z == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("matrix round-trip over random rotations") {
  Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    const UnitQuaternion q = canonicalize(random_unit(rng));
    const UnitQuaternion back = from_rotation_matrix(to_rotation_matrix(q));
    CHECK(quat_distance(q, back) < 1e-9);
  }
}

TEST_CASE("rotating a vector matches the matrix form") {
  Rng rng(14);
  for (int i = 0; i < 50; ++i) {
    const UnitQuaternion q = canonicalize(random_unit(rng));
    const Vec3 p{rng.normal(), rng.normal(), rng.normal()};
    const Mat3 r = to_rotation_matrix(q);
    // Conjugation q * (0, p) * q^-1 written out via two Hamilton products.
    const UnitQuaternion pq{0.0, p};
    const UnitQuaternion tmp{q.u * pq.u - q.v.dot(pq.v), q.v * pq.u + pq.v * q.u + q.v.cross(pq.v)};
    const UnitQuaternion qinv{q.u, -q.v};
    const Vec3 rotated = tmp.v * qinv.u + qinv.v * tmp.u + tmp.v.cross(qinv.v);
    CHECK((rotated - r * p).norm() < 1e-12);
  }
}

TEST_CASE("from_rotation_matrix rejects a non-orthonormal block") {
  Mat3 r;
  r(0, 0) = 1.01;
  CHECK_THROWS_AS(from_rotation_matrix(r), InvalidQuaternionError);
  Mat3 refl;
  refl(0, 0) = -1.0;
  CHECK_THROWS_AS(from_rotation_matrix(refl), InvalidQuaternionError);
}

TEST_CASE("position error is the euclidean distance") {
  CHECK(position_error({0, 0, 0}, {1, 2, 2}) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(position_error({1, 1, 1}, {1, 1, 1}) == 0.0);
}

TEST_CASE("rotation error in degrees") {
  const UnitQuaternion id = UnitQuaternion::identity();
  CHECK(rotation_error(id, id) == 0.0);
  const UnitQuaternion q = from_axis_angle({0.0, 1.0, 0.0}, 0.3);
  CHECK(rotation_error(id, q) == doctest::Approx(17.188733853924695).epsilon(1e-10));
  const UnitQuaternion yaw90 = from_axis_angle({0.0, 0.0, 1.0}, kPi / 2);
  CHECK(std::abs(rotation_error(id, yaw90) - 90.0) < 1e-9);
  // arccos near |dot| = 1 amplifies one-ulp noise to ~1e-6 degrees.
  CHECK(rotation_error(q, q.negated()) < 1e-5);
}

TEST_CASE("rotation error is symmetric and bounded") {
  Rng rng(15);
  for (int i = 0; i < 200; ++i) {
    const UnitQuaternion a = random_unit(rng);
    const UnitQuaternion b = random_unit(rng);
    const double e1 = rotation_error(a, b);
    const double e2 = rotation_error(b, a);
    CHECK(e1 == doctest::Approx(e2).epsilon(1e-12));
    CHECK(e1 >= 0.0);
    CHECK(e1 <= 180.0 + 1e-9);
  }
}

TEST_CASE("relative pose differences live in position and tangent space") {
  const Pose a{{1.0, 2.0, 3.0}, from_axis_angle({1, 0, 0}, 0.6)};
  const Pose b{{0.5, 0.0, 1.0}, from_axis_angle({1, 0, 0}, 0.2)};
  const RelativePose d = relative_pose(a, b);
  CHECK(d.dp.x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.dp.y == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(d.dp.z == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(d.dq.x == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(d.dq.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.dq.z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pose text files round-trip exactly") {
  Rng rng(16);
  Trajectory traj;
  for (int i = 0; i < 32; ++i) {
    TimedPose tp;
    tp.timestamp = static_cast<double>(i) + rng.uniform();
    tp.pose = Pose{{rng.normal(), rng.normal(), rng.normal()}, canonicalize(random_unit(rng))};
    traj.push_back(tp);
  }
  const std::string path = (std::filesystem::temp_directory_path() / "poses_rt.txt").string();
  write_pose_text(traj, path);
  const Trajectory back = read_pose_text(path);
  REQUIRE(back.size() == traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].timestamp == traj[i].timestamp);
    CHECK(back[i].pose.p.x == traj[i].pose.p.x);
    CHECK(back[i].pose.q.u == traj[i].pose.q.u);
    CHECK(back[i].pose.q.v.z == traj[i].pose.q.v.z);
  }
  std::filesystem::remove(path);
}

TEST_CASE("pose text reader skips comments and flags bad lines") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string good = (dir / "poses_good.txt").string();
  {
    std::FILE* f = std::fopen(good.c_str(), "w");
    std::fputs("# header\n\n0.5 1 2 3 1 0 0 0\n", f);
    std::fclose(f);
  }
  const Trajectory t = read_pose_text(good);
  REQUIRE(t.size() == 1);
  CHECK(t[0].pose.p.y == 2.0);
  std::filesystem::remove(good);

  const std::string bad = (dir / "poses_bad.txt").string();
  {
    std::FILE* f = std::fopen(bad.c_str(), "w");
    std::fputs("0.5 1 2 3 1 0 0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_pose_text(bad), IngestionError);
  std::filesystem::remove(bad);

  const std::string off = (dir / "poses_offunit.txt").string();
  {
    std::FILE* f = std::fopen(off.c_str(), "w");
    std::fputs("0.5 1 2 3 2 0 0 0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_pose_text(off), IngestionError);
  std::filesystem::remove(off);
}

TEST_CASE("matrix pose files round-trip") {
  Rng rng(17);
  const Pose pose{{0.25, -1.5, 3.75}, canonicalize(random_unit(rng))};
  const std::string path = (std::filesystem::temp_directory_path() / "pose_mat.txt").string();
  write_pose_matrix(pose, path);
  const Pose back = read_pose_matrix(path);
  CHECK((back.p - pose.p).norm() < 1e-12);
  CHECK(quat_distance(back.q, pose.q) < 1e-9);
  std::filesystem::remove(path);
}
