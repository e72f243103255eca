#include "attnpose/pose_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace attnpose {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Trajectory read_pose_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open pose file: " + path);
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qu, qx, qy, qz;
    if (!(ss >> t >> tx >> ty >> tz >> qu >> qx >> qy >> qz)) {
      throw IngestionError(path + ":" + std::to_string(lineno) + ": malformed pose line");
    }
    try {
      traj.push_back({t, Pose{{tx, ty, tz}, {qu, {qx, qy, qz}}}});
    } catch (const InvalidQuaternionError& e) {
      throw IngestionError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traj;
}

void write_pose_text(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write pose file: " + path);
  for (const auto& tp : traj) {
    out << format_double(tp.timestamp) << ' ' << format_double(tp.pose.p.x) << ' '
        << format_double(tp.pose.p.y) << ' ' << format_double(tp.pose.p.z) << ' '
        << format_double(tp.pose.q.u) << ' ' << format_double(tp.pose.q.v.x) << ' '
        << format_double(tp.pose.q.v.y) << ' ' << format_double(tp.pose.q.v.z) << '\n';
  }
}

Pose read_pose_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open pose matrix file: " + path);
  double m[16];
  for (double& v : m) {
    if (!(in >> v)) throw IngestionError(path + ": expected 16 floats (4x4 row-major)");
  }
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = m[i * 4 + j];
  try {
    return Pose{{m[3], m[7], m[11]}, from_rotation_matrix(r)};
  } catch (const InvalidQuaternionError& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

void write_pose_matrix(const Pose& pose, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write pose matrix file: " + path);
  const Mat3 r = to_rotation_matrix(pose.q);
  const double t[3] = {pose.p.x, pose.p.y, pose.p.z};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double v;
      if (i < 3 && j < 3) {
        v = r(i, j);
      } else if (i < 3) {
        v = t[i];
      } else {
        v = (j == 3) ? 1.0 : 0.0;
      }
      out << format_double(v) << (j == 3 ? '\n' : ' ');
    }
  }
}

}  // namespace attnpose
