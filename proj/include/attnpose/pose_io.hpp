#pragma once

// Pose file formats.
//
// Text trajectories: one pose per line,
//   timestamp tx ty tz qu qvx qvy qvz
// whitespace-separated, quaternion scalar-first, canonicalized on read.
// Blank lines and lines starting with '#' are skipped.
//
// Matrix poses: a single 4x4 homogeneous matrix per file, 16 floats in
// row-major order separated by whitespace (the layout used by 7-Scenes-style
// datasets). The rotation block must be orthonormal within 1e-4.

#include <string>
#include <vector>

#include "attnpose/geometry.hpp"

namespace attnpose {

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

using Trajectory = std::vector<TimedPose>;

Trajectory read_pose_text(const std::string& path);
void write_pose_text(const Trajectory& traj, const std::string& path);

Pose read_pose_matrix(const std::string& path);
void write_pose_matrix(const Pose& pose, const std::string& path);

}  // namespace attnpose
