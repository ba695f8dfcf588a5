#pragma once

#include <Eigen/Core>
#include <string>

#include "rigmotion/bvh.hpp"

namespace rigmotion {

// Parses a signed axis name ("+X", "-Y", "Z", ...) into a unit vector.
// Throws ConfigError on anything else.
Eigen::Vector3d parse_axis(const std::string& name);

/// Source and target orientation for normalization. Defaults assume the rig
/// already faces -Y with +Z up, which makes preprocess a pure scale+center.
struct AxisConfig {
  Eigen::Vector3d source_forward = -Eigen::Vector3d::UnitY();
  Eigen::Vector3d source_up = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d target_forward = -Eigen::Vector3d::UnitY();
  Eigen::Vector3d target_up = Eigen::Vector3d::UnitZ();
};

// Rotation taking the source frame onto the target frame. Forward and up must
// be non-zero and mutually orthogonal on each side (ConfigError otherwise).
Eigen::Matrix3d rotation_for_axes(const AxisConfig& axes);

struct BoundingBox {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  Eigen::Vector3d extent() const { return max - min; }
  double longest_side() const { return extent().maxCoeff(); }
};

BoundingBox rest_bounding_box(const Rig& rig);

// Uniformly scales all offsets so the rest-pose bounding box's longest side
// is 1; returns the factor applied. Throws DegenerateBoundingBox when every
// rest-pose joint coincides. Bone-length ratios are preserved exactly, and
// factors within 1e-12 of unity are snapped to exactly 1 so re-normalizing
// is bit-stable.
double normalize_rest_scale(Rig& rig);

// Moves the rest-pose bounding-box center to the origin by adjusting the
// root offset only.
void center_rest_pose(Rig& rig);

// Full normalization: rotate the rig (and re-express every frame's rotations)
// so source axes land on target axes, scale the rest bounding box's longest
// side to 1, then center it at the origin. Idempotent once axes agree.
BvhDocument preprocess(const BvhDocument& doc, const AxisConfig& axes = {});

// Applies a rigid rotation to a whole motion: every offset becomes q*offset
// and every local rotation is conjugated by q and re-extracted, so world
// positions of every frame rotate by exactly q.
void rotate_motion(Motion& motion, const Eigen::Matrix3d& q);

}  // namespace rigmotion
