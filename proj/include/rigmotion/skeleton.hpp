#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rigmotion/types.hpp"

namespace rigmotion {

inline constexpr int kDefaultMaxJoints = 140;
inline constexpr int kDefaultMaxFrames = 90;
inline constexpr int kNoParent = -1;

using OffsetMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;  // one row per joint

/// Joint tree: names, parent links, derived adjacency, and a root-first
/// traversal order in which every parent precedes its children.
struct SkeletonTopology {
  std::vector<std::string> joint_names;
  std::vector<int> parents;  // kNoParent for the root
  std::vector<std::vector<int>> child_lists;
  std::vector<int> traversal;
  std::vector<bool> end_site;  // joints imported from BVH End Site blocks

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  int root() const;
  int find(const std::string& name) const;  // -1 if absent
  int depth(int joint) const;
  // Index of `joint` within its parent's child list; 0 for the root.
  int child_ordinal(int joint) const;
  bool is_leaf(int joint) const { return child_lists[joint].empty(); }

  // Derives child lists and traversal. Does not validate; callers that accept
  // untrusted parent arrays should run validate_topology first.
  static SkeletonTopology build(std::vector<std::string> names, std::vector<int> parents,
                                std::vector<bool> end_site = {});
};

struct ValidationResult {
  bool ok = true;
  ErrorCode code = ErrorCode::ConfigError;
  std::string message;
  int joint = -1;

  explicit operator bool() const { return ok; }
};

ValidationResult validate_topology(const SkeletonTopology& topology,
                                   int max_joints = kDefaultMaxJoints);

/// Static skeleton description: topology plus rest-pose offsets. Offsets are
/// relative to the parent joint; the root row is its world rest position.
struct Rig {
  SkeletonTopology topology;
  OffsetMatrix rest_offsets;

  int joint_count() const { return topology.joint_count(); }
};

// Topology checks plus offset shape and the zero-length-bone rule.
ValidationResult validate_rig(const Rig& rig, int max_joints = kDefaultMaxJoints);

// length[j] = |rest_offsets[j]| for non-root joints, 0 for the root.
Eigen::VectorXd bone_lengths(const Rig& rig);

// World-space joint positions of the rest pose (all local rotations zero):
// cumulative offsets along each root-to-joint path.
OffsetMatrix rest_positions(const Rig& rig);

/// A rig animated by per-frame local Euler rotations (degrees, Z-X-Y
/// application order). Joint translations are not modeled; the root stays at
/// its rest offset.
struct Motion {
  Rig rig;
  std::vector<OffsetMatrix> rotations;  // one J x 3 block per frame
  double frame_time = 1.0 / 30.0;

  int frame_count() const { return static_cast<int>(rotations.size()); }
  int joint_count() const { return rig.joint_count(); }
};

ValidationResult validate_motion(const Motion& motion, int max_joints = kDefaultMaxJoints);

/// World-space joint positions and orientations per frame.
struct GlobalPose {
  std::vector<OffsetMatrix> positions;
  std::vector<std::vector<Eigen::Matrix3d>> orientations;

  int frame_count() const { return static_cast<int>(positions.size()); }
};

GlobalPose forward_kinematics(const Motion& motion);

// Single-frame FK; `rotations_deg` is J x 3. Used by retargeting internals.
void forward_kinematics_frame(const Rig& rig, const OffsetMatrix& rotations_deg,
                              OffsetMatrix& positions, std::vector<Eigen::Matrix3d>& orientations);

}  // namespace rigmotion
