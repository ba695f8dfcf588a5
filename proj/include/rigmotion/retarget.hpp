#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rigmotion/skeleton.hpp"

namespace rigmotion {

// Minimal rotation taking unit vector `a` onto unit vector `b` (Rodrigues).
// The antiparallel case returns a 180-degree turn about a deterministic
// perpendicular axis.
Eigen::Matrix3d rotation_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// Least-squares rotation R minimizing sum |R*from[i] - to[i]|^2 over unit
// directions (orthogonal Procrustes via SVD, det corrected to +1). When the
// directions are nearly collinear the problem degenerates to a single-vector
// alignment of the mean directions, solved by rotation_between for
// determinism.
Eigen::Matrix3d solve_wahba(const std::vector<Eigen::Vector3d>& from,
                            const std::vector<Eigen::Vector3d>& to);

struct RetargetReport {
  // Largest |achieved_dir - target_dir| over all frames and constrained
  // children; zero when every target bundle is exactly realizable.
  double max_direction_error = 0.0;
  int degenerate_holds = 0;  // frames where a zero-length target froze a joint
  std::vector<std::string> warnings;
};

// Re-derives local rotations frame by frame so the new rig's forward
// kinematics track the target world positions. `target_positions` holds one
// S x 3 matrix per frame (S position streams); joint_map[j] names the stream
// constraining new-rig joint j, or -1 for unconstrained joints.
//
// Joints are solved root-first: each local rotation is the one best aligning
// the rest directions of the joint's constrained children with the target
// directions (single child: minimal rotation; several: least-squares).
// Unconstrained joints get identity rotation; a non-leaf joint with no
// constrained children additionally earns a warning. A zero-length target
// direction holds the previous frame's rotation for that joint.
Motion retarget_to_rig(const std::vector<OffsetMatrix>& target_positions, const Rig& new_rig,
                       const std::vector<int>& joint_map, double frame_time,
                       RetargetReport* report = nullptr);

}  // namespace rigmotion
