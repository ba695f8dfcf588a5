#include "rigmotion/skeleton.hpp"

#include <cmath>
#include <unordered_set>

#include "rigmotion/euler.hpp"

namespace rigmotion {

int SkeletonTopology::root() const {
  for (int j = 0; j < joint_count(); ++j) {
    if (parents[j] == kNoParent) return j;
  }
  return -1;
}

int SkeletonTopology::find(const std::string& name) const {
  for (int j = 0; j < joint_count(); ++j) {
    if (joint_names[j] == name) return j;
  }
  return -1;
}

int SkeletonTopology::depth(int joint) const {
  int d = 0;
  for (int p = parents[joint]; p != kNoParent; p = parents[p]) ++d;
  return d;
}

int SkeletonTopology::child_ordinal(int joint) const {
  const int p = parents[joint];
  if (p == kNoParent) return 0;
  const auto& siblings = child_lists[p];
  for (int i = 0; i < static_cast<int>(siblings.size()); ++i) {
    if (siblings[i] == joint) return i;
  }
  return -1;
}

SkeletonTopology SkeletonTopology::build(std::vector<std::string> names, std::vector<int> parents,
                                         std::vector<bool> end_site) {
  SkeletonTopology topo;
  const int count = static_cast<int>(names.size());
  topo.joint_names = std::move(names);
  topo.parents = std::move(parents);
  topo.end_site = end_site.empty() ? std::vector<bool>(count, false) : std::move(end_site);
  topo.child_lists.assign(count, {});
  for (int j = 0; j < count; ++j) {
    const int p = topo.parents[j];
    if (p >= 0 && p < count) topo.child_lists[p].push_back(j);
  }
  // Root-first order via an explicit stack; children visited in list order.
  topo.traversal.clear();
  topo.traversal.reserve(count);
  const int root = topo.root();
  if (root >= 0) {
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      topo.traversal.push_back(j);
      const auto& kids = topo.child_lists[j];
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
  }
  return topo;
}

namespace {

ValidationResult fail(ErrorCode code, std::string message, int joint = -1) {
  ValidationResult r;
  r.ok = false;
  r.code = code;
  r.message = std::move(message);
  r.joint = joint;
  return r;
}

}  // namespace

ValidationResult validate_topology(const SkeletonTopology& topology, int max_joints) {
  const int count = topology.joint_count();
  if (count < 1) return fail(ErrorCode::OrphanJoint, "skeleton has no joints");
  if (count > max_joints) {
    return fail(ErrorCode::JointBudgetExceeded,
                "joint count " + std::to_string(count) + " exceeds limit " + std::to_string(max_joints));
  }
  if (static_cast<int>(topology.parents.size()) != count) {
    return fail(ErrorCode::OrphanJoint, "parents array size mismatch");
  }

  std::unordered_set<std::string> seen;
  for (int j = 0; j < count; ++j) {
    if (!seen.insert(topology.joint_names[j]).second) {
      return fail(ErrorCode::DuplicateName, "duplicate joint name '" + topology.joint_names[j] + "'", j);
    }
  }

  int root = -1;
  for (int j = 0; j < count; ++j) {
    const int p = topology.parents[j];
    if (p == kNoParent) {
      if (root >= 0) return fail(ErrorCode::MultipleRoots, "joints " + std::to_string(root) + " and " + std::to_string(j) + " both lack a parent", j);
      root = j;
    } else if (p < 0 || p >= count) {
      return fail(ErrorCode::OrphanJoint, "joint " + std::to_string(j) + " references invalid parent " + std::to_string(p), j);
    }
  }
  if (root < 0) return fail(ErrorCode::CycleDetected, "no root joint; parent links form a cycle");

  // Walk each parent chain; revisiting a joint or overrunning J steps means a cycle.
  for (int j = 0; j < count; ++j) {
    int steps = 0;
    int p = j;
    while (topology.parents[p] != kNoParent) {
      p = topology.parents[p];
      if (++steps > count) return fail(ErrorCode::CycleDetected, "cycle through joint " + std::to_string(j), j);
    }
    if (p != root) return fail(ErrorCode::OrphanJoint, "joint " + std::to_string(j) + " not reachable from root", j);
  }

  // Traversal must exist, cover every joint once, and be parent-before-child.
  if (static_cast<int>(topology.traversal.size()) != count) {
    return fail(ErrorCode::OrphanJoint, "traversal does not cover every joint");
  }
  std::vector<int> order(count, -1);
  for (int i = 0; i < count; ++i) order[topology.traversal[i]] = i;
  for (int j = 0; j < count; ++j) {
    if (order[j] < 0) return fail(ErrorCode::OrphanJoint, "joint missing from traversal", j);
    const int p = topology.parents[j];
    if (p != kNoParent && order[p] >= order[j]) {
      return fail(ErrorCode::OrphanJoint, "traversal visits joint before its parent", j);
    }
  }
  return {};
}

ValidationResult validate_rig(const Rig& rig, int max_joints) {
  if (auto r = validate_topology(rig.topology, max_joints); !r) return r;
  if (rig.rest_offsets.rows() != rig.joint_count()) {
    return fail(ErrorCode::OrphanJoint, "rest_offsets row count mismatch");
  }
  const int root = rig.topology.root();
  for (int j = 0; j < rig.joint_count(); ++j) {
    if (!rig.rest_offsets.row(j).allFinite()) {
      return fail(ErrorCode::ZeroLengthBone, "non-finite rest offset", j);
    }
    if (j != root && rig.rest_offsets.row(j).norm() <= 0.0) {
      return fail(ErrorCode::ZeroLengthBone,
                  "zero-length bone at joint '" + rig.topology.joint_names[j] + "'", j);
    }
  }
  return {};
}

Eigen::VectorXd bone_lengths(const Rig& rig) {
  const int count = rig.joint_count();
  Eigen::VectorXd lengths(count);
  const int root = rig.topology.root();
  for (int j = 0; j < count; ++j) {
    lengths[j] = (j == root) ? 0.0 : rig.rest_offsets.row(j).norm();
  }
  return lengths;
}

OffsetMatrix rest_positions(const Rig& rig) {
  const int count = rig.joint_count();
  OffsetMatrix positions(count, 3);
  for (int j : rig.topology.traversal) {
    const int p = rig.topology.parents[j];
    if (p == kNoParent) {
      positions.row(j) = rig.rest_offsets.row(j);
    } else {
      positions.row(j) = positions.row(p) + rig.rest_offsets.row(j);
    }
  }
  return positions;
}

ValidationResult validate_motion(const Motion& motion, int max_joints) {
  if (auto r = validate_rig(motion.rig, max_joints); !r) return r;
  if (motion.frame_count() < 1) return fail(ErrorCode::EmptyMotion, "motion has no frames");
  const int count = motion.joint_count();
  for (int f = 0; f < motion.frame_count(); ++f) {
    if (motion.rotations[f].rows() != count) {
      return fail(ErrorCode::ShapeMismatch, "rotation block at frame " + std::to_string(f) + " has wrong joint count");
    }
    if (!motion.rotations[f].allFinite()) {
      return fail(ErrorCode::ShapeMismatch, "non-finite rotation at frame " + std::to_string(f));
    }
  }
  return {};
}

void forward_kinematics_frame(const Rig& rig, const OffsetMatrix& rotations_deg,
                              OffsetMatrix& positions, std::vector<Eigen::Matrix3d>& orientations) {
  const int count = rig.joint_count();
  positions.resize(count, 3);
  orientations.assign(count, Eigen::Matrix3d::Identity());
  for (int j : rig.topology.traversal) {
    const Eigen::Matrix3d local = euler_zxy_to_matrix(rotations_deg.row(j).transpose());
    const int p = rig.topology.parents[j];
    if (p == kNoParent) {
      positions.row(j) = rig.rest_offsets.row(j);
      orientations[j] = local;
    } else {
      positions.row(j) = positions.row(p) + (orientations[p] * rig.rest_offsets.row(j).transpose()).transpose();
      orientations[j] = orientations[p] * local;
    }
  }
}

GlobalPose forward_kinematics(const Motion& motion) {
  GlobalPose pose;
  const int frames = motion.frame_count();
  pose.positions.resize(frames);
  pose.orientations.resize(frames);
  for (int f = 0; f < frames; ++f) {
    forward_kinematics_frame(motion.rig, motion.rotations[f], pose.positions[f], pose.orientations[f]);
  }
  return pose;
}

}  // namespace rigmotion
