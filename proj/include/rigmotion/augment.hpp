#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rigmotion/skeleton.hpp"

namespace rigmotion {

/// A named set of joints whose parent bones are scaled together by one
/// factor drawn from [lo, hi]. Listing the root is allowed but has no effect
/// (the root offset is a position, not a bone).
struct PartGroup {
  std::string name;
  std::vector<std::string> joints;
  double lo = 0.8;
  double hi = 1.2;
};

struct PartGroupConfig {
  std::vector<PartGroup> groups;
  // Mirrored groups always draw the identical factor. Pairs must name
  // existing groups of equal size with equal ranges.
  std::vector<std::pair<std::string, std::string>> symmetry_pairs;

  int find_group(const std::string& name) const;
};

// Groups must reference existing joints, be pairwise disjoint, and keep
// lo <= hi within [0.8, 1.2]; symmetry pairs must map one-to-one.
ValidationResult validate_part_groups(const PartGroupConfig& config,
                                      const SkeletonTopology& topology);

PartGroupConfig part_groups_from_json(const nlohmann::json& doc);
nlohmann::json part_groups_to_json(const PartGroupConfig& config);
PartGroupConfig load_part_groups(const std::string& path);

enum class AugmentationKind { BoneLength, JointRemove, JointSubdivide, RestPoseReset };

const char* augmentation_kind_name(AugmentationKind kind);

/// Reproducibility record: kind + seed + kind-specific parameters fully
/// determine the augmented rig.
struct AugmentationRecord {
  AugmentationKind kind = AugmentationKind::BoneLength;
  uint64_t seed = 0;
  nlohmann::json parameters;
};

nlohmann::json record_to_json(const AugmentationRecord& record);
AugmentationRecord record_from_json(const nlohmann::json& doc);

// Scales each group's bones by one factor drawn from its range (mirrored
// groups share the draw), keeps rotations untouched, then re-normalizes the
// rest scale so the bounding box's longest side returns to 1. Re-normalization
// factors within 1e-12 of unity are snapped to exactly 1 so identity draws
// leave a normalized rig bit-identical.
std::pair<Motion, AugmentationRecord> scale_bone_lengths(const Motion& motion,
                                                         const PartGroupConfig& config,
                                                         uint64_t seed);

// Removes exactly the named joints. Every name must be a leaf or a
// single-child pass-through in the input rig, never the root (NotRemovable).
// A removed pass-through merges its offset into its child; rotations are then
// re-derived against the original FK positions of the survivors.
std::pair<Motion, AugmentationRecord> remove_joints(const Motion& motion,
                                                    const std::vector<std::string>& removable,
                                                    uint64_t seed);

// Splits each named joint's parent bone into parts_per_bone equal collinear
// segments and re-derives rotations; inserted joints track linearly
// interpolated positions along the original bone at every frame.
std::pair<Motion, AugmentationRecord> subdivide_joints(const Motion& motion,
                                                       const std::vector<std::string>& targets,
                                                       int parts_per_bone, uint64_t seed,
                                                       int j_max = kDefaultMaxJoints);

// Re-bases the rig on the pose at frame_index: new rest offsets are that
// frame's world parent-to-child deltas (bone lengths preserved exactly), and
// rotations are re-derived so every frame's FK matches the original. The
// chosen frame's new rotations are identity by construction.
std::pair<Motion, AugmentationRecord> reset_rest_pose(const Motion& motion, int frame_index,
                                                      uint64_t seed);

// Draws the frame uniformly from [0, F).
std::pair<Motion, AugmentationRecord> reset_rest_pose_random(const Motion& motion, uint64_t seed);

/// Random-removal policy: candidates are distal leaves plus single-child
/// joints whose mean per-channel rotation variance (squared degrees) stays
/// under the threshold.
struct RemovalPolicy {
  double rotation_variance_threshold = 1.0;
  double removal_probability = 0.35;
  int max_removals = 4;
};

std::vector<std::string> removal_candidates(const Motion& motion,
                                            double rotation_variance_threshold);

// Bernoulli draw over the candidates, capped at max_removals; the result is
// always a valid remove_joints input (no root, no branching joints).
std::vector<std::string> draw_removal_set(const Motion& motion, const RemovalPolicy& policy,
                                          uint64_t seed);

/// Knobs for the combined pipeline. Stages apply in a fixed order:
/// bone lengths, then joint count (removal or subdivision, drawn 50/50),
/// then rest-pose reset.
struct AugmentationPolicy {
  PartGroupConfig part_groups;  // empty groups disable bone-length scaling
  bool scale_bones = true;
  bool change_joint_count = true;
  bool reset_rest = true;
  RemovalPolicy removal;
  double subdivide_probability = 0.25;
  int parts_per_bone = 2;
  int max_subdivisions = 3;
  int j_max = kDefaultMaxJoints;
};

AugmentationPolicy policy_from_json(const nlohmann::json& doc);
nlohmann::json policy_to_json(const AugmentationPolicy& policy);
AugmentationPolicy load_policy(const std::string& path);

struct AugmentationResult {
  Motion motion;
  std::vector<AugmentationRecord> records;
};

// One random variant of a motion under the policy; identical (motion, policy,
// seed) triples reproduce identical outputs.
AugmentationResult augment_motion(const Motion& motion, const AugmentationPolicy& policy,
                                  uint64_t seed);

}  // namespace rigmotion
