#include "rigmotion/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "rigmotion/preprocess.hpp"
#include "rigmotion/retarget.hpp"
#include "rigmotion/rng.hpp"

namespace rigmotion {

using nlohmann::json;

int PartGroupConfig::find_group(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(groups.size()); ++i) {
    if (groups[i].name == name) return i;
  }
  return -1;
}

namespace {

ValidationResult invalid(ErrorCode code, std::string message) {
  ValidationResult r;
  r.ok = false;
  r.code = code;
  r.message = std::move(message);
  return r;
}

void ensure_valid_motion(const Motion& motion) {
  if (auto r = validate_motion(motion); !r) throw RigError(r.code, r.message);
}

int joint_index_or_throw(const SkeletonTopology& topology, const std::string& name) {
  const int j = topology.find(name);
  if (j < 0) throw RigError(ErrorCode::UnknownJoint, "no joint named '" + name + "'");
  return j;
}

std::string unique_joint_name(std::string base, std::unordered_set<std::string>& used) {
  std::string name = base;
  int suffix = 1;
  while (!used.insert(name).second) name = base + "_" + std::to_string(++suffix);
  return name;
}

}  // namespace

ValidationResult validate_part_groups(const PartGroupConfig& config,
                                      const SkeletonTopology& topology) {
  std::unordered_set<std::string> claimed;
  for (const PartGroup& group : config.groups) {
    if (!(group.lo <= group.hi)) {
      return invalid(ErrorCode::ScaleOutOfRange,
                     "group '" + group.name + "' has lo > hi");
    }
    if (group.lo < 0.8 - 1e-12 || group.hi > 1.2 + 1e-12) {
      return invalid(ErrorCode::ScaleOutOfRange,
                     "group '" + group.name + "' range leaves [0.8, 1.2]");
    }
    for (const std::string& joint : group.joints) {
      if (topology.find(joint) < 0) {
        return invalid(ErrorCode::UnknownJoint,
                       "group '" + group.name + "' references unknown joint '" + joint + "'");
      }
      if (!claimed.insert(joint).second) {
        return invalid(ErrorCode::ConfigError,
                       "joint '" + joint + "' appears in more than one group");
      }
    }
  }
  for (const auto& [a, b] : config.symmetry_pairs) {
    const int ia = config.find_group(a);
    const int ib = config.find_group(b);
    if (ia < 0 || ib < 0) {
      return invalid(ErrorCode::ConfigError, "symmetry pair names unknown group");
    }
    if (config.groups[ia].joints.size() != config.groups[ib].joints.size()) {
      return invalid(ErrorCode::ConfigError,
                     "symmetry pair (" + a + ", " + b + ") has unequal joint counts");
    }
    if (config.groups[ia].lo != config.groups[ib].lo ||
        config.groups[ia].hi != config.groups[ib].hi) {
      return invalid(ErrorCode::ConfigError,
                     "symmetry pair (" + a + ", " + b + ") has unequal scale ranges");
    }
  }
  return {};
}

PartGroupConfig part_groups_from_json(const json& doc) {
  PartGroupConfig config;
  for (const json& g : doc.value("groups", json::array())) {
    PartGroup group;
    group.name = g.at("name").get<std::string>();
    for (const json& j : g.at("joints")) group.joints.push_back(j.get<std::string>());
    if (g.contains("range")) {
      group.lo = g["range"].at(0).get<double>();
      group.hi = g["range"].at(1).get<double>();
    }
    config.groups.push_back(std::move(group));
  }
  for (const json& p : doc.value("symmetry_pairs", json::array())) {
    config.symmetry_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  }
  return config;
}

json part_groups_to_json(const PartGroupConfig& config) {
  json doc;
  doc["groups"] = json::array();
  for (const PartGroup& group : config.groups) {
    doc["groups"].push_back(
        {{"name", group.name}, {"joints", group.joints}, {"range", {group.lo, group.hi}}});
  }
  doc["symmetry_pairs"] = json::array();
  for (const auto& [a, b] : config.symmetry_pairs) {
    doc["symmetry_pairs"].push_back({a, b});
  }
  return doc;
}

PartGroupConfig load_part_groups(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RigError(ErrorCode::IoError, "cannot open part groups '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw RigError(ErrorCode::ConfigError, std::string("part groups JSON: ") + e.what());
  }
  return part_groups_from_json(doc);
}

const char* augmentation_kind_name(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::BoneLength: return "bone_length";
    case AugmentationKind::JointRemove: return "joint_remove";
    case AugmentationKind::JointSubdivide: return "joint_subdivide";
    case AugmentationKind::RestPoseReset: return "rest_pose_reset";
  }
  return "?";
}

json record_to_json(const AugmentationRecord& record) {
  return {{"kind", augmentation_kind_name(record.kind)},
          {"seed", record.seed},
          {"parameters", record.parameters}};
}

AugmentationRecord record_from_json(const json& doc) {
  AugmentationRecord record;
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "bone_length") record.kind = AugmentationKind::BoneLength;
  else if (kind == "joint_remove") record.kind = AugmentationKind::JointRemove;
  else if (kind == "joint_subdivide") record.kind = AugmentationKind::JointSubdivide;
  else if (kind == "rest_pose_reset") record.kind = AugmentationKind::RestPoseReset;
  else throw RigError(ErrorCode::ConfigError, "unknown augmentation kind '" + kind + "'");
  record.seed = doc.at("seed").get<uint64_t>();
  record.parameters = doc.value("parameters", json::object());
  return record;
}

std::pair<Motion, AugmentationRecord> scale_bone_lengths(const Motion& motion,
                                                         const PartGroupConfig& config,
                                                         uint64_t seed) {
  ensure_valid_motion(motion);
  if (auto r = validate_part_groups(config, motion.rig.topology); !r) {
    throw RigError(r.code, r.message);
  }

  // One factor per group, drawn in declared order; a group whose mirror
  // already drew inherits that factor instead of drawing.
  Rng rng(seed);
  std::map<std::string, double> factors;
  for (const PartGroup& group : config.groups) {
    if (factors.count(group.name)) continue;
    const double factor = rng.uniform(group.lo, group.hi);
    factors[group.name] = factor;
    for (const auto& [a, b] : config.symmetry_pairs) {
      if (a == group.name) factors[b] = factor;
      if (b == group.name) factors[a] = factor;
    }
  }

  Motion out = motion;
  const int root = out.rig.topology.root();
  for (const PartGroup& group : config.groups) {
    const double factor = factors[group.name];
    for (const std::string& name : group.joints) {
      const int j = out.rig.topology.find(name);
      if (j == root) continue;  // the root offset is a position, not a bone
      out.rig.rest_offsets.row(j) *= factor;
    }
  }
  const double renorm = normalize_rest_scale(out.rig);

  AugmentationRecord record;
  record.kind = AugmentationKind::BoneLength;
  record.seed = seed;
  json scales = json::object();
  for (const auto& [name, factor] : factors) scales[name] = factor;
  record.parameters = {{"scales", scales}, {"renormalize_factor", renorm}};
  return {std::move(out), std::move(record)};
}

std::pair<Motion, AugmentationRecord> remove_joints(const Motion& motion,
                                                    const std::vector<std::string>& removable,
                                                    uint64_t seed) {
  ensure_valid_motion(motion);
  const SkeletonTopology& topo = motion.rig.topology;
  const int joints = topo.joint_count();
  const int root = topo.root();

  std::vector<char> slated(joints, 0);
  for (const std::string& name : removable) {
    const int j = joint_index_or_throw(topo, name);
    if (j == root) {
      throw RigError(ErrorCode::NotRemovable, "the root joint '" + name + "' cannot be removed");
    }
    const size_t child_count = topo.child_lists[j].size();
    if (child_count > 1) {
      throw RigError(ErrorCode::NotRemovable,
                     "joint '" + name + "' branches into " + std::to_string(child_count) +
                         " children");
    }
    slated[j] = 1;
  }

  // Deepest-first removal keeps every merge local: a pass-through hands its
  // offset to its (single) current child and reparents it.
  std::vector<int> parents = topo.parents;
  OffsetMatrix offsets = motion.rig.rest_offsets;
  std::vector<char> removed(joints, 0);
  for (auto it = topo.traversal.rbegin(); it != topo.traversal.rend(); ++it) {
    const int j = *it;
    if (!slated[j]) continue;
    int only_child = -1;
    int child_count = 0;
    for (int c = 0; c < joints; ++c) {
      if (!removed[c] && parents[c] == j) {
        only_child = c;
        ++child_count;
      }
    }
    if (child_count > 1) {
      throw RigError(ErrorCode::NotRemovable,
                     "joint '" + topo.joint_names[j] + "' still branches at removal time");
    }
    if (child_count == 1) {
      offsets.row(only_child) += offsets.row(j);
      parents[only_child] = parents[j];
    }
    removed[j] = 1;
  }

  std::vector<int> old_to_new(joints, -1);
  std::vector<std::string> new_names;
  std::vector<int> new_parents;
  std::vector<bool> new_end;
  std::vector<int> new_to_old;
  for (int j = 0; j < joints; ++j) {
    if (removed[j]) continue;
    old_to_new[j] = static_cast<int>(new_names.size());
    new_names.push_back(topo.joint_names[j]);
    new_end.push_back(topo.end_site[j]);
    new_to_old.push_back(j);
  }
  Rig new_rig;
  new_rig.rest_offsets.resize(static_cast<int>(new_names.size()), 3);
  for (int j = 0; j < joints; ++j) {
    if (removed[j]) continue;
    new_parents.push_back(parents[j] == kNoParent ? kNoParent : old_to_new[parents[j]]);
    new_rig.rest_offsets.row(old_to_new[j]) = offsets.row(j);
  }
  new_rig.topology = SkeletonTopology::build(new_names, new_parents, new_end);
  if (auto r = validate_rig(new_rig); !r) throw RigError(r.code, r.message);

  const GlobalPose pose = forward_kinematics(motion);
  Motion out = retarget_to_rig(pose.positions, new_rig, new_to_old, motion.frame_time);

  AugmentationRecord record;
  record.kind = AugmentationKind::JointRemove;
  record.seed = seed;
  json names = json::array();
  for (const int j : topo.traversal) {
    if (slated[j]) names.push_back(topo.joint_names[j]);
  }
  record.parameters = {{"removed", names}};
  return {std::move(out), std::move(record)};
}

std::pair<Motion, AugmentationRecord> subdivide_joints(const Motion& motion,
                                                       const std::vector<std::string>& targets,
                                                       int parts_per_bone, uint64_t seed,
                                                       int j_max) {
  ensure_valid_motion(motion);
  if (parts_per_bone < 2) {
    throw RigError(ErrorCode::ConfigError, "parts_per_bone must be at least 2");
  }
  const SkeletonTopology& topo = motion.rig.topology;
  const int joints = topo.joint_count();
  const int root = topo.root();

  std::vector<char> slated(joints, 0);
  std::vector<std::string> ordered_targets;
  for (const std::string& name : targets) {
    const int j = joint_index_or_throw(topo, name);
    if (j == root) {
      throw RigError(ErrorCode::ConfigError, "the root '" + name + "' has no parent bone to split");
    }
    if (!slated[j]) {
      slated[j] = 1;
      ordered_targets.push_back(name);
    }
  }
  const int inserted_per_bone = parts_per_bone - 1;
  const long new_count =
      joints + static_cast<long>(ordered_targets.size()) * inserted_per_bone;
  if (new_count > j_max) {
    throw RigError(ErrorCode::JointBudgetExceeded,
                   std::to_string(new_count) + " joints would exceed the limit of " +
                       std::to_string(j_max));
  }

  std::unordered_set<std::string> used(topo.joint_names.begin(), topo.joint_names.end());
  std::vector<std::string> new_names;
  std::vector<int> new_parents;
  std::vector<bool> new_end;
  std::vector<int> old_to_new(joints, -1);
  // inserted_for[old j] lists the new indices of the chain spliced above j,
  // nearest the parent first.
  std::vector<std::vector<int>> inserted_for(joints);
  Rig new_rig;
  new_rig.rest_offsets.resize(new_count, 3);

  for (int j = 0; j < joints; ++j) {
    const int p = topo.parents[j];
    if (!slated[j]) {
      old_to_new[j] = static_cast<int>(new_names.size());
      new_names.push_back(topo.joint_names[j]);
      new_parents.push_back(p == kNoParent ? kNoParent : old_to_new[p]);
      new_end.push_back(topo.end_site[j]);
      new_rig.rest_offsets.row(old_to_new[j]) = motion.rig.rest_offsets.row(j);
      continue;
    }
    const Eigen::RowVector3d segment = motion.rig.rest_offsets.row(j) / parts_per_bone;
    int prev = old_to_new[p];
    for (int k = 1; k < parts_per_bone; ++k) {
      const int idx = static_cast<int>(new_names.size());
      new_names.push_back(
          unique_joint_name(topo.joint_names[j] + "_seg" + std::to_string(k), used));
      new_parents.push_back(prev);
      new_end.push_back(false);
      new_rig.rest_offsets.row(idx) = segment;
      inserted_for[j].push_back(idx);
      prev = idx;
    }
    old_to_new[j] = static_cast<int>(new_names.size());
    new_names.push_back(topo.joint_names[j]);
    new_parents.push_back(prev);
    new_end.push_back(topo.end_site[j]);
    new_rig.rest_offsets.row(old_to_new[j]) = segment;
  }
  new_rig.topology = SkeletonTopology::build(new_names, new_parents, new_end);
  if (auto r = validate_rig(new_rig, j_max); !r) throw RigError(r.code, r.message);

  // Targets: original joints keep their FK positions; inserted joints sit at
  // even fractions along the original bone, frame by frame.
  const GlobalPose pose = forward_kinematics(motion);
  const int frames = motion.frame_count();
  std::vector<OffsetMatrix> streams(frames);
  for (int f = 0; f < frames; ++f) {
    streams[f].resize(new_count, 3);
    for (int j = 0; j < joints; ++j) {
      streams[f].row(old_to_new[j]) = pose.positions[f].row(j);
      if (!slated[j]) continue;
      const Eigen::RowVector3d base = pose.positions[f].row(topo.parents[j]);
      const Eigen::RowVector3d tip = pose.positions[f].row(j);
      for (int k = 1; k < parts_per_bone; ++k) {
        const double fraction = static_cast<double>(k) / parts_per_bone;
        streams[f].row(inserted_for[j][k - 1]) = base + fraction * (tip - base);
      }
    }
  }
  std::vector<int> joint_map(new_count);
  for (int j = 0; j < new_count; ++j) joint_map[j] = j;
  Motion out = retarget_to_rig(streams, new_rig, joint_map, motion.frame_time);

  AugmentationRecord record;
  record.kind = AugmentationKind::JointSubdivide;
  record.seed = seed;
  record.parameters = {{"targets", ordered_targets}, {"parts_per_bone", parts_per_bone}};
  return {std::move(out), std::move(record)};
}

std::pair<Motion, AugmentationRecord> reset_rest_pose(const Motion& motion, int frame_index,
                                                      uint64_t seed) {
  ensure_valid_motion(motion);
  if (frame_index < 0 || frame_index >= motion.frame_count()) {
    throw RigError(ErrorCode::FrameOutOfRange,
                   "frame " + std::to_string(frame_index) + " outside [0, " +
                       std::to_string(motion.frame_count()) + ")");
  }
  const GlobalPose pose = forward_kinematics(motion);

  Rig new_rig = motion.rig;
  const OffsetMatrix& chosen = pose.positions[frame_index];
  for (int j = 0; j < new_rig.joint_count(); ++j) {
    const int p = new_rig.topology.parents[j];
    if (p == kNoParent) continue;  // the root keeps its rest position
    new_rig.rest_offsets.row(j) = chosen.row(j) - chosen.row(p);
  }

  std::vector<int> joint_map(new_rig.joint_count());
  for (int j = 0; j < new_rig.joint_count(); ++j) joint_map[j] = j;
  Motion out = retarget_to_rig(pose.positions, new_rig, joint_map, motion.frame_time);

  AugmentationRecord record;
  record.kind = AugmentationKind::RestPoseReset;
  record.seed = seed;
  record.parameters = {{"frame_index", frame_index}};
  return {std::move(out), std::move(record)};
}

std::pair<Motion, AugmentationRecord> reset_rest_pose_random(const Motion& motion, uint64_t seed) {
  ensure_valid_motion(motion);
  Rng rng(seed);
  const int frame = rng.uniform_int(0, motion.frame_count() - 1);
  return reset_rest_pose(motion, frame, seed);
}

std::vector<std::string> removal_candidates(const Motion& motion,
                                            double rotation_variance_threshold) {
  const SkeletonTopology& topo = motion.rig.topology;
  const int root = topo.root();
  const int frames = motion.frame_count();
  std::vector<std::string> out;
  for (const int j : topo.traversal) {
    if (j == root) continue;
    if (topo.is_leaf(j)) {
      out.push_back(topo.joint_names[j]);
      continue;
    }
    if (topo.child_lists[j].size() != 1) continue;
    // Mean per-channel population variance of this joint's rotations.
    double variance = 0.0;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int f = 0; f < frames; ++f) mean += motion.rotations[f](j, c);
      mean /= frames;
      double sq = 0.0;
      for (int f = 0; f < frames; ++f) {
        const double d = motion.rotations[f](j, c) - mean;
        sq += d * d;
      }
      variance += sq / frames;
    }
    variance /= 3.0;
    if (variance < rotation_variance_threshold) out.push_back(topo.joint_names[j]);
  }
  return out;
}

std::vector<std::string> draw_removal_set(const Motion& motion, const RemovalPolicy& policy,
                                          uint64_t seed) {
  const std::vector<std::string> candidates =
      removal_candidates(motion, policy.rotation_variance_threshold);
  Rng rng(seed);
  std::vector<std::string> out;
  for (const std::string& name : candidates) {
    if (static_cast<int>(out.size()) >= policy.max_removals) break;
    if (rng.bernoulli(policy.removal_probability)) out.push_back(name);
  }
  return out;
}

AugmentationPolicy policy_from_json(const json& doc) {
  AugmentationPolicy policy;
  if (doc.contains("part_groups")) policy.part_groups = part_groups_from_json(doc["part_groups"]);
  policy.scale_bones = doc.value("scale_bones", policy.scale_bones);
  policy.change_joint_count = doc.value("change_joint_count", policy.change_joint_count);
  policy.reset_rest = doc.value("reset_rest", policy.reset_rest);
  if (doc.contains("removal")) {
    const json& r = doc["removal"];
    policy.removal.rotation_variance_threshold =
        r.value("rotation_variance_threshold", policy.removal.rotation_variance_threshold);
    policy.removal.removal_probability =
        r.value("removal_probability", policy.removal.removal_probability);
    policy.removal.max_removals = r.value("max_removals", policy.removal.max_removals);
  }
  policy.subdivide_probability = doc.value("subdivide_probability", policy.subdivide_probability);
  policy.parts_per_bone = doc.value("parts_per_bone", policy.parts_per_bone);
  policy.max_subdivisions = doc.value("max_subdivisions", policy.max_subdivisions);
  policy.j_max = doc.value("j_max", policy.j_max);
  return policy;
}

json policy_to_json(const AugmentationPolicy& policy) {
  return {{"part_groups", part_groups_to_json(policy.part_groups)},
          {"scale_bones", policy.scale_bones},
          {"change_joint_count", policy.change_joint_count},
          {"reset_rest", policy.reset_rest},
          {"removal",
           {{"rotation_variance_threshold", policy.removal.rotation_variance_threshold},
            {"removal_probability", policy.removal.removal_probability},
            {"max_removals", policy.removal.max_removals}}},
          {"subdivide_probability", policy.subdivide_probability},
          {"parts_per_bone", policy.parts_per_bone},
          {"max_subdivisions", policy.max_subdivisions},
          {"j_max", policy.j_max}};
}

AugmentationPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RigError(ErrorCode::IoError, "cannot open policy '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw RigError(ErrorCode::ConfigError, std::string("policy JSON: ") + e.what());
  }
  return policy_from_json(doc);
}

AugmentationResult augment_motion(const Motion& motion, const AugmentationPolicy& policy,
                                  uint64_t seed) {
  AugmentationResult result;
  result.motion = motion;

  if (policy.scale_bones && !policy.part_groups.groups.empty()) {
    auto [scaled, record] =
        scale_bone_lengths(result.motion, policy.part_groups, derive_seed(seed, 1));
    result.motion = std::move(scaled);
    result.records.push_back(std::move(record));
  }

  if (policy.change_joint_count) {
    Rng choice = Rng::derive(seed, 2);
    if (choice.bernoulli(0.5)) {
      const uint64_t stage_seed = derive_seed(seed, 3);
      const std::vector<std::string> names =
          draw_removal_set(result.motion, policy.removal, stage_seed);
      if (!names.empty()) {
        auto [pruned, record] = remove_joints(result.motion, names, stage_seed);
        result.motion = std::move(pruned);
        result.records.push_back(std::move(record));
      }
    } else {
      Rng rng = Rng::derive(seed, 4);
      const SkeletonTopology& topo = result.motion.rig.topology;
      const int root = topo.root();
      const int budget =
          (policy.j_max - result.motion.joint_count()) / std::max(1, policy.parts_per_bone - 1);
      const int cap = std::min(policy.max_subdivisions, budget);
      std::vector<std::string> targets;
      for (const int j : topo.traversal) {
        if (j == root || static_cast<int>(targets.size()) >= cap) continue;
        if (rng.bernoulli(policy.subdivide_probability)) targets.push_back(topo.joint_names[j]);
      }
      if (!targets.empty()) {
        auto [split, record] = subdivide_joints(result.motion, targets, policy.parts_per_bone,
                                                derive_seed(seed, 4), policy.j_max);
        result.motion = std::move(split);
        result.records.push_back(std::move(record));
      }
    }
  }

  if (policy.reset_rest) {
    auto [rebased, record] = reset_rest_pose_random(result.motion, derive_seed(seed, 5));
    result.motion = std::move(rebased);
    result.records.push_back(std::move(record));
  }
  return result;
}

}  // namespace rigmotion
