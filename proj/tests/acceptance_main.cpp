// Acceptance gate: one pass/fail line per criterion, exit 0 only if all pass.
//
// Each criterion is self-contained, uses independently coded oracles from
// test_support.hpp where expected values are needed, and enforces its own
// runtime budget where one applies.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "commands.hpp"
#include "rigmotion/augment.hpp"
#include "rigmotion/bvh.hpp"
#include "rigmotion/conditioning.hpp"
#include "rigmotion/denoiser.hpp"
#include "rigmotion/euler.hpp"
#include "rigmotion/metrics.hpp"
#include "rigmotion/retarget.hpp"
#include "rigmotion/rng.hpp"
#include "rigmotion/schedule.hpp"
#include "rigmotion/skeleton.hpp"
#include "rigmotion/trainer.hpp"
#include "rigmotion/types.hpp"

#include "test_support.hpp"

using namespace rigmotion;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

const std::vector<std::string> kFixtureNames = {"chain3.bvh", "quadruped.bvh", "xyzorder.bvh",
                                                "minimal.bvh"};

Rig make_chain_rig(const std::vector<double>& lengths) {
  std::vector<std::string> names;
  std::vector<int> parents;
  for (size_t i = 0; i < lengths.size(); ++i) {
    names.push_back("j" + std::to_string(i));
    parents.push_back(static_cast<int>(i) - 1);
  }
  Rig rig;
  rig.topology = SkeletonTopology::build(names, parents);
  rig.rest_offsets = OffsetMatrix::Zero(static_cast<int>(lengths.size()), 3);
  for (size_t i = 1; i < lengths.size(); ++i) rig.rest_offsets(static_cast<int>(i), 1) = lengths[i];
  return rig;
}

// --------------------------------------------------------------------------
// 1. Forward kinematics vs an independent matrix-chain oracle.

Outcome criterion_fk_oracle() {
  Rng rng(0xFC01);
  double max_pos_err = 0.0;
  double max_bone_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int joints = rng.uniform_int(2, 20);
    const int frames = rng.uniform_int(1, 10);
    const Rig rig = testsupport::random_rig(rng, joints);
    const Motion motion = testsupport::random_motion(rng, rig, frames);
    const GlobalPose pose = forward_kinematics(motion);
    const Eigen::VectorXd lengths = bone_lengths(rig);
    for (int f = 0; f < frames; ++f) {
      OffsetMatrix oracle_pos;
      std::vector<Eigen::Matrix3d> oracle_orient;
      testsupport::oracle_fk_frame(rig, motion.rotations[f], oracle_pos, oracle_orient);
      max_pos_err = std::max(max_pos_err,
                             (pose.positions[f] - oracle_pos).cwiseAbs().maxCoeff());
      for (int j = 0; j < joints; ++j) {
        const int parent = rig.topology.parents[j];
        if (parent < 0) continue;
        const double len =
            (pose.positions[f].row(j) - pose.positions[f].row(parent)).norm();
        max_bone_err = std::max(max_bone_err, std::abs(len - lengths[j]));
      }
    }
  }
  Outcome out;
  out.detail = "100 rigs, max position err " + fmt(max_pos_err) + ", max bone-length err " +
               fmt(max_bone_err);
  if (max_pos_err > 1e-9) {
    out.pass = false;
    out.detail += " (position tolerance 1e-9 exceeded)";
  }
  if (max_bone_err > 1e-6) {
    out.pass = false;
    out.detail += " (bone-length tolerance 1e-6 exceeded)";
  }
  return out;
}

// --------------------------------------------------------------------------
// 2. Rest-pose reset and identity retargeting reproduce forward kinematics.

Outcome criterion_retarget_round_trip() {
  Rng rng(0xFC02);
  std::vector<Motion> motions;
  for (const std::string& name : kFixtureNames) {
    const BvhDocument doc = load_bvh_file(testsupport::fixture_path(name));
    motions.push_back(doc.motion);
    for (int extra = 0; extra < 4; ++extra) {
      motions.push_back(testsupport::random_motion(rng, doc.rig, 6, 40.0));
    }
  }
  double max_reset_err = 0.0;
  double max_identity_err = 0.0;
  uint64_t seed = 900;
  for (const Motion& motion : motions) {
    const GlobalPose original = forward_kinematics(motion);

    const auto [reset, record] = reset_rest_pose_random(motion, seed++);
    const GlobalPose after = forward_kinematics(reset);
    for (int f = 0; f < motion.frame_count(); ++f) {
      max_reset_err = std::max(
          max_reset_err, (after.positions[f] - original.positions[f]).cwiseAbs().maxCoeff());
    }

    std::vector<int> joint_map(motion.joint_count());
    std::iota(joint_map.begin(), joint_map.end(), 0);
    const Motion identity =
        retarget_to_rig(original.positions, motion.rig, joint_map, motion.frame_time);
    const GlobalPose identity_pose = forward_kinematics(identity);
    for (int f = 0; f < motion.frame_count(); ++f) {
      max_identity_err = std::max(
          max_identity_err,
          (identity_pose.positions[f] - original.positions[f]).cwiseAbs().maxCoeff());
    }
  }
  Outcome out;
  out.detail = std::to_string(motions.size()) + " motions, rest-reset err " +
               fmt(max_reset_err) + ", identity-retarget err " + fmt(max_identity_err);
  if (motions.size() != 20) {
    out.pass = false;
    out.detail += " (expected 20 motions)";
  }
  if (max_reset_err > 1e-4) {
    out.pass = false;
    out.detail += " (rest-reset tolerance 1e-4 exceeded)";
  }
  if (max_identity_err > 1e-6) {
    out.pass = false;
    out.detail += " (identity tolerance 1e-6 exceeded)";
  }
  return out;
}

// --------------------------------------------------------------------------
// 3. Bone-scale draws stay in range, mirrored groups share factors, and
//    removal never selects the root or a branching joint.

Outcome criterion_augmentation_constraints() {
  Rng rng(0xFC03);

  Rig rig;
  rig.topology = SkeletonTopology::build({"root", "l_a", "l_b", "r_a", "r_b", "tail"},
                                         {-1, 0, 1, 0, 3, 0});
  rig.rest_offsets = OffsetMatrix::Zero(6, 3);
  rig.rest_offsets.row(1) << 0.5, 0.3, 0.0;
  rig.rest_offsets.row(2) << 0.4, 0.0, 0.1;
  rig.rest_offsets.row(3) << -0.5, 0.3, 0.0;
  rig.rest_offsets.row(4) << -0.4, 0.0, 0.1;
  rig.rest_offsets.row(5) << 0.0, -0.6, 0.0;
  const Motion motion = testsupport::random_motion(rng, rig, 3);

  PartGroupConfig config;
  config.groups = {{"left", {"l_a", "l_b"}, 0.8, 1.2},
                   {"right", {"r_a", "r_b"}, 0.8, 1.2},
                   {"tail", {"tail"}, 0.8, 1.2}};
  config.symmetry_pairs = {{"left", "right"}};

  int draws = 0;
  double lo_seen = 10.0;
  double hi_seen = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto [scaled, record] = scale_bone_lengths(motion, config, 31 + 7ull * i);
    const nlohmann::json& scales = record.parameters.at("scales");
    for (const auto& [name, factor] : scales.items()) {
      const double f = factor.get<double>();
      lo_seen = std::min(lo_seen, f);
      hi_seen = std::max(hi_seen, f);
      if (f < 0.8 || f > 1.2) {
        return {false, "scale draw " + fmt(f) + " for group " + name + " outside [0.8, 1.2]"};
      }
      ++draws;
    }
    if (scales.at("left").get<double>() != scales.at("right").get<double>()) {
      return {false, "mirrored groups drew different factors on iteration " +
                         std::to_string(i)};
    }
  }

  // Removal: chain root->a->b->c->d with a second root child e. The root
  // branches; b rotates too much to be a pass-through candidate.
  Rig removal_rig;
  removal_rig.topology =
      SkeletonTopology::build({"root", "a", "b", "c", "d", "e"}, {-1, 0, 1, 2, 3, 0});
  removal_rig.rest_offsets = OffsetMatrix::Zero(6, 3);
  for (int j = 1; j < 6; ++j) removal_rig.rest_offsets(j, 1) = 0.4 + 0.1 * j;
  Motion removal_motion;
  removal_motion.rig = removal_rig;
  for (int f = 0; f < 4; ++f) {
    OffsetMatrix rot = OffsetMatrix::Zero(6, 3);
    rot(2, 0) = 35.0 * f;  // joint b: high variance
    rot(1, 1) = 25.0 * f;  // joint a: high variance
    removal_motion.rotations.push_back(rot);
  }

  const std::vector<std::string> candidates = removal_candidates(removal_motion, 1.0);
  RemovalPolicy policy;
  int removal_draws = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::vector<std::string> names = draw_removal_set(removal_motion, policy, 17 + i);
    for (const std::string& name : names) {
      const int j = removal_rig.topology.find(name);
      if (j < 0) return {false, "removal drew unknown joint '" + name + "'"};
      if (j == removal_rig.topology.root()) return {false, "removal selected the root"};
      if (removal_rig.topology.child_lists[j].size() >= 2) {
        return {false, "removal selected branching joint '" + name + "'"};
      }
      ++removal_draws;
    }
    if (i % 50 == 0 && !names.empty()) {
      remove_joints(removal_motion, names, 3);  // must be accepted as-is
    }
  }
  for (const std::string& name : candidates) {
    const int j = removal_rig.topology.find(name);
    if (j == removal_rig.topology.root() || removal_rig.topology.child_lists[j].size() >= 2) {
      return {false, "candidate list contains root or branching joint '" + name + "'"};
    }
  }

  Outcome out;
  out.detail = "10000 scale draws in [" + fmt(lo_seen) + ", " + fmt(hi_seen) +
               "], mirrored factors equal, " + std::to_string(removal_draws) +
               " removal picks all leaf/pass-through";
  return out;
}

// --------------------------------------------------------------------------
// 4. The augment command multiplies a 40-motion set into exactly 1040 files.

Outcome criterion_dataset_multiplicity() {
  Rng rng(0xFC04);
  const std::string dir = testsupport::temp_dir("accept_augment");
  const std::string in_dir = dir + "/in";
  const std::string out_dir = dir + "/out";
  fs::create_directories(in_dir);

  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < 40; ++i) {
    const BvhDocument doc =
        load_bvh_file(testsupport::fixture_path(kFixtureNames[i % kFixtureNames.size()]));
    BvhDocument copy = doc;
    // Unique motion content per file keeps the inputs distinct.
    copy.motion = testsupport::random_motion(rng, doc.rig, 5, 30.0);
    copy.motion.frame_time = doc.motion.frame_time;
    char name[32];
    std::snprintf(name, sizeof(name), "m%02d.bvh", i);
    save_bvh_file(copy, in_dir + "/" + name);
    entries.push_back({{"bvh_path", name}});
  }
  const std::string manifest_path = in_dir + "/manifest.json";
  {
    std::ofstream out(manifest_path);
    out << entries.dump(2) << "\n";
  }

  cli::AugmentOptions options;
  options.manifest = manifest_path;
  options.out_dir = out_dir;
  options.variants = 25;
  options.seed = 99;
  const cli::Logger quiet(true);
  const int rc = cli::cmd_augment(options, quiet);

  int bvh_count = 0;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    if (entry.path().extension() == ".bvh") ++bvh_count;
  }
  Outcome out;
  out.detail = "40 motions x (25 variants + original) -> " + std::to_string(bvh_count) +
               " files, exit " + std::to_string(rc);
  out.pass = (rc == 0) && (bvh_count == 1040);
  if (bvh_count != 1040) out.detail += " (expected 1040)";
  return out;
}

// --------------------------------------------------------------------------
// 5. BVH round-trip accuracy plus parser robustness under fuzzed inputs.

std::string mutate_text(std::string text, Rng& rng) {
  static const std::vector<std::string> tokens = {
      "JOINT",  "ROOT",   "End Site", "{",     "}",        "CHANNELS", "OFFSET",
      "MOTION", "Frames:", "Frame Time:", "Zrotation", "Xposition", "nan",
      "1e308",  "-1e308", "999999999", "-0.0", "inf",      "\n\n",     "\t"};
  static const std::string charset =
      "{}JOINTROOTEndSite0123456789.-+eE \n\tCHANNELSXYZrotationposition:";
  const int edits = 1 + rng.uniform_int(0, 2);
  for (int e = 0; e < edits; ++e) {
    if (text.empty()) break;
    const int n = static_cast<int>(text.size());
    switch (rng.uniform_int(0, 4)) {
      case 0: {  // overwrite one character
        text[rng.uniform_int(0, n - 1)] = charset[rng.uniform_int(
            0, static_cast<int>(charset.size()) - 1)];
        break;
      }
      case 1: {  // delete a span
        const int pos = rng.uniform_int(0, n - 1);
        const int len = std::min(n - pos, rng.uniform_int(1, 40));
        text.erase(pos, len);
        break;
      }
      case 2: {  // duplicate a span
        const int pos = rng.uniform_int(0, n - 1);
        const int len = std::min(n - pos, rng.uniform_int(1, 40));
        text.insert(pos, text.substr(pos, len));
        break;
      }
      case 3: {  // insert a structural token
        const int pos = rng.uniform_int(0, n);
        text.insert(pos, tokens[rng.uniform_int(0, static_cast<int>(tokens.size()) - 1)]);
        break;
      }
      case 4: {  // truncate
        text.resize(rng.uniform_int(0, n - 1));
        break;
      }
    }
  }
  return text;
}

Outcome criterion_bvh_round_trip() {
  double max_offset_err = 0.0;
  double max_rotation_err = 0.0;
  for (const std::string& name : kFixtureNames) {
    const BvhDocument doc = load_bvh_file(testsupport::fixture_path(name));
    const BvhDocument back = parse_bvh(write_bvh(doc));
    if (back.rig.topology.joint_names != doc.rig.topology.joint_names ||
        back.rig.topology.parents != doc.rig.topology.parents) {
      return {false, name + ": round trip changed the topology"};
    }
    max_offset_err = std::max(
        max_offset_err, (back.rig.rest_offsets - doc.rig.rest_offsets).cwiseAbs().maxCoeff());
    if (back.motion.frame_count() != doc.motion.frame_count()) {
      return {false, name + ": round trip changed the frame count"};
    }
    for (int f = 0; f < doc.motion.frame_count(); ++f) {
      max_rotation_err = std::max(
          max_rotation_err,
          (back.motion.rotations[f] - doc.motion.rotations[f]).cwiseAbs().maxCoeff());
    }
  }
  if (max_offset_err > 1e-5 || max_rotation_err > 1e-5) {
    return {false, "round-trip errors offsets " + fmt(max_offset_err) + ", rotations " +
                       fmt(max_rotation_err) + " exceed 1e-5"};
  }

  std::vector<std::string> sources;
  for (const std::string& name : kFixtureNames) {
    sources.push_back(testsupport::read_file(testsupport::fixture_path(name)));
  }
  Rng rng(0xFC05);
  int parsed = 0;
  int rejected = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string mutated =
        mutate_text(sources[rng.uniform_int(0, static_cast<int>(sources.size()) - 1)], rng);
    try {
      const BvhDocument doc = parse_bvh(mutated);
      (void)doc;
      ++parsed;
    } catch (const std::exception&) {
      ++rejected;  // graceful rejection is the expected path
    }
  }
  Outcome out;
  out.detail = "round-trip offsets " + fmt(max_offset_err) + " rotations " +
               fmt(max_rotation_err) + "; fuzz 10000 inputs (" + std::to_string(parsed) +
               " parsed, " + std::to_string(rejected) + " rejected, 0 crashes)";
  return out;
}

// --------------------------------------------------------------------------
// 6. Denoiser invariants: padding masks, zero-init identity, frame-permutation
//    equivariance in the pose stage, and finite-difference gradients.

DenoiserConfig micro_config() {
  DenoiserConfig cfg;
  cfg.depth = 1;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.j_max = 24;
  cfg.f_max = 12;
  cfg.cond_dim = 4;
  cfg.cfg_dropout = 0.0;
  cfg.timesteps = 8;
  cfg.max_tree_depth = 6;
  cfg.max_branch = 4;
  cfg.rest_bands = 2;
  return cfg;
}

void perturb_params(DenoiserModel& model, double amount, Rng& rng) {
  for (const ParamRef& p : model.all_params()) {
    for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
        (*p.value)(r, c) += amount * rng.normal();
      }
    }
  }
}

Mat random_grid(Rng& rng, int rows) {
  Mat x(rows, 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < 3; ++c) x(r, c) = rng.normal();
  }
  return x;
}

Outcome criterion_denoiser_invariants() {
  Rng rng(0xFC06);
  const DenoiserConfig cfg = micro_config();

  // (a) Zero-initialized modulation: every gate projection starts exactly at
  // zero, so a fresh model reduces to the output projection of the tokens.
  {
    DenoiserModel model(cfg, 5);
    for (const ParamRef& p : model.all_params()) {
      if (p.name.find("mod") == std::string::npos) continue;
      if (p.value->cwiseAbs().maxCoeff() != 0.0) {
        return {false, "modulation tensor " + p.name + " not exactly zero at init"};
      }
    }
    const Rig rig = testsupport::random_rig(rng, 3);
    const Mat x = random_grid(rng, 2 * 3);
    Eigen::VectorXd cond(cfg.cond_dim);
    for (int i = 0; i < cfg.cond_dim; ++i) cond[i] = rng.normal();
    const Mat direct = model.out_proj.forward(layer_norm(model.tokenize(x, rig, 2)));
    const Mat through = model.denoise(x, 3, cond, rig, 2);
    if ((direct - through).cwiseAbs().maxCoeff() != 0.0) {
      return {false, "fresh model output differs from the plain projection path"};
    }
  }

  // (b) Padding masks: a compact call and a padded call with junk in the
  // masked slots agree bit-exactly on the real rows in both stages.
  for (const bool motion_stage : {false, true}) {
    DenoiserModel model(cfg, 6);
    perturb_params(model, 0.05, rng);
    if (motion_stage) model.to_motion_stage();
    const Rig rig = testsupport::random_rig(rng, 3);
    const int frames = 3;
    const Mat compact_x = random_grid(rng, frames * 3);
    Eigen::VectorXd cond(cfg.cond_dim);
    for (int i = 0; i < cfg.cond_dim; ++i) cond[i] = rng.normal();
    const Mat compact_y = model.denoise(compact_x, 2, cond, rig, frames);

    const std::vector<bool> joint_mask = {true, false, true, true, false};
    const std::vector<bool> frame_mask = {true, true, false, true};
    std::vector<int> jrank, frank;
    for (size_t s = 0; s < joint_mask.size(); ++s) {
      if (joint_mask[s]) jrank.push_back(static_cast<int>(s));
    }
    for (size_t s = 0; s < frame_mask.size(); ++s) {
      if (frame_mask[s]) frank.push_back(static_cast<int>(s));
    }
    const int j_pad = static_cast<int>(joint_mask.size());
    const int f_pad = static_cast<int>(frame_mask.size());
    for (const double junk : {1e6, -7e5}) {
      Mat padded = Mat::Constant(f_pad * j_pad, 3, junk);
      for (int f = 0; f < frames; ++f) {
        for (int j = 0; j < 3; ++j) {
          padded.row(frank[f] * j_pad + jrank[j]) = compact_x.row(f * 3 + j);
        }
      }
      const Mat padded_y = model.denoise(padded, 2, cond, rig, f_pad, joint_mask, frame_mask);
      for (int f = 0; f < frames; ++f) {
        for (int j = 0; j < 3; ++j) {
          const Eigen::Index row = frank[f] * j_pad + jrank[j];
          if ((padded_y.row(row) - compact_y.row(f * 3 + j)).cwiseAbs().maxCoeff() != 0.0) {
            return {false, "padded output differs from compact output on a real row"};
          }
        }
      }
      for (Eigen::Index row = 0; row < padded_y.rows(); ++row) {
        const int f = static_cast<int>(row) / j_pad;
        const int j = static_cast<int>(row) % j_pad;
        if (frame_mask[f] && joint_mask[j]) continue;
        if (padded_y.row(row).cwiseAbs().maxCoeff() != 0.0) {
          return {false, "padding row left non-zero output"};
        }
      }
    }
  }

  // (c) Pose-stage frame-permutation equivariance, bit-exact.
  {
    DenoiserModel model(cfg, 7);
    perturb_params(model, 0.05, rng);
    const Rig rig = testsupport::random_rig(rng, 4);
    const int frames = 3;
    const Mat x = random_grid(rng, frames * 4);
    Mat swapped = x;
    swapped.middleRows(0 * 4, 4) = x.middleRows(2 * 4, 4);
    swapped.middleRows(2 * 4, 4) = x.middleRows(0 * 4, 4);
    Eigen::VectorXd cond(cfg.cond_dim);
    for (int i = 0; i < cfg.cond_dim; ++i) cond[i] = rng.normal();
    const Mat y = model.denoise(x, 4, cond, rig, frames);
    const Mat y_swapped = model.denoise(swapped, 4, cond, rig, frames);
    if ((y_swapped.middleRows(0 * 4, 4) - y.middleRows(2 * 4, 4)).cwiseAbs().maxCoeff() != 0.0 ||
        (y_swapped.middleRows(2 * 4, 4) - y.middleRows(0 * 4, 4)).cwiseAbs().maxCoeff() != 0.0 ||
        (y_swapped.middleRows(1 * 4, 4) - y.middleRows(1 * 4, 4)).cwiseAbs().maxCoeff() != 0.0) {
      return {false, "permuting input frames did not permute pose-stage outputs"};
    }
  }

  // (d) Finite-difference gradient check on the 2-joint / 3-frame instance.
  {
    DenoiserModel model(cfg, 8);
    perturb_params(model, 0.1, rng);
    model.to_motion_stage();
    const Rig rig = testsupport::random_rig(rng, 2);
    const int frames = 3;
    const Mat x0 = random_grid(rng, frames * 2);
    const Mat noise = random_grid(rng, frames * 2);
    Eigen::VectorXd cond(cfg.cond_dim);
    for (int i = 0; i < cfg.cond_dim; ++i) cond[i] = rng.normal();
    const int t = 4;

    model.zero_grad();
    model.loss_and_gradients(x0, t, cond, rig, frames, noise);

    const double h = 1e-5;
    double worst = 0.0;
    int checked = 0;
    for (const ParamRef& p : model.all_params()) {
      if (p.value->size() == 0) continue;
      for (int s = 0; s < 3; ++s) {
        const Eigen::Index r = s % p.value->rows();
        const Eigen::Index c = (s * 7) % p.value->cols();
        const double saved = (*p.value)(r, c);
        (*p.value)(r, c) = saved + h;
        const double up = model.loss_value(x0, t, cond, rig, frames, noise);
        (*p.value)(r, c) = saved - h;
        const double down = model.loss_value(x0, t, cond, rig, frames, noise);
        (*p.value)(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = (*p.grad)(r, c);
        const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6);
        worst = std::max(worst, rel);
        ++checked;
      }
    }
    if (checked <= 50) {
      return {false, "gradient check sampled only " + std::to_string(checked) + " coordinates"};
    }
    if (worst > 1e-4) {
      return {false, "finite-difference gradient mismatch " + fmt(worst) + " exceeds 1e-4"};
    }
    Outcome out;
    out.detail = "masking bit-exact in both stages, zero-init identity exact, "
                 "permutation equivariance bit-exact, worst gradient rel err " +
                 fmt(worst) + " over " + std::to_string(checked) + " coords";
    return out;
  }
}

// --------------------------------------------------------------------------
// 7. Overfit smoke test on the desk-scale preset.

Outcome criterion_overfit_smoke() {
  const DenoiserConfig cfg = DenoiserConfig::desk_preset();
  const Rig rig = make_chain_rig({0.0, 1.0, 0.8, 0.6});

  // Three toy clips whose poses differ far more between clips than within
  // one clip, each paired with a distinct caption embedding.
  const std::vector<double> bases = {55.0, 0.0, -55.0};
  const std::vector<std::string> captions = {"alpha hold", "beta sway", "gamma turn"};
  std::vector<DenoiserModel::TrainingItem> dataset;
  std::vector<Motion> motions;
  for (int k = 0; k < 3; ++k) {
    Motion motion;
    motion.rig = rig;
    for (int f = 0; f < 12; ++f) {
      OffsetMatrix rot(4, 3);
      for (int j = 0; j < 4; ++j) {
        for (int c = 0; c < 3; ++c) {
          const double pattern = ((j + c) % 2 == 0) ? 1.0 : -0.6;
          rot(j, c) = bases[k] * pattern + 4.0 * std::sin(0.7 * f + j + c);
        }
      }
      motion.rotations.push_back(rot);
    }
    motions.push_back(motion);
    dataset.push_back({motion, embed_text(captions[k], cfg.cond_dim)});
  }

  DenoiserModel model(cfg, 2024);
  model.set_norm_stats(NormStats::fit(motions));

  TrainerOptions options;
  options.pose_steps = 1000;
  options.motion_steps = 1000;
  options.batch_size = 0;
  options.learning_rate = 2e-3;
  options.seed = 11;
  options.smoothing_window = 50;
  const TrainingSummary summary = train_two_stage(model, dataset, options);

  const double initial = summary.pose_initial_smoothed;
  const double final_loss = summary.motion_final_smoothed;
  Outcome out;
  out.detail = "2000 steps, smoothed loss " + fmt(initial) + " -> " + fmt(final_loss) +
               " (ratio " + fmt(final_loss / initial) + ")";
  if (!(final_loss < 0.1 * initial)) {
    out.pass = false;
    out.detail += " (needs < 10% of initial)";
    return out;
  }

  // Fixed-seed sampling is bit-reproducible.
  Rng sample_rng_a(77);
  Rng sample_rng_b(77);
  const Motion a = model.sample(dataset[0].cond, rig, 12, 1.0, sample_rng_a);
  const Motion b = model.sample(dataset[0].cond, rig, 12, 1.0, sample_rng_b);
  if (a.frame_count() != b.frame_count()) {
    return {false, out.detail + "; repeated sampling changed the frame count"};
  }
  for (int f = 0; f < a.frame_count(); ++f) {
    if ((a.rotations[f] - b.rotations[f]).cwiseAbs().maxCoeff() != 0.0) {
      return {false, out.detail + "; fixed-seed sampling not bit-reproducible"};
    }
  }
  out.detail += ", fixed-seed sampling bit-reproducible";
  return out;
}

// --------------------------------------------------------------------------
// 8. Metric implementations vs brute-force oracles and self-metric bounds.

double oracle_best_similarity(const Eigen::MatrixXd& rows, const Eigen::VectorXd& query) {
  double best = -2.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::VectorXd row = rows.row(i).transpose();
    const double na = row.norm();
    const double nb = query.norm();
    const double sim = (na == 0.0 || nb == 0.0) ? 0.0 : row.dot(query) / (na * nb);
    best = std::max(best, sim);
  }
  return best;
}

Eigen::MatrixXd oracle_window_rows(const Motion& motion, int window,
                                   const EmbeddingProvider& provider) {
  const int count = motion.frame_count() - window + 1;
  Eigen::MatrixXd rows(count, provider.dimension());
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(provider.dimension());
    for (int f = s; f < s + window; ++f) {
      mean += provider.embed_pose(motion.rig, motion.rotations[f]);
    }
    rows.row(s) = (mean / window).transpose();
  }
  return rows;
}

Outcome criterion_metric_oracles() {
  Rng rng(0xFC08);
  const Rig rig_a = testsupport::random_rig(rng, 4);
  const Rig rig_b = testsupport::random_rig(rng, 6);
  const Motion generated = testsupport::random_motion(rng, rig_a, 8);
  const Motion reference = testsupport::random_motion(rng, rig_b, 7);
  FkPositionProvider provider(16);

  const int window = default_window_frames(reference, generated);
  if (reference.frame_count() - window + 1 > 6 || generated.frame_count() - window + 1 > 6) {
    return {false, "oracle comparison demands at most 6 windows per motion"};
  }
  const Eigen::MatrixXd ref_rows = oracle_window_rows(reference, window, provider);
  const Eigen::MatrixXd gen_rows = oracle_window_rows(generated, window, provider);

  for (const double theta : {0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0}) {
    int covered = 0;
    for (Eigen::Index i = 0; i < ref_rows.rows(); ++i) {
      if (oracle_best_similarity(gen_rows, ref_rows.row(i).transpose()) > theta) ++covered;
    }
    const double oracle_cov = static_cast<double>(covered) / ref_rows.rows();
    int novel = 0;
    for (Eigen::Index i = 0; i < gen_rows.rows(); ++i) {
      if (1.0 - oracle_best_similarity(ref_rows, gen_rows.row(i).transpose()) > theta) ++novel;
    }
    const double oracle_nov = static_cast<double>(novel) / gen_rows.rows();
    if (coverage(reference, generated, theta, provider) != oracle_cov) {
      return {false, "coverage differs from brute force at theta " + fmt(theta)};
    }
    if (novelty(generated, reference, theta, provider) != oracle_nov) {
      return {false, "novelty differs from brute force at theta " + fmt(theta)};
    }
  }

  // Self-metrics: a motion against itself.
  const Motion self = testsupport::random_motion(rng, rig_a, 9);
  const double cov_auc = auc_sweep(coverage_curve(self, self, provider));
  const double nov_auc = auc_sweep(novelty_curve(self, self, provider));
  if (cov_auc < 0.99) return {false, "self coverage AUC " + fmt(cov_auc) + " below 0.99"};
  if (nov_auc > 0.01) return {false, "self novelty AUC " + fmt(nov_auc) + " above 0.01"};

  Eigen::MatrixXd embeddings(10, 6);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 6; ++c) embeddings(r, c) = rng.normal();
  }
  const double self_fid = fid(embeddings, embeddings);
  if (!(self_fid < 1e-6)) return {false, "self fid " + fmt(self_fid) + " not below 1e-6"};
  const double r_at_1 = r_precision(embeddings, embeddings, 1);
  if (r_at_1 != 1.0) return {false, "R@1 on identical sets is " + fmt(r_at_1) + ", not 1.0"};

  Outcome out;
  out.detail = "coverage/novelty match brute force at 7 thresholds; self AUCs " + fmt(cov_auc) +
               "/" + fmt(nov_auc) + ", self fid " + fmt(self_fid) + ", R@1 1.0";
  return out;
}

// --------------------------------------------------------------------------
// 9. Long-motion chunk arithmetic and overlap blending.

Outcome criterion_long_motion() {
  const DenoiserConfig cfg = DenoiserConfig::desk_preset();
  DenoiserModel model(cfg, 3);
  model.set_trained(true);
  const Rig rig = make_chain_rig({0.0, 1.0, 0.7});
  const int joints = rig.joint_count();
  const int overlap = 15;

  const std::vector<Eigen::VectorXd> conds = {embed_text("march", cfg.cond_dim),
                                              embed_text("leap", cfg.cond_dim),
                                              embed_text("spin", cfg.cond_dim)};
  Rng rng(55);
  SampleLongTrace trace;
  const Motion motion = model.sample_long(conds, rig, overlap, 1.0, rng, &trace);

  const int expected_frames = 3 * cfg.f_max - 2 * overlap;
  if (motion.frame_count() != expected_frames) {
    return {false, "got " + std::to_string(motion.frame_count()) + " frames, expected " +
                       std::to_string(expected_frames)};
  }
  if (trace.chunk_frames != cfg.f_max || static_cast<int>(trace.chunk_degrees.size()) != 3) {
    return {false, "trace does not describe three full-length chunks"};
  }
  if (static_cast<int>(trace.blend_weights.size()) != overlap) {
    return {false, "blend curve length " + std::to_string(trace.blend_weights.size()) +
                       ", expected " + std::to_string(overlap)};
  }
  for (int i = 0; i < overlap; ++i) {
    const double expected = static_cast<double>(i + 1) / (overlap + 1);
    if (std::abs(trace.blend_weights[i] - expected) > 1e-12) {
      return {false, "blend weight " + std::to_string(i) + " is not (i+1)/(n+1)"};
    }
  }
  const double midpoint = trace.blend_weights[overlap / 2];
  if (std::abs(midpoint - 0.5) > 1e-9) {
    return {false, "blend midpoint weight " + fmt(midpoint) + " differs from 0.5"};
  }

  // Rebuild the full motion from the unblended chunks: every overlap frame
  // must be the convex combination given by the blend curve, and every other
  // frame a verbatim chunk row.
  Mat assembled = Mat::Zero(expected_frames * joints, 3);
  assembled.topRows(cfg.f_max * joints) = trace.chunk_degrees[0];
  for (int c = 1; c < 3; ++c) {
    const int start = c * (cfg.f_max - overlap);
    for (int f = 0; f < cfg.f_max; ++f) {
      for (int j = 0; j < joints; ++j) {
        const Eigen::Index out_row = static_cast<Eigen::Index>(start + f) * joints + j;
        const Eigen::Index chunk_row = static_cast<Eigen::Index>(f) * joints + j;
        if (f < overlap) {
          const double w = trace.blend_weights[f];
          assembled.row(out_row) = (1.0 - w) * assembled.row(out_row) +
                                   w * trace.chunk_degrees[c].row(chunk_row);
        } else {
          assembled.row(out_row) = trace.chunk_degrees[c].row(chunk_row);
        }
      }
    }
  }
  double max_err = 0.0;
  for (int f = 0; f < expected_frames; ++f) {
    for (int j = 0; j < joints; ++j) {
      for (int ch = 0; ch < 3; ++ch) {
        const double expected_deg =
            wrap_degrees(assembled(static_cast<Eigen::Index>(f) * joints + j, ch));
        max_err = std::max(max_err, std::abs(motion.rotations[f](j, ch) - expected_deg));
      }
    }
  }
  Outcome out;
  out.detail = "3 chunks of " + std::to_string(cfg.f_max) + " overlap " +
               std::to_string(overlap) + " -> " + std::to_string(motion.frame_count()) +
               " frames, midpoint weight 0.5, convex-combination err " + fmt(max_err);
  if (max_err > 1e-9) {
    out.pass = false;
    out.detail += " (tolerance 1e-9 exceeded)";
  }
  return out;
}

struct Criterion {
  std::string title;
  std::function<Outcome()> run;
  double time_limit_s = 0.0;  // 0: no limit
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"forward kinematics matches an independent matrix-chain oracle", criterion_fk_oracle,
       5.0},
      {"rest-pose reset and identity retargeting reproduce global positions",
       criterion_retarget_round_trip, 60.0},
      {"bone-scale draws bounded and mirrored; removal spares root and branches",
       criterion_augmentation_constraints, 0.0},
      {"augment command turns 40 motions into exactly 1040 files",
       criterion_dataset_multiplicity, 0.0},
      {"BVH round-trip within 1e-5 and 10000 fuzzed parses without a crash",
       criterion_bvh_round_trip, 0.0},
      {"denoiser masking, zero-init identity, equivariance, and gradients",
       criterion_denoiser_invariants, 120.0},
      {"desk-preset overfit drops smoothed loss below 10% with reproducible sampling",
       criterion_overfit_smoke, 600.0},
      {"coverage/novelty match brute force; self-metric bounds hold",
       criterion_metric_oracles, 0.0},
      {"three 90-frame chunks with overlap 15 blend into 240 frames",
       criterion_long_motion, 0.0},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("unexpected exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].time_limit_s > 0.0 && elapsed > criteria[i].time_limit_s) {
      outcome.pass = false;
      outcome.detail += " (runtime " + fmt(elapsed) + "s over the " +
                        fmt(criteria[i].time_limit_s) + "s budget)";
    }
    if (!outcome.pass) ++failures;
    std::printf("%s  [%zu/%zu] %s — %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria.size(), criteria[i].title.c_str(), outcome.detail.c_str(), elapsed);
    std::fflush(stdout);
  }
  if (failures == 0) {
    std::printf("all %zu criteria passed\n", criteria.size());
  } else {
    std::printf("%d of %zu criteria FAILED\n", failures, criteria.size());
  }
  return failures == 0 ? 0 : 1;
}
