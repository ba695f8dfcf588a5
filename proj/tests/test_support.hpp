#pragma once

// Shared helpers for the test suites: fixture paths, temp directories,
// seeded random rig/motion generators, and independently coded reference
// implementations ("oracles") that the library code is checked against.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "rigmotion/rng.hpp"
#include "rigmotion/skeleton.hpp"

#ifndef RIGMOTION_FIXTURE_DIR
#define RIGMOTION_FIXTURE_DIR "tests/fixtures"
#endif

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
  return std::string(RIGMOTION_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Fresh unique directory under the system temp root; never reused across
// calls so parallel tests cannot collide.
inline std::string temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("rigmotion_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::create_directories(dir);
  return dir.string();
}

// ---------------------------------------------------------------------------
// Random rigs and motions

// Random tree over `joints` nodes: node 0 is the root, every later node picks
// a uniformly random earlier parent, offsets are non-degenerate.
inline rigmotion::Rig random_rig(rigmotion::Rng& rng, int joints) {
  rigmotion::Rig rig;
  rig.rest_offsets.resize(joints, 3);
  for (int j = 0; j < joints; ++j) {
    rig.topology.joint_names.push_back("j" + std::to_string(j));
    rig.topology.parents.push_back(j == 0 ? -1 : rng.uniform_int(0, j - 1));
    if (j == 0) {
      rig.rest_offsets.row(j).setZero();
    } else {
      Eigen::Vector3d offset;
      do {
        offset = Eigen::Vector3d(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                 rng.uniform(-2.0, 2.0));
      } while (offset.norm() < 0.1);
      rig.rest_offsets.row(j) = offset.transpose();
    }
  }
  rig.topology.child_lists.assign(joints, {});
  for (int j = 1; j < joints; ++j) rig.topology.child_lists[rig.topology.parents[j]].push_back(j);
  rig.topology.traversal.clear();
  for (int j = 0; j < joints; ++j) rig.topology.traversal.push_back(j);
  rig.topology.end_site.assign(joints, false);
  return rig;
}

inline rigmotion::Motion random_motion(rigmotion::Rng& rng, rigmotion::Rig rig, int frames,
                                       double amplitude_deg = 45.0) {
  rigmotion::Motion motion;
  motion.rig = std::move(rig);
  for (int f = 0; f < frames; ++f) {
    rigmotion::OffsetMatrix rotations(motion.rig.joint_count(), 3);
    for (int j = 0; j < motion.rig.joint_count(); ++j) {
      for (int c = 0; c < 3; ++c) {
        rotations(j, c) = rng.uniform(-amplitude_deg, amplitude_deg);
      }
    }
    motion.rotations.push_back(std::move(rotations));
  }
  return motion;
}

// ---------------------------------------------------------------------------
// Independent rotation / FK oracles (no shared code with the library)

inline Eigen::Matrix3d oracle_axis_rotation(int axis, double rad) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const int a = (axis + 1) % 3;
  const int b = (axis + 2) % 3;
  m(a, a) = c;
  m(a, b) = -s;
  m(b, a) = s;
  m(b, b) = c;
  return m;
}

inline Eigen::Matrix3d oracle_zxy(const Eigen::Vector3d& zxy_deg) {
  const double k = 3.14159265358979323846 / 180.0;
  return oracle_axis_rotation(2, zxy_deg[0] * k) * oracle_axis_rotation(0, zxy_deg[1] * k) *
         oracle_axis_rotation(1, zxy_deg[2] * k);
}

// World positions and orientations by direct recursion over parents, written
// against the definition rather than the library's traversal.
inline void oracle_fk_frame(const rigmotion::Rig& rig, const rigmotion::OffsetMatrix& rot_deg,
                            rigmotion::OffsetMatrix& positions,
                            std::vector<Eigen::Matrix3d>& orientations) {
  const int joints = rig.joint_count();
  positions.resize(joints, 3);
  orientations.assign(joints, Eigen::Matrix3d::Identity());
  std::vector<bool> done(joints, false);
  // Repeated sweeps avoid assuming anything about node ordering.
  for (int pass = 0; pass < joints; ++pass) {
    for (int j = 0; j < joints; ++j) {
      if (done[j]) continue;
      const int parent = rig.topology.parents[j];
      if (parent < 0) {
        orientations[j] = oracle_zxy(rot_deg.row(j).transpose());
        positions.row(j) = rig.rest_offsets.row(j);
        done[j] = true;
      } else if (done[parent]) {
        const Eigen::Vector3d offset = rig.rest_offsets.row(j).transpose();
        positions.row(j) =
            (positions.row(parent).transpose() + orientations[parent] * offset).transpose();
        orientations[j] = orientations[parent] * oracle_zxy(rot_deg.row(j).transpose());
        done[j] = true;
      }
    }
  }
}

}  // namespace testsupport
