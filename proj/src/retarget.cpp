#include "rigmotion/retarget.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>

#include "rigmotion/euler.hpp"

namespace rigmotion {

Eigen::Matrix3d rotation_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double d = a.dot(b);
  const Eigen::Vector3d c = a.cross(b);
  if (d >= 1.0 - 1e-15) return Eigen::Matrix3d::Identity();
  if (d <= -1.0 + 1e-12) {
    // Antiparallel: rotate 180 degrees about the coordinate axis most
    // orthogonal to `a`, projected into a's orthogonal plane.
    int smallest = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(a[i]) < std::abs(a[smallest])) smallest = i;
    }
    const Eigen::Vector3d axis = a.cross(Eigen::Vector3d::Unit(smallest)).normalized();
    return Eigen::AngleAxisd(kPi, axis).toRotationMatrix();
  }
  Eigen::Matrix3d skew;
  skew << 0, -c[2], c[1],
          c[2], 0, -c[0],
         -c[1], c[0], 0;
  return Eigen::Matrix3d::Identity() + skew + skew * skew * (1.0 / (1.0 + d));
}

Eigen::Matrix3d solve_wahba(const std::vector<Eigen::Vector3d>& from,
                            const std::vector<Eigen::Vector3d>& to) {
  if (from.empty() || from.size() != to.size()) {
    throw RigError(ErrorCode::ShapeMismatch, "direction sets must be non-empty and equal-sized");
  }
  if (from.size() == 1) return rotation_between(from[0], to[0]);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < from.size(); ++i) h += from[i] * to[i].transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()[1] < 1e-9) {
    // All directions (nearly) share one line; the least-squares rotation is
    // only determined up to twist. Align the mean directions minimally so
    // identical bundles map to the exact identity.
    Eigen::Vector3d mean_from = Eigen::Vector3d::Zero();
    Eigen::Vector3d mean_to = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < from.size(); ++i) {
      mean_from += from[i];
      mean_to += to[i];
    }
    if (mean_from.norm() > 1e-12 && mean_to.norm() > 1e-12) {
      return rotation_between(mean_from.normalized(), mean_to.normalized());
    }
    // Antipodal pairs cancelled the means; fall through to the SVD answer.
  }
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d gains(1.0, 1.0, (v * u.transpose()).determinant());
  return v * gains.asDiagonal() * u.transpose();
}

Motion retarget_to_rig(const std::vector<OffsetMatrix>& target_positions, const Rig& new_rig,
                       const std::vector<int>& joint_map, double frame_time,
                       RetargetReport* report) {
  if (auto r = validate_rig(new_rig); !r) throw RigError(r.code, r.message);
  const int joints = new_rig.joint_count();
  if (static_cast<int>(joint_map.size()) != joints) {
    throw RigError(ErrorCode::ShapeMismatch, "joint_map size must equal the new rig's joint count");
  }
  const int frames = static_cast<int>(target_positions.size());
  if (frames < 1) throw RigError(ErrorCode::EmptyMotion, "no target frames");
  const int streams = static_cast<int>(target_positions[0].rows());
  for (int j = 0; j < joints; ++j) {
    if (joint_map[j] >= streams) {
      throw RigError(ErrorCode::IndexOutOfRange,
                     "joint_map entry " + std::to_string(j) + " exceeds stream count");
    }
  }

  RetargetReport local_report;
  RetargetReport& rep = report ? *report : local_report;

  Motion out;
  out.rig = new_rig;
  out.frame_time = frame_time;
  out.rotations.assign(frames, OffsetMatrix::Zero(joints, 3));

  const auto& topo = new_rig.topology;
  std::vector<bool> warned(joints, false);

  // World state rebuilt per frame from the *stored* (Euler-quantized)
  // rotations so emitted motion FK sees exactly the chains solved here.
  OffsetMatrix world_pos(joints, 3);
  std::vector<Eigen::Matrix3d> world_rot(joints);

  std::vector<Eigen::Vector3d> from_dirs, to_dirs;
  for (int f = 0; f < frames; ++f) {
    if (target_positions[f].rows() != streams) {
      throw RigError(ErrorCode::ShapeMismatch, "target stream count varies across frames");
    }
    for (const int q : topo.traversal) {
      const int p = topo.parents[q];
      const Eigen::Matrix3d parent_rot = (p == kNoParent) ? Eigen::Matrix3d::Identity() : world_rot[p];
      const Eigen::Vector3d pos = (p == kNoParent)
                                      ? Eigen::Vector3d(new_rig.rest_offsets.row(q).transpose())
                                      : Eigen::Vector3d(world_pos.row(p).transpose() +
                                                        parent_rot * new_rig.rest_offsets.row(q).transpose());
      world_pos.row(q) = pos.transpose();

      from_dirs.clear();
      to_dirs.clear();
      bool degenerate = false;
      for (const int c : topo.child_lists[q]) {
        if (joint_map[c] < 0) continue;
        const Eigen::Vector3d target =
            target_positions[f].row(joint_map[c]).transpose() - pos;
        if (target.norm() <= 1e-12) {
          degenerate = true;
          break;
        }
        from_dirs.push_back(Eigen::Vector3d(new_rig.rest_offsets.row(c).transpose()).normalized());
        to_dirs.push_back((parent_rot.transpose() * target).normalized());
      }

      Eigen::Vector3d euler;
      if (degenerate) {
        ++rep.degenerate_holds;
        euler = (f > 0) ? Eigen::Vector3d(out.rotations[f - 1].row(q).transpose())
                        : Eigen::Vector3d::Zero();
      } else if (from_dirs.empty()) {
        if (!topo.child_lists[q].empty() && !warned[q]) {
          warned[q] = true;
          rep.warnings.push_back("joint '" + topo.joint_names[q] +
                                 "' has children but no constrained ones; using identity");
        }
        euler = Eigen::Vector3d::Zero();
      } else {
        const Eigen::Matrix3d local = solve_wahba(from_dirs, to_dirs);
        euler = matrix_to_euler_zxy(local);
        for (size_t i = 0; i < from_dirs.size(); ++i) {
          const double err = (local * from_dirs[i] - to_dirs[i]).norm();
          if (err > rep.max_direction_error) rep.max_direction_error = err;
        }
      }
      out.rotations[f].row(q) = euler.transpose();
      world_rot[q] = parent_rot * euler_zxy_to_matrix(euler);
    }
  }
  return out;
}

}  // namespace rigmotion
