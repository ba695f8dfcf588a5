#include "rigmotion/preprocess.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "rigmotion/euler.hpp"

namespace rigmotion {

Eigen::Vector3d parse_axis(const std::string& name) {
  std::string s = name;
  double sign = 1.0;
  if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
    if (s[0] == '-') sign = -1.0;
    s = s.substr(1);
  }
  if (s == "X" || s == "x") return sign * Eigen::Vector3d::UnitX();
  if (s == "Y" || s == "y") return sign * Eigen::Vector3d::UnitY();
  if (s == "Z" || s == "z") return sign * Eigen::Vector3d::UnitZ();
  throw RigError(ErrorCode::ConfigError, "unrecognized axis '" + name + "'");
}

namespace {

Eigen::Matrix3d orthonormal_frame(const Eigen::Vector3d& forward, const Eigen::Vector3d& up,
                                  const char* side) {
  const double fn = forward.norm();
  const double un = up.norm();
  if (fn <= 0.0 || un <= 0.0) {
    throw RigError(ErrorCode::ConfigError, std::string(side) + " axes must be non-zero");
  }
  const Eigen::Vector3d f = forward / fn;
  const Eigen::Vector3d u = up / un;
  if (std::abs(f.dot(u)) > 1e-9) {
    throw RigError(ErrorCode::ConfigError,
                   std::string(side) + " forward and up axes must be orthogonal");
  }
  Eigen::Matrix3d frame;
  frame.col(0) = f;
  frame.col(1) = u;
  frame.col(2) = f.cross(u);
  return frame;
}

}  // namespace

Eigen::Matrix3d rotation_for_axes(const AxisConfig& axes) {
  const Eigen::Matrix3d src = orthonormal_frame(axes.source_forward, axes.source_up, "source");
  const Eigen::Matrix3d dst = orthonormal_frame(axes.target_forward, axes.target_up, "target");
  return dst * src.transpose();
}

BoundingBox rest_bounding_box(const Rig& rig) {
  const OffsetMatrix positions = rest_positions(rig);
  BoundingBox box;
  box.min = positions.colwise().minCoeff().transpose();
  box.max = positions.colwise().maxCoeff().transpose();
  return box;
}

double normalize_rest_scale(Rig& rig) {
  const double side = rest_bounding_box(rig).longest_side();
  if (!(side > 1e-12)) {
    throw RigError(ErrorCode::DegenerateBoundingBox,
                   "rest-pose joints are coincident; nothing to scale");
  }
  const double factor = 1.0 / side;
  // An already-normalized rig re-measures its side with float dust; snapping
  // keeps repeated normalization bit-identical.
  if (std::abs(factor - 1.0) < 1e-12) return 1.0;
  rig.rest_offsets *= factor;
  return factor;
}

void center_rest_pose(Rig& rig) {
  const Eigen::Vector3d center = rest_bounding_box(rig).center();
  const int root = rig.topology.root();
  rig.rest_offsets.row(root) -= center.transpose();
}

void rotate_motion(Motion& motion, const Eigen::Matrix3d& q) {
  if (q.isIdentity(0.0)) return;
  motion.rig.rest_offsets = (q * motion.rig.rest_offsets.transpose()).transpose();
  const Eigen::Matrix3d qt = q.transpose();
  for (auto& frame : motion.rotations) {
    for (int j = 0; j < frame.rows(); ++j) {
      const Eigen::Matrix3d local = euler_zxy_to_matrix(frame.row(j).transpose());
      frame.row(j) = matrix_to_euler_zxy(q * local * qt).transpose();
    }
  }
}

BvhDocument preprocess(const BvhDocument& doc, const AxisConfig& axes) {
  if (auto r = validate_motion(doc.motion); !r) throw RigError(r.code, r.message);

  BvhDocument out = doc;
  const Eigen::Matrix3d q = rotation_for_axes(axes);
  rotate_motion(out.motion, q);
  normalize_rest_scale(out.motion.rig);
  center_rest_pose(out.motion.rig);
  out.rig = out.motion.rig;
  return out;
}

}  // namespace rigmotion
