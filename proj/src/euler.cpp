#include "rigmotion/euler.hpp"

#include <algorithm>
#include <cmath>

namespace rigmotion {

double wrap_degrees(double deg) {
  double v = std::fmod(deg + 180.0, 360.0);
  if (v <= 0.0) v += 360.0;
  return v - 180.0;
}

Eigen::Matrix3d rot_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return m;
}

Eigen::Matrix3d euler_zxy_to_matrix(const Eigen::Vector3d& zxy_deg) {
  return rot_z(deg2rad(zxy_deg[0])) * rot_x(deg2rad(zxy_deg[1])) * rot_y(deg2rad(zxy_deg[2]));
}

Eigen::Vector3d matrix_to_euler_zxy(const Eigen::Matrix3d& m) {
  // M = Rz * Rx * Ry gives m(2,1) = sin(x), m(2,0) = -cos(x) sin(y),
  // m(2,2) = cos(x) cos(y), m(0,1) = -sin(z) cos(x), m(1,1) = cos(z) cos(x).
  const double sx = std::clamp(m(2, 1), -1.0, 1.0);
  double x = std::asin(sx);
  double z, y;
  if (std::abs(sx) >= 1.0 - 1e-14) {
    // Gimbal lock: only z±y observable; pin y to zero.
    y = 0.0;
    z = std::atan2(m(1, 0), m(0, 0));
  } else {
    z = std::atan2(-m(0, 1), m(1, 1));
    y = std::atan2(-m(2, 0), m(2, 2));
  }
  return {rad2deg(z), rad2deg(x), rad2deg(y)};
}

Eigen::Matrix3d euler_to_matrix(const std::array<int, 3>& axis_order,
                                const Eigen::Vector3d& deg) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  for (int i = 0; i < 3; ++i) {
    const double rad = deg2rad(deg[i]);
    switch (axis_order[i]) {
      case 0: m = m * rot_x(rad); break;
      case 1: m = m * rot_y(rad); break;
      default: m = m * rot_z(rad); break;
    }
  }
  return m;
}

}  // namespace rigmotion
