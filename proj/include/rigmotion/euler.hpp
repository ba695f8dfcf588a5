#pragma once

#include <Eigen/Core>
#include <array>

namespace rigmotion {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * (kPi / 180.0); }
inline double rad2deg(double rad) { return rad * (180.0 / kPi); }

// Wrap an angle in degrees into (-180, 180].
double wrap_degrees(double deg);

Eigen::Matrix3d rot_x(double rad);
Eigen::Matrix3d rot_y(double rad);
Eigen::Matrix3d rot_z(double rad);

// Local joint rotations apply Z, then X, then Y about body axes:
// M = Rz(z) * Rx(x) * Ry(y), acting on column vectors. Angles in degrees,
// stored as (z, x, y).
Eigen::Matrix3d euler_zxy_to_matrix(const Eigen::Vector3d& zxy_deg);

// Inverse of the above; returns degrees. At gimbal lock (|sin x| = 1) the
// y angle is pinned to zero, making the branch deterministic.
Eigen::Vector3d matrix_to_euler_zxy(const Eigen::Matrix3d& m);

// Generic channel-order composition for file import: axes are 0=X, 1=Y, 2=Z
// in application order, M = R(a0) * R(a1) * R(a2).
Eigen::Matrix3d euler_to_matrix(const std::array<int, 3>& axis_order,
                                const Eigen::Vector3d& deg);

}  // namespace rigmotion
