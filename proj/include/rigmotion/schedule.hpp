#pragma once

#include <Eigen/Core>
#include <vector>

#include "rigmotion/skeleton.hpp"
#include "rigmotion/types.hpp"

namespace rigmotion {

/// Discrete diffusion noise schedule over timesteps t = 0 .. steps()-1, stored
/// as the cumulative signal fraction alpha-bar per step.
struct NoiseSchedule {
  std::vector<double> alphas_cumprod;

  int steps() const { return static_cast<int>(alphas_cumprod.size()); }
  double alpha_bar(int t) const;       // alpha_bar(-1) is defined as 1
  double beta(int t) const;            // 1 - alpha_bar(t)/alpha_bar(t-1)
  ValidationResult validate() const;   // strictly decreasing, in (0, 1]

  /// Squared-cosine ramp: betas are clamped to [1e-8, 0.999] and alpha-bar is
  /// rebuilt as their cumulative product, so the first step stays close to 1
  /// and the last close to 0 without ever reaching either endpoint.
  static NoiseSchedule cosine(int timesteps);
};

/// Per-channel normalization for rotation data, computed in radians.
struct NormStats {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d stddev = Eigen::Vector3d::Ones();

  /// Population statistics over every (frame, joint) rotation triple of every
  /// motion, converted to radians. Standard deviations below 1e-6 are raised
  /// to 1e-6 so constant channels stay invertible.
  static NormStats fit(const std::vector<Motion>& motions);
};

/// Degree rotations (F*J) x 3 -> normalized radians, row index f * J + j.
Eigen::MatrixXd normalize_rotations(const Motion& motion, const NormStats& stats);
Eigen::MatrixXd normalize_rotation_grid(const Eigen::MatrixXd& degrees, const NormStats& stats);

/// Inverse map back to degrees wrapped to (-180, 180].
Eigen::MatrixXd denormalize_rotations(const Eigen::MatrixXd& normalized, const NormStats& stats);

/// Forward diffusion x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.
/// Rows flagged false in `row_mask` (if non-empty) are zeroed.
Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& noise,
                         const NoiseSchedule& schedule,
                         const std::vector<bool>& row_mask = {});

}  // namespace rigmotion
