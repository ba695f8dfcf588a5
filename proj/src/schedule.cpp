#include "rigmotion/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "rigmotion/euler.hpp"

namespace rigmotion {

namespace {

double require_step(const NoiseSchedule& schedule, int t) {
  if (t < -1 || t >= schedule.steps()) {
    throw RigError(ErrorCode::IndexOutOfRange,
                   "diffusion step " + std::to_string(t) + " outside schedule of length " +
                       std::to_string(schedule.steps()));
  }
  return t < 0 ? 1.0 : schedule.alphas_cumprod[static_cast<size_t>(t)];
}

ValidationResult schedule_failure(ErrorCode code, const std::string& message) {
  ValidationResult result;
  result.ok = false;
  result.code = code;
  result.message = message;
  return result;
}

}  // namespace

double NoiseSchedule::alpha_bar(int t) const { return require_step(*this, t); }

double NoiseSchedule::beta(int t) const {
  const double prev = require_step(*this, t - 1);
  const double cur = require_step(*this, t);
  return 1.0 - cur / prev;
}

ValidationResult NoiseSchedule::validate() const {
  if (alphas_cumprod.empty()) {
    return schedule_failure(ErrorCode::ConfigError, "noise schedule has no steps");
  }
  double prev = 1.0;
  for (size_t t = 0; t < alphas_cumprod.size(); ++t) {
    const double a = alphas_cumprod[t];
    if (!std::isfinite(a) || a <= 0.0 || a > 1.0) {
      return schedule_failure(ErrorCode::ConfigError,
                              "alpha-bar at step " + std::to_string(t) + " outside (0, 1]");
    }
    if (a >= prev) {
      return schedule_failure(
          ErrorCode::ConfigError,
          "alpha-bar must decrease strictly; violated at step " + std::to_string(t));
    }
    prev = a;
  }
  return ValidationResult{};
}

NoiseSchedule NoiseSchedule::cosine(int timesteps) {
  if (timesteps < 1) {
    throw RigError(ErrorCode::ConfigError, "noise schedule needs at least one step");
  }
  const double s = 0.008;
  auto ramp = [&](double t) {
    const double arg = ((t / timesteps + s) / (1.0 + s)) * (kPi / 2.0);
    const double c = std::cos(arg);
    return c * c;
  };
  const double f0 = ramp(0.0);
  NoiseSchedule schedule;
  schedule.alphas_cumprod.resize(static_cast<size_t>(timesteps));
  double running = 1.0;
  double prev_raw = 1.0;
  for (int t = 0; t < timesteps; ++t) {
    const double raw = ramp(static_cast<double>(t + 1)) / f0;
    double beta = 1.0 - raw / prev_raw;
    beta = std::clamp(beta, 1e-8, 0.999);
    prev_raw = raw;
    running *= 1.0 - beta;
    schedule.alphas_cumprod[static_cast<size_t>(t)] = running;
  }
  return schedule;
}

NormStats NormStats::fit(const std::vector<Motion>& motions) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d sum_sq = Eigen::Vector3d::Zero();
  long long count = 0;
  for (const Motion& motion : motions) {
    for (const OffsetMatrix& frame : motion.rotations) {
      for (Eigen::Index j = 0; j < frame.rows(); ++j) {
        for (int c = 0; c < 3; ++c) {
          const double rad = deg2rad(frame(j, c));
          sum(c) += rad;
          sum_sq(c) += rad * rad;
        }
        ++count;
      }
    }
  }
  NormStats stats;
  if (count == 0) {
    return stats;
  }
  stats.mean = sum / static_cast<double>(count);
  for (int c = 0; c < 3; ++c) {
    const double var =
        std::max(0.0, sum_sq(c) / static_cast<double>(count) - stats.mean(c) * stats.mean(c));
    stats.stddev(c) = std::max(std::sqrt(var), 1e-6);
  }
  return stats;
}

Eigen::MatrixXd normalize_rotation_grid(const Eigen::MatrixXd& degrees, const NormStats& stats) {
  if (degrees.cols() != 3) {
    throw RigError(ErrorCode::ShapeMismatch, "rotation grid must have three columns");
  }
  Eigen::MatrixXd out(degrees.rows(), 3);
  for (Eigen::Index r = 0; r < degrees.rows(); ++r) {
    for (int c = 0; c < 3; ++c) {
      out(r, c) = (deg2rad(degrees(r, c)) - stats.mean(c)) / stats.stddev(c);
    }
  }
  return out;
}

Eigen::MatrixXd normalize_rotations(const Motion& motion, const NormStats& stats) {
  const Eigen::Index joints = motion.rig.topology.joint_count();
  const Eigen::Index frames = static_cast<Eigen::Index>(motion.rotations.size());
  Eigen::MatrixXd grid(frames * joints, 3);
  for (Eigen::Index f = 0; f < frames; ++f) {
    grid.middleRows(f * joints, joints) = motion.rotations[static_cast<size_t>(f)];
  }
  return normalize_rotation_grid(grid, stats);
}

Eigen::MatrixXd denormalize_rotations(const Eigen::MatrixXd& normalized, const NormStats& stats) {
  if (normalized.cols() != 3) {
    throw RigError(ErrorCode::ShapeMismatch, "rotation grid must have three columns");
  }
  Eigen::MatrixXd out(normalized.rows(), 3);
  for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
    for (int c = 0; c < 3; ++c) {
      const double rad = normalized(r, c) * stats.stddev(c) + stats.mean(c);
      out(r, c) = wrap_degrees(rad2deg(rad));
    }
  }
  return out;
}

Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& noise,
                         const NoiseSchedule& schedule, const std::vector<bool>& row_mask) {
  if (noise.rows() != x0.rows() || noise.cols() != x0.cols()) {
    throw RigError(ErrorCode::ShapeMismatch, "noise tensor must match the clean tensor shape");
  }
  if (!row_mask.empty() && static_cast<Eigen::Index>(row_mask.size()) != x0.rows()) {
    throw RigError(ErrorCode::ShapeMismatch, "row mask length must match the tensor row count");
  }
  const double a = schedule.alpha_bar(t);
  Eigen::MatrixXd x_t = std::sqrt(a) * x0 + std::sqrt(1.0 - a) * noise;
  if (!row_mask.empty()) {
    for (Eigen::Index r = 0; r < x_t.rows(); ++r) {
      if (!row_mask[static_cast<size_t>(r)]) {
        x_t.row(r).setZero();
      }
    }
  }
  return x_t;
}

}  // namespace rigmotion
