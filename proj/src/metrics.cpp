#include "rigmotion/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "rigmotion/rng.hpp"

namespace rigmotion {

using nlohmann::json;

FkPositionProvider::FkPositionProvider(int max_joints) : max_joints_(max_joints) {
  if (max_joints < 1) {
    throw RigError(ErrorCode::ConfigError, "joint budget must be positive");
  }
}

Eigen::VectorXd FkPositionProvider::embed_pose(const Rig& rig,
                                               const OffsetMatrix& rotations_deg) const {
  const int joints = rig.topology.joint_count();
  if (joints > max_joints_) {
    throw RigError(ErrorCode::JointBudgetExceeded,
                   "rig has more joints than the embedding budget of " +
                       std::to_string(max_joints_));
  }
  if (rotations_deg.rows() != joints) {
    throw RigError(ErrorCode::ShapeMismatch, "pose rotation rows do not match the rig");
  }
  OffsetMatrix positions;
  std::vector<Eigen::Matrix3d> orientations;
  forward_kinematics_frame(rig, rotations_deg, positions, orientations);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension());
  for (int j = 0; j < joints; ++j) {
    v.segment(3 * j, 3) = positions.row(j).transpose();
  }
  const double norm = v.norm();
  if (norm > 0.0) {
    v /= norm;
  }
  return v;
}

WindowSet extract_windows(const Motion& motion, int window_frames) {
  const int length = static_cast<int>(motion.rotations.size());
  if (window_frames < 1 || window_frames > length) {
    throw RigError(ErrorCode::WindowTooLarge,
                   "window of " + std::to_string(window_frames) + " frames does not fit a " +
                       std::to_string(length) + "-frame motion");
  }
  WindowSet windows;
  windows.source = motion;
  windows.window_frames = window_frames;
  windows.starts.resize(static_cast<size_t>(length - window_frames + 1));
  for (size_t i = 0; i < windows.starts.size(); ++i) {
    windows.starts[i] = static_cast<int>(i);
  }
  return windows;
}

Motion window_motion(const WindowSet& windows, int index) {
  if (index < 0 || index >= windows.count()) {
    throw RigError(ErrorCode::IndexOutOfRange, "window index out of range");
  }
  Motion out;
  out.rig = windows.source.rig;
  out.frame_time = windows.source.frame_time;
  const int start = windows.starts[static_cast<size_t>(index)];
  out.rotations.assign(windows.source.rotations.begin() + start,
                       windows.source.rotations.begin() + start + windows.window_frames);
  return out;
}

Eigen::MatrixXd window_embeddings(const WindowSet& windows, const EmbeddingProvider& provider) {
  if (windows.count() == 0) {
    throw RigError(ErrorCode::EmptyWindows, "window set is empty");
  }
  Eigen::MatrixXd out(windows.count(), provider.dimension());
  // Frame embeddings are shared between overlapping windows; compute each
  // frame once and average per window.
  const int frames = static_cast<int>(windows.source.rotations.size());
  Eigen::MatrixXd per_frame(frames, provider.dimension());
  for (int f = 0; f < frames; ++f) {
    per_frame.row(f) =
        provider.embed_pose(windows.source.rig, windows.source.rotations[static_cast<size_t>(f)])
            .transpose();
  }
  for (int i = 0; i < windows.count(); ++i) {
    const int start = windows.starts[static_cast<size_t>(i)];
    out.row(i) = per_frame.middleRows(start, windows.window_frames).colwise().mean();
  }
  return out;
}

Eigen::VectorXd motion_embedding(const Motion& motion, const EmbeddingProvider& provider) {
  if (motion.rotations.empty()) {
    throw RigError(ErrorCode::EmptyMotion, "cannot embed a motion with no frames");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(provider.dimension());
  for (const OffsetMatrix& frame : motion.rotations) {
    sum += provider.embed_pose(motion.rig, frame);
  }
  return sum / static_cast<double>(motion.rotations.size());
}

int default_window_frames(const Motion& a, const Motion& b, int cap) {
  const int la = static_cast<int>(a.rotations.size());
  const int lb = static_cast<int>(b.rotations.size());
  return std::min({la, lb, cap});
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw RigError(ErrorCode::DimensionMismatch, "cosine similarity needs equal dimensions");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return a.dot(b) / (na * nb);
}

namespace {

/// Best cosine similarity against `pool` for each row of `rows`.
Eigen::VectorXd best_similarities(const Eigen::MatrixXd& rows, const Eigen::MatrixXd& pool) {
  Eigen::VectorXd best(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double top = -1.0;
    for (Eigen::Index j = 0; j < pool.rows(); ++j) {
      top = std::max(top, cosine_similarity(rows.row(i).transpose(), pool.row(j).transpose()));
    }
    best(i) = top;
  }
  return best;
}

Eigen::VectorXd coverage_best(const Motion& reference, const Motion& generated,
                              const EmbeddingProvider& provider) {
  const int f_w = default_window_frames(reference, generated);
  Eigen::MatrixXd ref = window_embeddings(extract_windows(reference, f_w), provider);
  Eigen::MatrixXd gen = window_embeddings(extract_windows(generated, f_w), provider);
  return best_similarities(ref, gen);
}

Eigen::VectorXd novelty_distances(const Motion& generated, const Motion& reference,
                                  const EmbeddingProvider& provider) {
  const int f_w = default_window_frames(reference, generated);
  Eigen::MatrixXd gen = window_embeddings(extract_windows(generated, f_w), provider);
  Eigen::MatrixXd ref = window_embeddings(extract_windows(reference, f_w), provider);
  return (1.0 - best_similarities(gen, ref).array()).matrix();
}

double fraction_above(const Eigen::VectorXd& values, double theta) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) > theta) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

MetricCurve sweep(const Eigen::VectorXd& values, double step) {
  if (step <= 0.0 || step > 1.0) {
    throw RigError(ErrorCode::ConfigError, "sweep step must lie in (0, 1]");
  }
  MetricCurve curve;
  const int points = static_cast<int>(std::llround(1.0 / step)) + 1;
  curve.thetas.reserve(static_cast<size_t>(points));
  curve.values.reserve(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double theta = std::min(1.0, i * step);
    curve.thetas.push_back(theta);
    curve.values.push_back(fraction_above(values, theta));
  }
  return curve;
}

/// Symmetric PSD square root via eigendecomposition, negatives clamped.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double coverage(const Motion& reference, const Motion& generated, double theta,
                const EmbeddingProvider& provider) {
  return fraction_above(coverage_best(reference, generated, provider), theta);
}

double novelty(const Motion& generated, const Motion& reference, double theta,
               const EmbeddingProvider& provider) {
  return fraction_above(novelty_distances(generated, reference, provider), theta);
}

MetricCurve coverage_curve(const Motion& reference, const Motion& generated,
                           const EmbeddingProvider& provider, double step) {
  return sweep(coverage_best(reference, generated, provider), step);
}

MetricCurve novelty_curve(const Motion& generated, const Motion& reference,
                          const EmbeddingProvider& provider, double step) {
  return sweep(novelty_distances(generated, reference, provider), step);
}

double auc_sweep(const MetricCurve& curve) {
  if (curve.thetas.size() != curve.values.size() || curve.thetas.size() < 2) {
    throw RigError(ErrorCode::ConfigError, "curve needs at least two matched points");
  }
  double area = 0.0;
  for (size_t i = 1; i < curve.thetas.size(); ++i) {
    const double dx = curve.thetas[i] - curve.thetas[i - 1];
    area += dx * 0.5 * (curve.values[i] + curve.values[i - 1]);
  }
  return area;
}

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw RigError(ErrorCode::DimensionMismatch, "embedding sets have different dimensions");
  }
  if (a.rows() < 2 || b.rows() < 2) {
    throw RigError(ErrorCode::TooFewSamples, "each embedding set needs at least two samples");
  }
  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  const Eigen::MatrixXd ca = a.rowwise() - mu_a;
  const Eigen::MatrixXd cb = b.rowwise() - mu_b;
  const Eigen::MatrixXd sigma_a = ca.transpose() * ca / static_cast<double>(a.rows() - 1);
  const Eigen::MatrixXd sigma_b = cb.transpose() * cb / static_cast<double>(b.rows() - 1);

  const Eigen::MatrixXd root_a = sqrtm_psd(sigma_a);
  Eigen::MatrixXd inner = root_a * sigma_b * root_a;
  inner = 0.5 * (inner + inner.transpose().eval());  // enforce symmetry
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner);
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (mu_a - mu_b).squaredNorm();
  return mean_term + sigma_a.trace() + sigma_b.trace() - 2.0 * trace_sqrt;
}

double r_precision(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets, int k) {
  if (queries.rows() != targets.rows() || queries.cols() != targets.cols()) {
    throw RigError(ErrorCode::SizeMismatch, "queries and targets must pair up one-to-one");
  }
  if (queries.rows() == 0) {
    throw RigError(ErrorCode::TooFewSamples, "retrieval needs at least one pair");
  }
  if (k < 1) {
    throw RigError(ErrorCode::ConfigError, "k must be positive");
  }
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const double true_sim =
        cosine_similarity(queries.row(i).transpose(), targets.row(i).transpose());
    int strictly_better = 0;
    for (Eigen::Index j = 0; j < targets.rows(); ++j) {
      if (j == i) {
        continue;
      }
      if (cosine_similarity(queries.row(i).transpose(), targets.row(j).transpose()) > true_sim) {
        ++strictly_better;
      }
    }
    if (strictly_better < k) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.rows());
}

double alignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw RigError(ErrorCode::SizeMismatch, "aligned sets must pair up one-to-one");
  }
  if (a.rows() == 0) {
    throw RigError(ErrorCode::TooFewSamples, "alignment needs at least one pair");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    total += cosine_similarity(a.row(i).transpose(), b.row(i).transpose());
  }
  return total / static_cast<double>(a.rows());
}

double multimodality(const std::vector<Eigen::MatrixXd>& groups, uint64_t seed) {
  if (groups.empty()) {
    throw RigError(ErrorCode::TooFewSamples, "multimodality needs at least one group");
  }
  double total = 0.0;
  for (size_t g = 0; g < groups.size(); ++g) {
    const Eigen::MatrixXd& group = groups[g];
    if (group.rows() < 2) {
      throw RigError(ErrorCode::TooFewSamples,
                     "group " + std::to_string(g) + " has fewer than two samples");
    }
    std::vector<Eigen::Index> order(static_cast<size_t>(group.rows()));
    for (size_t i = 0; i < order.size(); ++i) {
      order[i] = static_cast<Eigen::Index>(i);
    }
    Rng rng(derive_seed(seed, static_cast<uint64_t>(g) + 1));
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double group_total = 0.0;
    const size_t pairs = order.size() / 2;
    for (size_t p = 0; p < pairs; ++p) {
      group_total += (group.row(order[2 * p]) - group.row(order[2 * p + 1])).norm();
    }
    total += group_total / static_cast<double>(pairs);
  }
  return total / static_cast<double>(groups.size());
}

namespace {

json curve_to_json(const MetricCurve& curve) {
  return json{{"thetas", curve.thetas}, {"values", curve.values}};
}

json scalar_or_null(double v) {
  if (std::isnan(v)) {
    return nullptr;
  }
  return v;
}

}  // namespace

json MetricReport::to_json() const {
  json j;
  j["coverage_curve"] = curve_to_json(coverage);
  j["novelty_curve"] = curve_to_json(novelty);
  j["coverage_auc"] = scalar_or_null(coverage_auc);
  j["novelty_auc"] = scalar_or_null(novelty_auc);
  j["fid"] = scalar_or_null(fid);
  j["r_precision"] = scalar_or_null(r_precision);
  j["alignment"] = scalar_or_null(alignment);
  j["multimodality"] = scalar_or_null(multimodality);
  return j;
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "metric,value\n";
  auto scalar = [&](const char* name, double v) {
    out << name << ',';
    if (std::isnan(v)) {
      out << "";
    } else {
      out << v;
    }
    out << '\n';
  };
  scalar("coverage_auc", coverage_auc);
  scalar("novelty_auc", novelty_auc);
  scalar("fid", fid);
  scalar("r_precision", r_precision);
  scalar("alignment", alignment);
  scalar("multimodality", multimodality);
  out << "\ntheta,coverage,novelty\n";
  const size_t points = std::max(coverage.thetas.size(), novelty.thetas.size());
  for (size_t i = 0; i < points; ++i) {
    if (i < coverage.thetas.size()) {
      out << coverage.thetas[i];
    } else if (i < novelty.thetas.size()) {
      out << novelty.thetas[i];
    }
    out << ',';
    if (i < coverage.values.size()) {
      out << coverage.values[i];
    }
    out << ',';
    if (i < novelty.values.size()) {
      out << novelty.values[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace rigmotion
