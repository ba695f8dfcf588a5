#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigmotion/skeleton.hpp"
#include "rigmotion/types.hpp"

namespace rigmotion {

/// Maps one pose (a rig plus one frame of ZXY degree rotations) to a fixed
/// vector. Window and motion embeddings are means of these per-frame vectors.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dimension() const = 0;
  virtual Eigen::VectorXd embed_pose(const Rig& rig, const OffsetMatrix& rotations_deg) const = 0;
};

/// Default provider: world joint positions from forward kinematics, flattened
/// in traversal order, zero-padded to a fixed joint budget, L2-normalized.
/// Rig-agnostic, so motions on different skeletons share one space.
class FkPositionProvider : public EmbeddingProvider {
 public:
  explicit FkPositionProvider(int max_joints = kDefaultMaxJoints);
  int dimension() const override { return 3 * max_joints_; }
  Eigen::VectorXd embed_pose(const Rig& rig, const OffsetMatrix& rotations_deg) const override;

 private:
  int max_joints_;
};

/// All stride-1 windows of a motion: count = length - window_frames + 1.
struct WindowSet {
  Motion source;
  int window_frames = 0;
  std::vector<int> starts;
  int count() const { return static_cast<int>(starts.size()); }
};

WindowSet extract_windows(const Motion& motion, int window_frames);  // WindowTooLarge
Motion window_motion(const WindowSet& windows, int index);

/// One row per window: the mean of the per-frame pose embeddings.
Eigen::MatrixXd window_embeddings(const WindowSet& windows, const EmbeddingProvider& provider);

/// Mean pose embedding over every frame of the motion.
Eigen::VectorXd motion_embedding(const Motion& motion, const EmbeddingProvider& provider);

/// Common window length for comparing two motions, capped at the frame budget.
int default_window_frames(const Motion& a, const Motion& b, int cap = kDefaultMaxFrames);

/// Cosine similarity; zero if either vector has zero norm.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Fraction of reference windows whose most similar generated window exceeds
/// threshold theta (cosine similarity).
double coverage(const Motion& reference, const Motion& generated, double theta,
                const EmbeddingProvider& provider);

/// Fraction of generated windows whose distance 1 - best-similarity to the
/// reference exceeds theta.
double novelty(const Motion& generated, const Motion& reference, double theta,
               const EmbeddingProvider& provider);

struct MetricCurve {
  std::vector<double> thetas;
  std::vector<double> values;
};

MetricCurve coverage_curve(const Motion& reference, const Motion& generated,
                           const EmbeddingProvider& provider, double step = 0.01);
MetricCurve novelty_curve(const Motion& generated, const Motion& reference,
                          const EmbeddingProvider& provider, double step = 0.01);

/// Trapezoidal area under the curve over its theta range.
double auc_sweep(const MetricCurve& curve);

/// Frechet distance between Gaussian fits of two embedding sets (rows are
/// samples). Covariances use the N-1 denominator; the matrix square root goes
/// through a symmetric eigendecomposition with negative eigenvalues clamped.
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Fraction of queries whose same-index target ranks in the top k by cosine
/// similarity; a competitor counts ahead only when strictly more similar.
double r_precision(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& targets, int k = 1);

/// Mean cosine similarity of same-index pairs.
double alignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Mean Euclidean distance over disjoint random pairs within each group,
/// averaged across groups. Every group needs at least two rows.
double multimodality(const std::vector<Eigen::MatrixXd>& groups, uint64_t seed);

struct MetricReport {
  MetricCurve coverage;
  MetricCurve novelty;
  double coverage_auc = std::numeric_limits<double>::quiet_NaN();
  double novelty_auc = std::numeric_limits<double>::quiet_NaN();
  double fid = std::numeric_limits<double>::quiet_NaN();
  double r_precision = std::numeric_limits<double>::quiet_NaN();
  double alignment = std::numeric_limits<double>::quiet_NaN();
  double multimodality = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const;  // NaN fields serialize as null
  std::string to_csv() const;
};

}  // namespace rigmotion
