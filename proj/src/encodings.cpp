#include "rigmotion/encodings.hpp"

#include <cmath>
#include <vector>

#include "rigmotion/euler.hpp"

namespace rigmotion {

namespace {

double silu(double v) { return v / (1.0 + std::exp(-v)); }

Eigen::MatrixXd uniform_matrix(int rows, int cols, double bound, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

Eigen::VectorXd TwoLayerMlp::apply(const Eigen::VectorXd& x) const {
  if (x.size() != w1.cols()) {
    throw RigError(ErrorCode::ShapeMismatch, "perceptron input size mismatch");
  }
  Eigen::VectorXd h = w1 * x + b1;
  for (int i = 0; i < h.size(); ++i) h[i] = silu(h[i]);
  return w2 * h + b2;
}

TwoLayerMlp TwoLayerMlp::zeros(int in, int hidden, int out) {
  TwoLayerMlp mlp;
  mlp.w1 = Eigen::MatrixXd::Zero(hidden, in);
  mlp.b1 = Eigen::VectorXd::Zero(hidden);
  mlp.w2 = Eigen::MatrixXd::Zero(out, hidden);
  mlp.b2 = Eigen::VectorXd::Zero(out);
  return mlp;
}

TwoLayerMlp TwoLayerMlp::seeded(int in, int hidden, int out, Rng& rng) {
  TwoLayerMlp mlp;
  mlp.w1 = uniform_matrix(hidden, in, std::sqrt(6.0 / (in + hidden)), rng);
  mlp.b1 = Eigen::VectorXd::Zero(hidden);
  mlp.w2 = uniform_matrix(out, hidden, std::sqrt(6.0 / (hidden + out)), rng);
  mlp.b2 = Eigen::VectorXd::Zero(out);
  return mlp;
}

Eigen::VectorXd frame_positional_encoding(int f, int d_model, int f_max) {
  if (d_model < 2 || d_model % 2 != 0) {
    throw RigError(ErrorCode::ConfigError, "positional encoding needs an even width >= 2");
  }
  if (f < 0 || f >= f_max) {
    throw RigError(ErrorCode::IndexOutOfRange,
                   "frame " + std::to_string(f) + " outside [0, " + std::to_string(f_max) + ")");
  }
  Eigen::VectorXd pe(d_model);
  for (int i = 0; i < d_model / 2; ++i) {
    const double wavelength = std::pow(10000.0, (2.0 * i) / d_model);
    const double phase = f / wavelength;
    pe[2 * i] = std::sin(phase);
    pe[2 * i + 1] = std::cos(phase);
  }
  return pe;
}

Eigen::VectorXd tree_path_code(const SkeletonTopology& topology, int j, int max_depth,
                               int max_branch) {
  if (j < 0 || j >= topology.joint_count()) {
    throw RigError(ErrorCode::IndexOutOfRange, "joint index " + std::to_string(j));
  }
  // Child ordinals along the path root -> j, innermost last.
  std::vector<int> ordinals;
  for (int node = j; topology.parents[node] != kNoParent; node = topology.parents[node]) {
    ordinals.push_back(topology.child_ordinal(node));
  }
  const int depth = static_cast<int>(ordinals.size());
  if (depth > max_depth) {
    throw RigError(ErrorCode::DepthExceeded,
                   "joint depth " + std::to_string(depth) + " exceeds " + std::to_string(max_depth));
  }
  Eigen::VectorXd code = Eigen::VectorXd::Zero(static_cast<long>(max_depth) * max_branch);
  for (int level = 0; level < depth; ++level) {
    const int ordinal = ordinals[depth - 1 - level];  // level 0 = step taken at the root
    if (ordinal >= max_branch) {
      throw RigError(ErrorCode::BranchExceeded, "child ordinal " + std::to_string(ordinal) +
                                                    " exceeds " + std::to_string(max_branch));
    }
    code[level * max_branch + ordinal] = 1.0;
  }
  return code;
}

Eigen::VectorXd tree_pe(const SkeletonTopology& topology, int j, const TwoLayerMlp& mlp,
                        int max_depth, int max_branch) {
  return mlp.apply(tree_path_code(topology, j, max_depth, max_branch));
}

Eigen::VectorXd rest_pe_features(const Eigen::Vector3d& offset, int bands) {
  if (!offset.allFinite()) {
    throw RigError(ErrorCode::ShapeMismatch, "rest offset must be finite");
  }
  Eigen::VectorXd features(6 * bands);
  int i = 0;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < bands; ++k) {
      const double phase = std::ldexp(1.0, k) * kPi * offset[axis];
      features[i++] = std::sin(phase);
      features[i++] = std::cos(phase);
    }
  }
  return features;
}

Eigen::VectorXd rest_pe(const Eigen::Vector3d& offset, const TwoLayerMlp& mlp, int bands) {
  return mlp.apply(rest_pe_features(offset, bands));
}

EncodingTable build_encoding_table(const Rig& rig, const EncodingConfig& config) {
  EncodingTable table;
  const int joints = rig.joint_count();

  table.frame_pe.resize(config.f_max, config.d_model);
  for (int f = 0; f < config.f_max; ++f) {
    table.frame_pe.row(f) = frame_positional_encoding(f, config.d_model, config.f_max).transpose();
  }

  Rng tree_rng = Rng::derive(config.seed, 1);
  Rng rest_rng = Rng::derive(config.seed, 2);
  table.tree_mlp = TwoLayerMlp::seeded(config.max_depth * config.max_branch, config.d_model,
                                       config.d_model, tree_rng);
  table.rest_mlp = TwoLayerMlp::seeded(6 * config.bands, config.d_model, config.d_model, rest_rng);

  table.tree_pe.resize(joints, config.d_model);
  table.rest_pe.resize(joints, config.d_model);
  for (int j = 0; j < joints; ++j) {
    table.tree_pe.row(j) =
        tree_pe(rig.topology, j, table.tree_mlp, config.max_depth, config.max_branch).transpose();
    table.rest_pe.row(j) =
        rest_pe(rig.rest_offsets.row(j).transpose(), table.rest_mlp, config.bands).transpose();
  }
  return table;
}

}  // namespace rigmotion
