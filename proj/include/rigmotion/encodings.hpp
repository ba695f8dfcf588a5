#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "rigmotion/rng.hpp"
#include "rigmotion/skeleton.hpp"

namespace rigmotion {

/// Linear -> SiLU -> Linear head used by the tree and rest-offset encodings.
struct TwoLayerMlp {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // out x hidden
  Eigen::VectorXd b2;  // out

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w2.rows()); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  static TwoLayerMlp zeros(int in, int hidden, int out);
  // Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) per layer, drawn from
  // the given stream so the same seed always yields the same weights.
  static TwoLayerMlp seeded(int in, int hidden, int out, Rng& rng);
};

// Interleaved sinusoid over geometric wavelengths: out[2i] = sin(f / w_i),
// out[2i+1] = cos(f / w_i) with w_i = 10000^(2i/d_model). The norm of every
// row is sqrt(d_model / 2). Requires even d_model (ConfigError) and
// 0 <= f < f_max (IndexOutOfRange).
Eigen::VectorXd frame_positional_encoding(int f, int d_model, int f_max = kDefaultMaxFrames);

inline constexpr int kDefaultMaxTreeDepth = 24;
inline constexpr int kDefaultMaxBranch = 8;

// Root-to-joint branch path as concatenated one-hot blocks: level l's block
// (width max_branch) marks the child ordinal taken at depth l; blocks below
// the joint's depth stay zero, so the root is the all-zero code. Length is
// max_depth * max_branch. Throws DepthExceeded / BranchExceeded.
Eigen::VectorXd tree_path_code(const SkeletonTopology& topology, int j,
                               int max_depth = kDefaultMaxTreeDepth,
                               int max_branch = kDefaultMaxBranch);

Eigen::VectorXd tree_pe(const SkeletonTopology& topology, int j, const TwoLayerMlp& mlp,
                        int max_depth = kDefaultMaxTreeDepth, int max_branch = kDefaultMaxBranch);

inline constexpr int kDefaultRestBands = 6;

// Axis-major multi-band features: for each axis c in (x, y, z) and band
// k = 0..bands-1, append sin(2^k * pi * c) then cos(2^k * pi * c).
// Length is 6 * bands.
Eigen::VectorXd rest_pe_features(const Eigen::Vector3d& offset, int bands = kDefaultRestBands);

Eigen::VectorXd rest_pe(const Eigen::Vector3d& offset, const TwoLayerMlp& mlp,
                        int bands = kDefaultRestBands);

struct EncodingConfig {
  int d_model = 384;
  int f_max = kDefaultMaxFrames;
  int max_depth = kDefaultMaxTreeDepth;
  int max_branch = kDefaultMaxBranch;
  int bands = kDefaultRestBands;
  uint64_t seed = 0;
};

/// Precomputed additive encodings for one rig: frame_pe row f + tree_pe row j
/// + rest_pe row j is the full positional term of a token at (f, j).
struct EncodingTable {
  Eigen::MatrixXd frame_pe;  // f_max x d_model
  Eigen::MatrixXd tree_pe;   // J x d_model
  Eigen::MatrixXd rest_pe;   // J x d_model
  TwoLayerMlp tree_mlp;
  TwoLayerMlp rest_mlp;
};

EncodingTable build_encoding_table(const Rig& rig, const EncodingConfig& config);

}  // namespace rigmotion
