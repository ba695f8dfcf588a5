#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rigmotion/rng.hpp"
#include "rigmotion/types.hpp"

namespace rigmotion {

// Rows are tokens, columns are features, throughout this header.
using Mat = Eigen::MatrixXd;

/// Fully connected layer y = x * W^T + b with gradient accumulators. The bias
/// is kept as a 1 x out matrix so every parameter shares one type.
struct Linear {
  Mat w;   // out x in
  Mat b;   // 1 x out
  Mat gw;  // same shape as w
  Mat gb;  // same shape as b

  static Linear make(int in, int out);                    // zero weights
  static Linear make_seeded(int in, int out, Rng& rng);   // uniform Xavier
  void zero_grad();

  Mat forward(const Mat& x) const;
  // dy -> dx; accumulates gw/gb. `x` must be the forward input.
  Mat backward(const Mat& x, const Mat& dy);
};

/// LayerNorm without learnable affine (eps 1e-5), per row.
struct LayerNormCache {
  Mat normalized;           // x-hat
  Eigen::VectorXd inv_std;  // per row
};

Mat layer_norm(const Mat& x, LayerNormCache* cache = nullptr);
Mat layer_norm_backward(const LayerNormCache& cache, const Mat& dy);

Mat silu(const Mat& x);
Mat silu_backward(const Mat& x, const Mat& dy);

Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

/// Multi-head self-attention over one sequence.
struct AttentionWeights {
  Linear q, k, v, o;

  static AttentionWeights make(int d_model);
  static AttentionWeights make_seeded(int d_model, Rng& rng);
  void zero_grad();
};

struct AttentionCache {
  Mat x;                  // N x D input
  Mat q, k, v;            // N x D projections
  std::vector<Mat> attn;  // per head, N x N rows-softmaxed
  Mat concat;             // N x D pre-output-projection
};

// x is N x d_model; heads must divide d_model (ShapeMismatch otherwise).
Mat attention_forward(const AttentionWeights& w, const Mat& x, int heads,
                      AttentionCache* cache = nullptr);
// Returns dx and accumulates the weight gradients. `cache` must come from the
// matching forward call.
Mat attention_backward(AttentionWeights& w, const AttentionCache& cache, const Mat& dy, int heads);

/// Named view of one parameter tensor and its gradient.
struct ParamRef {
  std::string name;
  Mat* value = nullptr;
  Mat* grad = nullptr;
};

void append_params(std::vector<ParamRef>& out, const std::string& prefix, Linear& layer);
void append_params(std::vector<ParamRef>& out, const std::string& prefix, AttentionWeights& w);

/// Adam with bias correction; slot i tracks params[i] of the list given to
/// each step call, so the list must stay stable across steps.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;

  void step(const std::vector<ParamRef>& params);
  void reset();
};

}  // namespace rigmotion
