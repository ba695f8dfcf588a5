#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rigmotion/encodings.hpp"
#include "rigmotion/nn.hpp"
#include "rigmotion/rng.hpp"
#include "rigmotion/schedule.hpp"
#include "rigmotion/skeleton.hpp"
#include "rigmotion/types.hpp"

namespace rigmotion {

/// Training stages. The pose stage treats every frame as an independent
/// sample and runs only the per-frame (spatial) attention groups; the motion
/// stage adds the temporal groups and freezes everything trained before.
enum class DenoiserStage { PoseOnly, Motion };

const char* stage_name(DenoiserStage stage);
DenoiserStage stage_from_name(const std::string& name);

struct DenoiserConfig {
  int depth = 12;
  int d_model = 384;
  int heads = 6;
  int j_max = kDefaultMaxJoints;
  int f_max = kDefaultMaxFrames;
  int rotation_dim = 3;
  int cond_dim = 64;
  double cfg_dropout = 0.1;
  int timesteps = 1000;
  int max_tree_depth = kDefaultMaxTreeDepth;
  int max_branch = kDefaultMaxBranch;
  int rest_bands = kDefaultRestBands;
  DenoiserStage stage = DenoiserStage::PoseOnly;

  ValidationResult validate() const;

  /// Small configuration sized so CPU training loops finish in seconds:
  /// depth 2, width 64, 4 heads, 50 diffusion steps, no conditioning dropout.
  static DenoiserConfig desk_preset();
};

/// One attention-plus-MLP residual group with adaLN-Zero modulation. The
/// modulation projection starts at exactly zero, so shift, scale, and gate
/// are zero and the whole group is the identity map at initialization.
struct ResidualGroup {
  AttentionWeights attn;
  Linear mlp1;  // d_model -> 4 * d_model, GELU in between
  Linear mlp2;  // 4 * d_model -> d_model
  Linear mod;   // d_model -> 6 * d_model, zero-initialized

  static ResidualGroup make(int d_model, Rng& rng);
  void zero_grad();
};

struct DenoiserBlock {
  ResidualGroup spatial;
  ResidualGroup temporal;
};

/// Everything the backward pass needs from one forward call.
struct GroupCache {
  Mat x_in;
  LayerNormCache ln1;
  Mat mod6;  // 1 x 6*d_model
  Mat hm1;   // modulated ln1 output (attention input before gathering)
  std::vector<std::vector<Eigen::Index>> gathers;  // token rows per sequence
  std::vector<AttentionCache> attn_caches;         // one per sequence
  Mat attn_out;  // scattered to full token grid, zero elsewhere
  LayerNormCache ln2;
  Mat hm2;
  Mat mlp_pre1;
  Mat mlp_hidden;
  Mat mlp_out;
};

struct ForwardCache {
  int frames = 0;
  int joints = 0;  // rows per frame in the padded grid
  std::vector<bool> token_mask;
  std::vector<int> joint_rank;  // padded joint slot -> rig joint index, -1 if padding
  Mat x_masked;                 // masked model input
  Mat tree_in, tree_pre1, tree_hidden, tree_out;  // per-rig-joint encoder
  Mat rest_in, rest_pre1, rest_hidden, rest_out;
  Mat time_in, time_pre1, time_hidden;
  Mat cond_in, cond_pre1, cond_hidden;
  bool used_null_cond = false;
  Mat z;       // 1 x d_model conditioning summary
  Mat silu_z;  // SiLU(z), shared input of every modulation projection
  Mat tokens0;
  std::vector<GroupCache> groups;  // spatial (+ temporal) per block, in order
  std::vector<bool> group_is_temporal;
  LayerNormCache ln_f;
  Mat final_mod;  // 1 x 2*d_model
  Mat hm_f;
  Mat x_final_in;
};

/// Blend weight curve used when stitching overlapping chunks: weight i of n
/// is (i + 1) / (n + 1), so the midpoint of an odd-length overlap is 1/2.
std::vector<double> blend_curve(int overlap);

struct SampleLongTrace {
  /// Per chunk: de-normalized rotations, (chunk_frames * J) x 3, unblended.
  std::vector<Mat> chunk_degrees;
  std::vector<double> blend_weights;
  int chunk_frames = 0;
  int overlap = 0;
};

/// Factorized spatial-temporal diffusion denoiser over rotation grids.
///
/// Tensors use one row per (frame, joint) token, row index f * J + j, with
/// rotation channels or model features in the columns. Padding is handled by
/// boolean masks: masked rows are zeroed on entry, excluded from attention,
/// and zeroed on exit, so the unmasked outputs are bit-identical regardless
/// of padded content.
class DenoiserModel {
 public:
  DenoiserModel(const DenoiserConfig& config, uint64_t seed);

  const DenoiserConfig& config() const { return config_; }
  DenoiserStage stage() const { return stage_; }
  bool trained() const { return trained_; }
  void set_trained(bool value) { trained_ = value; }
  const NoiseSchedule& schedule() const { return schedule_; }
  NoiseSchedule& schedule() { return schedule_; }
  const NormStats& norm_stats() const { return norm_stats_; }
  void set_norm_stats(const NormStats& stats) { norm_stats_ = stats; }

  /// Token construction: per-joint projection of the rotation grid plus
  /// frame, tree-path, and rest-offset encodings. The pose stage uses the
  /// frame-0 positional row for every frame so frame order cannot leak in.
  Mat tokenize(const Mat& x, const Rig& rig, int frames) const;

  /// Predicts the clean grid from a noised grid at step t. `cond` is either
  /// empty (unconditional; the learned null embedding is used) or length
  /// cond_dim. Masks follow the padding contract above; empty means all-true.
  Mat denoise(const Mat& x_t, int t, const Eigen::VectorXd& cond, const Rig& rig, int frames,
              const std::vector<bool>& joint_mask = {}, const std::vector<bool>& frame_mask = {},
              ForwardCache* cache = nullptr) const;

  /// Mean squared error between denoise(q_sample(x0, t, noise)) and x0 over
  /// unmasked rows. The gradient overload accumulates into the parameter
  /// gradient buffers (call zero_grad first for a fresh gradient).
  double loss_value(const Mat& x0, int t, const Eigen::VectorXd& cond, const Rig& rig, int frames,
                    const Mat& noise, const std::vector<bool>& joint_mask = {},
                    const std::vector<bool>& frame_mask = {}) const;
  double loss_and_gradients(const Mat& x0, int t, const Eigen::VectorXd& cond, const Rig& rig,
                            int frames, const Mat& noise,
                            const std::vector<bool>& joint_mask = {},
                            const std::vector<bool>& frame_mask = {});

  struct TrainingItem {
    Motion motion;
    Eigen::VectorXd cond;
  };

  /// One optimizer step over the batch; returns the mean loss. The pose
  /// stage draws one random frame per item; the motion stage uses whole
  /// clips and verifies afterwards that no frozen weight moved.
  double training_step(const std::vector<TrainingItem>& batch, Rng& rng);

  /// Switches to the motion stage: snapshots all weights trained so far as
  /// frozen, resets the optimizer to the temporal groups only.
  void to_motion_stage();
  void verify_frozen() const;  // FrozenWeightViolation if a frozen weight moved

  /// Ancestral sampling with classifier-free guidance in clean-signal space:
  /// guided = uncond + w * (cond - uncond). w == 1 runs only the conditional
  /// branch and w == 0 only the unconditional one.
  Motion sample(const Eigen::VectorXd& cond, const Rig& rig, int frames, double guidance,
                Rng& rng) const;

  /// Chains one fixed-length chunk per condition, in-painting each chunk's
  /// leading `overlap` frames from the previous chunk during sampling and
  /// cross-fading the overlap with blend_curve() in degree space.
  Motion sample_long(const std::vector<Eigen::VectorXd>& conds, const Rig& rig, int overlap,
                     double guidance, Rng& rng, SampleLongTrace* trace = nullptr) const;

  void zero_grad();
  std::vector<ParamRef> all_params();
  std::vector<ParamRef> trainable_params();  // stage-dependent subset
  std::vector<std::string> frozen_param_names() const;
  Adam& optimizer() { return adam_; }

  // Weights (public so tests can inspect initialization and freezing).
  Linear in_proj;            // rotation_dim -> d_model
  Linear tree_l1, tree_l2;   // tree path code -> d_model (SiLU between)
  Linear rest_l1, rest_l2;   // rest-offset features -> d_model
  Linear time_l1, time_l2;   // sinusoidal step embedding -> d_model
  Linear cond_l1, cond_l2;   // condition vector -> d_model
  Mat null_cond;             // 1 x cond_dim, learned unconditional token
  std::vector<DenoiserBlock> blocks;
  Linear final_mod;          // d_model -> 2 * d_model, zero-initialized
  Linear out_proj;           // d_model -> rotation_dim

 private:
  Mat forward_tokens(const Mat& x_t, int t, const Eigen::VectorXd& cond, const Rig& rig,
                     int frames, const std::vector<bool>& joint_mask,
                     const std::vector<bool>& frame_mask, ForwardCache* cache) const;
  void backward(const Mat& dy, const ForwardCache& cache);
  Mat sample_chunk(const Eigen::VectorXd& cond, const Rig& rig, int frames, double guidance,
                   Rng& rng, const Mat* known_head, int overlap) const;
  Mat guided_x0(const Mat& x_t, int t, const Eigen::VectorXd& cond, const Rig& rig, int frames,
                double guidance) const;

  DenoiserConfig config_;
  DenoiserStage stage_ = DenoiserStage::PoseOnly;
  NoiseSchedule schedule_;
  NormStats norm_stats_;
  bool trained_ = false;
  Adam adam_;
  std::vector<Mat> frozen_snapshot_;
  std::vector<std::string> frozen_names_;
  Mat null_grad_;

  friend struct CheckpointCodec;
};

/// Fills a matrix with standard normal draws in row-major order.
Mat normal_grid(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Sinusoidal embedding of a diffusion step (same interleaved sin/cos layout
/// as the frame encoding, with the step count as the position bound).
Eigen::VectorXd timestep_embedding(int t, int d_model, int timesteps);

}  // namespace rigmotion
