#include "rigmotion/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rigmotion/euler.hpp"

namespace rigmotion {

namespace {

Eigen::RowVectorXd segment(const Mat& row, int index, int width) {
  return row.block(0, index * width, 1, width);
}

Mat modulate(const Mat& h, const Eigen::RowVectorXd& shift, const Eigen::RowVectorXd& scale) {
  Mat out = (h.array().rowwise() * (scale.array() + 1.0)).matrix();
  out.rowwise() += shift;
  return out;
}

Mat gather_rows(const Mat& m, const std::vector<Eigen::Index>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

void scatter_rows(Mat& dst, const std::vector<Eigen::Index>& rows, const Mat& src) {
  for (size_t i = 0; i < rows.size(); ++i) {
    dst.row(rows[i]) = src.row(static_cast<Eigen::Index>(i));
  }
}

void scatter_add_rows(Mat& dst, const std::vector<Eigen::Index>& rows, const Mat& src) {
  for (size_t i = 0; i < rows.size(); ++i) {
    dst.row(rows[i]) += src.row(static_cast<Eigen::Index>(i));
  }
}

std::vector<bool> default_mask(const std::vector<bool>& mask, int size, const char* what) {
  if (mask.empty()) {
    return std::vector<bool>(static_cast<size_t>(size), true);
  }
  if (static_cast<int>(mask.size()) != size) {
    throw RigError(ErrorCode::ShapeMismatch,
                   std::string(what) + " mask length does not match the padded extent");
  }
  return mask;
}

/// Residual group forward shared by the spatial and temporal paths. `seqs`
/// lists the token rows of each attention sequence; rows not covered by any
/// sequence receive no attention contribution.
Mat group_forward(const ResidualGroup& g, const Mat& x, const Mat& silu_z, int heads,
                  std::vector<std::vector<Eigen::Index>> seqs, GroupCache* cache) {
  const int d = static_cast<int>(x.cols());
  Mat mod6 = g.mod.forward(silu_z);
  const Eigen::RowVectorXd shift1 = segment(mod6, 0, d);
  const Eigen::RowVectorXd scale1 = segment(mod6, 1, d);
  const Eigen::RowVectorXd gate1 = segment(mod6, 2, d);
  const Eigen::RowVectorXd shift2 = segment(mod6, 3, d);
  const Eigen::RowVectorXd scale2 = segment(mod6, 4, d);
  const Eigen::RowVectorXd gate2 = segment(mod6, 5, d);

  LayerNormCache ln1;
  Mat hm1 = modulate(layer_norm(x, &ln1), shift1, scale1);

  Mat attn_out = Mat::Zero(x.rows(), x.cols());
  std::vector<AttentionCache> attn_caches(seqs.size());
  for (size_t i = 0; i < seqs.size(); ++i) {
    Mat sub = gather_rows(hm1, seqs[i]);
    Mat y = attention_forward(g.attn, sub, heads, cache != nullptr ? &attn_caches[i] : nullptr);
    scatter_rows(attn_out, seqs[i], y);
  }
  Mat x1 = x + (attn_out.array().rowwise() * gate1.array()).matrix();

  LayerNormCache ln2;
  Mat hm2 = modulate(layer_norm(x1, &ln2), shift2, scale2);
  Mat pre1 = g.mlp1.forward(hm2);
  Mat hidden = gelu(pre1);
  Mat mlp_out = g.mlp2.forward(hidden);
  Mat x2 = x1 + (mlp_out.array().rowwise() * gate2.array()).matrix();

  if (cache != nullptr) {
    cache->x_in = x;
    cache->ln1 = std::move(ln1);
    cache->mod6 = std::move(mod6);
    cache->hm1 = std::move(hm1);
    cache->gathers = std::move(seqs);
    cache->attn_caches = std::move(attn_caches);
    cache->attn_out = std::move(attn_out);
    cache->ln2 = std::move(ln2);
    cache->hm2 = std::move(hm2);
    cache->mlp_pre1 = std::move(pre1);
    cache->mlp_hidden = std::move(hidden);
    cache->mlp_out = std::move(mlp_out);
  }
  return x2;
}

/// Mirrors group_forward; returns the gradient with respect to the group
/// input and accumulates weight gradients plus the SiLU(z) gradient.
Mat group_backward(ResidualGroup& g, const GroupCache& c, const Mat& dy, const Mat& silu_z,
                   int heads, Mat& dsilu_z) {
  const int d = static_cast<int>(dy.cols());
  const Eigen::RowVectorXd scale1 = segment(c.mod6, 1, d);
  const Eigen::RowVectorXd gate1 = segment(c.mod6, 2, d);
  const Eigen::RowVectorXd scale2 = segment(c.mod6, 4, d);
  const Eigen::RowVectorXd gate2 = segment(c.mod6, 5, d);

  // x2 = x1 + mlp_out .* gate2
  Mat d_mlp_out = (dy.array().rowwise() * gate2.array()).matrix();
  Eigen::RowVectorXd d_gate2 = dy.cwiseProduct(c.mlp_out).colwise().sum();
  Mat d_x1 = dy;

  Mat d_hidden = g.mlp2.backward(c.mlp_hidden, d_mlp_out);
  Mat d_pre1 = gelu_backward(c.mlp_pre1, d_hidden);
  Mat d_hm2 = g.mlp1.backward(c.hm2, d_pre1);

  Mat d_ln2 = (d_hm2.array().rowwise() * (scale2.array() + 1.0)).matrix();
  Eigen::RowVectorXd d_scale2 = d_hm2.cwiseProduct(c.ln2.normalized).colwise().sum();
  Eigen::RowVectorXd d_shift2 = d_hm2.colwise().sum();
  d_x1 += layer_norm_backward(c.ln2, d_ln2);

  // x1 = x_in + attn_out .* gate1
  Mat d_attn_out = (d_x1.array().rowwise() * gate1.array()).matrix();
  Eigen::RowVectorXd d_gate1 = d_x1.cwiseProduct(c.attn_out).colwise().sum();
  Mat d_x = d_x1;

  Mat d_hm1 = Mat::Zero(dy.rows(), dy.cols());
  for (size_t i = 0; i < c.gathers.size(); ++i) {
    Mat sub_dy = gather_rows(d_attn_out, c.gathers[i]);
    Mat sub_dx = attention_backward(g.attn, c.attn_caches[i], sub_dy, heads);
    scatter_add_rows(d_hm1, c.gathers[i], sub_dx);
  }
  Mat d_ln1 = (d_hm1.array().rowwise() * (scale1.array() + 1.0)).matrix();
  Eigen::RowVectorXd d_scale1 = d_hm1.cwiseProduct(c.ln1.normalized).colwise().sum();
  Eigen::RowVectorXd d_shift1 = d_hm1.colwise().sum();
  d_x += layer_norm_backward(c.ln1, d_ln1);

  Mat d_mod6(1, 6 * d);
  d_mod6 << d_shift1, d_scale1, d_gate1, d_shift2, d_scale2, d_gate2;
  dsilu_z += g.mod.backward(silu_z, d_mod6);
  return d_x;
}

}  // namespace

const char* stage_name(DenoiserStage stage) {
  return stage == DenoiserStage::PoseOnly ? "pose" : "motion";
}

DenoiserStage stage_from_name(const std::string& name) {
  if (name == "pose") {
    return DenoiserStage::PoseOnly;
  }
  if (name == "motion") {
    return DenoiserStage::Motion;
  }
  throw RigError(ErrorCode::ConfigError, "unknown denoiser stage '" + name + "'");
}

ValidationResult DenoiserConfig::validate() const {
  ValidationResult result;
  auto reject = [&result](const std::string& message) {
    result.ok = false;
    result.code = ErrorCode::ConfigError;
    result.message = message;
  };
  if (depth < 1) {
    reject("depth must be at least 1");
  } else if (d_model < 2 || d_model % 2 != 0) {
    reject("d_model must be even and at least 2");
  } else if (heads < 1 || d_model % heads != 0) {
    reject("heads must divide d_model");
  } else if (j_max < 1 || f_max < 1) {
    reject("j_max and f_max must be positive");
  } else if (rotation_dim != 3) {
    reject("only three rotation channels per joint are supported");
  } else if (cond_dim < 1) {
    reject("cond_dim must be positive");
  } else if (cfg_dropout < 0.0 || cfg_dropout >= 1.0) {
    reject("cfg_dropout must lie in [0, 1)");
  } else if (timesteps < 1) {
    reject("timesteps must be positive");
  } else if (max_tree_depth < 1 || max_branch < 1 || rest_bands < 1) {
    reject("encoding extents must be positive");
  }
  return result;
}

DenoiserConfig DenoiserConfig::desk_preset() {
  DenoiserConfig config;
  config.depth = 2;
  config.d_model = 64;
  config.heads = 4;
  config.cond_dim = 16;
  config.cfg_dropout = 0.0;
  config.timesteps = 50;
  return config;
}

ResidualGroup ResidualGroup::make(int d_model, Rng& rng) {
  ResidualGroup g;
  g.attn = AttentionWeights::make_seeded(d_model, rng);
  g.mlp1 = Linear::make_seeded(d_model, 4 * d_model, rng);
  g.mlp2 = Linear::make_seeded(4 * d_model, d_model, rng);
  g.mod = Linear::make(d_model, 6 * d_model);  // adaLN-Zero: starts at zero
  return g;
}

void ResidualGroup::zero_grad() {
  attn.zero_grad();
  mlp1.zero_grad();
  mlp2.zero_grad();
  mod.zero_grad();
}

std::vector<double> blend_curve(int overlap) {
  if (overlap < 0) {
    throw RigError(ErrorCode::ConfigError, "overlap must be non-negative");
  }
  std::vector<double> weights(static_cast<size_t>(overlap));
  for (int i = 0; i < overlap; ++i) {
    weights[static_cast<size_t>(i)] = static_cast<double>(i + 1) / static_cast<double>(overlap + 1);
  }
  return weights;
}

Mat normal_grid(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = rng.normal();
    }
  }
  return m;
}

Eigen::VectorXd timestep_embedding(int t, int d_model, int timesteps) {
  return frame_positional_encoding(t, d_model, timesteps);
}

DenoiserModel::DenoiserModel(const DenoiserConfig& config, uint64_t seed)
    : config_(config), stage_(config.stage) {
  ValidationResult check = config_.validate();
  if (!check.ok) {
    throw RigError(check.code, check.message);
  }
  schedule_ = NoiseSchedule::cosine(config_.timesteps);

  Rng rng(seed);
  const int d = config_.d_model;
  const int tree_dim = config_.max_tree_depth * config_.max_branch;
  const int rest_dim = 6 * config_.rest_bands;
  in_proj = Linear::make_seeded(config_.rotation_dim, d, rng);
  tree_l1 = Linear::make_seeded(tree_dim, d, rng);
  tree_l2 = Linear::make_seeded(d, d, rng);
  rest_l1 = Linear::make_seeded(rest_dim, d, rng);
  rest_l2 = Linear::make_seeded(d, d, rng);
  time_l1 = Linear::make_seeded(d, d, rng);
  time_l2 = Linear::make_seeded(d, d, rng);
  cond_l1 = Linear::make_seeded(config_.cond_dim, d, rng);
  cond_l2 = Linear::make_seeded(d, d, rng);
  null_cond = Mat(1, config_.cond_dim);
  for (int c = 0; c < config_.cond_dim; ++c) {
    null_cond(0, c) = 0.02 * rng.normal();
  }
  null_grad_ = Mat::Zero(1, config_.cond_dim);
  blocks.resize(static_cast<size_t>(config_.depth));
  for (auto& block : blocks) {
    block.spatial = ResidualGroup::make(d, rng);
    block.temporal = ResidualGroup::make(d, rng);
  }
  final_mod = Linear::make(d, 2 * d);  // zero-initialized, like the block modulations
  out_proj = Linear::make_seeded(d, config_.rotation_dim, rng);
}

Mat DenoiserModel::tokenize(const Mat& x, const Rig& rig, int frames) const {
  return forward_tokens(x, /*t=*/-1, Eigen::VectorXd(), rig, frames, {}, {}, nullptr);
}

Mat DenoiserModel::forward_tokens(const Mat& x_t, int t, const Eigen::VectorXd& cond,
                                  const Rig& rig, int frames, const std::vector<bool>& joint_mask,
                                  const std::vector<bool>& frame_mask, ForwardCache* cache) const {
  // t == -1 means "tokens only": used by tokenize(), which stops before the
  // conditioning and transformer stack.
  const bool tokens_only = t < 0;
  const int joints_real = rig.topology.joint_count();
  if (joints_real > config_.j_max) {
    throw RigError(ErrorCode::JointBudgetExceeded,
                   "rig exceeds the model joint capacity of " + std::to_string(config_.j_max));
  }
  std::vector<bool> jmask = default_mask(joint_mask, joint_mask.empty() ? joints_real
                                                                        : static_cast<int>(joint_mask.size()),
                                         "joint");
  std::vector<bool> fmask = default_mask(frame_mask,
                                         frame_mask.empty() ? frames : static_cast<int>(frame_mask.size()),
                                         "frame");
  const int j_pad = static_cast<int>(jmask.size());
  const int f_pad = static_cast<int>(fmask.size());
  if (f_pad != frames) {
    throw RigError(ErrorCode::ShapeMismatch, "frame mask length must equal the frame count");
  }
  int joints_marked = 0;
  std::vector<int> joint_rank(static_cast<size_t>(j_pad), -1);
  for (int j = 0; j < j_pad; ++j) {
    if (jmask[static_cast<size_t>(j)]) {
      joint_rank[static_cast<size_t>(j)] = joints_marked++;
    }
  }
  if (joints_marked != joints_real) {
    throw RigError(ErrorCode::ShapeMismatch,
                   "joint mask marks " + std::to_string(joints_marked) + " joints but the rig has " +
                       std::to_string(joints_real));
  }
  int frames_marked = 0;
  std::vector<int> frame_rank(static_cast<size_t>(f_pad), -1);
  for (int f = 0; f < f_pad; ++f) {
    if (fmask[static_cast<size_t>(f)]) {
      frame_rank[static_cast<size_t>(f)] = frames_marked++;
    }
  }
  if (frames_marked < 1) {
    throw RigError(ErrorCode::EmptyMotion, "frame mask marks no frames");
  }
  if (frames_marked > config_.f_max) {
    throw RigError(ErrorCode::ConfigError,
                   "frame count exceeds the model frame capacity of " + std::to_string(config_.f_max));
  }
  if (x_t.rows() != static_cast<Eigen::Index>(f_pad) * j_pad || x_t.cols() != config_.rotation_dim) {
    throw RigError(ErrorCode::ShapeMismatch, "input grid must be (frames * joints) x rotation_dim");
  }
  if (!tokens_only) {
    if (t >= config_.timesteps) {
      throw RigError(ErrorCode::IndexOutOfRange, "diffusion step outside the schedule");
    }
    if (cond.size() != 0 && cond.size() != config_.cond_dim) {
      throw RigError(ErrorCode::ShapeMismatch, "condition vector has the wrong dimension");
    }
  }

  std::vector<bool> token_mask(static_cast<size_t>(f_pad) * static_cast<size_t>(j_pad), false);
  for (int f = 0; f < f_pad; ++f) {
    for (int j = 0; j < j_pad; ++j) {
      token_mask[static_cast<size_t>(f) * j_pad + j] =
          fmask[static_cast<size_t>(f)] && jmask[static_cast<size_t>(j)];
    }
  }

  Mat x_masked = x_t;
  for (Eigen::Index r = 0; r < x_masked.rows(); ++r) {
    if (!token_mask[static_cast<size_t>(r)]) {
      x_masked.row(r).setZero();
    }
  }

  // Per-joint skeleton encodings, shared across frames.
  const int tree_dim = config_.max_tree_depth * config_.max_branch;
  const int rest_dim = 6 * config_.rest_bands;
  Mat tree_in(joints_real, tree_dim);
  Mat rest_in(joints_real, rest_dim);
  for (int j = 0; j < joints_real; ++j) {
    tree_in.row(j) =
        tree_path_code(rig.topology, j, config_.max_tree_depth, config_.max_branch).transpose();
    rest_in.row(j) =
        rest_pe_features(rig.rest_offsets.row(j).transpose(), config_.rest_bands).transpose();
  }
  Mat tree_pre1 = tree_l1.forward(tree_in);
  Mat tree_hidden = silu(tree_pre1);
  Mat tree_out = tree_l2.forward(tree_hidden);
  Mat rest_pre1 = rest_l1.forward(rest_in);
  Mat rest_hidden = silu(rest_pre1);
  Mat rest_out = rest_l2.forward(rest_hidden);

  // The pose stage sees every frame as an independent sample, so it reuses
  // the frame-0 positional row everywhere; frame order then cannot influence
  // any output.
  Mat frame_rows(frames_marked, config_.d_model);
  for (int fr = 0; fr < frames_marked; ++fr) {
    const int pe_index = stage_ == DenoiserStage::PoseOnly ? 0 : fr;
    frame_rows.row(fr) =
        frame_positional_encoding(pe_index, config_.d_model, config_.f_max).transpose();
  }

  Mat tokens = in_proj.forward(x_masked);
  for (int f = 0; f < f_pad; ++f) {
    for (int j = 0; j < j_pad; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(f) * j_pad + j;
      if (!token_mask[static_cast<size_t>(r)]) {
        continue;
      }
      const int jr = joint_rank[static_cast<size_t>(j)];
      tokens.row(r) += frame_rows.row(frame_rank[static_cast<size_t>(f)]);
      tokens.row(r) += tree_out.row(jr);
      tokens.row(r) += rest_out.row(jr);
    }
  }
  if (tokens_only) {
    return tokens;
  }

  // Conditioning summary z: timestep embedding plus caption embedding (or
  // the learned null token), each through a two-layer SiLU MLP.
  Mat time_in(1, config_.d_model);
  time_in.row(0) = timestep_embedding(t, config_.d_model, config_.timesteps).transpose();
  Mat time_pre1 = time_l1.forward(time_in);
  Mat time_hidden = silu(time_pre1);
  Mat time_out = time_l2.forward(time_hidden);

  const bool use_null = cond.size() == 0;
  Mat cond_in = use_null ? null_cond : Mat(cond.transpose());
  Mat cond_pre1 = cond_l1.forward(cond_in);
  Mat cond_hidden = silu(cond_pre1);
  Mat cond_out = cond_l2.forward(cond_hidden);

  Mat z = time_out + cond_out;
  Mat silu_z = silu(z);

  if (cache != nullptr) {
    cache->frames = f_pad;
    cache->joints = j_pad;
    cache->token_mask = token_mask;
    cache->joint_rank = joint_rank;
    cache->x_masked = x_masked;
    cache->tree_in = tree_in;
    cache->tree_pre1 = tree_pre1;
    cache->tree_hidden = tree_hidden;
    cache->tree_out = tree_out;
    cache->rest_in = rest_in;
    cache->rest_pre1 = rest_pre1;
    cache->rest_hidden = rest_hidden;
    cache->rest_out = rest_out;
    cache->time_in = time_in;
    cache->time_pre1 = time_pre1;
    cache->time_hidden = time_hidden;
    cache->cond_in = cond_in;
    cache->cond_pre1 = cond_pre1;
    cache->cond_hidden = cond_hidden;
    cache->used_null_cond = use_null;
    cache->z = z;
    cache->silu_z = silu_z;
    cache->tokens0 = tokens;
    cache->groups.clear();
    cache->group_is_temporal.clear();
  }

  // Attention sequences: per frame over its unmasked joints (spatial), per
  // joint over the unmasked frames (temporal).
  std::vector<std::vector<Eigen::Index>> spatial_seqs;
  for (int f = 0; f < f_pad; ++f) {
    if (!fmask[static_cast<size_t>(f)]) {
      continue;
    }
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<size_t>(joints_real));
    for (int j = 0; j < j_pad; ++j) {
      if (jmask[static_cast<size_t>(j)]) {
        rows.push_back(static_cast<Eigen::Index>(f) * j_pad + j);
      }
    }
    spatial_seqs.push_back(std::move(rows));
  }
  std::vector<std::vector<Eigen::Index>> temporal_seqs;
  if (stage_ == DenoiserStage::Motion) {
    for (int j = 0; j < j_pad; ++j) {
      if (!jmask[static_cast<size_t>(j)]) {
        continue;
      }
      std::vector<Eigen::Index> rows;
      rows.reserve(static_cast<size_t>(frames_marked));
      for (int f = 0; f < f_pad; ++f) {
        if (fmask[static_cast<size_t>(f)]) {
          rows.push_back(static_cast<Eigen::Index>(f) * j_pad + j);
        }
      }
      temporal_seqs.push_back(std::move(rows));
    }
  }

  Mat x = tokens;
  for (const DenoiserBlock& block : blocks) {
    GroupCache* gc = nullptr;
    if (cache != nullptr) {
      cache->groups.emplace_back();
      cache->group_is_temporal.push_back(false);
      gc = &cache->groups.back();
    }
    x = group_forward(block.spatial, x, silu_z, config_.heads, spatial_seqs, gc);
    if (stage_ == DenoiserStage::Motion) {
      if (cache != nullptr) {
        cache->groups.emplace_back();
        cache->group_is_temporal.push_back(true);
        gc = &cache->groups.back();
      }
      x = group_forward(block.temporal, x, silu_z, config_.heads, temporal_seqs, gc);
    }
  }

  LayerNormCache ln_f;
  Mat fmod = final_mod.forward(silu_z);
  const Eigen::RowVectorXd shift_f = segment(fmod, 0, config_.d_model);
  const Eigen::RowVectorXd scale_f = segment(fmod, 1, config_.d_model);
  Mat hm_f = modulate(layer_norm(x, &ln_f), shift_f, scale_f);
  Mat y = out_proj.forward(hm_f);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (!token_mask[static_cast<size_t>(r)]) {
      y.row(r).setZero();
    }
  }
  if (cache != nullptr) {
    cache->ln_f = std::move(ln_f);
    cache->final_mod = std::move(fmod);
    cache->hm_f = std::move(hm_f);
    cache->x_final_in = std::move(x);
  }
  return y;
}

Mat DenoiserModel::denoise(const Mat& x_t, int t, const Eigen::VectorXd& cond, const Rig& rig,
                           int frames, const std::vector<bool>& joint_mask,
                           const std::vector<bool>& frame_mask, ForwardCache* cache) const {
  if (t < 0) {
    throw RigError(ErrorCode::IndexOutOfRange, "diffusion step must be non-negative");
  }
  return forward_tokens(x_t, t, cond, rig, frames, joint_mask, frame_mask, cache);
}

void DenoiserModel::backward(const Mat& dy_in, const ForwardCache& cache) {
  const int d = config_.d_model;
  Mat dy = dy_in;
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    if (!cache.token_mask[static_cast<size_t>(r)]) {
      dy.row(r).setZero();
    }
  }

  Mat dsilu_z = Mat::Zero(1, d);

  // Final projection and modulation.
  Mat d_hm_f = out_proj.backward(cache.hm_f, dy);
  const Eigen::RowVectorXd scale_f = segment(cache.final_mod, 1, d);
  Mat d_ln_f = (d_hm_f.array().rowwise() * (scale_f.array() + 1.0)).matrix();
  Eigen::RowVectorXd d_scale_f = d_hm_f.cwiseProduct(cache.ln_f.normalized).colwise().sum();
  Eigen::RowVectorXd d_shift_f = d_hm_f.colwise().sum();
  Mat d_fmod(1, 2 * d);
  d_fmod << d_shift_f, d_scale_f;
  dsilu_z += final_mod.backward(cache.silu_z, d_fmod);
  Mat d_tokens = layer_norm_backward(cache.ln_f, d_ln_f);

  // Blocks in reverse. Cache groups were pushed in forward order.
  size_t gi = cache.groups.size();
  for (auto block = blocks.rbegin(); block != blocks.rend(); ++block) {
    if (stage_ == DenoiserStage::Motion) {
      --gi;
      d_tokens =
          group_backward(block->temporal, cache.groups[gi], d_tokens, cache.silu_z, config_.heads,
                         dsilu_z);
    }
    --gi;
    d_tokens = group_backward(block->spatial, cache.groups[gi], d_tokens, cache.silu_z,
                              config_.heads, dsilu_z);
  }

  // Token construction.
  in_proj.backward(cache.x_masked, d_tokens);
  const int j_pad = cache.joints;
  Mat d_tree_out = Mat::Zero(cache.tree_out.rows(), d);
  Mat d_rest_out = Mat::Zero(cache.rest_out.rows(), d);
  for (Eigen::Index r = 0; r < d_tokens.rows(); ++r) {
    if (!cache.token_mask[static_cast<size_t>(r)]) {
      continue;
    }
    const int jr = cache.joint_rank[static_cast<size_t>(r % j_pad)];
    d_tree_out.row(jr) += d_tokens.row(r);
    d_rest_out.row(jr) += d_tokens.row(r);
  }
  Mat d_tree_hidden = tree_l2.backward(cache.tree_hidden, d_tree_out);
  tree_l1.backward(cache.tree_in, silu_backward(cache.tree_pre1, d_tree_hidden));
  Mat d_rest_hidden = rest_l2.backward(cache.rest_hidden, d_rest_out);
  rest_l1.backward(cache.rest_in, silu_backward(cache.rest_pre1, d_rest_hidden));

  // Conditioning summary.
  Mat dz = silu_backward(cache.z, dsilu_z);
  Mat d_time_hidden = time_l2.backward(cache.time_hidden, dz);
  time_l1.backward(cache.time_in, silu_backward(cache.time_pre1, d_time_hidden));
  Mat d_cond_hidden = cond_l2.backward(cache.cond_hidden, dz);
  Mat d_cond_in = cond_l1.backward(cache.cond_in, silu_backward(cache.cond_pre1, d_cond_hidden));
  if (cache.used_null_cond) {
    null_grad_ += d_cond_in;
  }
}

double DenoiserModel::loss_value(const Mat& x0, int t, const Eigen::VectorXd& cond, const Rig& rig,
                                 int frames, const Mat& noise, const std::vector<bool>& joint_mask,
                                 const std::vector<bool>& frame_mask) const {
  ForwardCache cache;
  Mat x_t = q_sample(x0, t, noise, schedule_);
  Mat y = denoise(x_t, t, cond, rig, frames, joint_mask, frame_mask, &cache);
  double total = 0.0;
  Eigen::Index unmasked = 0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (!cache.token_mask[static_cast<size_t>(r)]) {
      continue;
    }
    total += (y.row(r) - x0.row(r)).squaredNorm();
    ++unmasked;
  }
  return total / (static_cast<double>(unmasked) * static_cast<double>(x0.cols()));
}

double DenoiserModel::loss_and_gradients(const Mat& x0, int t, const Eigen::VectorXd& cond,
                                         const Rig& rig, int frames, const Mat& noise,
                                         const std::vector<bool>& joint_mask,
                                         const std::vector<bool>& frame_mask) {
  ForwardCache cache;
  Mat x_t = q_sample(x0, t, noise, schedule_);
  Mat y = denoise(x_t, t, cond, rig, frames, joint_mask, frame_mask, &cache);
  double total = 0.0;
  Eigen::Index unmasked = 0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (cache.token_mask[static_cast<size_t>(r)]) {
      ++unmasked;
    }
  }
  const double denom = static_cast<double>(unmasked) * static_cast<double>(x0.cols());
  Mat dy = Mat::Zero(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (!cache.token_mask[static_cast<size_t>(r)]) {
      continue;
    }
    total += (y.row(r) - x0.row(r)).squaredNorm();
    dy.row(r) = 2.0 * (y.row(r) - x0.row(r)) / denom;
  }
  backward(dy, cache);
  return total / denom;
}

double DenoiserModel::training_step(const std::vector<TrainingItem>& batch, Rng& rng) {
  if (batch.empty()) {
    throw RigError(ErrorCode::ConfigError, "training batch is empty");
  }
  zero_grad();
  double total = 0.0;
  for (const TrainingItem& item : batch) {
    const Motion& motion = item.motion;
    const int joints = motion.rig.topology.joint_count();
    const int frames_all = static_cast<int>(motion.rotations.size());
    if (frames_all < 1) {
      throw RigError(ErrorCode::EmptyMotion, "training motion has no frames");
    }
    if (item.cond.size() != 0 && item.cond.size() != config_.cond_dim) {
      throw RigError(ErrorCode::ShapeMismatch, "condition vector has the wrong dimension");
    }
    Mat grid = normalize_rotations(motion, norm_stats_);

    Mat x0;
    int frames = 0;
    if (stage_ == DenoiserStage::PoseOnly) {
      const int f = static_cast<int>(rng.uniform_int(0, frames_all - 1));
      x0 = grid.middleRows(static_cast<Eigen::Index>(f) * joints, joints);
      frames = 1;
    } else {
      if (frames_all > config_.f_max) {
        throw RigError(ErrorCode::ConfigError,
                       "training clip longer than the model frame capacity");
      }
      x0 = grid;
      frames = frames_all;
    }
    const int t = static_cast<int>(rng.uniform_int(0, config_.timesteps - 1));
    Eigen::VectorXd cond = item.cond;
    if (cond.size() != 0 && config_.cfg_dropout > 0.0 && rng.bernoulli(config_.cfg_dropout)) {
      cond = Eigen::VectorXd();
    }
    Mat noise = normal_grid(rng, x0.rows(), x0.cols());
    total += loss_and_gradients(x0, t, cond, motion.rig, frames, noise);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const ParamRef& p : all_params()) {
    *p.grad *= inv;
  }
  adam_.step(trainable_params());
  if (stage_ == DenoiserStage::Motion) {
    verify_frozen();
  }
  trained_ = true;
  return total * inv;
}

void DenoiserModel::to_motion_stage() {
  if (stage_ == DenoiserStage::Motion) {
    throw RigError(ErrorCode::StageMismatch, "model is already in the motion stage");
  }
  stage_ = DenoiserStage::Motion;
  config_.stage = DenoiserStage::Motion;
  frozen_snapshot_.clear();
  frozen_names_.clear();
  for (const ParamRef& p : all_params()) {
    if (p.name.find(".temporal.") == std::string::npos) {
      frozen_names_.push_back(p.name);
      frozen_snapshot_.push_back(*p.value);
    }
  }
  adam_.reset();
}

void DenoiserModel::verify_frozen() const {
  if (frozen_names_.empty()) {
    return;
  }
  auto& self = const_cast<DenoiserModel&>(*this);
  std::unordered_map<std::string, const Mat*> by_name;
  for (const ParamRef& p : self.all_params()) {
    by_name[p.name] = p.value;
  }
  for (size_t i = 0; i < frozen_names_.size(); ++i) {
    const Mat* current = by_name.at(frozen_names_[i]);
    const Mat& saved = frozen_snapshot_[i];
    if (current->rows() != saved.rows() || current->cols() != saved.cols() ||
        !current->isApprox(saved, 0.0)) {
      throw RigError(ErrorCode::FrozenWeightViolation,
                     "frozen weight '" + frozen_names_[i] + "' changed during the motion stage");
    }
  }
}

std::vector<std::string> DenoiserModel::frozen_param_names() const { return frozen_names_; }

void DenoiserModel::zero_grad() {
  in_proj.zero_grad();
  tree_l1.zero_grad();
  tree_l2.zero_grad();
  rest_l1.zero_grad();
  rest_l2.zero_grad();
  time_l1.zero_grad();
  time_l2.zero_grad();
  cond_l1.zero_grad();
  cond_l2.zero_grad();
  null_grad_.setZero();
  for (DenoiserBlock& block : blocks) {
    block.spatial.zero_grad();
    block.temporal.zero_grad();
  }
  final_mod.zero_grad();
  out_proj.zero_grad();
}

std::vector<ParamRef> DenoiserModel::all_params() {
  std::vector<ParamRef> params;
  append_params(params, "in_proj", in_proj);
  append_params(params, "tree.l1", tree_l1);
  append_params(params, "tree.l2", tree_l2);
  append_params(params, "rest.l1", rest_l1);
  append_params(params, "rest.l2", rest_l2);
  append_params(params, "time.l1", time_l1);
  append_params(params, "time.l2", time_l2);
  append_params(params, "cond.l1", cond_l1);
  append_params(params, "cond.l2", cond_l2);
  params.push_back({"null_cond", &null_cond, &null_grad_});
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string base = "block" + std::to_string(b);
    append_params(params, base + ".spatial.attn", blocks[b].spatial.attn);
    append_params(params, base + ".spatial.mlp1", blocks[b].spatial.mlp1);
    append_params(params, base + ".spatial.mlp2", blocks[b].spatial.mlp2);
    append_params(params, base + ".spatial.mod", blocks[b].spatial.mod);
    append_params(params, base + ".temporal.attn", blocks[b].temporal.attn);
    append_params(params, base + ".temporal.mlp1", blocks[b].temporal.mlp1);
    append_params(params, base + ".temporal.mlp2", blocks[b].temporal.mlp2);
    append_params(params, base + ".temporal.mod", blocks[b].temporal.mod);
  }
  append_params(params, "final_mod", final_mod);
  append_params(params, "out_proj", out_proj);
  return params;
}

std::vector<ParamRef> DenoiserModel::trainable_params() {
  std::vector<ParamRef> params = all_params();
  std::vector<ParamRef> out;
  for (ParamRef& p : params) {
    const bool temporal = p.name.find(".temporal.") != std::string::npos;
    if (stage_ == DenoiserStage::Motion ? temporal : !temporal) {
      out.push_back(p);
    }
  }
  return out;
}

Mat DenoiserModel::guided_x0(const Mat& x_t, int t, const Eigen::VectorXd& cond, const Rig& rig,
                             int frames, double guidance) const {
  if (cond.size() == 0 || guidance == 0.0) {
    return denoise(x_t, t, Eigen::VectorXd(), rig, frames);
  }
  if (guidance == 1.0) {
    return denoise(x_t, t, cond, rig, frames);
  }
  Mat with_cond = denoise(x_t, t, cond, rig, frames);
  Mat without = denoise(x_t, t, Eigen::VectorXd(), rig, frames);
  return without + guidance * (with_cond - without);
}

Mat DenoiserModel::sample_chunk(const Eigen::VectorXd& cond, const Rig& rig, int frames,
                                double guidance, Rng& rng, const Mat* known_head,
                                int overlap) const {
  const int joints = rig.topology.joint_count();
  const Eigen::Index rows = static_cast<Eigen::Index>(frames) * joints;
  Mat x = normal_grid(rng, rows, config_.rotation_dim);
  for (int t = config_.timesteps - 1; t >= 0; --t) {
    Mat x0_hat = guided_x0(x, t, cond, rig, frames, guidance);
    const double abar = schedule_.alpha_bar(t);
    const double abar_prev = schedule_.alpha_bar(t - 1);
    const double alpha = abar / abar_prev;
    const double beta = 1.0 - alpha;
    const double coef0 = std::sqrt(abar_prev) * beta / (1.0 - abar);
    const double coef_t = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);
    const double var = beta * (1.0 - abar_prev) / (1.0 - abar);
    Mat mean = coef0 * x0_hat + coef_t * x;
    if (t > 0) {
      x = mean + std::sqrt(var) * normal_grid(rng, rows, config_.rotation_dim);
    } else {
      x = std::move(mean);
    }
    if (known_head != nullptr && overlap > 0) {
      // In-painting: re-noise the known leading frames to the current level
      // so the free tail is denoised against a consistent overlap.
      const Eigen::Index head_rows = static_cast<Eigen::Index>(overlap) * joints;
      Mat head_noise = normal_grid(rng, head_rows, config_.rotation_dim);
      x.topRows(head_rows) = q_sample(*known_head, t - 1, head_noise, schedule_);
    }
  }
  return x;
}

Motion DenoiserModel::sample(const Eigen::VectorXd& cond, const Rig& rig, int frames,
                             double guidance, Rng& rng) const {
  if (!trained_) {
    throw RigError(ErrorCode::UntrainedModel, "sampling requires a trained model");
  }
  if (frames < 1 || frames > config_.f_max) {
    throw RigError(ErrorCode::ConfigError, "frame count must lie in [1, f_max]");
  }
  if (rig.topology.joint_count() > config_.j_max) {
    throw RigError(ErrorCode::JointBudgetExceeded, "rig exceeds the model joint capacity");
  }
  if (cond.size() != 0 && cond.size() != config_.cond_dim) {
    throw RigError(ErrorCode::ShapeMismatch, "condition vector has the wrong dimension");
  }
  Mat x = sample_chunk(cond, rig, frames, guidance, rng, nullptr, 0);
  Mat degrees = denormalize_rotations(x, norm_stats_);
  const int joints = rig.topology.joint_count();
  Motion motion;
  motion.rig = rig;
  motion.rotations.reserve(static_cast<size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    motion.rotations.push_back(degrees.middleRows(static_cast<Eigen::Index>(f) * joints, joints));
  }
  return motion;
}

Motion DenoiserModel::sample_long(const std::vector<Eigen::VectorXd>& conds, const Rig& rig,
                                  int overlap, double guidance, Rng& rng,
                                  SampleLongTrace* trace) const {
  if (!trained_) {
    throw RigError(ErrorCode::UntrainedModel, "sampling requires a trained model");
  }
  if (conds.empty()) {
    throw RigError(ErrorCode::ConfigError, "sample_long needs at least one condition");
  }
  const int chunk = config_.f_max;
  if (overlap < 0 || overlap >= chunk) {
    throw RigError(ErrorCode::OverlapTooLarge,
                   "overlap must lie in [0, chunk_frames); chunk_frames is " +
                       std::to_string(chunk));
  }
  if (rig.topology.joint_count() > config_.j_max) {
    throw RigError(ErrorCode::JointBudgetExceeded, "rig exceeds the model joint capacity");
  }
  for (const Eigen::VectorXd& cond : conds) {
    if (cond.size() != 0 && cond.size() != config_.cond_dim) {
      throw RigError(ErrorCode::ShapeMismatch, "condition vector has the wrong dimension");
    }
  }
  const int joints = rig.topology.joint_count();
  const int n = static_cast<int>(conds.size());
  const int total_frames = n * chunk - (n - 1) * overlap;
  const std::vector<double> weights = blend_curve(overlap);

  // De-normalize without wrapping; blending happens in plain degrees and the
  // wrap to (-180, 180] is applied once at the end.
  auto to_degrees = [&](const Mat& normalized) {
    Mat deg(normalized.rows(), normalized.cols());
    for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
      for (int c = 0; c < 3; ++c) {
        deg(r, c) = rad2deg(normalized(r, c) * norm_stats_.stddev(c) +
                                       norm_stats_.mean(c));
      }
    }
    return deg;
  };

  Mat out = Mat::Zero(static_cast<Eigen::Index>(total_frames) * joints, 3);
  Mat prev_chunk;
  if (trace != nullptr) {
    trace->chunk_degrees.clear();
    trace->blend_weights = weights;
    trace->chunk_frames = chunk;
    trace->overlap = overlap;
  }
  for (int k = 0; k < n; ++k) {
    Mat known;
    const Mat* known_ptr = nullptr;
    if (k > 0 && overlap > 0) {
      known = prev_chunk.bottomRows(static_cast<Eigen::Index>(overlap) * joints);
      known_ptr = &known;
    }
    Mat chunk_norm = sample_chunk(conds[static_cast<size_t>(k)], rig, chunk, guidance, rng,
                                  known_ptr, overlap);
    Mat chunk_deg = to_degrees(chunk_norm);
    if (trace != nullptr) {
      trace->chunk_degrees.push_back(chunk_deg);
    }
    const int start = k * (chunk - overlap);
    for (int f = 0; f < chunk; ++f) {
      const Eigen::Index dst = static_cast<Eigen::Index>(start + f) * joints;
      const Eigen::Index src = static_cast<Eigen::Index>(f) * joints;
      if (k > 0 && f < overlap) {
        const double w = weights[static_cast<size_t>(f)];
        out.middleRows(dst, joints) =
            (1.0 - w) * out.middleRows(dst, joints) + w * chunk_deg.middleRows(src, joints);
      } else {
        out.middleRows(dst, joints) = chunk_deg.middleRows(src, joints);
      }
    }
    prev_chunk = std::move(chunk_norm);
  }

  Motion motion;
  motion.rig = rig;
  motion.rotations.reserve(static_cast<size_t>(total_frames));
  for (int f = 0; f < total_frames; ++f) {
    OffsetMatrix frame = out.middleRows(static_cast<Eigen::Index>(f) * joints, joints);
    for (Eigen::Index j = 0; j < frame.rows(); ++j) {
      for (int c = 0; c < 3; ++c) {
        frame(j, c) = wrap_degrees(frame(j, c));
      }
    }
    motion.rotations.push_back(std::move(frame));
  }
  return motion;
}

}  // namespace rigmotion
