#include "rigmotion/nn.hpp"

#include <cmath>

namespace rigmotion {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

Mat xavier_uniform(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
  return m;
}

Mat softmax_rows(const Mat& scores) {
  Mat out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double peak = scores.row(r).maxCoeff();
    Eigen::RowVectorXd e = (scores.row(r).array() - peak).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace

Linear Linear::make(int in, int out) {
  Linear layer;
  layer.w = Mat::Zero(out, in);
  layer.b = Mat::Zero(1, out);
  layer.zero_grad();
  return layer;
}

Linear Linear::make_seeded(int in, int out, Rng& rng) {
  Linear layer = make(in, out);
  layer.w = xavier_uniform(out, in, rng);
  return layer;
}

void Linear::zero_grad() {
  gw = Mat::Zero(w.rows(), w.cols());
  gb = Mat::Zero(b.rows(), b.cols());
}

Mat Linear::forward(const Mat& x) const {
  if (x.cols() != w.cols()) {
    throw RigError(ErrorCode::ShapeMismatch, "linear layer input has " + std::to_string(x.cols()) +
                                                 " features, expected " + std::to_string(w.cols()));
  }
  Mat y = x * w.transpose();
  y.rowwise() += b.row(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  if (dy.cols() != w.rows() || dy.rows() != x.rows()) {
    throw RigError(ErrorCode::ShapeMismatch, "linear backward shape mismatch");
  }
  gw.noalias() += dy.transpose() * x;
  gb.row(0) += dy.colwise().sum();
  return dy * w;
}

Mat layer_norm(const Mat& x, LayerNormCache* cache) {
  const double n = static_cast<double>(x.cols());
  Mat normalized(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    Eigen::RowVectorXd centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / n;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(r) = centered * is;
    inv_std(r) = is;
  }
  if (cache != nullptr) {
    cache->normalized = normalized;
    cache->inv_std = inv_std;
  }
  return normalized;
}

Mat layer_norm_backward(const LayerNormCache& cache, const Mat& dy) {
  const Mat& xhat = cache.normalized;
  if (dy.rows() != xhat.rows() || dy.cols() != xhat.cols()) {
    throw RigError(ErrorCode::ShapeMismatch, "layer norm backward shape mismatch");
  }
  const double n = static_cast<double>(xhat.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_dy = dy.row(r).mean();
    const double mean_dy_xhat = dy.row(r).cwiseProduct(xhat.row(r)).sum() / n;
    dx.row(r) =
        cache.inv_std(r) * (dy.row(r).array() - mean_dy - xhat.row(r).array() * mean_dy_xhat);
  }
  return dx;
}

Mat silu(const Mat& x) {
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Mat silu_backward(const Mat& x, const Mat& dy) {
  Mat dx = x.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
  return dx.cwiseProduct(dy);
}

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
  Mat dx = x.unaryExpr([](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return cdf + v * pdf;
  });
  return dx.cwiseProduct(dy);
}

AttentionWeights AttentionWeights::make(int d_model) {
  AttentionWeights w;
  w.q = Linear::make(d_model, d_model);
  w.k = Linear::make(d_model, d_model);
  w.v = Linear::make(d_model, d_model);
  w.o = Linear::make(d_model, d_model);
  return w;
}

AttentionWeights AttentionWeights::make_seeded(int d_model, Rng& rng) {
  AttentionWeights w;
  w.q = Linear::make_seeded(d_model, d_model, rng);
  w.k = Linear::make_seeded(d_model, d_model, rng);
  w.v = Linear::make_seeded(d_model, d_model, rng);
  w.o = Linear::make_seeded(d_model, d_model, rng);
  return w;
}

void AttentionWeights::zero_grad() {
  q.zero_grad();
  k.zero_grad();
  v.zero_grad();
  o.zero_grad();
}

Mat attention_forward(const AttentionWeights& w, const Mat& x, int heads, AttentionCache* cache) {
  const int d_model = static_cast<int>(w.q.w.rows());
  if (heads < 1 || d_model % heads != 0) {
    throw RigError(ErrorCode::ShapeMismatch,
                   "attention head count must divide the model dimension");
  }
  const int head_dim = d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Mat q = w.q.forward(x);
  Mat k = w.k.forward(x);
  Mat v = w.v.forward(x);
  Mat concat(x.rows(), d_model);
  std::vector<Mat> attn(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = q.middleCols(h * head_dim, head_dim);
    auto kh = k.middleCols(h * head_dim, head_dim);
    auto vh = v.middleCols(h * head_dim, head_dim);
    Mat scores = (qh * kh.transpose()) * scale;
    attn[static_cast<size_t>(h)] = softmax_rows(scores);
    concat.middleCols(h * head_dim, head_dim) = attn[static_cast<size_t>(h)] * vh;
  }
  Mat y = w.o.forward(concat);
  if (cache != nullptr) {
    cache->x = x;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->attn = std::move(attn);
    cache->concat = concat;
  }
  return y;
}

Mat attention_backward(AttentionWeights& w, const AttentionCache& cache, const Mat& dy,
                       int heads) {
  const int d_model = static_cast<int>(w.q.w.rows());
  const int head_dim = d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Mat dconcat = w.o.backward(cache.concat, dy);
  Mat dq = Mat::Zero(cache.q.rows(), cache.q.cols());
  Mat dk = Mat::Zero(cache.k.rows(), cache.k.cols());
  Mat dv = Mat::Zero(cache.v.rows(), cache.v.cols());
  for (int h = 0; h < heads; ++h) {
    const Mat& a = cache.attn[static_cast<size_t>(h)];
    auto qh = cache.q.middleCols(h * head_dim, head_dim);
    auto kh = cache.k.middleCols(h * head_dim, head_dim);
    auto vh = cache.v.middleCols(h * head_dim, head_dim);
    Mat doh = dconcat.middleCols(h * head_dim, head_dim);

    Mat da = doh * vh.transpose();
    dv.middleCols(h * head_dim, head_dim) = a.transpose() * doh;

    // Softmax Jacobian per row: ds = a .* (da - rowsum(da .* a)).
    Mat ds(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double dot = da.row(r).cwiseProduct(a.row(r)).sum();
      ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
    }
    ds *= scale;
    dq.middleCols(h * head_dim, head_dim) = ds * kh;
    dk.middleCols(h * head_dim, head_dim) = ds.transpose() * qh;
  }
  Mat dx = w.q.backward(cache.x, dq);
  dx += w.k.backward(cache.x, dk);
  dx += w.v.backward(cache.x, dv);
  return dx;
}

void append_params(std::vector<ParamRef>& out, const std::string& prefix, Linear& layer) {
  out.push_back({prefix + ".w", &layer.w, &layer.gw});
  out.push_back({prefix + ".b", &layer.b, &layer.gb});
}

void append_params(std::vector<ParamRef>& out, const std::string& prefix, AttentionWeights& w) {
  append_params(out, prefix + ".q", w.q);
  append_params(out, prefix + ".k", w.k);
  append_params(out, prefix + ".v", w.v);
  append_params(out, prefix + ".o", w.o);
}

void Adam::step(const std::vector<ParamRef>& params) {
  if (m.size() != params.size()) {
    m.assign(params.size(), Mat());
    v.assign(params.size(), Mat());
    for (size_t i = 0; i < params.size(); ++i) {
      m[i] = Mat::Zero(params[i].value->rows(), params[i].value->cols());
      v[i] = Mat::Zero(params[i].value->rows(), params[i].value->cols());
    }
    t = 0;
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    const Mat& g = *params[i].grad;
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    Mat mhat = m[i] / bc1;
    Mat denom = (v[i] / bc2).cwiseSqrt();
    denom.array() += eps;
    *params[i].value -= lr * mhat.cwiseQuotient(denom);
  }
}

void Adam::reset() {
  m.clear();
  v.clear();
  t = 0;
}

}  // namespace rigmotion
