#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ideolens/errors.hpp"
#include "ideolens/rng.hpp"
#include "ideolens/types.hpp"

namespace ideolens::net {

struct NetConfig {
  int vocab_size = 0;  // embedding rows: pad + unknown + kept characters
  int max_len = 280;
  int embedding_dim = 32;
  int conv_filters = 128;
  int conv_width = 5;
  int pool_width = 2;
  int transformer_layers = 2;
  int attention_heads = 4;
  int model_dim = 128;
  int ffn_dim = 256;
  int dense_dim = 64;
  int n_classes = 0;
  double dropout = 0.1;

  int pooled_len() const { return max_len / pool_width; }

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(vocab_size, "vocab_size");
    positive(max_len, "max_len");
    positive(embedding_dim, "embedding_dim");
    positive(conv_filters, "conv_filters");
    positive(conv_width, "conv_width");
    positive(pool_width, "pool_width");
    positive(transformer_layers, "transformer_layers");
    positive(attention_heads, "attention_heads");
    positive(model_dim, "model_dim");
    positive(ffn_dim, "ffn_dim");
    positive(dense_dim, "dense_dim");
    positive(n_classes, "n_classes");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (model_dim != conv_filters)
      throw ConfigError("model_dim must equal conv_filters (the pooled sequence feeds "
                        "the transformer unchanged)");
    if (model_dim % attention_heads != 0)
      throw ConfigError("attention_heads must divide model_dim");
    if (max_len % pool_width != 0) throw ConfigError("pool_width must divide max_len");
  }
};

template <class S>
struct LayerParams {
  Mat<S> wq, bq, wk, bk, wv, bv, wo, bo;
  Mat<S> ln1_g, ln1_b;
  Mat<S> w1, b1, w2, b2;
  Mat<S> ln2_g, ln2_b;
};

template <class S>
struct NetParams {
  Mat<S> embedding;  // V x De
  Mat<S> conv_w;     // (W*De) x F
  Mat<S> conv_b;     // 1 x F
  std::vector<LayerParams<S>> layers;
  Mat<S> dense_w, dense_b;  // Dm x Dd, 1 x Dd
  Mat<S> out_w, out_b;      // Dd x C, 1 x C

  template <class F>
  void visit(F&& f) {
    f("embedding", embedding);
    f("conv_w", conv_w);
    f("conv_b", conv_b);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerParams<S>& lp = layers[l];
      f(p + "wq", lp.wq);
      f(p + "bq", lp.bq);
      f(p + "wk", lp.wk);
      f(p + "bk", lp.bk);
      f(p + "wv", lp.wv);
      f(p + "bv", lp.bv);
      f(p + "wo", lp.wo);
      f(p + "bo", lp.bo);
      f(p + "ln1_g", lp.ln1_g);
      f(p + "ln1_b", lp.ln1_b);
      f(p + "w1", lp.w1);
      f(p + "b1", lp.b1);
      f(p + "w2", lp.w2);
      f(p + "b2", lp.b2);
      f(p + "ln2_g", lp.ln2_g);
      f(p + "ln2_b", lp.ln2_b);
    }
    f("dense_w", dense_w);
    f("dense_b", dense_b);
    f("out_w", out_w);
    f("out_b", out_b);
  }

  template <class F>
  void visit(F&& f) const {
    const_cast<NetParams<S>*>(this)->visit(
        [&f](const std::string& name, Mat<S>& m) { f(name, static_cast<const Mat<S>&>(m)); });
  }

  void allocate(const NetConfig& c) {
    const int de = c.embedding_dim, f = c.conv_filters, dm = c.model_dim, df = c.ffn_dim;
    embedding.setZero(c.vocab_size, de);
    conv_w.setZero(c.conv_width * de, f);
    conv_b.setZero(1, f);
    layers.resize(static_cast<std::size_t>(c.transformer_layers));
    for (auto& lp : layers) {
      lp.wq.setZero(dm, dm);
      lp.bq.setZero(1, dm);
      lp.wk.setZero(dm, dm);
      lp.bk.setZero(1, dm);
      lp.wv.setZero(dm, dm);
      lp.bv.setZero(1, dm);
      lp.wo.setZero(dm, dm);
      lp.bo.setZero(1, dm);
      lp.ln1_g.setZero(1, dm);
      lp.ln1_b.setZero(1, dm);
      lp.w1.setZero(dm, df);
      lp.b1.setZero(1, df);
      lp.w2.setZero(df, dm);
      lp.b2.setZero(1, dm);
      lp.ln2_g.setZero(1, dm);
      lp.ln2_b.setZero(1, dm);
    }
    dense_w.setZero(dm, c.dense_dim);
    dense_b.setZero(1, c.dense_dim);
    out_w.setZero(c.dense_dim, c.n_classes);
    out_b.setZero(1, c.n_classes);
  }

  void set_zero() {
    visit([](const std::string&, Mat<S>& m) { m.setZero(); });
  }

  void init(const NetConfig& c, Rng& rng) {
    allocate(c);
    auto glorot = [&rng](Mat<S>& m) {
      const double limit = std::sqrt(6.0 / (static_cast<double>(m.rows()) + static_cast<double>(m.cols())));
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
    };
    // Wide enough that conv activations are not drowned out by the O(1)
    // positional encodings; the layer norms keep later scales in check.
    for (Eigen::Index j = 0; j < embedding.cols(); ++j)
      for (Eigen::Index i = 0; i < embedding.rows(); ++i)
        embedding(i, j) = static_cast<S>(rng.uniform(-0.5, 0.5));
    glorot(conv_w);
    for (auto& lp : layers) {
      glorot(lp.wq);
      glorot(lp.wk);
      glorot(lp.wv);
      glorot(lp.wo);
      glorot(lp.w1);
      glorot(lp.w2);
      lp.ln1_g.setOnes();
      lp.ln2_g.setOnes();
    }
    glorot(dense_w);
    // The classification head starts at zero: softmax is exactly uniform, and
    // relabeling classes permutes training bit for bit.
  }
};

template <class S>
struct Cache {
  Eigen::MatrixXi batch;
  Mat<S> x_embed;    // (B*L) x De
  Mat<S> x_cols;     // (B*L) x (W*De)
  Mat<S> conv_pre;   // (B*L) x F
  Mat<S> pooled;     // (B*Lp) x Dm, positional encoding included
  Eigen::MatrixXi pool_arg;  // (B*Lp) x F, offset of the max within its window
  struct LayerCache {
    Mat<S> x_in;
    Mat<S> q, k, v;
    std::vector<Mat<S>> attn;  // B*H softmaxed score matrices, each Lp x Lp
    Mat<S> ctx;
    Mat<S> x1_hat, x1;
    Vec<S> inv_std1;
    Mat<S> ffn_pre;
    Mat<S> x2_hat, x2;
    Vec<S> inv_std2;
  };
  std::vector<LayerCache> layers;
  Mat<S> avg;         // B x Dm
  Mat<S> dense_pre;   // B x Dd
  Mat<S> dropout_mask;  // B x Dd, empty in eval mode
  Mat<S> dense_out;   // B x Dd
  Mat<S> logits;      // B x C
};

namespace detail {

template <class S>
void layer_norm_forward(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta,
                        Mat<S>& x_hat, Vec<S>& inv_std, Mat<S>& y) {
  constexpr S eps = static_cast<S>(1e-5);
  const Eigen::Index n = x.cols();
  x_hat.resize(x.rows(), n);
  inv_std.resize(x.rows());
  y.resize(x.rows(), n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S mean = x.row(r).mean();
    const auto centered = (x.row(r).array() - mean).eval();
    const S var = centered.square().sum() / static_cast<S>(n);
    const S is = S(1) / std::sqrt(var + eps);
    inv_std(r) = is;
    x_hat.row(r) = centered * is;
    y.row(r) = x_hat.row(r).cwiseProduct(gamma.row(0)) + beta.row(0);
  }
}

// dy -> dx for layer norm; also accumulates dgamma/dbeta.
template <class S>
void layer_norm_backward(const Mat<S>& dy, const Mat<S>& x_hat, const Vec<S>& inv_std,
                         const Mat<S>& gamma, Mat<S>& dgamma, Mat<S>& dbeta, Mat<S>& dx) {
  const Eigen::Index n = x_hat.cols();
  dx.resize(x_hat.rows(), n);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const auto dxhat = (dy.row(r).cwiseProduct(gamma.row(0))).eval();
    const S m1 = dxhat.mean();
    const S m2 = dxhat.cwiseProduct(x_hat.row(r)).mean();
    dx.row(r) = ((dxhat.array() - m1) - x_hat.row(r).array() * m2).matrix() * inv_std(r);
  }
  dgamma.row(0) += (dy.cwiseProduct(x_hat)).colwise().sum();
  dbeta.row(0) += dy.colwise().sum();
}

template <class S>
void softmax_rows(Mat<S>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const S mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace detail

// Character CNN + transformer encoder producing class logits.
// Layout convention: sequences are stacked row-wise, item b occupying rows
// [b*L, (b+1)*L) of every activation matrix.
template <class S>
class TextNet {
 public:
  TextNet(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "net.init"));
    params_.init(cfg_, rng);
    build_positional_encoding();
  }

  const NetConfig& config() const { return cfg_; }
  NetParams<S>& params() { return params_; }
  const NetParams<S>& params() const { return params_; }

  void forward(const Eigen::MatrixXi& batch, bool train, Rng* dropout_rng, Cache<S>& c) const {
    const int b_sz = static_cast<int>(batch.rows());
    const int len = cfg_.max_len;
    if (static_cast<int>(batch.cols()) != len)
      throw ConfigError("batch columns must equal max_len");
    const int de = cfg_.embedding_dim, f = cfg_.conv_filters, pw = cfg_.pool_width;
    const int lp = cfg_.pooled_len(), dm = cfg_.model_dim, heads = cfg_.attention_heads;
    const int dh = dm / heads;

    c.batch = batch;
    c.x_embed.resize(b_sz * len, de);
    for (int b = 0; b < b_sz; ++b)
      for (int t = 0; t < len; ++t) {
        const int idx = batch(b, t);
        if (idx < 0 || idx >= cfg_.vocab_size) throw ValidationError("character index out of range");
        c.x_embed.row(b * len + t) = params_.embedding.row(idx);
      }

    // Same-padding im2col so the convolution is one GEMM.
    const int w = cfg_.conv_width, left = (w - 1) / 2;
    c.x_cols.setZero(b_sz * len, w * de);
    for (int b = 0; b < b_sz; ++b)
      for (int l = 0; l < len; ++l)
        for (int tap = 0; tap < w; ++tap) {
          const int src = l + tap - left;
          if (src < 0 || src >= len) continue;
          c.x_cols.block(b * len + l, tap * de, 1, de) = c.x_embed.row(b * len + src);
        }
    c.conv_pre.noalias() = c.x_cols * params_.conv_w;
    c.conv_pre.rowwise() += params_.conv_b.row(0);

    c.pooled.resize(b_sz * lp, f);
    c.pool_arg.resize(b_sz * lp, f);
    for (int b = 0; b < b_sz; ++b)
      for (int j = 0; j < lp; ++j) {
        const int out_r = b * lp + j;
        for (int ch = 0; ch < f; ++ch) {
          S best = S(0);
          int arg = 0;
          for (int r = 0; r < pw; ++r) {
            const S v = std::max(S(0), c.conv_pre(b * len + j * pw + r, ch));
            if (r == 0 || v > best) {
              best = v;
              arg = r;
            }
          }
          c.pooled(out_r, ch) = best;
          c.pool_arg(out_r, ch) = arg;
        }
      }
    for (int b = 0; b < b_sz; ++b) c.pooled.middleRows(b * lp, lp) += pe_;

    c.layers.resize(static_cast<std::size_t>(cfg_.transformer_layers));
    const Mat<S>* x = &c.pooled;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    for (int l = 0; l < cfg_.transformer_layers; ++l) {
      auto& lc = c.layers[static_cast<std::size_t>(l)];
      const LayerParams<S>& lp_par = params_.layers[static_cast<std::size_t>(l)];
      lc.x_in = *x;
      lc.q.noalias() = lc.x_in * lp_par.wq;
      lc.q.rowwise() += lp_par.bq.row(0);
      lc.k.noalias() = lc.x_in * lp_par.wk;
      lc.k.rowwise() += lp_par.bk.row(0);
      lc.v.noalias() = lc.x_in * lp_par.wv;
      lc.v.rowwise() += lp_par.bv.row(0);
      lc.ctx.resize(b_sz * lp, dm);
      lc.attn.assign(static_cast<std::size_t>(b_sz * heads), Mat<S>());
      for (int b = 0; b < b_sz; ++b)
        for (int h = 0; h < heads; ++h) {
          Mat<S>& a = lc.attn[static_cast<std::size_t>(b * heads + h)];
          a.noalias() = lc.q.block(b * lp, h * dh, lp, dh) *
                        lc.k.block(b * lp, h * dh, lp, dh).transpose() * scale;
          detail::softmax_rows(a);
          lc.ctx.block(b * lp, h * dh, lp, dh).noalias() = a * lc.v.block(b * lp, h * dh, lp, dh);
        }
      Mat<S> attn_out;
      attn_out.noalias() = lc.ctx * lp_par.wo;
      attn_out.rowwise() += lp_par.bo.row(0);
      attn_out += lc.x_in;  // residual
      detail::layer_norm_forward(attn_out, lp_par.ln1_g, lp_par.ln1_b, lc.x1_hat, lc.inv_std1, lc.x1);

      lc.ffn_pre.noalias() = lc.x1 * lp_par.w1;
      lc.ffn_pre.rowwise() += lp_par.b1.row(0);
      Mat<S> ffn_out;
      ffn_out.noalias() = lc.ffn_pre.cwiseMax(S(0)) * lp_par.w2;
      ffn_out.rowwise() += lp_par.b2.row(0);
      ffn_out += lc.x1;  // residual
      detail::layer_norm_forward(ffn_out, lp_par.ln2_g, lp_par.ln2_b, lc.x2_hat, lc.inv_std2, lc.x2);
      x = &lc.x2;
    }

    c.avg.resize(b_sz, dm);
    for (int b = 0; b < b_sz; ++b) c.avg.row(b) = x->middleRows(b * lp, lp).colwise().mean();

    c.dense_pre.noalias() = c.avg * params_.dense_w;
    c.dense_pre.rowwise() += params_.dense_b.row(0);
    Mat<S> act = c.dense_pre.cwiseMax(S(0));
    if (train && cfg_.dropout > 0.0) {
      if (dropout_rng == nullptr) throw ConfigError("training forward needs a dropout rng");
      const S keep_inv = static_cast<S>(1.0 / (1.0 - cfg_.dropout));
      c.dropout_mask.resize(act.rows(), act.cols());
      for (Eigen::Index i = 0; i < act.rows(); ++i)
        for (Eigen::Index j = 0; j < act.cols(); ++j)
          c.dropout_mask(i, j) = dropout_rng->uniform() < cfg_.dropout ? S(0) : keep_inv;
      c.dense_out = act.cwiseProduct(c.dropout_mask);
    } else {
      c.dropout_mask.resize(0, 0);
      c.dense_out = std::move(act);
    }
    c.logits.noalias() = c.dense_out * params_.out_w;
    c.logits.rowwise() += params_.out_b.row(0);
  }

  // Mean cross-entropy over the batch; fills `grads` (accumulating into the
  // already-allocated tensors after zeroing them).
  S loss_and_grad(const Cache<S>& c, const std::vector<int>& labels, NetParams<S>& grads) const {
    const int b_sz = static_cast<int>(c.logits.rows());
    if (static_cast<int>(labels.size()) != b_sz) throw ConfigError("labels/batch size mismatch");
    Mat<S> probs = c.logits;
    detail::softmax_rows(probs);
    double loss = 0.0;
    Mat<S> dlogits = probs;
    for (int b = 0; b < b_sz; ++b) {
      const int y = labels[static_cast<std::size_t>(b)];
      if (y < 0 || y >= cfg_.n_classes) throw ConfigError("label out of range");
      loss -= std::log(std::max(static_cast<double>(probs(b, y)), 1e-300));
      dlogits(b, y) -= S(1);
    }
    dlogits /= static_cast<S>(b_sz);
    const double mean_loss = loss / b_sz;
    if (!std::isfinite(mean_loss))
      throw std::runtime_error("non-finite training loss; lower the learning rate");
    backward(c, dlogits, grads);
    return static_cast<S>(mean_loss);
  }

  void backward(const Cache<S>& c, const Mat<S>& dlogits, NetParams<S>& grads) const {
    if (grads.embedding.rows() == 0) grads.allocate(cfg_);
    grads.set_zero();
    const int b_sz = static_cast<int>(c.batch.rows());
    const int len = cfg_.max_len, de = cfg_.embedding_dim, f = cfg_.conv_filters;
    const int pw = cfg_.pool_width, lp = cfg_.pooled_len(), dm = cfg_.model_dim;
    const int heads = cfg_.attention_heads, dh = dm / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));

    grads.out_w.noalias() = c.dense_out.transpose() * dlogits;
    grads.out_b.row(0) = dlogits.colwise().sum();
    Mat<S> d_dense_out = dlogits * params_.out_w.transpose();
    if (c.dropout_mask.size() > 0) d_dense_out = d_dense_out.cwiseProduct(c.dropout_mask);
    Mat<S> d_dense_pre =
        d_dense_out.cwiseProduct((c.dense_pre.array() > S(0)).template cast<S>().matrix());
    grads.dense_w.noalias() = c.avg.transpose() * d_dense_pre;
    grads.dense_b.row(0) = d_dense_pre.colwise().sum();
    Mat<S> d_avg = d_dense_pre * params_.dense_w.transpose();

    Mat<S> dx(b_sz * lp, dm);
    const S inv_lp = S(1) / static_cast<S>(lp);
    for (int b = 0; b < b_sz; ++b)
      dx.middleRows(b * lp, lp) = (d_avg.row(b) * inv_lp).replicate(lp, 1);

    for (int l = cfg_.transformer_layers - 1; l >= 0; --l) {
      const auto& lc = c.layers[static_cast<std::size_t>(l)];
      const LayerParams<S>& lp_par = params_.layers[static_cast<std::size_t>(l)];
      LayerParams<S>& lg = grads.layers[static_cast<std::size_t>(l)];

      Mat<S> dr2;
      detail::layer_norm_backward(dx, lc.x2_hat, lc.inv_std2, lp_par.ln2_g, lg.ln2_g, lg.ln2_b, dr2);
      // dr2 flows into the ffn output and the residual to x1.
      Mat<S> d_x1 = dr2;
      const Mat<S> ffn_act = lc.ffn_pre.cwiseMax(S(0));
      lg.w2.noalias() += ffn_act.transpose() * dr2;
      lg.b2.row(0) += dr2.colwise().sum();
      Mat<S> d_ffn_act = dr2 * lp_par.w2.transpose();
      Mat<S> d_ffn_pre =
          d_ffn_act.cwiseProduct((lc.ffn_pre.array() > S(0)).template cast<S>().matrix());
      lg.w1.noalias() += lc.x1.transpose() * d_ffn_pre;
      lg.b1.row(0) += d_ffn_pre.colwise().sum();
      d_x1.noalias() += d_ffn_pre * lp_par.w1.transpose();

      Mat<S> dr1;
      detail::layer_norm_backward(d_x1, lc.x1_hat, lc.inv_std1, lp_par.ln1_g, lg.ln1_g, lg.ln1_b, dr1);
      Mat<S> d_x_in = dr1;  // residual branch
      lg.wo.noalias() += lc.ctx.transpose() * dr1;
      lg.bo.row(0) += dr1.colwise().sum();
      Mat<S> d_ctx = dr1 * lp_par.wo.transpose();

      Mat<S> dq = Mat<S>::Zero(b_sz * lp, dm), dk = Mat<S>::Zero(b_sz * lp, dm),
             dv = Mat<S>::Zero(b_sz * lp, dm);
      for (int b = 0; b < b_sz; ++b)
        for (int h = 0; h < heads; ++h) {
          const Mat<S>& a = lc.attn[static_cast<std::size_t>(b * heads + h)];
          const auto d_ctx_h = d_ctx.block(b * lp, h * dh, lp, dh);
          const auto vh = lc.v.block(b * lp, h * dh, lp, dh);
          const auto qh = lc.q.block(b * lp, h * dh, lp, dh);
          const auto kh = lc.k.block(b * lp, h * dh, lp, dh);
          dv.block(b * lp, h * dh, lp, dh).noalias() = a.transpose() * d_ctx_h;
          Mat<S> da;
          da.noalias() = d_ctx_h * vh.transpose();
          Mat<S> ds(lp, lp);
          for (int r = 0; r < lp; ++r) {
            const S dot = da.row(r).cwiseProduct(a.row(r)).sum();
            ds.row(r) = a.row(r).cwiseProduct(da.row(r)) - a.row(r) * dot;
          }
          ds *= scale;
          dq.block(b * lp, h * dh, lp, dh).noalias() = ds * kh;
          dk.block(b * lp, h * dh, lp, dh).noalias() = ds.transpose() * qh;
        }
      lg.wq.noalias() += lc.x_in.transpose() * dq;
      lg.bq.row(0) += dq.colwise().sum();
      lg.wk.noalias() += lc.x_in.transpose() * dk;
      lg.bk.row(0) += dk.colwise().sum();
      lg.wv.noalias() += lc.x_in.transpose() * dv;
      lg.bv.row(0) += dv.colwise().sum();
      d_x_in.noalias() += dq * lp_par.wq.transpose();
      d_x_in.noalias() += dk * lp_par.wk.transpose();
      d_x_in.noalias() += dv * lp_par.wv.transpose();
      dx = std::move(d_x_in);
    }

    // Positional encoding is additive, so dx passes straight to the pool.
    Mat<S> d_conv_act = Mat<S>::Zero(b_sz * len, f);
    for (int b = 0; b < b_sz; ++b)
      for (int j = 0; j < lp; ++j)
        for (int ch = 0; ch < f; ++ch)
          d_conv_act(b * len + j * pw + c.pool_arg(b * lp + j, ch), ch) += dx(b * lp + j, ch);
    Mat<S> d_conv_pre =
        d_conv_act.cwiseProduct((c.conv_pre.array() > S(0)).template cast<S>().matrix());
    grads.conv_w.noalias() = c.x_cols.transpose() * d_conv_pre;
    grads.conv_b.row(0) = d_conv_pre.colwise().sum();
    Mat<S> d_x_cols = d_conv_pre * params_.conv_w.transpose();

    Mat<S> d_x_embed = Mat<S>::Zero(b_sz * len, de);
    const int w = cfg_.conv_width, left = (w - 1) / 2;
    for (int b = 0; b < b_sz; ++b)
      for (int l = 0; l < len; ++l)
        for (int tap = 0; tap < w; ++tap) {
          const int src = l + tap - left;
          if (src < 0 || src >= len) continue;
          d_x_embed.row(b * len + src) += d_x_cols.block(b * len + l, tap * de, 1, de);
        }
    for (int b = 0; b < b_sz; ++b)
      for (int t = 0; t < len; ++t)
        grads.embedding.row(c.batch(b, t)) += d_x_embed.row(b * len + t);
  }

  Mat<S> logits(const Eigen::MatrixXi& batch) const {
    Cache<S> c;
    forward(batch, false, nullptr, c);
    return std::move(c.logits);
  }

 private:
  void build_positional_encoding() {
    const int lp = cfg_.pooled_len(), dm = cfg_.model_dim;
    pe_.resize(lp, dm);
    for (int pos = 0; pos < lp; ++pos)
      for (int i = 0; i < dm; ++i) {
        const double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / dm);
        pe_(pos, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
  }

  NetConfig cfg_;
  NetParams<S> params_;
  Mat<S> pe_;
};

// Standard Adam, one moment pair per tensor, bias-corrected.
template <class S>
class Adam {
 public:
  Adam(const NetConfig& cfg, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.allocate(cfg);
    v_.allocate(cfg);
  }

  void step(NetParams<S>& params, NetParams<S>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    const S alpha = static_cast<S>(lr_ * std::sqrt(bc2) / bc1);
    const S b1 = static_cast<S>(b1_), b2 = static_cast<S>(b2_), eps = static_cast<S>(eps_);

    std::vector<Mat<S>*> ps, gs, ms, vs;
    params.visit([&](const std::string&, Mat<S>& m) { ps.push_back(&m); });
    grads.visit([&](const std::string&, Mat<S>& m) { gs.push_back(&m); });
    m_.visit([&](const std::string&, Mat<S>& m) { ms.push_back(&m); });
    v_.visit([&](const std::string&, Mat<S>& m) { vs.push_back(&m); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Mat<S>& g = *gs[i];
      Mat<S>& m = *ms[i];
      Mat<S>& v = *vs[i];
      m = b1 * m + (S(1) - b1) * g;
      v = (b2 * v.array() + (S(1) - b2) * g.array().square()).matrix();
      ps[i]->array() -= alpha * m.array() / (v.array().sqrt() + eps);
    }
  }

 private:
  NetParams<S> m_, v_;
  long t_ = 0;
  double lr_, b1_, b2_, eps_;
};

}  // namespace ideolens::net
