#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "vlab/adam.hpp"
#include "vlab/binary_io.hpp"
#include "vlab/error.hpp"
#include "vlab/rng.hpp"

namespace vlab {

struct LmConfig {
  std::size_t vocab_size = 2048;
  std::size_t context_len = 32;
  std::size_t d_model = 64;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

/// Negative offset from the final layer: -1 is the last block's output.
struct LayerSelector {
  int index = -1;

  /// Index into the hidden-state list returned by forward (0 = input embeddings).
  std::size_t resolve(std::size_t n_layers) const;
};

/// Word-level tokens: whitespace separates words and each of . , ; : ! ? " ( )
/// is a token of its own. Apostrophes and hyphens stay inside words.
std::vector<std::string> split_words(const std::string& text);

class Vocabulary {
 public:
  static constexpr int kUnk = 0;

  Vocabulary() : tokens_{"<unk>"} { index_.emplace(tokens_[0], 0); }
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Most frequent words first (ties alphabetical), truncated to max_size entries including <unk>.
  static Vocabulary build(const std::vector<std::string>& corpus, std::size_t max_size);

  int id(const std::string& word) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Offsets of every parameter tensor inside the flat parameter vector. The
/// order here is also the checkpoint order:
///   token embedding [V x d], position embedding [C x d], then per layer
///   ln1 gain [d], ln1 bias [d], qkv weight [d x 3d], qkv bias [3d],
///   attention output weight [d x d], its bias [d], ln2 gain [d], ln2 bias [d],
///   fc weight [d x 4d], fc bias [4d], projection weight [4d x d], its bias [d];
///   then final ln gain [d], final ln bias [d], unembedding [d x V], output bias [V].
/// Matrices are row-major with the input dimension as rows.
struct ParamLayout {
  struct Block {
    Eigen::Index ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };
  Eigen::Index tok_emb = 0, pos_emb = 0, lnf_g = 0, lnf_b = 0, w_out = 0, b_out = 0, total = 0;
  std::vector<Block> blocks;

  explicit ParamLayout(const LmConfig& c);
};

template <typename Scalar>
class Transformer {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  struct Output {
    std::vector<Mat> hidden;  // n_layers + 1 entries of [T x d]
    Mat probs;                // [T x V] next-token distribution per position
  };

  /// Parameters are drawn from config.seed; config.vocab_size is set to vocab.size().
  Transformer(LmConfig config, Vocabulary vocab);
  Transformer(LmConfig config, Vocabulary vocab, Vec params);

  const LmConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ParamLayout& layout() const { return layout_; }
  const Vec& params() const { return params_; }
  Vec& params() { return params_; }

  std::vector<int> tokenize(const std::string& text) const;
  Output forward(std::span<const int> tokens) const;

  /// Sum of next-token negative log-likelihoods over the sequence; when grad is
  /// non-null the gradient of that sum is accumulated into it.
  Scalar loss_and_grad(std::span<const int> tokens, Vec* grad) const;

 private:
  struct LayerCache {
    Mat x_in, xhat1, h1, qkv, o, x_mid, xhat2, h2, u, g;
    Vec rstd1, rstd2;
    std::vector<Mat> att;
  };
  struct Cache {
    std::vector<LayerCache> layers;
    Mat x_final, xhat_f, h_f, logits;
    Vec rstd_f;
  };

  Output run(std::span<const int> tokens, Cache* cache) const;

  auto vec(Eigen::Index off, Eigen::Index n) const { return Eigen::Map<const RowVec>(params_.data() + off, n); }
  auto mat(Eigen::Index off, Eigen::Index r, Eigen::Index c) const {
    return Eigen::Map<const Mat>(params_.data() + off, r, c);
  }

  LmConfig config_;
  Vocabulary vocab_;
  ParamLayout layout_;
  Vec params_;
};

struct LmTrainOptions {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double step_size = 1e-3;
};

struct LmTrainReport {
  double initial_loss = 0.0;  // mean per-token cross-entropy over the corpus before training
  double final_loss = 0.0;
  std::vector<double> step_losses;
};

template <typename Scalar>
Transformer<Scalar> train_lm(const std::vector<std::string>& corpus, LmConfig config, const LmTrainOptions& opts,
                             LmTrainReport* report = nullptr);

template <typename Scalar>
double corpus_loss(const Transformer<Scalar>& model, const std::vector<std::string>& corpus);

/// Hidden state at the selected layer for the token right before the final ".".
/// Inputs longer than the context keep their last context_len tokens.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> extract_embedding(const Transformer<Scalar>& model, const std::string& text,
                                                           LayerSelector layer);

/// Same convention, several layers from one forward pass.
template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> extract_embeddings(const Transformer<Scalar>& model,
                                                                         const std::string& text,
                                                                         const std::vector<LayerSelector>& layers);

template <typename Scalar>
void save_checkpoint(const Transformer<Scalar>& model, const std::filesystem::path& path);

template <typename Scalar>
Transformer<Scalar> load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

namespace detail {

constexpr double kLnEps = 1e-5;

template <typename Mat, typename Vec, typename RowMap>
void layernorm(const Mat& x, const RowMap& gain, const RowMap& bias, Mat& xhat, Vec& rstd, Mat& y) {
  using Scalar = typename Mat::Scalar;
  const Eigen::Index n = x.cols();
  xhat.resize(x.rows(), n);
  rstd.resize(x.rows());
  y.resize(x.rows(), n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mu = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mu).square().mean();
    rstd(i) = Scalar(1) / std::sqrt(var + Scalar(kLnEps));
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
    y.row(i) = xhat.row(i).cwiseProduct(gain) + bias;
  }
}

template <typename Mat, typename Vec, typename RowMap, typename GradMap>
Mat layernorm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd, const RowMap& gain, GradMap dgain,
                       GradMap dbias) {
  using Scalar = typename Mat::Scalar;
  dgain += dy.cwiseProduct(xhat).colwise().sum();
  dbias += dy.colwise().sum();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const auto dxhat = dy.row(i).cwiseProduct(gain);
    const Scalar m1 = dxhat.mean();
    const Scalar m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = rstd(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar u) {
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  return Scalar(0.5) * u * (Scalar(1) + std::tanh(c * (u + Scalar(0.044715) * u * u * u)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar u) {
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  const Scalar t = std::tanh(c * (u + Scalar(0.044715) * u * u * u));
  return Scalar(0.5) * (Scalar(1) + t) +
         Scalar(0.5) * u * (Scalar(1) - t * t) * c * (Scalar(1) + Scalar(3 * 0.044715) * u * u);
}

}  // namespace detail

template <typename Scalar>
Transformer<Scalar>::Transformer(LmConfig config, Vocabulary vocab)
    : config_([&] {
        config.vocab_size = vocab.size();
        config.validate();
        return config;
      }()),
      vocab_(std::move(vocab)),
      layout_(config_),
      params_(Vec::Zero(layout_.total)) {
  Rng rng = Rng(config_.seed).split("init");
  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const Scalar proj_std = Scalar(0.02 / std::sqrt(2.0 * static_cast<double>(config_.n_layers)));
  auto normal = [&](Eigen::Index off, Eigen::Index n, Scalar std) {
    for (Eigen::Index i = 0; i < n; ++i) params_(off + i) = std * static_cast<Scalar>(rng.normal());
  };
  auto ones = [&](Eigen::Index off) { params_.segment(off, d).setOnes(); };
  const auto V = static_cast<Eigen::Index>(config_.vocab_size);
  const auto C = static_cast<Eigen::Index>(config_.context_len);
  normal(layout_.tok_emb, V * d, Scalar(0.02));
  normal(layout_.pos_emb, C * d, Scalar(0.02));
  for (const auto& b : layout_.blocks) {
    ones(b.ln1_g);
    ones(b.ln2_g);
    normal(b.w_qkv, d * 3 * d, Scalar(0.02));
    normal(b.w_o, d * d, proj_std);
    normal(b.w_fc, d * 4 * d, Scalar(0.02));
    normal(b.w_proj, 4 * d * d, proj_std);
  }
  ones(layout_.lnf_g);
  normal(layout_.w_out, d * V, Scalar(0.02));
}

template <typename Scalar>
Transformer<Scalar>::Transformer(LmConfig config, Vocabulary vocab, Vec params)
    : config_([&] {
        config.vocab_size = vocab.size();
        config.validate();
        return config;
      }()),
      vocab_(std::move(vocab)),
      layout_(config_),
      params_(std::move(params)) {
  require(params_.size() == layout_.total, ErrorKind::SizeMismatch,
          "parameter count " + std::to_string(params_.size()) + " does not match config (" +
              std::to_string(layout_.total) + ")");
}

template <typename Scalar>
std::vector<int> Transformer<Scalar>::tokenize(const std::string& text) const {
  const auto words = split_words(text);
  require(!words.empty(), ErrorKind::Argument, "cannot tokenize empty text");
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab_.id(w));
  return ids;
}

template <typename Scalar>
typename Transformer<Scalar>::Output Transformer<Scalar>::run(std::span<const int> tokens, Cache* cache) const {
  const auto T = static_cast<Eigen::Index>(tokens.size());
  require(T >= 1, ErrorKind::Argument, "forward needs at least one token");
  require(tokens.size() <= config_.context_len, ErrorKind::Length,
          "sequence of " + std::to_string(tokens.size()) + " tokens exceeds context length " +
              std::to_string(config_.context_len));
  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const auto V = static_cast<Eigen::Index>(config_.vocab_size);
  const auto H = static_cast<Eigen::Index>(config_.n_heads);
  const Eigen::Index dh = d / H;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  const auto tok_emb = mat(layout_.tok_emb, V, d);
  const auto pos_emb = mat(layout_.pos_emb, static_cast<Eigen::Index>(config_.context_len), d);

  Output out;
  Mat x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const int id = tokens[static_cast<std::size_t>(t)];
    require(id >= 0 && id < V, ErrorKind::Argument, "token id out of range: " + std::to_string(id));
    x.row(t) = tok_emb.row(id) + pos_emb.row(t);
  }
  out.hidden.push_back(x);
  if (cache) cache->layers.resize(layout_.blocks.size());

  for (std::size_t l = 0; l < layout_.blocks.size(); ++l) {
    const auto& b = layout_.blocks[l];
    Mat xhat1, h1, xhat2, h2;
    Vec rstd1, rstd2;
    detail::layernorm(x, vec(b.ln1_g, d), vec(b.ln1_b, d), xhat1, rstd1, h1);
    Mat qkv = h1 * mat(b.w_qkv, d, 3 * d);
    qkv.rowwise() += vec(b.b_qkv, 3 * d);

    Mat o(T, d);
    std::vector<Mat> att(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
      const auto Q = qkv.middleCols(h * dh, dh);
      const auto K = qkv.middleCols(d + h * dh, dh);
      const auto Vh = qkv.middleCols(2 * d + h * dh, dh);
      Mat S = (Q * K.transpose()) * scale;
      Mat& A = att[static_cast<std::size_t>(h)];
      A = Mat::Zero(T, T);
      // Causal softmax: row i only ever touches columns 0..i.
      for (Eigen::Index i = 0; i < T; ++i) {
        const auto row = S.row(i).head(i + 1);
        const Scalar m = row.maxCoeff();
        auto e = (row.array() - m).exp();
        A.row(i).head(i + 1) = e / e.sum();
      }
      o.middleCols(h * dh, dh) = A * Vh;
    }
    Mat x_mid = x + o * mat(b.w_o, d, d);
    x_mid.rowwise() += vec(b.b_o, d);

    detail::layernorm(x_mid, vec(b.ln2_g, d), vec(b.ln2_b, d), xhat2, rstd2, h2);
    Mat u = h2 * mat(b.w_fc, d, 4 * d);
    u.rowwise() += vec(b.b_fc, 4 * d);
    Mat g = u.unaryExpr([](Scalar v) { return detail::gelu(v); });
    Mat x_out = x_mid + g * mat(b.w_proj, 4 * d, d);
    x_out.rowwise() += vec(b.b_proj, d);

    if (cache) {
      auto& lc = cache->layers[l];
      lc.x_in = std::move(x);
      lc.xhat1 = std::move(xhat1);
      lc.rstd1 = std::move(rstd1);
      lc.h1 = std::move(h1);
      lc.qkv = std::move(qkv);
      lc.att = std::move(att);
      lc.o = std::move(o);
      lc.x_mid = std::move(x_mid);
      lc.xhat2 = std::move(xhat2);
      lc.rstd2 = std::move(rstd2);
      lc.h2 = std::move(h2);
      lc.u = std::move(u);
      lc.g = std::move(g);
    }
    x = std::move(x_out);
    out.hidden.push_back(x);
  }

  Mat xhat_f, h_f;
  Vec rstd_f;
  detail::layernorm(x, vec(layout_.lnf_g, d), vec(layout_.lnf_b, d), xhat_f, rstd_f, h_f);
  Mat logits = h_f * mat(layout_.w_out, d, V);
  logits.rowwise() += vec(layout_.b_out, V);
  out.probs.resize(T, V);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Scalar m = logits.row(t).maxCoeff();
    auto e = (logits.row(t).array() - m).exp();
    out.probs.row(t) = e / e.sum();
  }
  if (cache) {
    cache->x_final = x;
    cache->xhat_f = std::move(xhat_f);
    cache->rstd_f = std::move(rstd_f);
    cache->h_f = std::move(h_f);
    cache->logits = std::move(logits);
  }
  return out;
}

template <typename Scalar>
typename Transformer<Scalar>::Output Transformer<Scalar>::forward(std::span<const int> tokens) const {
  return run(tokens, nullptr);
}

template <typename Scalar>
Scalar Transformer<Scalar>::loss_and_grad(std::span<const int> tokens, Vec* grad) const {
  Cache cache;
  const Output out = run(tokens, grad ? &cache : nullptr);
  const auto T = static_cast<Eigen::Index>(tokens.size());

  Scalar loss = 0;
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const Scalar p = out.probs(t, tokens[static_cast<std::size_t>(t + 1)]);
    loss -= std::log(std::max(p, std::numeric_limits<Scalar>::min()));
  }
  if (!grad) return loss;

  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const auto V = static_cast<Eigen::Index>(config_.vocab_size);
  const auto H = static_cast<Eigen::Index>(config_.n_heads);
  const Eigen::Index dh = d / H;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  Vec& G = *grad;
  auto gvec = [&](Eigen::Index off, Eigen::Index n) { return Eigen::Map<RowVec>(G.data() + off, n); };
  auto gmat = [&](Eigen::Index off, Eigen::Index r, Eigen::Index c) {
    return Eigen::Map<Mat>(G.data() + off, r, c);
  };

  Mat dlogits = out.probs;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t + 1 < T) dlogits(t, tokens[static_cast<std::size_t>(t + 1)]) -= Scalar(1);
    else dlogits.row(t).setZero();
  }
  gmat(layout_.w_out, d, V).noalias() += cache.h_f.transpose() * dlogits;
  gvec(layout_.b_out, V) += dlogits.colwise().sum();
  Mat dh_f = dlogits * mat(layout_.w_out, d, V).transpose();
  Mat dx = detail::layernorm_backward(dh_f, cache.xhat_f, cache.rstd_f, vec(layout_.lnf_g, d),
                                      gvec(layout_.lnf_g, d), gvec(layout_.lnf_b, d));

  for (std::size_t li = layout_.blocks.size(); li-- > 0;) {
    const auto& b = layout_.blocks[li];
    const auto& lc = cache.layers[li];

    // x_out = x_mid + gelu(ln2(x_mid) W_fc + b_fc) W_proj + b_proj
    gmat(b.w_proj, 4 * d, d).noalias() += lc.g.transpose() * dx;
    gvec(b.b_proj, d) += dx.colwise().sum();
    Mat du = (dx * mat(b.w_proj, 4 * d, d).transpose()).cwiseProduct(
        lc.u.unaryExpr([](Scalar v) { return detail::gelu_grad(v); }));
    gmat(b.w_fc, d, 4 * d).noalias() += lc.h2.transpose() * du;
    gvec(b.b_fc, 4 * d) += du.colwise().sum();
    Mat dh2 = du * mat(b.w_fc, d, 4 * d).transpose();
    Mat dx_mid = dx + detail::layernorm_backward(dh2, lc.xhat2, lc.rstd2, vec(b.ln2_g, d), gvec(b.ln2_g, d),
                                                 gvec(b.ln2_b, d));

    // x_mid = x_in + attn(ln1(x_in)) W_o + b_o
    gmat(b.w_o, d, d).noalias() += lc.o.transpose() * dx_mid;
    gvec(b.b_o, d) += dx_mid.colwise().sum();
    Mat d_o = dx_mid * mat(b.w_o, d, d).transpose();
    Mat dqkv = Mat::Zero(T, 3 * d);
    for (Eigen::Index h = 0; h < H; ++h) {
      const Mat& A = lc.att[static_cast<std::size_t>(h)];
      const auto Q = lc.qkv.middleCols(h * dh, dh);
      const auto K = lc.qkv.middleCols(d + h * dh, dh);
      const auto Vh = lc.qkv.middleCols(2 * d + h * dh, dh);
      const auto dOh = d_o.middleCols(h * dh, dh);
      Mat dA = dOh * Vh.transpose();
      dqkv.middleCols(2 * d + h * dh, dh) = A.transpose() * dOh;
      Mat dS = Mat::Zero(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        const Scalar dot = A.row(i).head(i + 1).dot(dA.row(i).head(i + 1));
        dS.row(i).head(i + 1) = A.row(i).head(i + 1).cwiseProduct((dA.row(i).head(i + 1).array() - dot).matrix());
      }
      dqkv.middleCols(h * dh, dh) = (dS * K) * scale;
      dqkv.middleCols(d + h * dh, dh) = (dS.transpose() * Q) * scale;
    }
    gmat(b.w_qkv, d, 3 * d).noalias() += lc.h1.transpose() * dqkv;
    gvec(b.b_qkv, 3 * d) += dqkv.colwise().sum();
    Mat dh1 = dqkv * mat(b.w_qkv, d, 3 * d).transpose();
    dx = dx_mid + detail::layernorm_backward(dh1, lc.xhat1, lc.rstd1, vec(b.ln1_g, d), gvec(b.ln1_g, d),
                                             gvec(b.ln1_b, d));
  }

  auto dtok = gmat(layout_.tok_emb, V, d);
  auto dpos = gmat(layout_.pos_emb, static_cast<Eigen::Index>(config_.context_len), d);
  for (Eigen::Index t = 0; t < T; ++t) {
    dtok.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    dpos.row(t) += dx.row(t);
  }
  return loss;
}

template <typename Scalar>
double corpus_loss(const Transformer<Scalar>& model, const std::vector<std::string>& corpus) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& line : corpus) {
    auto ids = model.tokenize(line);
    if (ids.size() > model.config().context_len) ids.resize(model.config().context_len);
    if (ids.size() < 2) continue;
    total += static_cast<double>(model.loss_and_grad(ids, nullptr));
    count += ids.size() - 1;
  }
  require(count > 0, ErrorKind::Argument, "corpus has no sequence of two or more tokens");
  return total / static_cast<double>(count);
}

template <typename Scalar>
Transformer<Scalar> train_lm(const std::vector<std::string>& corpus, LmConfig config, const LmTrainOptions& opts,
                             LmTrainReport* report) {
  require(!corpus.empty(), ErrorKind::Argument, "training corpus is empty");
  require(opts.batch_size >= 1 && opts.step_size > 0.0, ErrorKind::Argument, "invalid LM training options");
  Vocabulary vocab = Vocabulary::build(corpus, config.vocab_size);
  Transformer<Scalar> model(config, std::move(vocab));

  std::vector<std::vector<int>> sequences;
  for (const auto& line : corpus) {
    auto ids = model.tokenize(line);
    if (ids.size() > model.config().context_len) ids.resize(model.config().context_len);
    if (ids.size() >= 2) sequences.push_back(std::move(ids));
  }
  require(!sequences.empty(), ErrorKind::Argument, "corpus has no sequence of two or more tokens");

  if (report) report->initial_loss = corpus_loss(model, corpus);
  Rng rng = Rng(model.config().seed).split("batches");
  Adam<Scalar> adam(model.params().size(), static_cast<Scalar>(opts.step_size));
  using Vec = typename Transformer<Scalar>::Vec;
  Vec grad(model.params().size());
  for (std::size_t step = 0; step < opts.steps; ++step) {
    grad.setZero();
    Scalar loss = 0;
    std::size_t n_targets = 0;
    for (std::size_t k = 0; k < opts.batch_size; ++k) {
      const auto& seq = sequences[rng.below(sequences.size())];
      loss += model.loss_and_grad(seq, &grad);
      n_targets += seq.size() - 1;
    }
    const Scalar inv = Scalar(1) / static_cast<Scalar>(n_targets);
    grad *= inv;
    require(grad.allFinite(), ErrorKind::Numeric, "non-finite LM gradient at step " + std::to_string(step));
    adam.step(model.params(), grad);
    if (report) report->step_losses.push_back(static_cast<double>(loss * inv));
  }
  if (report) report->final_loss = corpus_loss(model, corpus);
  return model;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> extract_embedding(const Transformer<Scalar>& model, const std::string& text,
                                                           LayerSelector layer) {
  return extract_embeddings(model, text, {layer}).front();
}

template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> extract_embeddings(const Transformer<Scalar>& model,
                                                                         const std::string& text,
                                                                         const std::vector<LayerSelector>& layers) {
  std::vector<std::size_t> rows;
  for (const auto& l : layers) rows.push_back(l.resolve(model.config().n_layers));
  require(!text.empty() && text.back() == '.', ErrorKind::Convention,
          "text must end with '.' to use the penultimate-token convention: '" + text + "'");
  auto ids = model.tokenize(text);
  require(ids.size() >= 2, ErrorKind::Argument, "text needs at least two tokens: '" + text + "'");
  const std::size_t C = model.config().context_len;
  if (ids.size() > C) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(C));
  const auto out = model.forward(ids);
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> vecs;
  for (auto r : rows) vecs.push_back(out.hidden[r].row(out.hidden[r].rows() - 2).transpose());
  return vecs;
}

template <typename Scalar>
void save_checkpoint(const Transformer<Scalar>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write("VLAB", 4);
  binary::put<std::uint32_t>(out, 1);
  const auto& c = model.config();
  for (std::size_t v : {c.vocab_size, c.context_len, c.d_model, c.n_layers, c.n_heads})
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  binary::put<std::uint64_t>(out, c.seed);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(model.vocab().size()));
  for (const auto& tok : model.vocab().tokens()) binary::put_string(out, tok);
  binary::put<std::uint64_t>(out, static_cast<std::uint64_t>(model.params().size()));
  for (Eigen::Index i = 0; i < model.params().size(); ++i) binary::put_f32(out, static_cast<float>(model.params()(i)));
  require(static_cast<bool>(out.flush()), ErrorKind::Io, "write failed: " + path.string());
}

template <typename Scalar>
Transformer<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  binary::expect_magic(in, "VLAB", path.string());
  const auto version = binary::get<std::uint32_t>(in, "version");
  require(version == 1, ErrorKind::Version, path.string() + ": unsupported model format version " + std::to_string(version));
  LmConfig c;
  c.vocab_size = binary::get<std::uint32_t>(in, "vocab_size");
  c.context_len = binary::get<std::uint32_t>(in, "context_len");
  c.d_model = binary::get<std::uint32_t>(in, "d_model");
  c.n_layers = binary::get<std::uint32_t>(in, "n_layers");
  c.n_heads = binary::get<std::uint32_t>(in, "n_heads");
  c.seed = binary::get<std::uint64_t>(in, "seed");
  const auto n_tokens = binary::get<std::uint32_t>(in, "vocabulary size");
  require(n_tokens == c.vocab_size, ErrorKind::Malformed, path.string() + ": vocabulary block disagrees with config");
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::uint32_t i = 0; i < n_tokens; ++i) tokens.push_back(binary::get_string(in, "vocabulary"));
  const auto n_params = binary::get<std::uint64_t>(in, "parameter count");
  require(static_cast<Eigen::Index>(n_params) == ParamLayout(c).total, ErrorKind::SizeMismatch,
          path.string() + ": parameter count does not match config");
  typename Transformer<Scalar>::Vec params(static_cast<Eigen::Index>(n_params));
  for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = static_cast<Scalar>(binary::get_f32(in, "parameters"));
  in.peek();
  require(in.eof(), ErrorKind::SizeMismatch, path.string() + ": trailing bytes after parameters");
  return Transformer<Scalar>(c, Vocabulary(std::move(tokens)), std::move(params));
}

}  // namespace vlab
