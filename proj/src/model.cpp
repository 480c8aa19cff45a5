#include "cloze/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cloze/rng.hpp"

namespace cloze {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw ValidationError("invalid model config: " + what);
  };
  if (vocab_size <= special::kCount) fail("vocab_size must exceed the 5 special tokens");
  if (d_model < 1) fail("d_model must be >= 1");
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (n_heads < 1) fail("n_heads must be >= 1");
  if (d_ff < 1) fail("d_ff must be >= 1");
  if (n_segments < 1) fail("n_segments must be >= 1");
  if (max_len < 8) fail("max_len must be >= 8");
  if (d_model % n_heads != 0) {
    fail("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
         std::to_string(n_heads) + ")");
  }
}

ParameterLayout::ParameterLayout(const ModelConfig& c) {
  auto slot = [this](int rows, int cols) {
    TensorSlot s{total, rows, cols};
    total += s.size();
    return s;
  };
  const int d = c.d_model;
  token_embedding = slot(c.vocab_size, d);
  position_embedding = slot(c.max_len, d);
  segment_embedding = slot(c.n_segments, d);
  emb_ln_gain = slot(1, d);
  emb_ln_shift = slot(1, d);
  layers.resize(static_cast<std::size_t>(c.n_layers));
  for (auto& l : layers) {
    l.wq = slot(d, d);
    l.bq = slot(1, d);
    l.wk = slot(d, d);
    l.bk = slot(1, d);
    l.wv = slot(d, d);
    l.bv = slot(1, d);
    l.wo = slot(d, d);
    l.bo = slot(1, d);
    l.ln1_gain = slot(1, d);
    l.ln1_shift = slot(1, d);
    l.w_ff1 = slot(d, c.d_ff);
    l.b_ff1 = slot(1, c.d_ff);
    l.w_ff2 = slot(c.d_ff, d);
    l.b_ff2 = slot(1, d);
    l.ln2_gain = slot(1, d);
    l.ln2_shift = slot(1, d);
  }
  mlm_dense_w = slot(d, d);
  mlm_dense_b = slot(1, d);
  mlm_ln_gain = slot(1, d);
  mlm_ln_shift = slot(1, d);
  mlm_out_bias = slot(1, c.vocab_size);
  mcq_w = slot(1, d);
  mcq_b = slot(1, 1);
}

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kEmbeddingStd = 0.02;

using ConstView = Eigen::Map<const RowMatrix>;
using View = Eigen::Map<RowMatrix>;

View grad_view(std::span<double> grad, const TensorSlot& s) {
  return View(grad.data() + s.offset, s.rows, s.cols);
}

// tanh approximation of GELU; smooth everywhere, which keeps central
// differences well-behaved.
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

RowMatrix gelu(const RowMatrix& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
}

RowMatrix gelu_grad(const RowMatrix& x) {
  return x.unaryExpr([](double v) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    return 0.5 * (1.0 + t) +
           0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
  });
}

struct LayerNormCache {
  RowMatrix xhat;
  Eigen::VectorXd rstd;
};

RowMatrix layer_norm(const RowMatrix& x, const ConstView& gain, const ConstView& shift,
                     LayerNormCache* cache) {
  const auto n = x.cols();
  Eigen::VectorXd mean = x.rowwise().mean();
  RowMatrix centered = x.colwise() - mean;
  Eigen::VectorXd var = centered.rowwise().squaredNorm() / static_cast<double>(n);
  Eigen::VectorXd rstd = (var.array() + kLayerNormEps).rsqrt();
  RowMatrix xhat = centered.array().colwise() * rstd.array();
  RowMatrix y = xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += shift.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

RowMatrix layer_norm_backward(const RowMatrix& dy, const ConstView& gain,
                              const LayerNormCache& cache, View dgain, View dshift) {
  const double n = static_cast<double>(dy.cols());
  dgain.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  dshift.row(0) += dy.colwise().sum();
  RowMatrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Eigen::VectorXd mean_dxhat = dxhat.rowwise().sum() / n;
  Eigen::VectorXd mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).rowwise().sum() / n;
  RowMatrix dx = dxhat;
  dx.colwise() -= mean_dxhat;
  dx -= (cache.xhat.array().colwise() * mean_dxhat_xhat.array()).matrix();
  return dx.array().colwise() * cache.rstd.array();
}

void softmax_rows(RowMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

RowMatrix affine(const RowMatrix& x, const ConstView& w, const ConstView& b) {
  RowMatrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw ValidationError("checkpoint is truncated");
  T value;
  std::memcpy(&value, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return value;
}

constexpr std::string_view kMagic = "CLZTLM01";
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

struct TinyLm::Cache {
  struct Layer {
    RowMatrix x_in, q, k, v, ctx;
    std::vector<RowMatrix> probs;
    LayerNormCache ln1, ln2;
    RowMatrix h1, ff_pre, ff_act;
  };
  LayerNormCache emb_ln;
  std::vector<Layer> layers;
};

TinyLm TinyLm::init(const ModelConfig& config) {
  config.validate();
  TinyLm m;
  m.config_ = config;
  m.layout_ = ParameterLayout(config);
  m.params_.assign(m.layout_.total, 0.0);

  Rng rng(config.seed);
  auto normal = [&](const TensorSlot& s, double stddev) {
    auto t = m.tensor(s);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = stddev * rng.normal();
    }
  };
  auto dense = [&](const TensorSlot& s) { normal(s, 1.0 / std::sqrt(s.rows)); };
  auto ones = [&](const TensorSlot& s) { m.tensor(s).setOnes(); };

  const auto& L = m.layout_;
  normal(L.token_embedding, kEmbeddingStd);
  normal(L.position_embedding, kEmbeddingStd);
  normal(L.segment_embedding, kEmbeddingStd);
  ones(L.emb_ln_gain);
  for (const auto& l : L.layers) {
    dense(l.wq);
    dense(l.wk);
    dense(l.wv);
    dense(l.wo);
    ones(l.ln1_gain);
    dense(l.w_ff1);
    dense(l.w_ff2);
    ones(l.ln2_gain);
  }
  dense(L.mlm_dense_w);
  ones(L.mlm_ln_gain);
  normal(L.mcq_w, 1.0 / std::sqrt(config.d_model));
  return m;
}

Eigen::Map<const RowMatrix> TinyLm::tensor(const TensorSlot& s) const {
  return {params_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<RowMatrix> TinyLm::tensor(const TensorSlot& s) {
  return {params_.data() + s.offset, s.rows, s.cols};
}

void TinyLm::check_encoding(const SequenceEncoding& enc) const {
  const int len = enc.length();
  if (len < 1) throw ValidationError("empty encoding");
  if (len > config_.max_len) {
    throw ValidationError("encoding length " + std::to_string(len) +
                          " exceeds model max_len " + std::to_string(config_.max_len));
  }
  if (enc.segment_ids.size() != enc.token_ids.size()) {
    throw ValidationError("segment ids do not match token ids in length");
  }
  for (int i = 0; i < len; ++i) {
    const auto id = enc.token_ids[static_cast<std::size_t>(i)];
    const auto seg = enc.segment_ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= config_.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) + " outside model vocabulary");
    }
    if (seg < 0 || seg >= config_.n_segments) {
      throw ValidationError("segment id " + std::to_string(seg) + " out of range");
    }
  }
}

RowMatrix TinyLm::encode(const SequenceEncoding& enc, Cache* cache) const {
  check_encoding(enc);
  const int len = enc.length();
  const int d = config_.d_model;
  const int heads = config_.n_heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const auto tok = tensor(layout_.token_embedding);
  const auto pos = tensor(layout_.position_embedding);
  const auto seg = tensor(layout_.segment_embedding);
  RowMatrix x(len, d);
  for (int i = 0; i < len; ++i) {
    x.row(i) = tok.row(enc.token_ids[static_cast<std::size_t>(i)]) + pos.row(i) +
               seg.row(enc.segment_ids[static_cast<std::size_t>(i)]);
  }
  x = layer_norm(x, tensor(layout_.emb_ln_gain), tensor(layout_.emb_ln_shift),
                 cache ? &cache->emb_ln : nullptr);
  if (cache) cache->layers.resize(layout_.layers.size());

  for (std::size_t li = 0; li < layout_.layers.size(); ++li) {
    const auto& l = layout_.layers[li];
    RowMatrix q = affine(x, tensor(l.wq), tensor(l.bq));
    RowMatrix k = affine(x, tensor(l.wk), tensor(l.bk));
    RowMatrix v = affine(x, tensor(l.wv), tensor(l.bv));
    RowMatrix ctx(len, d);
    std::vector<RowMatrix> probs(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      RowMatrix p = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(p);
      ctx.middleCols(h * dh, dh) = p * v.middleCols(h * dh, dh);
      probs[static_cast<std::size_t>(h)] = std::move(p);
    }
    RowMatrix s1 = x + affine(ctx, tensor(l.wo), tensor(l.bo));
    Cache::Layer* lc = cache ? &cache->layers[li] : nullptr;
    RowMatrix h1 = layer_norm(s1, tensor(l.ln1_gain), tensor(l.ln1_shift),
                              lc ? &lc->ln1 : nullptr);
    RowMatrix ff_pre = affine(h1, tensor(l.w_ff1), tensor(l.b_ff1));
    RowMatrix ff_act = gelu(ff_pre);
    RowMatrix s2 = h1 + affine(ff_act, tensor(l.w_ff2), tensor(l.b_ff2));
    RowMatrix out = layer_norm(s2, tensor(l.ln2_gain), tensor(l.ln2_shift),
                               lc ? &lc->ln2 : nullptr);
    if (lc) {
      lc->x_in = std::move(x);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->ctx = std::move(ctx);
      lc->probs = std::move(probs);
      lc->h1 = std::move(h1);
      lc->ff_pre = std::move(ff_pre);
      lc->ff_act = std::move(ff_act);
    }
    x = std::move(out);
  }
  return x;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Eigen::VectorXd TinyLm::forward_mlm(const SequenceEncoding& enc) const {
  if (!enc.mask_position) throw ValidationError("forward_mlm needs a mask position");
  const RowMatrix hidden = encode(enc, nullptr);
  const RowMatrix hm = hidden.row(*enc.mask_position);
  const RowMatrix t = affine(hm, tensor(layout_.mlm_dense_w), tensor(layout_.mlm_dense_b));
  const RowMatrix u = layer_norm(gelu(t), tensor(layout_.mlm_ln_gain),
                                 tensor(layout_.mlm_ln_shift), nullptr);
  return tensor(layout_.token_embedding) * u.transpose() +
         tensor(layout_.mlm_out_bias).transpose();
}

double TinyLm::forward_mcq(const SequenceEncoding& enc) const {
  for (auto id : enc.token_ids) {
    if (id == special::kMask) throw ValidationError("forward_mcq got an encoding with [MASK]");
  }
  const RowMatrix hidden = encode(enc, nullptr);
  return hidden.row(0).dot(tensor(layout_.mcq_w).row(0)) + tensor(layout_.mcq_b)(0, 0);
}

double TinyLm::mlm_loss(const SequenceEncoding& enc, TokenId target) const {
  if (target < 0 || target >= config_.vocab_size) {
    throw ValidationError("target id " + std::to_string(target) + " outside vocabulary");
  }
  const Eigen::VectorXd logits = forward_mlm(enc);
  const double top = logits.maxCoeff();
  return top + std::log((logits.array() - top).exp().sum()) - logits(target);
}

double TinyLm::mlm_loss_and_gradient(const SequenceEncoding& enc, TokenId target,
                                     std::span<double> grad) const {
  if (!enc.mask_position) throw ValidationError("training encoding needs a mask position");
  if (target < 0 || target >= config_.vocab_size) {
    throw ValidationError("target id " + std::to_string(target) + " outside vocabulary");
  }
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");

  const auto& L = layout_;
  const int len = enc.length();
  const int d = config_.d_model;
  const int heads = config_.n_heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int m = *enc.mask_position;

  Cache cache;
  const RowMatrix hidden = encode(enc, &cache);
  const RowMatrix hm = hidden.row(m);
  const RowMatrix t = affine(hm, tensor(L.mlm_dense_w), tensor(L.mlm_dense_b));
  LayerNormCache head_ln;
  const RowMatrix u = layer_norm(gelu(t), tensor(L.mlm_ln_gain), tensor(L.mlm_ln_shift), &head_ln);
  const auto emb = tensor(L.token_embedding);
  const Eigen::VectorXd logits = emb * u.transpose() + tensor(L.mlm_out_bias).transpose();

  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  const double loss = lse - logits(target);

  // Head.
  Eigen::VectorXd dlogits = (logits.array() - lse).exp();
  dlogits(target) -= 1.0;
  grad_view(grad, L.mlm_out_bias).row(0) += dlogits.transpose();
  grad_view(grad, L.token_embedding) += dlogits * u;
  const RowMatrix du = dlogits.transpose() * emb;
  const RowMatrix dg = layer_norm_backward(du, tensor(L.mlm_ln_gain), head_ln,
                                           grad_view(grad, L.mlm_ln_gain),
                                           grad_view(grad, L.mlm_ln_shift));
  const RowMatrix dt = dg.cwiseProduct(gelu_grad(t));
  grad_view(grad, L.mlm_dense_w) += hm.transpose() * dt;
  grad_view(grad, L.mlm_dense_b) += dt;

  RowMatrix dx = RowMatrix::Zero(len, d);
  dx.row(m) = dt * tensor(L.mlm_dense_w).transpose();

  // Encoder layers, last to first.
  for (std::size_t li = L.layers.size(); li-- > 0;) {
    const auto& l = L.layers[li];
    const auto& c = cache.layers[li];

    const RowMatrix ds2 = layer_norm_backward(dx, tensor(l.ln2_gain), c.ln2,
                                              grad_view(grad, l.ln2_gain),
                                              grad_view(grad, l.ln2_shift));
    grad_view(grad, l.w_ff2) += c.ff_act.transpose() * ds2;
    grad_view(grad, l.b_ff2) += ds2.colwise().sum();
    const RowMatrix dpre =
        (ds2 * tensor(l.w_ff2).transpose()).cwiseProduct(gelu_grad(c.ff_pre));
    grad_view(grad, l.w_ff1) += c.h1.transpose() * dpre;
    grad_view(grad, l.b_ff1) += dpre.colwise().sum();
    const RowMatrix dh1 = ds2 + dpre * tensor(l.w_ff1).transpose();

    const RowMatrix ds1 = layer_norm_backward(dh1, tensor(l.ln1_gain), c.ln1,
                                              grad_view(grad, l.ln1_gain),
                                              grad_view(grad, l.ln1_shift));
    grad_view(grad, l.wo) += c.ctx.transpose() * ds1;
    grad_view(grad, l.bo) += ds1.colwise().sum();
    const RowMatrix dctx = ds1 * tensor(l.wo).transpose();

    RowMatrix dq(len, d), dk(len, d), dv(len, d);
    for (int h = 0; h < heads; ++h) {
      const RowMatrix& p = c.probs[static_cast<std::size_t>(h)];
      const RowMatrix dctx_h = dctx.middleCols(h * dh, dh);
      const RowMatrix dp = dctx_h * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * dctx_h;
      const Eigen::VectorXd row_dot = dp.cwiseProduct(p).rowwise().sum();
      const RowMatrix ds = p.cwiseProduct(dp.colwise() - row_dot) * scale;
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    grad_view(grad, l.wq) += c.x_in.transpose() * dq;
    grad_view(grad, l.bq) += dq.colwise().sum();
    grad_view(grad, l.wk) += c.x_in.transpose() * dk;
    grad_view(grad, l.bk) += dk.colwise().sum();
    grad_view(grad, l.wv) += c.x_in.transpose() * dv;
    grad_view(grad, l.bv) += dv.colwise().sum();
    dx = ds1 + dq * tensor(l.wq).transpose() + dk * tensor(l.wk).transpose() +
         dv * tensor(l.wv).transpose();
  }

  // Embeddings.
  const RowMatrix de = layer_norm_backward(dx, tensor(L.emb_ln_gain), cache.emb_ln,
                                           grad_view(grad, L.emb_ln_gain),
                                           grad_view(grad, L.emb_ln_shift));
  auto g_tok = grad_view(grad, L.token_embedding);
  auto g_pos = grad_view(grad, L.position_embedding);
  auto g_seg = grad_view(grad, L.segment_embedding);
  for (int i = 0; i < len; ++i) {
    g_tok.row(enc.token_ids[static_cast<std::size_t>(i)]) += de.row(i);
    g_pos.row(i) += de.row(i);
    g_seg.row(enc.segment_ids[static_cast<std::size_t>(i)]) += de.row(i);
  }
  return loss;
}

std::string TinyLm::serialize() const {
  std::string out;
  out.reserve(64 + params_.size() * sizeof(double));
  out.append(kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  for (int v : {config_.vocab_size, config_.d_model, config_.n_layers, config_.n_heads,
                config_.d_ff, config_.max_len, config_.n_segments}) {
    put<std::int32_t>(out, v);
  }
  put<std::uint64_t>(out, config_.seed);
  put<std::uint64_t>(out, params_.size());
  out.append(reinterpret_cast<const char*>(params_.data()), params_.size() * sizeof(double));
  return out;
}

TinyLm TinyLm::deserialize(std::string_view in) {
  if (in.substr(0, kMagic.size()) != kMagic) {
    throw ValidationError("not a model checkpoint (bad magic)");
  }
  in.remove_prefix(kMagic.size());
  const auto version = take<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.vocab_size = take<std::int32_t>(in);
  c.d_model = take<std::int32_t>(in);
  c.n_layers = take<std::int32_t>(in);
  c.n_heads = take<std::int32_t>(in);
  c.d_ff = take<std::int32_t>(in);
  c.max_len = take<std::int32_t>(in);
  c.n_segments = take<std::int32_t>(in);
  c.seed = take<std::uint64_t>(in);
  c.validate();
  const auto count = take<std::uint64_t>(in);

  TinyLm m;
  m.config_ = c;
  m.layout_ = ParameterLayout(c);
  if (count != m.layout_.total || in.size() != count * sizeof(double)) {
    throw ValidationError("checkpoint parameter count does not match its config");
  }
  m.params_.resize(count);
  std::memcpy(m.params_.data(), in.data(), in.size());
  return m;
}

void TinyLm::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TinyLm TinyLm::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace cloze
