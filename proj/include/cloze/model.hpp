#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cloze/tokenizer.hpp"

namespace cloze {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int max_len = kDefaultMaxLen;
  int n_segments = 2;
  std::uint64_t seed = 0;

  // Throws ValidationError naming the first violated constraint.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Location of one parameter tensor inside the flat parameter buffer.
// Every tensor is a row-major rows x cols block; vectors have rows == 1.
struct TensorSlot {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct LayerSlots {
  TensorSlot wq, bq, wk, bk, wv, bv, wo, bo;
  TensorSlot ln1_gain, ln1_shift;
  TensorSlot w_ff1, b_ff1, w_ff2, b_ff2;
  TensorSlot ln2_gain, ln2_shift;
};

struct ParameterLayout {
  TensorSlot token_embedding, position_embedding, segment_embedding;
  TensorSlot emb_ln_gain, emb_ln_shift;
  std::vector<LayerSlots> layers;
  // MLM head: dense + GELU + layer norm, then the tied projection.
  TensorSlot mlm_dense_w, mlm_dense_b, mlm_ln_gain, mlm_ln_shift, mlm_out_bias;
  // MCQ head over the [CLS] vector.
  TensorSlot mcq_w, mcq_b;
  std::size_t total = 0;

  explicit ParameterLayout(const ModelConfig& config);
  ParameterLayout() = default;
};

// Small post-layer-norm transformer encoder with learned absolute positions,
// two segments, an MLM head tied to the token embeddings, and a scalar MCQ
// head on [CLS]. All parameters live in one contiguous double buffer so the
// optimizer, the checkpoint and the gradient checker treat them uniformly.
class TinyLm {
 public:
  TinyLm() = default;

  // Scaled-normal weights, zero biases/shifts, unit layer-norm gains.
  static TinyLm init(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  Eigen::Map<const RowMatrix> tensor(const TensorSlot& slot) const;
  Eigen::Map<RowMatrix> tensor(const TensorSlot& slot);

  // Logits over the vocabulary at the [MASK] position.
  Eigen::VectorXd forward_mlm(const SequenceEncoding& encoding) const;

  // Unnormalized option score from the [CLS] vector. Rejects encodings that
  // contain [MASK].
  double forward_mcq(const SequenceEncoding& encoding) const;

  // Cross-entropy of forward_mlm against `target`.
  double mlm_loss(const SequenceEncoding& encoding, TokenId target) const;

  // Same loss; adds its gradient into `grad` (same layout as parameters()).
  double mlm_loss_and_gradient(const SequenceEncoding& encoding, TokenId target,
                               std::span<double> grad) const;

  // Versioned little-endian binary: magic, config, flat float64 parameters.
  std::string serialize() const;
  static TinyLm deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static TinyLm load(const std::filesystem::path& path);

  bool operator==(const TinyLm& other) const {
    return config_ == other.config_ && params_ == other.params_;
  }

 private:
  struct Cache;
  RowMatrix encode(const SequenceEncoding& encoding, Cache* cache) const;
  void check_encoding(const SequenceEncoding& encoding) const;

  ModelConfig config_;
  ParameterLayout layout_;
  std::vector<double> params_;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace cloze
