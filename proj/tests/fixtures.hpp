#pragma once

#include <filesystem>
#include <string>

#include "cloze/model.hpp"
#include "cloze/tokenizer.hpp"

namespace cloze::testing {

// Small model whose forward pass is cross-checked against the numpy oracle.
inline ModelConfig oracle_config() {
  ModelConfig c;
  c.vocab_size = 12;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 16;
  c.seed = 1234;
  return c;
}

// [CLS] 7 [MASK] 9 [SEP], all segment 0.
inline SequenceEncoding oracle_mlm_encoding() {
  SequenceEncoding e;
  e.token_ids = {special::kCls, 7, special::kMask, 9, special::kSep};
  e.segment_ids = {0, 0, 0, 0, 0};
  e.mask_position = 2;
  e.max_len = 16;
  return e;
}

// [CLS] 7 8 9 [SEP] 10 11 [SEP] with the article in segment 1.
inline SequenceEncoding oracle_mcq_encoding() {
  SequenceEncoding e;
  e.token_ids = {special::kCls, 7, 8, 9, special::kSep, 10, 11, special::kSep};
  e.segment_ids = {0, 0, 0, 0, 0, 1, 1, 1};
  e.max_len = 16;
  return e;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cloze-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cloze::testing
