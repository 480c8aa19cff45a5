#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cloze/corpus.hpp"
#include "cloze/text.hpp"

namespace cloze {

using TokenId = int;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kCls = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kMask = 4;
inline constexpr int kCount = 5;
}  // namespace special

// Word-level vocabulary with the five special tokens at fixed ids 0..4.
// Immutable once built.
class Vocab {
 public:
  Vocab();

  // Specials first, then corpus words by descending frequency (ties
  // lexicographic), truncated at `cap` entries total. The placeholder
  // marker is never a vocabulary word.
  static Vocab build(const std::vector<std::string>& corpus, int cap);

  // One token per line, line number = id.
  static Vocab load(const std::filesystem::path& path);
  static Vocab from_lines(std::string_view text);
  void save(const std::filesystem::path& path) const;
  std::string to_lines() const;

  TokenId id(std::string_view token) const;  // [UNK] when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  explicit Vocab(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct SequenceEncoding {
  std::vector<TokenId> token_ids;
  std::vector<int> segment_ids;  // 0 through the first [SEP], 1 after
  std::optional<int> mask_position;
  int max_len = 0;

  int length() const { return static_cast<int>(token_ids.size()); }
  bool operator==(const SequenceEncoding&) const = default;
};

// MLM masks the placeholder; MCQ substitutes the given option into it.
struct EncodeMode {
  enum class Kind { kMlm, kMcq };
  Kind kind = Kind::kMlm;
  int option_index = 0;

  static EncodeMode mlm() { return {Kind::kMlm, 0}; }
  static EncodeMode mcq(int option) { return {Kind::kMcq, option}; }
};

inline constexpr int kDefaultMaxLen = 256;

// [CLS] question [SEP] article [SEP]. The question is never truncated; the
// article is cut from the end, and the trailing [SEP] is the first thing
// dropped when the budget is tight.
SequenceEncoding encode_example(const ClozeExample& example, const Vocab& vocab,
                                EncodeMode mode, int max_len = kDefaultMaxLen,
                                bool use_article = true);

// Id used to score an option word: its single token, or [UNK] when the word
// is out of vocabulary or does not normalize to exactly one token.
TokenId option_token_id(std::string_view option, const Vocab& vocab);

}  // namespace cloze
