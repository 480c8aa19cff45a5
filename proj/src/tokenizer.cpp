#include "cloze/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace cloze {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]",
                                                    "[SEP]", "[MASK]"};
  return specials;
}

}  // namespace

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ValidationError("vocabulary token '" + tokens_[i] +
                            "' appears twice");
    }
  }
}

Vocab Vocab::build(const std::vector<std::string>& corpus, int cap) {
  if (cap < special::kCount + 1) {
    throw ValidationError("vocabulary cap must be >= 6");
  }
  std::map<std::string, long long> freq;
  for (const auto& text : corpus) {
    for (auto& tok : tokenize(text)) {
      if (tok != kPlaceholder) ++freq[tok];
    }
  }
  const auto& specials = special_tokens();
  std::vector<std::pair<std::string, long long>> ranked;
  for (auto& [tok, n] : freq) {
    if (std::find(specials.begin(), specials.end(), tok) == specials.end()) {
      ranked.emplace_back(tok, n);
    }
  }
  // std::map iteration is already lexicographic, so a stable sort on count
  // alone gives the lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens = specials;
  for (auto& [tok, n] : ranked) {
    if (static_cast<int>(tokens.size()) >= cap) break;
    tokens.push_back(tok);
  }
  return Vocab(std::move(tokens));
}

Vocab Vocab::from_lines(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    tokens.emplace_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw ValidationError("vocabulary file must start with the 5 special tokens");
  }
  return Vocab(std::move(tokens));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open vocabulary " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_lines(buf.str());
}

std::string Vocab::to_lines() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_lines();
}

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? special::kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId option_token_id(std::string_view option, const Vocab& vocab) {
  const auto toks = tokenize(option);
  return toks.size() == 1 ? vocab.id(toks.front()) : special::kUnk;
}

SequenceEncoding encode_example(const ClozeExample& example, const Vocab& vocab,
                                EncodeMode mode, int max_len, bool use_article) {
  SequenceEncoding enc;
  enc.max_len = max_len;
  enc.token_ids.push_back(special::kCls);

  for (const auto& tok : tokenize(example.question)) {
    if (tok != kPlaceholder) {
      enc.token_ids.push_back(vocab.id(tok));
      continue;
    }
    if (mode.kind == EncodeMode::Kind::kMlm) {
      enc.mask_position = static_cast<int>(enc.token_ids.size());
      enc.token_ids.push_back(special::kMask);
    } else {
      if (mode.option_index < 0 || mode.option_index >= static_cast<int>(kNumOptions)) {
        throw ValidationError("option index " + std::to_string(mode.option_index) +
                              " outside 0..4");
      }
      for (const auto& opt_tok :
           tokenize(example.options[static_cast<std::size_t>(mode.option_index)])) {
        enc.token_ids.push_back(vocab.id(opt_tok));
      }
    }
  }
  if (mode.kind == EncodeMode::Kind::kMlm && !enc.mask_position) {
    throw ValidationError("example " + example.id + ": question has no @placeholder");
  }
  enc.token_ids.push_back(special::kSep);

  const int question_len = static_cast<int>(enc.token_ids.size());
  if (question_len + 1 > max_len) {
    throw ValidationError("example " + example.id + ": question needs max_len >= " +
                          std::to_string(question_len + 1) + ", got " +
                          std::to_string(max_len));
  }
  enc.segment_ids.assign(enc.token_ids.size(), 0);

  if (use_article) {
    const auto article = tokenize(example.article);
    const std::size_t budget = static_cast<std::size_t>(max_len - question_len);
    const std::size_t kept = std::min(article.size(), budget);
    for (std::size_t i = 0; i < kept; ++i) {
      enc.token_ids.push_back(vocab.id(article[i]));
      enc.segment_ids.push_back(1);
    }
    if (kept > 0 && kept < budget) {
      enc.token_ids.push_back(special::kSep);
      enc.segment_ids.push_back(1);
    }
  }
  return enc;
}

}  // namespace cloze
