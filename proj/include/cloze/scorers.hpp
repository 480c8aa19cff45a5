#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cloze/corpus.hpp"
#include "cloze/model.hpp"
#include "cloze/tokenizer.hpp"

namespace cloze {

struct OptionScores {
  std::string example_id;
  std::array<double, kNumOptions> scores{};
  std::string scorer_name;

  bool operator==(const OptionScores&) const = default;
};

// Throws ValidationError unless all five scores are finite.
void validate(const OptionScores& scores);

// Scores of one scorer over one dataset. Keeps insertion order for output
// and rejects duplicate ids.
class ScoreTable {
 public:
  void add(OptionScores entry);

  const OptionScores& at(const std::string& id) const;
  const OptionScores* find(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.contains(id); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const ScoreTable& other) const { return entries_ == other.entries_; }

 private:
  std::vector<OptionScores> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// {"id": ..., "scores": [s1..s5]} per line. scorer_name is not part of the
// file; loaded entries take `scorer_name` from the caller.
ScoreTable parse_scores(std::string_view jsonl, const std::string& scorer_name = "external");
ScoreTable load_external_scores(const std::filesystem::path& path,
                                const std::string& scorer_name = "external");
std::string to_jsonl(const ScoreTable& table);
void save_scores(const ScoreTable& table, const std::filesystem::path& path);

struct MlmScoreOptions {
  int max_len = kDefaultMaxLen;
  bool use_article = true;
  std::optional<int> top_k;  // reduce the article to its k most similar sentences
};

// Raw logit at the mask for each option's token.
OptionScores score_mlm(const TinyLm& model, const Vocab& vocab, const ClozeExample& example,
                       const MlmScoreOptions& options = {});

// Softmax over forward_mcq of the five option-substituted encodings.
OptionScores score_mcq(const TinyLm& model, const Vocab& vocab, const ClozeExample& example,
                       int max_len = kDefaultMaxLen);

// Cosine between each option's embedding and the probability-weighted mean
// embedding predicted at the mask.
OptionScores score_cosine(const TinyLm& model, const Vocab& vocab, const ClozeExample& example,
                          int max_len = kDefaultMaxLen);

using WordCounts = std::unordered_map<std::string, long long>;

// Token counts over the articles of a dataset.
WordCounts count_article_words(const std::vector<ClozeExample>& dataset);

// log(count + 1) of each option's normalized form.
OptionScores score_unigram(const WordCounts& freqs, const ClozeExample& example);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace cloze
