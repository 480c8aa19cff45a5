#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cloze {

inline constexpr std::string_view kPlaceholder = "@placeholder";
inline constexpr std::size_t kNumOptions = 5;

// Raised for any malformed or inconsistent input data.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClozeExample {
  std::string id;
  std::string article;
  std::string question;
  std::array<std::string, kNumOptions> options;
  std::optional<int> label;

  bool operator==(const ClozeExample&) const = default;
};

// Throws ValidationError naming the example id when an invariant is broken.
void validate(const ClozeExample& example);

// JSONL with keys article, question, option_0..option_4 and optional
// label / id. Missing ids become the 1-based line number.
std::vector<ClozeExample> load_dataset(const std::filesystem::path& path);
std::vector<ClozeExample> parse_dataset(std::string_view jsonl);

std::string to_jsonl(const std::vector<ClozeExample>& dataset);
void save_dataset(const std::vector<ClozeExample>& dataset,
                  const std::filesystem::path& path);

struct LengthHistogram {
  int bucket_width = 1;
  std::map<int, int> counts;  // bucket start -> count
  double mean = 0.0;
  int max = 0;
};

// Article length is counted in whitespace-separated tokens.
LengthHistogram article_stats(const std::vector<ClozeExample>& dataset,
                              int bucket_width);

std::vector<std::string> split_sentences(std::string_view article);

// Keeps the k sentences whose bag-of-words cosine with the question is
// highest, in article order. Ties go to the earlier sentence.
std::string select_top_k_sentences(std::string_view article,
                                   std::string_view question, int k);

struct SyntheticConfig {
  int n_examples = 1000;
  std::vector<std::string> vocab_words;
  int template_count = 4;
  std::uint64_t seed = 0;
};

// A default answer-word list for synthetic corpora.
const std::vector<std::string>& default_answer_words();

SyntheticConfig default_synthetic_config(std::uint64_t seed, int n_examples);

std::vector<ClozeExample> generate_synthetic(const SyntheticConfig& config);

// Deterministic head/tail split: the first round(n * train_fraction)
// examples go to the first half.
std::pair<std::vector<ClozeExample>, std::vector<ClozeExample>> split_dataset(
    const std::vector<ClozeExample>& dataset, double train_fraction);

}  // namespace cloze
