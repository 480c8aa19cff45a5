#include "cloze/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cloze/rng.hpp"
#include "cloze/text.hpp"

namespace cloze {

using nlohmann::ordered_json;

void validate(const ClozeExample& example) {
  const std::string& id = example.id;
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    if (example.options[i].empty()) {
      throw ValidationError("example " + id + ": option_" + std::to_string(i) +
                            " is empty");
    }
  }
  const auto first = example.question.find(kPlaceholder);
  if (first == std::string::npos) {
    throw ValidationError("example " + id + ": question has no @placeholder");
  }
  if (example.question.find(kPlaceholder, first + 1) != std::string::npos) {
    throw ValidationError("example " + id +
                          ": question has more than one @placeholder");
  }
  if (example.label && (*example.label < 0 || *example.label >= 5)) {
    throw ValidationError("example " + id + ": label " +
                          std::to_string(*example.label) + " outside 0..4");
  }
}

namespace {

ClozeExample example_from_json(const ordered_json& obj, std::size_t line_no) {
  if (!obj.is_object()) {
    throw ValidationError("line " + std::to_string(line_no) +
                          ": record is not a JSON object");
  }
  ClozeExample ex;
  ex.id = obj.contains("id") ? obj.at("id").get<std::string>()
                             : std::to_string(line_no);
  auto required_string = [&](const char* key) -> std::string {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
      throw ValidationError("example " + ex.id + ": missing string field '" +
                            key + "'");
    }
    return obj.at(key).get<std::string>();
  };
  ex.article = required_string("article");
  ex.question = required_string("question");
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    ex.options[i] = required_string(("option_" + std::to_string(i)).c_str());
  }
  if (obj.contains("option_5")) {
    throw ValidationError("example " + ex.id + ": more than 5 options");
  }
  if (obj.contains("label") && !obj.at("label").is_null()) {
    const auto& label = obj.at("label");
    if (!label.is_number_integer()) {
      throw ValidationError("example " + ex.id + ": label is not an integer");
    }
    ex.label = label.get<int>();
  }
  validate(ex);
  return ex;
}

ordered_json example_to_json(const ClozeExample& ex) {
  ordered_json obj;
  obj["id"] = ex.id;
  obj["article"] = ex.article;
  obj["question"] = ex.question;
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    obj["option_" + std::to_string(i)] = ex.options[i];
  }
  if (ex.label) obj["label"] = *ex.label;
  return obj;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<ClozeExample> parse_dataset(std::string_view jsonl) {
  std::vector<ClozeExample> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (blank(line)) continue;

    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": parse error: " + e.what());
    }
    ClozeExample ex;
    try {
      ex = example_from_json(obj, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(ex.id).second) {
      throw ValidationError("duplicate example id " + ex.id + " on line " +
                            std::to_string(line_no));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ClozeExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string to_jsonl(const std::vector<ClozeExample>& dataset) {
  std::string out;
  for (const auto& ex : dataset) {
    out += example_to_json(ex).dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::vector<ClozeExample>& dataset,
                  const std::filesystem::path& path) {
  const std::string text = to_jsonl(dataset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

LengthHistogram article_stats(const std::vector<ClozeExample>& dataset,
                              int bucket_width) {
  if (bucket_width < 1) throw ValidationError("bucket width must be >= 1");
  if (dataset.empty()) {
    throw ValidationError("no statistics for an empty dataset");
  }
  LengthHistogram h;
  h.bucket_width = bucket_width;
  long long total = 0;
  for (const auto& ex : dataset) {
    const int len = static_cast<int>(split_whitespace(ex.article).size());
    total += len;
    h.max = std::max(h.max, len);
    ++h.counts[(len / bucket_width) * bucket_width];
  }
  h.mean = static_cast<double>(total) / static_cast<double>(dataset.size());
  return h;
}

std::vector<std::string> split_sentences(std::string_view article) {
  auto is_terminal = [](char c) { return c == '.' || c == '!' || c == '?'; };
  auto is_space = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  };
  auto trimmed = [&](std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
  };

  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < article.size()) {
    if (!is_terminal(article[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < article.size() && is_terminal(article[j])) ++j;
    // Closing quotes/brackets stay with their sentence.
    while (j < article.size() &&
           (article[j] == '"' || article[j] == '\'' || article[j] == ')')) {
      ++j;
    }
    if (j == article.size() || is_space(article[j])) {
      auto s = trimmed(article.substr(start, j - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = j;
    }
    i = j;
  }
  auto tail = trimmed(article.substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

namespace {

using BagOfWords = std::unordered_map<std::string, int>;

BagOfWords bag_of_words(std::string_view text) {
  BagOfWords bag;
  for (auto& tok : tokenize(text)) {
    if (tok != kPlaceholder) ++bag[tok];
  }
  return bag;
}

double bow_cosine(const BagOfWords& a, const BagOfWords& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [w, c] : a) {
    na += static_cast<double>(c) * c;
    if (auto it = b.find(w); it != b.end()) dot += static_cast<double>(c) * it->second;
  }
  for (const auto& [w, c] : b) nb += static_cast<double>(c) * c;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::string select_top_k_sentences(std::string_view article,
                                   std::string_view question, int k) {
  if (k < 1) throw ValidationError("top-k requires k >= 1");
  const auto sentences = split_sentences(article);
  if (sentences.size() <= 1 || static_cast<std::size_t>(k) >= sentences.size()) {
    return std::string(article);
  }
  const BagOfWords q = bag_of_words(question);
  std::vector<double> sim(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    sim[i] = bow_cosine(bag_of_words(sentences[i]), q);
  }
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());

  std::string out;
  for (std::size_t idx : order) {
    if (!out.empty()) out += ' ';
    out += sentences[idx];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

struct FactTemplate {
  const char* fact;      // {S} subject, {O} answer word
  const char* question;  // restatement with the answer removed
};

constexpr FactTemplate kTemplates[] = {
    {"{S} praised the {O} during the meeting.",
     "{S} is said to have praised the @placeholder ."},
    {"The {O} was the main concern for {S} this week.",
     "{S} was mostly concerned about the @placeholder ."},
    {"According to {S}, the {O} has changed a lot.",
     "{S} says the @placeholder has changed a lot ."},
    {"{S} spoke at length about the {O} on monday.",
     "On monday {S} talked about the @placeholder ."},
    {"Reporters asked {S} about the {O} after the vote.",
     "{S} was asked about the @placeholder after a vote ."},
    {"{S} wrote a long report on the {O} last year.",
     "Last year {S} published a report on the @placeholder ."},
};

constexpr const char* kSubjects[] = {
    "alice",  "bernard", "carla", "derek",  "elena", "farid",
    "grace",  "hugo",    "irene", "jonas",  "kiran", "lindsey",
    "marcus", "nadia",   "oscar", "priya",
};

constexpr const char* kFillers[] = {
    "The weather was calm in the city.",
    "Many people attended the event in the evening.",
    "Local news covered the story in detail.",
    "The statement was published on the website.",
    "Several members of the public asked questions.",
    "It was a busy day for everyone involved.",
    "A spokesperson declined to comment further.",
    "The meeting lasted for nearly two hours.",
};

std::string fill(std::string_view pattern, std::string_view subject,
                 std::string_view object) {
  std::string out;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern.substr(i, 3) == "{S}") {
      out += subject;
      i += 2;
    } else if (pattern.substr(i, 3) == "{O}") {
      out += object;
      i += 2;
    } else {
      out += pattern[i];
    }
  }
  // Capitalize the first letter like a real sentence start.
  if (!out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& default_answer_words() {
  static const std::vector<std::string> words = {
      "culture",   "objective", "freedom",    "policy",      "economy",
      "security",  "strategy",  "quality",    "safety",      "progress",
      "health",    "education", "justice",    "tradition",   "reform",
      "growth",    "democracy", "technology", "environment", "energy",
      "budget",    "trust",     "support",    "confidence",  "pressure",
      "interest",  "evidence",  "authority",  "peace",       "crisis",
      "future",    "balance",   "standards",  "chances",     "value",
      "identity",  "history",   "opportunity", "ambition",   "success",
  };
  return words;
}

SyntheticConfig default_synthetic_config(std::uint64_t seed, int n_examples) {
  SyntheticConfig c;
  c.n_examples = n_examples;
  c.vocab_words = default_answer_words();
  c.template_count = static_cast<int>(std::size(kTemplates));
  c.seed = seed;
  return c;
}

std::vector<ClozeExample> generate_synthetic(const SyntheticConfig& config) {
  if (config.n_examples < 1) {
    throw ValidationError("synthetic corpus needs n_examples >= 1");
  }
  if (config.vocab_words.size() < kNumOptions) {
    throw ValidationError("synthetic corpus needs at least 5 vocab words");
  }
  const int n_templates = static_cast<int>(std::size(kTemplates));
  if (config.template_count < 1 || config.template_count > n_templates) {
    throw ValidationError("template_count must be in 1.." +
                          std::to_string(n_templates));
  }
  for (const auto& w : config.vocab_words) {
    if (tokenize(w) != std::vector<std::string>{w}) {
      throw ValidationError("vocab word '" + w +
                            "' is not a single normalized token");
    }
  }

  Rng rng(config.seed);
  std::vector<ClozeExample> out;
  out.reserve(static_cast<std::size_t>(config.n_examples));
  for (int n = 0; n < config.n_examples; ++n) {
    const auto& tpl = kTemplates[rng.below(static_cast<std::uint64_t>(config.template_count))];
    const std::string subject = kSubjects[rng.below(std::size(kSubjects))];
    const std::string& gold = config.vocab_words[rng.below(config.vocab_words.size())];

    std::vector<std::string> sentences;
    const auto n_fillers = 2 + rng.below(3);
    std::vector<std::size_t> filler_ids(std::size(kFillers));
    std::iota(filler_ids.begin(), filler_ids.end(), 0);
    rng.shuffle(filler_ids);
    for (std::size_t i = 0; i < n_fillers; ++i) sentences.emplace_back(kFillers[filler_ids[i]]);
    const auto fact_at = rng.below(sentences.size() + 1);
    sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(fact_at),
                     fill(tpl.fact, subject, gold));

    ClozeExample ex;
    std::ostringstream id;
    id << "synth-" << n;
    ex.id = id.str();
    for (const auto& s : sentences) {
      if (!ex.article.empty()) ex.article += ' ';
      ex.article += s;
    }
    ex.question = fill(tpl.question, subject, gold);

    // Distractors never occur anywhere in the article.
    const auto article_tokens = tokenize(ex.article);
    const std::set<std::string> in_article(article_tokens.begin(), article_tokens.end());
    std::vector<std::string> pool;
    for (const auto& w : config.vocab_words) {
      if (w != gold && !in_article.contains(w) &&
          std::find(pool.begin(), pool.end(), w) == pool.end()) {
        pool.push_back(w);
      }
    }
    if (pool.size() < kNumOptions - 1) {
      throw ValidationError("not enough distinct distractor words for example " + ex.id);
    }
    std::vector<std::string> distractors;
    for (std::size_t i = 0; i < kNumOptions - 1; ++i) {
      const auto j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
      distractors.push_back(pool[i]);
    }
    const int label = static_cast<int>(rng.below(kNumOptions));
    std::size_t d = 0;
    for (std::size_t i = 0; i < kNumOptions; ++i) {
      ex.options[i] = (static_cast<int>(i) == label) ? gold : distractors[d++];
    }
    ex.label = label;
    validate(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

std::pair<std::vector<ClozeExample>, std::vector<ClozeExample>> split_dataset(
    const std::vector<ClozeExample>& dataset, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ValidationError("train fraction must be in [0, 1]");
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(dataset.size())));
  std::vector<ClozeExample> head(dataset.begin(),
                                 dataset.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<ClozeExample> tail(dataset.begin() + static_cast<std::ptrdiff_t>(n_train),
                                 dataset.end());
  return {std::move(head), std::move(tail)};
}

}  // namespace cloze
