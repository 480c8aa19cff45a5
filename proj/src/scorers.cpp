#include "cloze/scorers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cloze {

void validate(const OptionScores& s) {
  for (double v : s.scores) {
    if (!std::isfinite(v)) {
      throw ValidationError("scores for " + s.example_id + " contain a non-finite value");
    }
  }
}

void ScoreTable::add(OptionScores entry) {
  validate(entry);
  if (!index_.emplace(entry.example_id, entries_.size()).second) {
    throw ValidationError("duplicate score id " + entry.example_id);
  }
  entries_.push_back(std::move(entry));
}

const OptionScores* ScoreTable::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const OptionScores& ScoreTable::at(const std::string& id) const {
  if (const auto* s = find(id)) return *s;
  throw ValidationError("no scores for id " + id);
}

ScoreTable parse_scores(std::string_view jsonl, const std::string& scorer_name) {
  ScoreTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("score file line " + std::to_string(line_no) +
                            ": parse error: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string()) {
      throw ValidationError("score file line " + std::to_string(line_no) +
                            ": missing string field 'id'");
    }
    OptionScores s;
    s.example_id = obj["id"].get<std::string>();
    s.scorer_name = scorer_name;
    const auto& arr = obj.contains("scores") ? obj["scores"] : nlohmann::json();
    if (!arr.is_array() || arr.size() != kNumOptions) {
      throw ValidationError("scores for " + s.example_id + " must be an array of 5 numbers");
    }
    for (std::size_t i = 0; i < kNumOptions; ++i) {
      if (!arr[i].is_number()) {
        throw ValidationError("scores for " + s.example_id + " must be numbers");
      }
      s.scores[i] = arr[i].get<double>();
    }
    table.add(std::move(s));
  }
  return table;
}

ScoreTable load_external_scores(const std::filesystem::path& path,
                                const std::string& scorer_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open score file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scores(buf.str(), scorer_name);
}

std::string to_jsonl(const ScoreTable& table) {
  std::string out;
  for (const auto& s : table) {
    nlohmann::ordered_json obj;
    obj["id"] = s.example_id;
    obj["scores"] = s.scores;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_scores(const ScoreTable& table, const std::filesystem::path& path) {
  const std::string text = to_jsonl(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

OptionScores score_mlm(const TinyLm& model, const Vocab& vocab, const ClozeExample& example,
                       const MlmScoreOptions& options) {
  const ClozeExample* source = &example;
  ClozeExample reduced;
  if (options.top_k && options.use_article) {
    reduced = example;
    reduced.article = select_top_k_sentences(example.article, example.question, *options.top_k);
    source = &reduced;
  }
  const auto enc = encode_example(*source, vocab, EncodeMode::mlm(), options.max_len,
                                  options.use_article);
  const Eigen::VectorXd logits = model.forward_mlm(enc);
  OptionScores out{example.id, {}, options.use_article ? "mlm" : "mlm-question-only"};
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    out.scores[i] = logits(option_token_id(example.options[i], vocab));
  }
  return out;
}

OptionScores score_mcq(const TinyLm& model, const Vocab& vocab, const ClozeExample& example,
                       int max_len) {
  Eigen::VectorXd raw(kNumOptions);
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    const auto enc = encode_example(example, vocab, EncodeMode::mcq(static_cast<int>(i)), max_len);
    raw(static_cast<Eigen::Index>(i)) = model.forward_mcq(enc);
  }
  const Eigen::VectorXd p = softmax(raw);
  OptionScores out{example.id, {}, "mcq"};
  for (std::size_t i = 0; i < kNumOptions; ++i) out.scores[i] = p(static_cast<Eigen::Index>(i));
  return out;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

OptionScores score_cosine(const TinyLm& model, const Vocab& vocab, const ClozeExample& example,
                          int max_len) {
  const auto enc = encode_example(example, vocab, EncodeMode::mlm(), max_len);
  const Eigen::VectorXd p = softmax(model.forward_mlm(enc));
  const auto emb = model.tensor(model.layout().token_embedding);
  const Eigen::VectorXd expected = emb.transpose() * p;
  OptionScores out{example.id, {}, "cosine"};
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    const Eigen::VectorXd row = emb.row(option_token_id(example.options[i], vocab)).transpose();
    out.scores[i] = cosine_similarity(expected, row);
  }
  return out;
}

WordCounts count_article_words(const std::vector<ClozeExample>& dataset) {
  WordCounts counts;
  for (const auto& ex : dataset) {
    for (auto& tok : tokenize(ex.article)) ++counts[tok];
  }
  return counts;
}

OptionScores score_unigram(const WordCounts& freqs, const ClozeExample& example) {
  OptionScores out{example.id, {}, "unigram"};
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    const auto toks = tokenize(example.options[i]);
    long long count = 0;
    if (toks.size() == 1) {
      if (auto it = freqs.find(toks.front()); it != freqs.end()) count = it->second;
    }
    out.scores[i] = std::log(static_cast<double>(count) + 1.0);
  }
  return out;
}

}  // namespace cloze
