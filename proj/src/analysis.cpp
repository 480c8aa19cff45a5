#include "cloze/analysis.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace cloze {

int argmax(const std::array<double, kNumOptions>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(kNumOptions); ++i) {
    if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

Prediction predict(const OptionScores& scores, std::optional<int> gold) {
  validate(scores);
  if (gold && (*gold < 0 || *gold >= static_cast<int>(kNumOptions))) {
    throw ValidationError("gold index for " + scores.example_id + " outside 0..4");
  }
  return {scores.example_id, argmax(scores.scores), scores, gold};
}

std::vector<Prediction> predict_all(const ScoreTable& table,
                                    const std::vector<ClozeExample>& dataset) {
  std::unordered_map<std::string, const ClozeExample*> by_id;
  for (const auto& ex : dataset) by_id.emplace(ex.id, &ex);
  std::vector<Prediction> out;
  out.reserve(table.size());
  for (const auto& s : table) {
    auto it = by_id.find(s.example_id);
    if (it == by_id.end()) {
      throw ValidationError("scored id " + s.example_id + " is not in the dataset");
    }
    out.push_back(predict(s, it->second->label));
  }
  return out;
}

double accuracy(const std::vector<Prediction>& predictions) {
  if (predictions.empty()) throw ValidationError("accuracy of an empty prediction list");
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    if (!p.gold_index) throw ValidationError("prediction " + p.example_id + " has no gold label");
    if (p.predicted_index == *p.gold_index) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::string_view to_string(ConfidenceCategory c) {
  switch (c) {
    case ConfidenceCategory::kWrongConfident: return "WC";
    case ConfidenceCategory::kWrongConfused: return "WN";
    case ConfidenceCategory::kCorrectConfident: return "CC";
    case ConfidenceCategory::kCorrectConfused: return "CN";
  }
  return "?";
}

ConfidenceCategory confidence_category(const Prediction& p, double tf) {
  if (!p.gold_index) throw ValidationError("prediction " + p.example_id + " has no gold label");
  if (!(tf > 1.0)) throw ValidationError("threshold factor must be > 1");
  const auto& s = p.scores.scores;
  const double predicted = s[static_cast<std::size_t>(p.predicted_index)];
  if (p.predicted_index != *p.gold_index) {
    const double gold = s[static_cast<std::size_t>(*p.gold_index)];
    return predicted >= tf * gold ? ConfidenceCategory::kWrongConfident
                                  : ConfidenceCategory::kWrongConfused;
  }
  double runner_up = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kNumOptions; ++i) {
    if (static_cast<int>(i) != p.predicted_index) runner_up = std::max(runner_up, s[i]);
  }
  return predicted >= tf * runner_up ? ConfidenceCategory::kCorrectConfident
                                     : ConfidenceCategory::kCorrectConfused;
}

int EvalReport::count(ConfidenceCategory c) const {
  auto it = category_counts.find(c);
  return it == category_counts.end() ? 0 : it->second;
}

EvalReport summarize(const std::vector<Prediction>& predictions, double tf) {
  if (predictions.empty()) throw ValidationError("cannot summarize zero predictions");
  EvalReport r;
  r.tf = tf;
  r.n_examples = static_cast<int>(predictions.size());
  for (auto c : {ConfidenceCategory::kWrongConfident, ConfidenceCategory::kWrongConfused,
                 ConfidenceCategory::kCorrectConfident, ConfidenceCategory::kCorrectConfused}) {
    r.category_counts[c] = 0;
  }
  for (const auto& p : predictions) ++r.category_counts[confidence_category(p, tf)];

  const int wc = r.count(ConfidenceCategory::kWrongConfident);
  const int wn = r.count(ConfidenceCategory::kWrongConfused);
  const int cc = r.count(ConfidenceCategory::kCorrectConfident);
  const int cn = r.count(ConfidenceCategory::kCorrectConfused);
  const double n = r.n_examples;
  r.accuracy = (cc + cn) / n;
  r.confident_fraction = (wc + cc) / n;
  r.wrong_confident_fraction = (wc + wn) == 0 ? 0.0 : static_cast<double>(wc) / (wc + wn);
  return r;
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_examples"] = r.n_examples;
  j["accuracy"] = r.accuracy;
  nlohmann::ordered_json counts;
  for (auto c : {ConfidenceCategory::kWrongConfident, ConfidenceCategory::kWrongConfused,
                 ConfidenceCategory::kCorrectConfident, ConfidenceCategory::kCorrectConfused}) {
    counts[std::string(to_string(c))] = r.count(c);
  }
  j["category_counts"] = counts;
  j["confident_fraction"] = r.confident_fraction;
  j["wrong_confident_fraction"] = r.wrong_confident_fraction;
  j["tf"] = r.tf;
  return j.dump(2) + "\n";
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string predictions_csv(const std::vector<Prediction>& predictions, double tf) {
  std::ostringstream out;
  out.precision(17);
  out << "id,predicted,gold,category,score_0,score_1,score_2,score_3,score_4\n";
  for (const auto& p : predictions) {
    out << csv_field(p.example_id) << ',' << p.predicted_index << ',';
    if (p.gold_index) out << *p.gold_index << ',' << to_string(confidence_category(p, tf));
    else out << ',';
    for (double s : p.scores.scores) out << ',' << s;
    out << '\n';
  }
  return out.str();
}

}  // namespace cloze
