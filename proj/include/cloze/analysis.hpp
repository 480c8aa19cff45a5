#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cloze/corpus.hpp"
#include "cloze/scorers.hpp"

namespace cloze {

inline constexpr double kDefaultThresholdFactor = 1.4;

struct Prediction {
  std::string example_id;
  int predicted_index = 0;
  OptionScores scores;
  std::optional<int> gold_index;
};

// Argmax, lowest index on ties.
int argmax(const std::array<double, kNumOptions>& scores);

Prediction predict(const OptionScores& scores, std::optional<int> gold = std::nullopt);

// Pairs every score entry with its example's label; the dataset must cover
// every scored id.
std::vector<Prediction> predict_all(const ScoreTable& table,
                                    const std::vector<ClozeExample>& dataset);

double accuracy(const std::vector<Prediction>& predictions);

enum class ConfidenceCategory { kWrongConfident, kWrongConfused, kCorrectConfident, kCorrectConfused };

std::string_view to_string(ConfidenceCategory c);  // "WC", "WN", "CC", "CN"

// P is the predicted option's score. For a wrong prediction T is the gold
// option's score; for a correct one T is the best of the other four. The
// prediction is confident when P >= tf * T.
ConfidenceCategory confidence_category(const Prediction& p, double tf = kDefaultThresholdFactor);

struct EvalReport {
  int n_examples = 0;
  double accuracy = 0.0;
  std::map<ConfidenceCategory, int> category_counts;
  double confident_fraction = 0.0;
  double wrong_confident_fraction = 0.0;
  double tf = kDefaultThresholdFactor;

  int count(ConfidenceCategory c) const;
};

EvalReport summarize(const std::vector<Prediction>& predictions,
                     double tf = kDefaultThresholdFactor);

std::string report_json(const EvalReport& report);

// id,predicted,gold,category,score_0..score_4. Gold and category are empty
// for unlabeled predictions.
std::string predictions_csv(const std::vector<Prediction>& predictions,
                            double tf = kDefaultThresholdFactor);

}  // namespace cloze
