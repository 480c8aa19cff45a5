#include "cloze/ensemble.hpp"

#include <cmath>

namespace cloze {

namespace {

void check_same_ids(const ScoreTable& reference, const ScoreTable& other, std::size_t member) {
  std::string missing;
  auto note = [&](const std::string& id) {
    if (!missing.empty()) missing += ", ";
    missing += id;
  };
  for (const auto& s : reference) {
    if (!other.contains(s.example_id)) note(s.example_id);
  }
  for (const auto& s : other) {
    if (!reference.contains(s.example_id)) note(s.example_id);
  }
  if (!missing.empty()) {
    throw ValidationError("ensemble member " + std::to_string(member) +
                          " does not cover the same ids; mismatched: " + missing);
  }
}

}  // namespace

ScoreTable combine(const EnsembleSpec& spec) {
  const auto& members = spec.members;
  if (members.size() < 2) throw ValidationError("an ensemble needs at least 2 members");
  double total_weight = 0.0;
  for (const auto& m : members) {
    if (!(m.weight >= 0.0) || !std::isfinite(m.weight)) {
      throw ValidationError("ensemble weights must be finite and non-negative");
    }
    total_weight += m.weight;
  }
  if (total_weight == 0.0) throw ValidationError("ensemble weights are all zero");
  for (std::size_t j = 1; j < members.size(); ++j) {
    check_same_ids(members.front().table, members[j].table, j);
  }

  ScoreTable out;
  for (const auto& first : members.front().table) {
    OptionScores combined{first.example_id, {}, "ensemble"};
    for (std::size_t i = 0; i < kNumOptions; ++i) {
      double acc = 0.0;
      for (const auto& m : members) {
        if (m.weight == 0.0) continue;
        acc += m.weight * m.table.at(first.example_id).scores[i];
      }
      combined.scores[i] = acc / total_weight;
    }
    out.add(std::move(combined));
  }
  return out;
}

EnsembleSpec equal_weights(std::vector<ScoreTable> tables) {
  EnsembleSpec spec;
  for (auto& t : tables) spec.members.push_back({std::move(t), 1.0});
  return spec;
}

}  // namespace cloze
