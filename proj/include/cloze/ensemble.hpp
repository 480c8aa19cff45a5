#pragma once

#include <vector>

#include "cloze/scorers.hpp"

namespace cloze {

struct EnsembleMember {
  ScoreTable table;
  double weight = 1.0;
};

struct EnsembleSpec {
  std::vector<EnsembleMember> members;
};

// Per example and option: sum_j w_j * x_j / sum_j w_j. With two members of
// equal weight this is (A_i + B_i) / 2. Output follows the first member's
// id order.
ScoreTable combine(const EnsembleSpec& spec);

// Equal weights for every table.
EnsembleSpec equal_weights(std::vector<ScoreTable> tables);

}  // namespace cloze
