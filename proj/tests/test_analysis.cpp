#include <doctest.h>

#include <cmath>

#include "cloze/analysis.hpp"
#include "cloze/rng.hpp"

using namespace cloze;

namespace {

OptionScores scores(std::array<double, 5> s, std::string id = "x") {
  return {std::move(id), s, "t"};
}

using CC = ConfidenceCategory;

}  // namespace

TEST_CASE("predict takes the argmax with lowest-index ties") {
  CHECK(predict(scores({16.994, 29.573, 8.331, 18.471, 11.549})).predicted_index == 1);
  CHECK(predict(scores({1, 1, 1, 1, 1})).predicted_index == 0);
  CHECK(predict(scores({0, 0, 1, 0, 0})).predicted_index == 2);
  CHECK(predict(scores({0, 3, 1, 3, 0})).predicted_index == 1);
  CHECK_THROWS_AS(predict(scores({0, 0, 0, 0, 0}), 5), ValidationError);
}

TEST_CASE("predict is invariant under increasing transforms") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<double, 5> s{};
    for (auto& v : s) v = 10 * rng.uniform() - 5;
    std::array<double, 5> t{};
    for (std::size_t i = 0; i < 5; ++i) t[i] = std::exp(s[i]) * 3.0 + 2.0;
    CHECK(predict(scores(s)).predicted_index == predict(scores(t)).predicted_index);
  }
}

TEST_CASE("accuracy") {
  auto p = [](int pred_top, int gold) {
    std::array<double, 5> s{};
    s[static_cast<std::size_t>(pred_top)] = 1.0;
    return predict(scores(s), gold);
  };
  CHECK(accuracy({p(0, 0), p(1, 1)}) == 1.0);
  CHECK(accuracy({p(0, 1), p(1, 0)}) == 0.0);
  CHECK(accuracy({p(0, 0), p(1, 1), p(2, 0)}) == 2.0 / 3.0);
  CHECK_THROWS_AS(accuracy({}), ValidationError);
  CHECK_THROWS_WITH_AS(accuracy({predict(scores({1, 0, 0, 0, 0}, "nolabel"))}),
                       doctest::Contains("nolabel"), ValidationError);
}

TEST_CASE("confidence categories on the four published error-analysis rows") {
  // WC: predicted "aiming" 29.573, gold "operating" 18.471; 1.4 * 18.471 = 25.8594.
  CHECK(confidence_category(predict(scores({16.994, 29.573, 8.331, 18.471, 11.549}), 3), 1.4) ==
        CC::kWrongConfident);
  // WN: predicted "chances" 28.372, gold "standards" 27.527; 1.4 * 27.527 = 38.5378.
  CHECK(confidence_category(predict(scores({28.372, 7.169, 27.527, 10.246, 8.395}), 2), 1.4) ==
        CC::kWrongConfused);
  // CC: "stolen" 27.909, runner-up "lost" 13.214; 1.4 * 13.214 = 18.4996.
  CHECK(confidence_category(predict(scores({13.214, 12.342, 27.909, 2.336, 4.510}), 2), 1.4) ==
        CC::kCorrectConfident);
  // CN: "sea" 26.874, runner-up "boundary" 26.728; 1.4 * 26.728 = 37.4192.
  CHECK(confidence_category(predict(scores({24.295, 26.728, 26.874, 4.482, 18.486}), 2), 1.4) ==
        CC::kCorrectConfused);
}

TEST_CASE("confidence_category edge cases") {
  SUBCASE("negative scores follow the inequality literally") {
    // P = -1, T = -2: -1 >= 1.4 * -2 = -2.8, so confident.
    CHECK(confidence_category(predict(scores({-1, -2, -3, -4, -5}), 0), 1.4) ==
          CC::kCorrectConfident);
    // P = -1, gold T = -0.5 (can't happen for argmax unless wrong): -1 >= -0.7 false.
    CHECK(confidence_category(predict(scores({-3, -1, -4, -4, -4}), 1), 1.4) ==
          CC::kCorrectConfident);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(confidence_category(predict(scores({1, 0, 0, 0, 0})), 1.4), ValidationError);
    CHECK_THROWS_AS(confidence_category(predict(scores({1, 0, 0, 0, 0}), 0), 1.0), ValidationError);
  }
  SUBCASE("tf close to 1 makes every strict gap confident; huge tf makes all confused") {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
      std::array<double, 5> s{};
      for (auto& v : s) v = 1.0 + rng.uniform();
      const int gold = static_cast<int>(rng.below(5));
      const auto p = predict(scores(s), gold);
      const auto c_low = confidence_category(p, 1.0 + 1e-12);
      CHECK((c_low == CC::kWrongConfident || c_low == CC::kCorrectConfident));
      const auto c_high = confidence_category(p, 1e6);
      CHECK((c_high == CC::kWrongConfused || c_high == CC::kCorrectConfused));
    }
  }
}

TEST_CASE("summarize") {
  const std::vector<Prediction> one_each = {
      predict(scores({16.994, 29.573, 8.331, 18.471, 11.549}, "wc"), 3),
      predict(scores({28.372, 7.169, 27.527, 10.246, 8.395}, "wn"), 2),
      predict(scores({13.214, 12.342, 27.909, 2.336, 4.510}, "cc"), 2),
      predict(scores({24.295, 26.728, 26.874, 4.482, 18.486}, "cn"), 2),
  };
  SUBCASE("one of each category") {
    const auto r = summarize(one_each, 1.4);
    CHECK(r.confident_fraction == 0.5);
    CHECK(r.wrong_confident_fraction == 0.5);
    CHECK(r.accuracy == 0.5);
    CHECK(r.n_examples == 4);
    for (auto c : {CC::kWrongConfident, CC::kWrongConfused, CC::kCorrectConfident, CC::kCorrectConfused})
      CHECK(r.count(c) == 1);
  }
  SUBCASE("all correct-confident") {
    const auto r = summarize({one_each[2], one_each[2]}, 1.4);
    CHECK(r.accuracy == 1.0);
    CHECK(r.confident_fraction == 1.0);
    CHECK(r.wrong_confident_fraction == 0.0);
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(summarize({}, 1.4), ValidationError); }
}

TEST_CASE("summarize on a crafted 20-example fixture matches a hand tally") {
  // Each row: scores, gold, expected category at tf = 1.4.
  struct Row {
    std::array<double, 5> s;
    int gold;
    CC want;
  };
  const std::vector<Row> rows = {
      {{10, 1, 1, 1, 1}, 0, CC::kCorrectConfident},  // 10 >= 1.4
      {{10, 9, 1, 1, 1}, 0, CC::kCorrectConfused},   // 10 < 12.6
      {{1, 10, 1, 1, 1}, 0, CC::kWrongConfident},    // 10 >= 1.4
      {{9, 10, 1, 1, 1}, 0, CC::kWrongConfused},     // 10 < 12.6
      {{7, 5, 0, 0, 0}, 0, CC::kCorrectConfident},   // 7 >= 7.0 (boundary)
      {{6.99, 5, 0, 0, 0}, 0, CC::kCorrectConfused}, // 6.99 < 7.0
      {{5, 7, 0, 0, 0}, 0, CC::kWrongConfident},     // 7 >= 7.0 (boundary)
      {{5, 6.99, 0, 0, 0}, 0, CC::kWrongConfused},
      {{0, 0, 3, 0, 0}, 2, CC::kCorrectConfident},   // 3 >= 0
      {{0, 0, 0, 0, 0}, 0, CC::kCorrectConfident},   // tie at 0: 0 >= 0
      {{0, 0, 0, 0, 0}, 3, CC::kWrongConfident},     // predicted 0, 0 >= 1.4 * 0
      {{-1, -5, -5, -5, -5}, 0, CC::kCorrectConfident},
      {{-5, -1, -5, -5, -5}, 0, CC::kWrongConfident},  // -1 >= -7
      {{-1, -1.2, -5, -5, -5}, 0, CC::kCorrectConfident},  // -1 >= -1.68
      {{2, 3, 4, 5, 6}, 4, CC::kCorrectConfused},    // 6 < 7
      {{2, 3, 4, 5, 6}, 0, CC::kWrongConfident},     // 6 >= 2.8
      {{2, 3, 4, 5, 6}, 3, CC::kWrongConfused},      // 6 < 7
      {{1, 1, 1, 1, 2}, 4, CC::kCorrectConfident},   // 2 >= 1.4
      {{1, 1, 1, 1, 1.3}, 4, CC::kCorrectConfused},  // 1.3 < 1.4
      {{1, 1, 1, 1, 1.3}, 1, CC::kWrongConfused},    // 1.3 < 1.4
  };
  std::vector<Prediction> preds;
  int wc = 0, wn = 0, cc = 0, cn = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    preds.push_back(predict(scores(rows[i].s, "r" + std::to_string(i)), rows[i].gold));
    CHECK_MESSAGE(confidence_category(preds.back(), 1.4) == rows[i].want, "row " << i);
    wc += rows[i].want == CC::kWrongConfident;
    wn += rows[i].want == CC::kWrongConfused;
    cc += rows[i].want == CC::kCorrectConfident;
    cn += rows[i].want == CC::kCorrectConfused;
  }
  REQUIRE(wc == 5);
  REQUIRE(wn == 4);
  REQUIRE(cc == 7);
  REQUIRE(cn == 4);
  const auto r = summarize(preds, 1.4);
  CHECK(r.count(CC::kWrongConfident) == 5);
  CHECK(r.count(CC::kWrongConfused) == 4);
  CHECK(r.count(CC::kCorrectConfident) == 7);
  CHECK(r.count(CC::kCorrectConfused) == 4);
  CHECK(r.accuracy == 11.0 / 20.0);
  CHECK(r.accuracy == accuracy(preds));
  CHECK(r.confident_fraction == 12.0 / 20.0);
  CHECK(r.wrong_confident_fraction == 5.0 / 9.0);
}

TEST_CASE("report outputs") {
  const auto p = predict(scores({16.994, 29.573, 8.331, 18.471, 11.549}, "wc"), 3);
  const auto json = report_json(summarize({p}, 1.4));
  CHECK(json.find("\"WC\": 1") != std::string::npos);
  CHECK(json.find("\"tf\": 1.4") != std::string::npos);

  const auto csv = predictions_csv({p, predict(scores({0, 1, 0, 0, 0}, "un,labeled"))}, 1.4);
  CHECK(csv.rfind("id,predicted,gold,category,score_0", 0) == 0);
  CHECK(csv.find("wc,1,3,WC,16.994") != std::string::npos);
  CHECK(csv.find("\"un,labeled\",1,,,0,1") != std::string::npos);
}
