#include <doctest.h>

#include <cmath>

#include "cloze/model.hpp"
#include "cloze/rng.hpp"
#include "cloze/training.hpp"
#include "fixtures.hpp"

using namespace cloze;

namespace {

ModelConfig toy_config(int vocab_size, std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.max_len = 32;
  c.seed = seed;
  return c;
}

SequenceEncoding random_encoding(Rng& rng, int vocab_size, int max_len, bool with_mask) {
  SequenceEncoding e;
  e.max_len = max_len;
  const int q = 1 + static_cast<int>(rng.below(6));
  const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len - q - 2)));
  e.token_ids.push_back(special::kCls);
  for (int i = 0; i < q; ++i) {
    e.token_ids.push_back(special::kCount +
                          static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - special::kCount))));
  }
  e.token_ids.push_back(special::kSep);
  e.segment_ids.assign(e.token_ids.size(), 0);
  for (int i = 0; i < a; ++i) {
    e.token_ids.push_back(special::kCount +
                          static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - special::kCount))));
    e.segment_ids.push_back(1);
  }
  if (with_mask) {
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
    e.token_ids[static_cast<std::size_t>(m)] = special::kMask;
    e.mask_position = m;
  }
  return e;
}

}  // namespace

TEST_CASE("init_model is seeded") {
  const auto a = TinyLm::init(toy_config(50, 1));
  const auto b = TinyLm::init(toy_config(50, 1));
  const auto c = TinyLm::init(toy_config(50, 2));
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (double p : a.parameters()) REQUIRE(std::isfinite(p));
  CHECK(a.parameter_count() == a.layout().total);
}

TEST_CASE("init_model: layer norms start at unit gain and zero shift") {
  const auto m = TinyLm::init(toy_config(20, 3));
  CHECK(m.tensor(m.layout().emb_ln_gain).isOnes());
  CHECK(m.tensor(m.layout().emb_ln_shift).isZero());
  CHECK(m.tensor(m.layout().layers[1].ln2_gain).isOnes());
  CHECK(m.tensor(m.layout().layers[0].bq).isZero());
  CHECK(m.tensor(m.layout().mlm_out_bias).isZero());
}

TEST_CASE("invalid configs name the violated constraint") {
  auto c = toy_config(20, 0);
  c.d_model = 8;
  c.n_heads = 3;
  CHECK_THROWS_WITH_AS(TinyLm::init(c), doctest::Contains("divisible"), ValidationError);
  c = toy_config(20, 0);
  c.max_len = 4;
  CHECK_THROWS_WITH_AS(TinyLm::init(c), doctest::Contains("max_len"), ValidationError);
  c = toy_config(5, 0);
  CHECK_THROWS_AS(TinyLm::init(c), ValidationError);
}

TEST_CASE("forward_mlm shape, determinism and preconditions") {
  const auto m = TinyLm::init(toy_config(30, 4));
  Rng rng(1);
  const auto enc = random_encoding(rng, 30, 32, true);
  const auto logits = m.forward_mlm(enc);
  CHECK(logits.size() == 30);
  CHECK(logits == m.forward_mlm(enc));

  auto no_mask = enc;
  no_mask.mask_position.reset();
  CHECK_THROWS_AS(m.forward_mlm(no_mask), ValidationError);

  auto too_long = enc;
  too_long.token_ids.assign(33, 5);
  too_long.segment_ids.assign(33, 0);
  CHECK_THROWS_AS(m.forward_mlm(too_long), ValidationError);

  auto bad_id = enc;
  bad_id.token_ids[1] = 30;
  CHECK_THROWS_AS(m.forward_mlm(bad_id), ValidationError);
}

TEST_CASE("softmax of forward_mlm is a distribution") {
  const auto m = TinyLm::init(toy_config(40, 5));
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto p = softmax(m.forward_mlm(random_encoding(rng, 40, 32, true)));
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
    CHECK(p.minCoeff() > 0.0);
    CHECK(p.maxCoeff() < 1.0);
  }
}

TEST_CASE("forward_mcq") {
  const auto m = TinyLm::init(toy_config(30, 6));
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto enc = random_encoding(rng, 30, 32, false);
    const double s = m.forward_mcq(enc);
    CHECK(std::isfinite(s));
    CHECK(s == m.forward_mcq(enc));
  }
  CHECK_THROWS_AS(m.forward_mcq(random_encoding(rng, 30, 32, true)), ValidationError);
}

// Expected values computed by tests/oracle/forward_oracle.py (numpy) from the
// checkpoint of TinyLm::init(oracle_config()).
TEST_CASE("forward pass matches the numpy oracle") {
  const auto m = TinyLm::init(testing::oracle_config());

  const std::vector<double> expected_logits = {
      0.0036150285458787365, -0.07276601758105519, -0.039536183470125844,
      -0.03235561569545341,  0.026824517683172587, 0.02158469255372717,
      -0.029150617968389365, 0.12202508556968361,  0.032877963313585404,
      3.974101663125826e-05, -0.08829136710713081, -0.07776171600251583};
  const auto logits = m.forward_mlm(testing::oracle_mlm_encoding());
  REQUIRE(logits.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(std::abs(logits(i) - expected_logits[static_cast<std::size_t>(i)]) <= 1e-6);

  CHECK(std::abs(m.forward_mcq(testing::oracle_mcq_encoding()) - (-1.270691219456595)) <= 1e-6);
}

TEST_CASE("checkpoint round trip is exact") {
  auto m = TinyLm::init(toy_config(25, 8));
  m.parameters()[3] = 1.0 / 3.0;
  const auto path = testing::scratch_dir("ckpt") / "m.bin";
  m.save(path);
  const auto back = TinyLm::load(path);
  CHECK(back == m);
  CHECK(back.config() == m.config());

  auto bytes = m.serialize();
  CHECK_THROWS_AS(TinyLm::deserialize(bytes.substr(0, bytes.size() - 8)), ValidationError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(TinyLm::deserialize(bytes), ValidationError);
}

TEST_CASE("analytic gradient matches central differences on a tiny model") {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 16;
  c.seed = 21;
  const auto m = TinyLm::init(c);
  Rng rng(4);
  const auto enc = random_encoding(rng, 20, 16, true);
  CHECK(gradient_check(m, enc, 7, 50, 1) < 1e-4);
  // Every parameter at once on this size.
  CHECK(gradient_check(m, enc, 7, static_cast<int>(m.parameter_count()), 1) < 1e-4);
}

TEST_CASE("gradient accumulates into the buffer") {
  const auto m = TinyLm::init(toy_config(20, 9));
  Rng rng(5);
  const auto enc = random_encoding(rng, 20, 32, true);
  std::vector<double> once(m.parameter_count()), twice(m.parameter_count());
  const double l1 = m.mlm_loss_and_gradient(enc, 6, once);
  m.mlm_loss_and_gradient(enc, 6, twice);
  m.mlm_loss_and_gradient(enc, 6, twice);
  CHECK(l1 == doctest::Approx(m.mlm_loss(enc, 6)));
  for (std::size_t i = 0; i < once.size(); i += 97) CHECK(twice[i] == doctest::Approx(2 * once[i]));
}
