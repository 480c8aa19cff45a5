#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "cloze/model.hpp"

namespace cloze {

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 1;
  int batch_size = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n_params, double learning_rate, double beta1, double beta2, double eps);

  void step(std::span<double> params, std::span<const double> grad);
  long long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

// One (encoding, gold token) pair; the encoding must carry a mask position.
using MlmExample = std::pair<SequenceEncoding, TokenId>;

struct TrainResult {
  TinyLm model;
  std::vector<double> loss_trace;  // mean loss per epoch
};

// Called after every epoch with the updated model; return false to stop.
using EpochCallback = std::function<bool(int epoch, const TinyLm& model, double mean_loss)>;

// Minimizes mean masked-token cross-entropy with Adam. Each epoch visits the
// data once in an order shuffled by tc.seed; batch gradients are summed in
// a fixed order so the loss trace is bit-stable.
TrainResult train_mlm(TinyLm model, const std::vector<MlmExample>& dataset,
                      const TrainConfig& tc, const EpochCallback& on_epoch = {});

// Parameter indices sampled by gradient_check for a given seed (distinct,
// sorted).
std::vector<std::size_t> sample_parameter_indices(std::size_t n_total, int n_params,
                                                  std::uint64_t seed);

inline constexpr double kFiniteDifferenceStep = 1e-5;

// |a - f| / max(|a|, |f|, 1e-8).
double relative_error(double analytic, double numeric);

// Max relative error between the analytic MLM loss gradient and central
// finite differences over sampled parameters.
double gradient_check(const TinyLm& model, const SequenceEncoding& encoding, TokenId target,
                      int n_params, std::uint64_t seed);

}  // namespace cloze
