#include "cloze/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cloze/rng.hpp"

namespace cloze {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("Adam eps must be > 0");
}

Adam::Adam(std::size_t n_params, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params), v_(n_params) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

TrainResult train_mlm(TinyLm model, const std::vector<MlmExample>& dataset,
                      const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  if (dataset.empty()) throw ValidationError("cannot train on an empty dataset");
  for (const auto& [enc, target] : dataset) {
    if (!enc.mask_position) throw ValidationError("training encoding without a mask position");
    if (target < 0 || target >= model.config().vocab_size) {
      throw ValidationError("training target " + std::to_string(target) +
                            " outside the vocabulary");
    }
  }

  const std::size_t n_params = model.parameter_count();
  Adam adam(n_params, tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps);
  Rng rng(tc.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(n_params);

  TrainResult result;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& [enc, target] = dataset[order[i]];
        epoch_loss += model.mlm_loss_and_gradient(enc, target, grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad) g *= inv;
      adam.step(model.parameters(), grad);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(dataset.size()));
    if (on_epoch && !on_epoch(epoch, model, result.loss_trace.back())) break;
  }
  result.model = std::move(model);
  return result;
}

std::vector<std::size_t> sample_parameter_indices(std::size_t n_total, int n_params,
                                                  std::uint64_t seed) {
  if (n_params < 0) throw ValidationError("n_params must be >= 0");
  const auto want = std::min<std::size_t>(static_cast<std::size_t>(n_params), n_total);
  Rng rng(seed);
  std::set<std::size_t> picked;
  while (picked.size() < want) picked.insert(static_cast<std::size_t>(rng.below(n_total)));
  return {picked.begin(), picked.end()};
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double gradient_check(const TinyLm& model, const SequenceEncoding& encoding, TokenId target,
                      int n_params, std::uint64_t seed) {
  std::vector<double> grad(model.parameter_count());
  model.mlm_loss_and_gradient(encoding, target, grad);

  TinyLm probe = model;
  auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t idx : sample_parameter_indices(params.size(), n_params, seed)) {
    const double saved = params[idx];
    params[idx] = saved + kFiniteDifferenceStep;
    const double up = probe.mlm_loss(encoding, target);
    params[idx] = saved - kFiniteDifferenceStep;
    const double down = probe.mlm_loss(encoding, target);
    params[idx] = saved;
    const double numeric = (up - down) / (2.0 * kFiniteDifferenceStep);
    worst = std::max(worst, relative_error(grad[idx], numeric));
  }
  return worst;
}

}  // namespace cloze
