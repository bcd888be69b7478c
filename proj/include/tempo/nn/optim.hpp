#pragma once

#include <cstdint>

#include "tempo/nn/tensor.hpp"

namespace tempo::nn {

/// How the "decay" coefficient is applied.
enum class DecayMode {
  /// Decoupled weight decay: p <- p - lr * decay * p before the Adam update.
  WeightDecay,
  /// Time-based learning-rate decay: lr_t = lr / (1 + decay * t).
  LearningRate,
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 0.0;
  DecayMode decay_mode = DecayMode::WeightDecay;
};

/// One bias-corrected Adam update of a single parameter from its current
/// gradient. OptimizerError if the gradient was never populated.
void adam_step(Parameter& param, double lr, const AdamConfig& config);

/// Applies adam_step to every parameter in the set.
void adam_step(ParameterSet& params, double lr, const AdamConfig& config);

/// base * min(step^-1/2, step * warmup^-3/2); peaks at step == warmup.
/// DomainError for step < 1.
double noam_lr(std::int64_t step, std::int64_t warmup = 400, double base = 0.015);

}  // namespace tempo::nn
