#include "tempo/nn/optim.hpp"

#include <cmath>

#include "tempo/core/error.hpp"

namespace tempo::nn {

void adam_step(Parameter& param, double lr, const AdamConfig& config) {
  if (param.grad.size() == 0 || param.grad.rows() != param.value.rows() ||
      param.grad.cols() != param.value.cols()) {
    throw Error(Errc::OptimizerError, "Adam step on '" + param.name + "' without a gradient");
  }
  if (param.m.size() == 0) {
    param.m = Matrix::Zero(param.value.rows(), param.value.cols());
    param.v = Matrix::Zero(param.value.rows(), param.value.cols());
  }
  param.step += 1;
  const double t = static_cast<double>(param.step);
  double step_lr = lr;
  if (config.decay_mode == DecayMode::LearningRate) {
    step_lr = lr / (1.0 + config.decay * (t - 1.0));
  } else if (config.decay > 0.0) {
    param.value *= 1.0 - lr * config.decay;
  }
  param.m = config.beta1 * param.m + (1.0 - config.beta1) * param.grad;
  param.v = config.beta2 * param.v + (1.0 - config.beta2) * param.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  param.value.array() -=
      step_lr * (param.m.array() / c1) / ((param.v.array() / c2).sqrt() + config.eps);
}

void adam_step(ParameterSet& params, double lr, const AdamConfig& config) {
  for (auto& p : params) adam_step(p, lr, config);
}

double noam_lr(std::int64_t step, std::int64_t warmup, double base) {
  if (step < 1) throw Error(Errc::DomainError, "Noam schedule is defined for step >= 1");
  if (warmup < 1) throw Error(Errc::DomainError, "Noam warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return base * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

}  // namespace tempo::nn
