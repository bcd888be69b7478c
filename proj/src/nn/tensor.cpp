#include "tempo/nn/tensor.hpp"

#include <cmath>

namespace tempo::nn {

void Parameter::ensure_grad() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
}

void Parameter::zero_grad() {
  ensure_grad();
  grad.setZero();
}

Parameter& ParameterSet::add(std::string name, Index rows, Index cols, Init init, Rng& rng) {
  Parameter& p = params_.emplace_back();
  p.name = std::move(name);
  p.value.resize(rows, cols);
  switch (init) {
    case Init::Zeros:
      p.value.setZero();
      break;
    case Init::Ones:
      p.value.setOnes();
      break;
    case Init::Xavier: {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-limit, limit);
      break;
    }
    case Init::LstmUniform: {
      // cols = 4 * hidden for both LSTM weight matrices
      const double limit = 1.0 / std::sqrt(static_cast<double>(cols / 4));
      for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-limit, limit);
      break;
    }
    case Init::Normal: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
      for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = scale * rng.normal();
      break;
    }
  }
  return p;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace tempo::nn
