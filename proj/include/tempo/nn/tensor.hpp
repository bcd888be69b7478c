#pragma once

#include <cstdint>
#include <deque>
#include <string>

#include <Eigen/Dense>

#include "tempo/core/rng.hpp"

namespace tempo::nn {

using Index = Eigen::Index;
/// Dense row-major matrix of doubles; the only tensor rank the engine needs.
/// Batches of variable-length sequences are carried as lists of matrices.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor with its gradient and Adam moments. The gradient and
/// moments are allocated on first use so that very large models can be built
/// (e.g. to count parameters) without paying for optimiser state.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
  std::int64_t step = 0;

  Index size() const { return value.size(); }
  void ensure_grad();
  void zero_grad();
};

enum class Init { Zeros, Ones, Xavier, LstmUniform, Normal };

/// Owns parameters in declaration order. Addresses are stable.
class ParameterSet {
 public:
  Parameter& add(std::string name, Index rows, Index cols, Init init, Rng& rng);

  std::size_t count() const;
  std::size_t size() const { return params_.size(); }
  void zero_grad();

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
};

}  // namespace tempo::nn
