#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "tempo/core/rng.hpp"
#include "tempo/nn/tensor.hpp"

namespace tempo::nn {

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so a
/// node's parents always precede it and the backward sweep is a single pass
/// over the tape in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool training = false, std::uint64_t seed = 0)
      : training_(training), rng_(seed) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const { return training_; }
  Rng& rng() { return rng_; }

  Var constant(Matrix value);
  /// Binds a parameter as a leaf; binding the same parameter twice returns
  /// the same node.
  Var param(Parameter& p);

  Var record(Matrix value, std::vector<int> parents, Backward backward);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  /// Gradient accumulator of a node, zero-initialised on first access.
  Matrix& grad(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() > 0; }
  /// False for constants and for nodes computed only from constants.
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss, sweeps the tape in reverse
  /// and accumulates into every bound Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  /// Throws GraphError unless v was recorded on this tape.
  int check(const Var& v) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> parents;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> bound_;
  bool training_;
  Rng rng_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

}  // namespace tempo::nn
