#include "tempo/nn/tape.hpp"

#include <string>

#include "tempo/core/error.hpp"

namespace tempo::nn {

int Tape::check(const Var& v) const {
  if (v.tape_ != this) throw Error(Errc::GraphError, "variable belongs to a different tape");
  if (v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw Error(Errc::GraphError, "dangling variable id " + std::to_string(v.id_));
  }
  return v.id_;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  bound_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::vector<int> parents, Backward backward) {
  const int self = static_cast<int>(nodes_.size());
  for (int p : parents) {
    // parents must precede their child; anything else would be a cycle
    if (p < 0 || p >= self) throw Error(Errc::GraphError, "edge would create a cycle");
  }
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(p)].needs_grad;
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, self);
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  const int root = check(loss);
  if (value(root).rows() != 1 || value(root).cols() != 1) {
    throw Error(Errc::ShapeError, "backward() needs a 1x1 loss");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad(root).setConstant(1.0);
  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0 || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      n.param->ensure_grad();
      n.param->grad += n.grad;
    }
  }
}

}  // namespace tempo::nn
