#include "tempo/nn/loss.hpp"

#include <cmath>
#include <string>

#include "tempo/core/error.hpp"

namespace tempo::nn {

Var weighted_cross_entropy(Var logits, std::span<const int> labels,
                           std::span<const double> class_weights) {
  Tape& t = *logits.tape();
  const int il = t.check(logits);
  const Matrix& Z = t.value(il);
  const Index batch = Z.rows();
  const Index classes = Z.cols();
  if (static_cast<Index>(labels.size()) != batch) {
    throw Error(Errc::ShapeError, "label count does not match logits rows");
  }
  if (static_cast<Index>(class_weights.size()) != classes) {
    throw Error(Errc::ShapeError, "need one weight per class");
  }
  for (double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(Errc::ConfigError, "class weights must be positive");
  }
  if (!Z.allFinite()) throw Error(Errc::NumericalError, "non-finite logits");
  if (batch == 0) throw Error(Errc::ShapeError, "empty batch");

  Matrix probs(batch, classes);
  double total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= classes) throw Error(Errc::InvalidValue, "label out of range");
    const double peak = Z.row(b).maxCoeff();
    const double lse = peak + std::log((Z.row(b).array() - peak).exp().sum());
    probs.row(b) = (Z.row(b).array() - lse).exp();
    total += class_weights[static_cast<std::size_t>(y)] * (lse - Z(b, y));
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(batch);
  std::vector<int> ys(labels.begin(), labels.end());
  std::vector<double> ws(class_weights.begin(), class_weights.end());
  return t.record(std::move(out), {il},
                  [il, probs = std::move(probs), ys = std::move(ys), ws = std::move(ws)](Tape& t,
                                                                                      int self) {
                    if (!t.needs_grad(il)) return;
                    const double g = t.grad(self)(0, 0);
                    Matrix& gz = t.grad(il);
                    const double inv_batch = 1.0 / static_cast<double>(probs.rows());
                    for (Index b = 0; b < probs.rows(); ++b) {
                      const int y = ys[static_cast<std::size_t>(b)];
                      const double scale = g * ws[static_cast<std::size_t>(y)] * inv_batch;
                      gz.row(b) += scale * probs.row(b);
                      gz(b, y) -= scale;
                    }
                  });
}

Var mse(Var prediction, const Matrix& target) {
  Tape& t = *prediction.tape();
  const int ip = t.check(prediction);
  const Matrix& P = t.value(ip);
  if (P.rows() != target.rows() || P.cols() != target.cols()) {
    throw Error(Errc::ShapeError, "mse target shape mismatch");
  }
  if (P.size() == 0) throw Error(Errc::ShapeError, "mse of an empty tensor");
  Matrix diff = P - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
  return t.record(std::move(out), {ip}, [ip, diff = std::move(diff)](Tape& t, int self) {
    if (!t.needs_grad(ip)) return;
    t.grad(ip) += diff * (2.0 * t.grad(self)(0, 0) / static_cast<double>(diff.size()));
  });
}

Var masked_mse(Var prediction, const Matrix& target, std::span<const bool> row_mask) {
  Tape& t = *prediction.tape();
  const int ip = t.check(prediction);
  const Matrix& P = t.value(ip);
  if (P.rows() != target.rows() || P.cols() != target.cols() ||
      static_cast<Index>(row_mask.size()) != P.rows()) {
    throw Error(Errc::ShapeError, "masked_mse shape mismatch");
  }
  Matrix diff = Matrix::Zero(P.rows(), P.cols());
  Index valid = 0;
  for (Index r = 0; r < P.rows(); ++r) {
    if (!row_mask[static_cast<std::size_t>(r)]) continue;
    diff.row(r) = P.row(r) - target.row(r);
    ++valid;
  }
  if (valid == 0) throw Error(Errc::ShapeError, "masked_mse with every row masked");
  const double denom = static_cast<double>(valid * P.cols());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / denom;
  return t.record(std::move(out), {ip}, [ip, denom, diff = std::move(diff)](Tape& t, int self) {
    if (!t.needs_grad(ip)) return;
    t.grad(ip) += diff * (2.0 * t.grad(self)(0, 0) / denom);
  });
}

}  // namespace tempo::nn
