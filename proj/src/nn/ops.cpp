#include "tempo/nn/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tempo/core/error.hpp"

namespace tempo::nn {
namespace {

std::string shape_of(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeError, what);
}

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw Error(Errc::GraphError, "uninitialised variable");
  return *v.tape();
}

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const int ia = t.check(a), ib = t.check(b);
  const Matrix& A = t.value(ia);
  const Matrix& B = t.value(ib);
  require(A.cols() == B.rows(), "matmul " + shape_of(A) + " * " + shape_of(B));
  Matrix out = A * B;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a);
  const int ia = t.check(a), ib = t.check(b);
  const Matrix& A = t.value(ia);
  const Matrix& B = t.value(ib);
  require(A.cols() == B.cols(), "matmul_nt " + shape_of(A) + " * " + shape_of(B) + "^T");
  Matrix out = A * B.transpose();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib);
    if (t.needs_grad(ib)) t.grad(ib).noalias() += g.transpose() * t.value(ia);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  const int ia = t.check(a), ib = t.check(b);
  require(t.value(ia).rows() == t.value(ib).rows() && t.value(ia).cols() == t.value(ib).cols(),
          "add " + shape_of(t.value(ia)) + " + " + shape_of(t.value(ib)));
  Matrix out = t.value(ia) + t.value(ib);
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g;
    if (t.needs_grad(ib)) t.grad(ib) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const int ia = t.check(a), ib = t.check(b);
  require(t.value(ia).rows() == t.value(ib).rows() && t.value(ia).cols() == t.value(ib).cols(),
          "sub " + shape_of(t.value(ia)) + " - " + shape_of(t.value(ib)));
  Matrix out = t.value(ia) - t.value(ib);
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g;
    if (t.needs_grad(ib)) t.grad(ib) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  const int ia = t.check(a), ib = t.check(b);
  require(t.value(ia).rows() == t.value(ib).rows() && t.value(ia).cols() == t.value(ib).cols(),
          "mul " + shape_of(t.value(ia)) + " .* " + shape_of(t.value(ib)));
  Matrix out = t.value(ia).cwiseProduct(t.value(ib));
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
    if (t.needs_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = tape_of(x);
  const int ix = t.check(x), ib = t.check(bias);
  const Matrix& X = t.value(ix);
  const Matrix& B = t.value(ib);
  require(B.rows() == 1 && B.cols() == X.cols(), "add_bias " + shape_of(X) + " + " + shape_of(B));
  Matrix out = X.rowwise() + B.row(0);
  return t.record(std::move(out), {ix, ib}, [ix, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ix)) t.grad(ix) += g;
    if (t.needs_grad(ib)) t.grad(ib) += g.colwise().sum();
  });
}

Var scale(Var x, double factor) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  Matrix out = t.value(ix) * factor;
  return t.record(std::move(out), {ix}, [ix, factor](Tape& t, int self) {
    if (t.needs_grad(ix)) t.grad(ix) += t.grad(self) * factor;
  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  Matrix out = t.value(ix).cwiseMax(0.0);
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& g = t.grad(self);
    const Matrix& X = t.value(ix);
    t.grad(ix).array() += (X.array() > 0.0).select(g.array(), 0.0);
  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  Matrix out = t.value(ix).unaryExpr([](double z) { return sigmoid_scalar(z); });
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& y = t.value(self);
    t.grad(ix).array() += t.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  Matrix out = t.value(ix).array().tanh().matrix();
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& y = t.value(self);
    t.grad(ix).array() += t.grad(self).array() * (1.0 - y.array().square());
  });
}

Var softmax_rows(Var x, const Mask* mask) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  if (mask != nullptr && (mask->rows() != X.rows() || mask->cols() != X.cols())) {
    throw Error(Errc::MaskError, "mask " + std::to_string(mask->rows()) + "x" +
                                     std::to_string(mask->cols()) + " for scores " + shape_of(X));
  }
  Matrix out = Matrix::Zero(X.rows(), X.cols());
  for (Index r = 0; r < X.rows(); ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < X.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c)) peak = std::max(peak, X(r, c));
    }
    if (peak == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (Index c = 0; c < X.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c)) {
        const double e = std::exp(X(r, c) - peak);
        out(r, c) = e;
        total += e;
      }
    }
    out.row(r) /= total;
  }
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& p = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(ix);
    for (Index r = 0; r < p.rows(); ++r) {
      const double dot = g.row(r).dot(p.row(r));
      gx.row(r).array() += p.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var log_softmax_rows(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  Matrix out(X.rows(), X.cols());
  for (Index r = 0; r < X.rows(); ++r) {
    const double peak = X.row(r).maxCoeff();
    const double lse = peak + std::log((X.row(r).array() - peak).exp().sum());
    out.row(r) = X.row(r).array() - lse;
  }
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(ix);
    for (Index r = 0; r < y.rows(); ++r) {
      const double total = g.row(r).sum();
      gx.row(r).array() += g.row(r).array() - y.row(r).array().exp() * total;
    }
  });
}

Var slice_rows(Var x, Index start, Index count) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  require(start >= 0 && count >= 0 && start + count <= X.rows(),
          "slice_rows out of range for " + shape_of(X));
  Matrix out = X.middleRows(start, count);
  return t.record(std::move(out), {ix}, [ix, start, count](Tape& t, int self) {
    if (t.needs_grad(ix)) t.grad(ix).middleRows(start, count) += t.grad(self);
  });
}

Var slice_cols(Var x, Index start, Index count) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  require(start >= 0 && count >= 0 && start + count <= X.cols(),
          "slice_cols out of range for " + shape_of(X));
  Matrix out = X.middleCols(start, count);
  return t.record(std::move(out), {ix}, [ix, start, count](Tape& t, int self) {
    if (t.needs_grad(ix)) t.grad(ix).middleCols(start, count) += t.grad(self);
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  Tape& t = tape_of(parts.front());
  std::vector<int> ids;
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const Var& p : parts) {
    ids.push_back(t.check(p));
    require(t.value(ids.back()).cols() == cols, "concat_rows column mismatch");
    rows += t.value(ids.back()).rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (int id : ids) {
    out.middleRows(at, t.value(id).rows()) = t.value(id);
    at += t.value(id).rows();
  }
  std::vector<int> parents = ids;
  return t.record(std::move(out), std::move(parents), [ids](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Index at = 0;
    for (int id : ids) {
      const Index n = t.value(id).rows();
      if (t.needs_grad(id)) t.grad(id) += g.middleRows(at, n);
      at += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  Tape& t = tape_of(parts.front());
  std::vector<int> ids;
  Index cols = 0;
  const Index rows = parts.front().rows();
  for (const Var& p : parts) {
    ids.push_back(t.check(p));
    require(t.value(ids.back()).rows() == rows, "concat_cols row mismatch");
    cols += t.value(ids.back()).cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (int id : ids) {
    out.middleCols(at, t.value(id).cols()) = t.value(id);
    at += t.value(id).cols();
  }
  std::vector<int> parents = ids;
  return t.record(std::move(out), std::move(parents), [ids](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Index at = 0;
    for (int id : ids) {
      const Index n = t.value(id).cols();
      if (t.needs_grad(id)) t.grad(id) += g.middleCols(at, n);
      at += n;
    }
  });
}

Var gather_rows(Var table, std::span<const Index> rows) {
  Tape& t = tape_of(table);
  const int it = t.check(table);
  const Matrix& T = t.value(it);
  Matrix out(static_cast<Index>(rows.size()), T.cols());
  std::vector<Index> idx(rows.begin(), rows.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < T.rows(), "gather_rows index out of range");
    out.row(static_cast<Index>(i)) = T.row(idx[i]);
  }
  return t.record(std::move(out), {it}, [it, idx = std::move(idx)](Tape& t, int self) {
    if (!t.needs_grad(it)) return;
    const Matrix& g = t.grad(self);
    Matrix& gt = t.grad(it);
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

Var reshape(Var x, Index rows, Index cols) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  require(rows * cols == X.size(), "reshape " + shape_of(X) + " to " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
  Matrix out = Eigen::Map<const Matrix>(X.data(), rows, cols);
  const Index r0 = X.rows(), c0 = X.cols();
  return t.record(std::move(out), {ix}, [ix, r0, c0](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& g = t.grad(self);
    t.grad(ix) += Eigen::Map<const Matrix>(g.data(), r0, c0);
  });
}

Var transpose(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  Matrix out = t.value(ix).transpose();
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (t.needs_grad(ix)) t.grad(ix) += t.grad(self).transpose();
  });
}

Var mean_rows(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  require(X.rows() > 0, "mean_rows of an empty sequence");
  Matrix out = X.colwise().sum() / static_cast<double>(X.rows());
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    Matrix& gx = t.grad(ix);
    const RowVector g = t.grad(self).row(0) / static_cast<double>(gx.rows());
    gx.rowwise() += g;
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  Matrix out(1, 1);
  out(0, 0) = t.value(ix).sum();
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (t.needs_grad(ix)) t.grad(ix).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var x) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  require(X.size() > 0, "mean of an empty tensor");
  Matrix out(1, 1);
  out(0, 0) = X.sum() / static_cast<double>(X.size());
  return t.record(std::move(out), {ix}, [ix](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    Matrix& gx = t.grad(ix);
    gx.array() += t.grad(self)(0, 0) / static_cast<double>(gx.size());
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(x);
  const int ix = t.check(x), ig = t.check(gamma), ib = t.check(beta);
  const Matrix& X = t.value(ix);
  const Index n = X.cols();
  require(t.value(ig).rows() == 1 && t.value(ig).cols() == n && t.value(ib).rows() == 1 &&
              t.value(ib).cols() == n,
          "layer_norm affine shape for " + shape_of(X));
  Matrix xhat(X.rows(), n);
  Eigen::VectorXd inv_std(X.rows());
  for (Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * t.value(ig).row(0).array()).matrix();
  out.rowwise() += t.value(ib).row(0);
  return t.record(std::move(out), {ix, ig, ib},
                  [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                                     int self) {
                    const Matrix& g = t.grad(self);
                    if (t.needs_grad(ig)) t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
                    if (t.needs_grad(ib)) t.grad(ib) += g.colwise().sum();
                    if (!t.needs_grad(ix)) return;
                    const Matrix dxhat = (g.array().rowwise() * t.value(ig).row(0).array()).matrix();
                    Matrix& gx = t.grad(ix);
                    for (Index r = 0; r < g.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(g.cols());
                      gx.row(r).array() +=
                          inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
}

Var dropout(Var x, double p) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  if (p < 0.0 || p >= 1.0) throw Error(Errc::ConfigError, "dropout probability must be in [0, 1)");
  if (!t.training() || p == 0.0) return x;
  const Matrix& X = t.value(ix);
  Matrix keep(X.rows(), X.cols());
  const double inv = 1.0 / (1.0 - p);
  for (Index i = 0; i < keep.size(); ++i) keep.data()[i] = t.rng().uniform() >= p ? inv : 0.0;
  Matrix out = X.cwiseProduct(keep);
  return t.record(std::move(out), {ix}, [ix, keep = std::move(keep)](Tape& t, int self) {
    if (t.needs_grad(ix)) t.grad(ix) += t.grad(self).cwiseProduct(keep);
  });
}

Var unfold1d(Var x, Index kernel, Index stride, Index pad_left) {
  Tape& t = tape_of(x);
  const int ix = t.check(x);
  const Matrix& X = t.value(ix);
  if (kernel <= 0 || stride <= 0 || pad_left < 0) {
    throw Error(Errc::ConfigError, "unfold1d needs positive kernel and stride");
  }
  const Index steps = X.rows();
  const Index channels = X.cols();
  const Index out_rows = steps == 0 ? 0 : (steps + stride - 1) / stride;
  Matrix out = Matrix::Zero(out_rows, kernel * channels);
  for (Index r = 0; r < out_rows; ++r) {
    for (Index j = 0; j < kernel; ++j) {
      const Index src = r * stride - pad_left + j;
      if (src >= 0 && src < steps) out.block(r, j * channels, 1, channels) = X.row(src);
    }
  }
  return t.record(std::move(out), {ix}, [ix, kernel, stride, pad_left](Tape& t, int self) {
    if (!t.needs_grad(ix)) return;
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(ix);
    const Index channels = gx.cols();
    for (Index r = 0; r < g.rows(); ++r) {
      for (Index j = 0; j < kernel; ++j) {
        const Index src = r * stride - pad_left + j;
        if (src >= 0 && src < gx.rows()) gx.row(src) += g.block(r, j * channels, 1, channels);
      }
    }
  });
}

Var lstm_sequence(Var x, Var w_ih, Var w_hh, Var bias) {
  Tape& t = tape_of(x);
  const int ix = t.check(x), iw = t.check(w_ih), iu = t.check(w_hh), ib = t.check(bias);
  const Matrix& X = t.value(ix);
  const Matrix& W = t.value(iw);
  const Matrix& U = t.value(iu);
  const Matrix& B = t.value(ib);
  const Index hidden = U.rows();
  require(W.rows() == X.cols() && W.cols() == 4 * hidden && U.cols() == 4 * hidden &&
              B.rows() == 1 && B.cols() == 4 * hidden,
          "lstm weights do not match input " + shape_of(X));
  const Index steps = X.rows();

  // gates holds the activated (i, f, g, o) blocks per step
  Matrix gates = X * W;
  gates.rowwise() += B.row(0);
  Matrix cells(steps, hidden);
  Matrix hs(steps, hidden);
  RowVector h = RowVector::Zero(hidden);
  RowVector c = RowVector::Zero(hidden);
  for (Index s = 0; s < steps; ++s) {
    gates.row(s).noalias() += h * U;
    auto row = gates.row(s);
    for (Index k = 0; k < hidden; ++k) {
      row(k) = sigmoid_scalar(row(k));
      row(hidden + k) = sigmoid_scalar(row(hidden + k));
      row(2 * hidden + k) = std::tanh(row(2 * hidden + k));
      row(3 * hidden + k) = sigmoid_scalar(row(3 * hidden + k));
    }
    c = row.segment(hidden, hidden).cwiseProduct(c) +
        row.segment(0, hidden).cwiseProduct(row.segment(2 * hidden, hidden));
    h = row.segment(3 * hidden, hidden).cwiseProduct(c.array().tanh().matrix());
    cells.row(s) = c;
    hs.row(s) = h;
  }
  Matrix out = hs;
  return t.record(
      std::move(out), {ix, iw, iu, ib},
      [ix, iw, iu, ib, gates = std::move(gates), cells = std::move(cells)](Tape& t, int self) {
        const Matrix& dH = t.grad(self);
        const Matrix& hs = t.value(self);
        const Matrix& U = t.value(iu);
        const Index steps = dH.rows();
        const Index hidden = dH.cols();
        Matrix dA(steps, 4 * hidden);
        RowVector dh_next = RowVector::Zero(hidden);
        RowVector dc_next = RowVector::Zero(hidden);
        for (Index s = steps - 1; s >= 0; --s) {
          const auto row = gates.row(s);
          const RowVector tanh_c = cells.row(s).array().tanh().matrix();
          const RowVector dh = dH.row(s) + dh_next;
          const RowVector c_prev = s > 0 ? RowVector(cells.row(s - 1)) : RowVector::Zero(hidden);
          RowVector dc = dc_next;
          dc.array() += dh.array() * row.segment(3 * hidden, hidden).array() *
                        (1.0 - tanh_c.array().square());
          const auto i = row.segment(0, hidden).array();
          const auto f = row.segment(hidden, hidden).array();
          const auto g = row.segment(2 * hidden, hidden).array();
          const auto o = row.segment(3 * hidden, hidden).array();
          dA.row(s).segment(0, hidden) = (dc.array() * g * i * (1.0 - i)).matrix();
          dA.row(s).segment(hidden, hidden) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
          dA.row(s).segment(2 * hidden, hidden) = (dc.array() * i * (1.0 - g.square())).matrix();
          dA.row(s).segment(3 * hidden, hidden) = (dh.array() * tanh_c.array() * o * (1.0 - o)).matrix();
          dc_next = (dc.array() * f).matrix();
          dh_next.noalias() = dA.row(s) * U.transpose();
        }
        if (t.needs_grad(ix)) t.grad(ix).noalias() += dA * t.value(iw).transpose();
        if (t.needs_grad(iw)) t.grad(iw).noalias() += t.value(ix).transpose() * dA;
        if (t.needs_grad(iu) && steps > 1) {
          t.grad(iu).noalias() += hs.topRows(steps - 1).transpose() * dA.bottomRows(steps - 1);
        }
        if (t.needs_grad(ib)) t.grad(ib) += dA.colwise().sum();
      });
}

}  // namespace tempo::nn
