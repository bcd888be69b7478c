#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "tempo/core/error.hpp"
#include "tempo/nn/gradcheck.hpp"
#include "tempo/nn/layers.hpp"
#include "tempo/nn/loss.hpp"
#include "tempo/nn/ops.hpp"
#include "tempo/nn/optim.hpp"
#include "tempo/nn/serialize.hpp"

using namespace tempo;
using namespace tempo::nn;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Dense, IdentityWeightsReproduceInput) {
  Rng rng(1);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix y = dense_forward(x, Matrix::Identity(4, 4), RowVector::Zero(4), Activation::Linear);
  EXPECT_EQ(y, x);
}

TEST(Dense, ReluClampsNegatives) {
  Matrix x(1, 2);
  x << -1.0, 2.0;
  const Matrix y = dense_forward(x, Matrix::Identity(2, 2), RowVector::Zero(2), Activation::Relu);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 2.0);
}

TEST(Dense, MatchesTripleLoopOracle) {
  Rng rng(2);
  const Matrix x = random_matrix(5, 7, rng);
  const Matrix w = random_matrix(7, 3, rng);
  const RowVector b = random_matrix(1, 3, rng);
  const Matrix y = dense_forward(x, w, b, Activation::Linear);
  for (Index r = 0; r < 5; ++r) {
    for (Index c = 0; c < 3; ++c) {
      double acc = b(c);
      for (Index k = 0; k < 7; ++k) acc += x(r, k) * w(k, c);
      EXPECT_NEAR(y(r, c), acc, 1e-12);
    }
  }
  // the tape path agrees with the reference path
  ParameterSet params;
  Dense layer(params, "d", {7, 3}, rng);
  layer.weight().value = w;
  layer.bias().value = b;
  Tape tape;
  EXPECT_LT((layer(tape, tape.constant(x)).value() - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dense, ShapeMismatchThrows) {
  Rng rng(3);
  ParameterSet params;
  Dense layer(params, "d", {4, 2}, rng);
  Tape tape;
  expect_errc(Errc::ShapeError, [&] { layer(tape, tape.constant(Matrix::Zero(1, 3))); });
}

TEST(LstmStep, ZeroWeightsStayAtZero) {
  LstmState s{RowVector::Zero(3), RowVector::Zero(3)};
  const LstmState next = lstm_step(RowVector::Ones(2), s, Matrix::Zero(2, 12), Matrix::Zero(3, 12),
                                   RowVector::Zero(12));
  EXPECT_EQ(next.h, RowVector::Zero(3));
  EXPECT_EQ(next.c, RowVector::Zero(3));
}

TEST(LstmStep, LargeForgetBiasKeepsCell) {
  Rng rng(4);
  const Index hidden = 3;
  Matrix w_ih = random_matrix(2, 4 * hidden, rng, 0.3);
  Matrix w_hh = random_matrix(hidden, 4 * hidden, rng, 0.3);
  RowVector bias = RowVector::Zero(4 * hidden);
  bias.segment(hidden, hidden).setConstant(40.0);
  const RowVector x = random_matrix(1, 2, rng);
  const LstmState s{random_matrix(1, hidden, rng), random_matrix(1, hidden, rng)};
  const LstmState next = lstm_step(x, s, w_ih, w_hh, bias);
  const RowVector a = x * w_ih + s.h * w_hh + bias;
  for (Index k = 0; k < hidden; ++k) {
    const double i = sigmoid_ref(a(k));
    const double g = std::tanh(a(2 * hidden + k));
    EXPECT_NEAR(next.c(k), s.c(k) + i * g, 1e-12);
  }
}

TEST(LstmStep, MatchesGateFormulaOracle) {
  Rng rng(5);
  const Index in = 3, hidden = 4;
  const Matrix w_ih = random_matrix(in, 4 * hidden, rng, 0.5);
  const Matrix w_hh = random_matrix(hidden, 4 * hidden, rng, 0.5);
  const RowVector bias = random_matrix(1, 4 * hidden, rng, 0.5);
  const RowVector x = random_matrix(1, in, rng);
  const LstmState s{random_matrix(1, hidden, rng), random_matrix(1, hidden, rng)};
  const LstmState next = lstm_step(x, s, w_ih, w_hh, bias);
  for (Index k = 0; k < hidden; ++k) {
    double pre[4];
    for (int gate = 0; gate < 4; ++gate) {
      const Index col = gate * hidden + k;
      double acc = bias(col);
      for (Index j = 0; j < in; ++j) acc += x(j) * w_ih(j, col);
      for (Index j = 0; j < hidden; ++j) acc += s.h(j) * w_hh(j, col);
      pre[gate] = acc;
    }
    const double c = sigmoid_ref(pre[1]) * s.c(k) + sigmoid_ref(pre[0]) * std::tanh(pre[2]);
    EXPECT_NEAR(next.c(k), c, 1e-12);
    EXPECT_NEAR(next.h(k), sigmoid_ref(pre[3]) * std::tanh(c), 1e-12);
  }
}

TEST(LstmSequence, AgreesWithSteppedCell) {
  Rng rng(6);
  ParameterSet params;
  Lstm lstm(params, "l", {3, 5}, rng);
  const Matrix x = random_matrix(6, 3, rng);
  Tape tape;
  const Matrix hs = lstm(tape, tape.constant(x)).value();
  LstmState s{RowVector::Zero(5), RowVector::Zero(5)};
  for (Index t = 0; t < 6; ++t) {
    s = lstm_step(x.row(t), s, params[0].value, params[1].value, params[2].value);
    EXPECT_LT((hs.row(t) - s.h).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Attention, SingleKeyReturnsItsValue) {
  Rng rng(7);
  Tape tape;
  Var q = tape.constant(random_matrix(3, 4, rng));
  Var k = tape.constant(random_matrix(1, 4, rng));
  const Matrix vv = random_matrix(1, 4, rng);
  const Matrix out = attention(q, k, tape.constant(vv), 2, nullptr).value();
  for (Index r = 0; r < 3; ++r) EXPECT_LT((out.row(r) - vv.row(0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Attention, UniformKeysAverageValues) {
  Rng rng(8);
  Tape tape;
  Matrix keys(4, 2);
  keys.rowwise() = random_matrix(1, 2, rng).row(0);
  const Matrix vv = random_matrix(4, 2, rng);
  const Matrix out =
      attention(tape.constant(random_matrix(2, 2, rng)), tape.constant(keys), tape.constant(vv), 1, nullptr)
          .value();
  const RowVector mean = vv.colwise().mean();
  for (Index r = 0; r < 2; ++r) EXPECT_LT((out.row(r) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, MatchesPerHeadOracle) {
  Rng rng(9);
  const Index heads = 2, dk = 3, dv = 2, tq = 4, tk = 5;
  const Matrix q = random_matrix(tq, heads * dk, rng);
  const Matrix k = random_matrix(tk, heads * dk, rng);
  const Matrix v = random_matrix(tk, heads * dv, rng);
  Mask mask = Mask::Constant(tq, tk, true);
  mask(0, 4) = false;
  mask(2, 1) = false;
  Tape tape;
  const Matrix out =
      attention(tape.constant(q), tape.constant(k), tape.constant(v), heads, &mask).value();
  for (Index h = 0; h < heads; ++h) {
    for (Index i = 0; i < tq; ++i) {
      std::vector<double> w(tk, 0.0);
      double total = 0.0;
      for (Index j = 0; j < tk; ++j) {
        if (!mask(i, j)) continue;
        double s = 0.0;
        for (Index d = 0; d < dk; ++d) s += q(i, h * dk + d) * k(j, h * dk + d);
        w[j] = std::exp(s / std::sqrt(double(dk)));
        total += w[j];
      }
      for (Index d = 0; d < dv; ++d) {
        double acc = 0.0;
        for (Index j = 0; j < tk; ++j) acc += w[j] / total * v(j, h * dv + d);
        EXPECT_NEAR(out(i, h * dv + d), acc, 1e-10);
      }
    }
  }
}

TEST(Attention, MaskShapeMismatchThrows) {
  Rng rng(10);
  Tape tape;
  Mask bad = Mask::Constant(2, 2, true);
  expect_errc(Errc::MaskError, [&] {
    attention(tape.constant(random_matrix(3, 2, rng)), tape.constant(random_matrix(3, 2, rng)),
              tape.constant(random_matrix(3, 2, rng)), 1, &bad);
  });
}

TEST(Attention, PaddedKeysGetExactlyZeroWeight) {
  Rng rng(11);
  Tape tape;
  Mask mask = Mask::Constant(3, 5, true);
  mask.rightCols(2).setConstant(false);
  Var w = softmax_rows(tape.constant(random_matrix(3, 5, rng)), &mask);
  EXPECT_EQ(w.value().rightCols(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(3, 6, rng, 5.0);
    Tape tape;
    const Matrix p = softmax_rows(tape.constant(x)).value();
    const Matrix p2 = softmax_rows(tape.constant((x.array() + 123.4).matrix())).value();
    for (Index r = 0; r < 3; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    EXPECT_LT((p - p2).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PositionalEncoding, RowZeroAlternates) {
  const Matrix pe = positional_encoding(8, 4);
  for (Index i = 0; i < 8; ++i) EXPECT_EQ(pe(0, i), i % 2 == 0 ? 0.0 : 1.0);
}

TEST(PositionalEncoding, BoundedAndSpotValues) {
  const Matrix pe = positional_encoding(16, 200);
  EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0);
  for (Index pos : {1, 7, 50, 199}) {
    // sin via its Taylor series with range reduction, no libm
    double x = static_cast<double>(pos);
    const double two_pi = 2.0 * std::numbers::pi;
    x -= two_pi * std::floor(x / two_pi);
    double term = x, series = 0.0;
    for (int n = 1; n < 60; n += 2) {
      series += term;
      term *= -x * x / ((n + 1) * (n + 2));
    }
    EXPECT_NEAR(pe(pos, 0), series, 1e-12);
  }
}

TEST(PositionalEncoding, OddWidthIsConfigError) {
  expect_errc(Errc::ConfigError, [] { positional_encoding(7, 10); });
}

TEST(CrossEntropy, EqualLogitsGiveLn2) {
  Tape tape;
  const std::vector<int> labels{0};
  const std::vector<double> weights{1.0, 196.0 / 27.0};
  Var loss = weighted_cross_entropy(tape.constant(Matrix::Zero(1, 2)), labels, weights);
  EXPECT_NEAR(loss.value()(0, 0), std::log(2.0), 1e-15);
}

TEST(CrossEntropy, AsdWeightScalesLoss) {
  Tape tape;
  const std::vector<int> labels{1};
  const std::vector<double> weights{1.0, 196.0 / 27.0};
  Var loss = weighted_cross_entropy(tape.constant(Matrix::Zero(1, 2)), labels, weights);
  EXPECT_NEAR(loss.value()(0, 0), 196.0 / 27.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(loss.value()(0, 0), 5.032, 5e-4);
}

TEST(CrossEntropy, DoublingWeightDoublesAsdLoss) {
  Rng rng(13);
  const Matrix z = random_matrix(1, 2, rng);
  const std::vector<int> labels{1};
  const std::vector<double> w1{1.0, 3.0}, w2{1.0, 6.0};
  Tape tape;
  const double a = weighted_cross_entropy(tape.constant(z), labels, w1).value()(0, 0);
  const double b = weighted_cross_entropy(tape.constant(z), labels, w2).value()(0, 0);
  EXPECT_EQ(b, 2.0 * a);
}

TEST(CrossEntropy, NonFiniteLogitsRaise) {
  Tape tape;
  Matrix z(1, 2);
  z << 0.0, std::numeric_limits<double>::infinity();
  const std::vector<int> labels{0};
  const std::vector<double> w{1.0, 1.0};
  expect_errc(Errc::NumericalError, [&] { weighted_cross_entropy(tape.constant(z), labels, w); });
}

TEST(Adam, FirstUnitGradientStepsByLr) {
  Rng rng(14);
  ParameterSet params;
  Parameter& p = params.add("p", 2, 3, Init::Zeros, rng);
  p.grad = Matrix::Ones(2, 3);
  adam_step(p, 0.001, AdamConfig{});
  EXPECT_NEAR(p.value(0, 0), -0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  Rng rng(15);
  ParameterSet params;
  Parameter& p = params.add("p", 2, 2, Init::Xavier, rng);
  const Matrix before = p.value;
  p.zero_grad();
  adam_step(p, 0.01, AdamConfig{});
  EXPECT_EQ(p.value, before);
}

TEST(Adam, EmptyGradientIsOptimizerError) {
  Rng rng(16);
  ParameterSet params;
  Parameter& p = params.add("p", 2, 2, Init::Xavier, rng);
  expect_errc(Errc::OptimizerError, [&] { adam_step(p, 0.01, AdamConfig{}); });
}

TEST(Adam, ThreeStepsMatchRecurrenceOracle) {
  Rng rng(17);
  ParameterSet params;
  Parameter& p = params.add("p", 1, 3, Init::Xavier, rng);
  const AdamConfig cfg{0.9, 0.999, 1e-8, 0.01, DecayMode::WeightDecay};
  const double lr = 0.001;
  double x[3], m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
  for (int i = 0; i < 3; ++i) x[i] = p.value(0, i);
  const double grads[3][3] = {{0.5, -1.0, 2.0}, {0.1, 0.3, -0.7}, {-0.2, 0.0, 1.5}};
  for (int step = 1; step <= 3; ++step) {
    for (int i = 0; i < 3; ++i) p.grad.resize(1, 3), p.grad(0, i) = grads[step - 1][i];
    adam_step(p, lr, cfg);
    for (int i = 0; i < 3; ++i) {
      const double g = grads[step - 1][i];
      x[i] -= lr * 0.01 * x[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, step));
      const double vh = v[i] / (1 - std::pow(0.999, step));
      x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.value(0, i), x[i], 1e-12);
}

TEST(Noam, ClosedFormValues) {
  EXPECT_NEAR(noam_lr(400), 7.5e-4, 1e-12);
  EXPECT_NEAR(noam_lr(100), 1.875e-4, 1e-12);
  EXPECT_LT(noam_lr(399), noam_lr(400));
  EXPECT_GT(noam_lr(400), noam_lr(401));
  expect_errc(Errc::DomainError, [] { noam_lr(0); });
}

TEST(Backward, SumGivesOnes) {
  Rng rng(18);
  ParameterSet params;
  Parameter& p = params.add("x", 3, 4, Init::Xavier, rng);
  Tape tape;
  tape.backward(sum(tape.param(p)));
  EXPECT_EQ(p.grad, Matrix::Ones(3, 4));
}

TEST(Backward, HalfSquaredNormGivesX) {
  Rng rng(19);
  ParameterSet params;
  Parameter& p = params.add("x", 2, 5, Init::Xavier, rng);
  Tape tape;
  Var x = tape.param(p);
  tape.backward(scale(sum(mul(x, x)), 0.5));
  EXPECT_LT((p.grad - p.value).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, ForeignVariableIsGraphError) {
  Tape a, b;
  Var x = a.constant(Matrix::Ones(2, 2));
  Var y = b.constant(Matrix::Ones(2, 2));
  expect_errc(Errc::GraphError, [&] { add(x, y); });
  expect_errc(Errc::GraphError, [&] { b.backward(sum(x)); });
}

TEST(Backward, IsDeterministic) {
  Rng rng(20);
  ParameterSet params;
  Lstm lstm(params, "l", {3, 4}, rng);
  const Matrix x = random_matrix(7, 3, rng);
  auto run = [&] {
    params.zero_grad();
    Tape tape;
    tape.backward(sum(lstm(tape, tape.constant(x))));
    return params[1].grad;
  };
  EXPECT_EQ(run(), run());
}

// Finite-difference gradient checks for every layer family.

TEST(GradCheck, DenseRelu) {
  Rng rng(21);
  ParameterSet params;
  Dense d1(params, "d1", {4, 6, Activation::Relu}, rng);
  Dense d2(params, "d2", {6, 2}, rng);
  const Matrix x = random_matrix(5, 4, rng);
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const std::vector<double> weights{1.0, 2.5};
  auto report = grad_check(params, [&](Tape& t) {
    return weighted_cross_entropy(d2(t, d1(t, t.constant(x))), labels, weights);
  });
  EXPECT_TRUE(report.pass()) << report.max_error();
}

TEST(GradCheck, Lstm) {
  Rng rng(22);
  ParameterSet params;
  Lstm lstm(params, "l", {3, 4}, rng);
  Dense head(params, "h", {4, 2}, rng);
  const Matrix x = random_matrix(4, 3, rng);
  const std::vector<int> labels{1};
  const std::vector<double> weights{1.0, 1.0};
  auto report = grad_check(params, [&](Tape& t) {
    Var hs = lstm(t, t.constant(x));
    return add(weighted_cross_entropy(head(t, lstm.last(t, t.constant(x))), labels, weights),
               scale(sum(mul(hs, hs)), 0.1));
  });
  EXPECT_TRUE(report.pass()) << report.max_error();
}

TEST(GradCheck, Conv1d) {
  Rng rng(23);
  ParameterSet params;
  Conv1d conv(params, "c", {3, 4, 3, 2, Activation::Tanh}, rng);
  Parameter& input = params.add("input", 7, 3, Init::Normal, rng);
  auto report = grad_check(params, [&](Tape& t) {
    Var y = conv(t, t.param(input));
    return sum(mul(y, y));
  });
  EXPECT_TRUE(report.pass()) << report.max_error();
}

TEST(GradCheck, AttentionBlock) {
  Rng rng(24);
  ParameterSet params;
  EncoderBlock block(params, "b", {4, 1, 4, 4}, 6, 0.0, rng);
  Parameter& input = params.add("input", 5, 4, Init::Normal, rng);
  Mask mask = Mask::Constant(5, 5, true);
  mask.col(4).setConstant(false);
  auto report = grad_check(params, [&](Tape& t) {
    Var y = block(t, t.param(input), &mask);
    return sum(mul(y, tanh(y)));
  });
  EXPECT_TRUE(report.pass()) << report.max_error();
}

TEST(GradCheck, LayerNormAndSoftmax) {
  Rng rng(25);
  ParameterSet params;
  LayerNorm norm(params, "n", {5}, rng);
  Parameter& input = params.add("input", 3, 5, Init::Normal, rng);
  params[0].value = random_matrix(1, 5, rng);
  params[1].value = random_matrix(1, 5, rng);
  const Matrix target = random_matrix(3, 5, rng);
  auto report = grad_check(params, [&](Tape& t) {
    return mse(softmax_rows(norm(t, t.param(input))), target);
  });
  EXPECT_TRUE(report.pass()) << report.max_error();
}

TEST(GradCheck, DecoderBlockWithCrossAttention) {
  Rng rng(26);
  ParameterSet params;
  DecoderBlock block(params, "dec", {4, 2, 2, 2}, 5, 0.0, rng);
  Parameter& input = params.add("input", 3, 4, Init::Normal, rng);
  Parameter& memory = params.add("memory", 2, 4, Init::Normal, rng);
  const Matrix target = random_matrix(3, 4, rng);
  auto report = grad_check(params, [&](Tape& t) {
    return mse(block(t, t.param(input), t.param(memory)), target);
  });
  EXPECT_TRUE(report.pass()) << report.max_error();
}

TEST(Causal, FutureInputsDoNotAffectPast) {
  Rng rng(27);
  ParameterSet params;
  DecoderBlock block(params, "dec", {4, 2, 2, 2}, 8, 0.0, rng);
  const Matrix memory = random_matrix(2, 4, rng);
  Matrix x = random_matrix(6, 4, rng);
  Tape t1;
  const Matrix base = block(t1, t1.constant(x), t1.constant(memory)).value();
  for (Index step = 1; step < 6; ++step) {
    Matrix perturbed = x;
    perturbed.row(step).array() += 3.0;
    Tape t2;
    const Matrix out = block(t2, t2.constant(perturbed), t2.constant(memory)).value();
    EXPECT_EQ(out.topRows(step), base.topRows(step)) << "step " << step;
    EXPECT_NE(out.row(step), base.row(step));
  }
}

TEST(Dropout, InferenceIsIdentity) {
  Rng rng(28);
  Tape tape(false);
  Var x = tape.constant(random_matrix(4, 4, rng));
  EXPECT_EQ(dropout(x, 0.3).value(), x.value());
}

TEST(Dropout, TrainingPreservesExpectation) {
  Tape tape(true, 99);
  Var x = tape.constant(Matrix::Constant(100, 100, 2.0));
  const double mean_out = dropout(x, 0.3).value().mean();
  EXPECT_NEAR(mean_out / 2.0, 1.0, 0.02);
}

TEST(LayerNorm, NormalisesRows) {
  Rng rng(29);
  ParameterSet params;
  LayerNorm norm(params, "n", {16}, rng);
  Tape tape;
  const Matrix y = norm(tape, tape.constant(random_matrix(8, 16, rng, 3.0))).value();
  for (Index r = 0; r < 8; ++r) {
    const double mu = y.row(r).mean();
    const double var = (y.row(r).array() - mu).square().mean();
    EXPECT_LT(std::abs(mu), 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(MaskedMse, PaddedRowsContributeNothing) {
  Rng rng(30);
  ParameterSet params;
  Parameter& p = params.add("p", 5, 3, Init::Normal, rng);
  Matrix target = random_matrix(5, 3, rng);
  const bool mask[5] = {true, true, true, false, false};
  Tape t1;
  t1.backward(masked_mse(t1.param(p), target, mask));
  const Matrix g1 = p.grad;
  p.zero_grad();
  target.bottomRows(2).setConstant(1e6);
  Tape t2;
  t2.backward(masked_mse(t2.param(p), target, mask));
  EXPECT_EQ(p.grad, g1);
  EXPECT_EQ(g1.bottomRows(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LayerSpec, ParameterCounts) {
  EXPECT_EQ(parameter_count(DenseSpec{18, 64}), 18u * 64 + 64);
  EXPECT_EQ(parameter_count(LstmSpec{18, 224}), 4u * 224 * (18 + 224) + 4 * 224);
  EXPECT_EQ(parameter_count(Conv1dSpec{18, 64, 5}), 5u * 18 * 64 + 64);
  EXPECT_EQ(parameter_count(AttentionSpec{512, 8, 64, 64}), 4u * (512 * 512 + 512));
  EXPECT_EQ(parameter_count(LayerNormSpec{64}), 128u);
  EXPECT_THROW(parameter_count(DenseSpec{0, 3}), Error);
}

TEST(Serialize, RoundTripAndHashCheck) {
  Rng rng(31);
  ParameterSet params;
  Dense d(params, "d", {3, 2}, rng);
  const nlohmann::json descriptor = {{"family", "toy"}, {"width", 3}};
  std::stringstream buffer;
  write_model(buffer, descriptor, {{"seed", 31}}, params);
  const std::string bytes = buffer.str();

  std::stringstream in(bytes);
  ModelFile file = read_model(in);
  ParameterSet fresh;
  Rng other(0);
  Dense d2(fresh, "d", {3, 2}, other);
  load_parameters(fresh, file);
  EXPECT_EQ(fresh[0].value, params[0].value);
  EXPECT_EQ(file.header["seed"], 31);

  std::string tampered = bytes;
  const auto at = tampered.find("\"width\":3");
  ASSERT_NE(at, std::string::npos);
  tampered[at + 8] = '4';
  std::stringstream bad(tampered);
  expect_errc(Errc::FormatError, [&] { read_model(bad); });
}
