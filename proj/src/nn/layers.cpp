#include "tempo/nn/layers.hpp"

#include <cmath>
#include <string>

#include "tempo/core/error.hpp"

namespace tempo::nn {
namespace {

void positive(Index v, const char* what) {
  if (v <= 0) throw Error(Errc::ConfigError, std::string(what) + " must be positive");
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void validate(const LayerSpec& spec) {
  std::visit(Overloaded{
                 [](const DenseSpec& s) {
                   positive(s.in, "dense input width");
                   positive(s.out, "dense output width");
                 },
                 [](const LstmSpec& s) {
                   positive(s.in, "lstm input width");
                   positive(s.hidden, "lstm hidden width");
                 },
                 [](const Conv1dSpec& s) {
                   positive(s.in, "conv input channels");
                   positive(s.out, "conv output channels");
                   positive(s.kernel, "conv kernel");
                   positive(s.stride, "conv stride");
                 },
                 [](const AttentionSpec& s) {
                   positive(s.d_model, "d_model");
                   positive(s.heads, "heads");
                   positive(s.d_k, "d_k");
                   positive(s.d_v, "d_v");
                 },
                 [](const PositionalEncodingSpec& s) {
                   positive(s.d, "encoding width");
                   positive(s.max_len, "encoding length");
                   if (s.d % 2 != 0) throw Error(Errc::ConfigError, "positional encoding width must be even");
                 },
                 [](const LayerNormSpec& s) { positive(s.d, "layer norm width"); },
                 [](const DropoutSpec& s) {
                   if (s.p < 0.0 || s.p >= 1.0) throw Error(Errc::ConfigError, "dropout must be in [0, 1)");
                 },
                 [](const EmbeddingSpec& s) {
                   positive(s.vocab, "vocabulary");
                   positive(s.d, "embedding width");
                 },
                 [](const SoftmaxSpec&) {},
             },
             spec);
}

std::size_t parameter_count(const LayerSpec& spec) {
  validate(spec);
  return std::visit(
      Overloaded{
          [](const DenseSpec& s) { return static_cast<std::size_t>(s.in * s.out + s.out); },
          [](const LstmSpec& s) {
            return static_cast<std::size_t>(4 * s.hidden * (s.in + s.hidden) + 4 * s.hidden);
          },
          [](const Conv1dSpec& s) {
            return static_cast<std::size_t>(s.kernel * s.in * s.out + s.out);
          },
          [](const AttentionSpec& s) {
            const Index qk = s.heads * s.d_k;
            const Index v = s.heads * s.d_v;
            return static_cast<std::size_t>(2 * (s.d_model * qk + qk) + (s.d_model * v + v) +
                                            (v * s.d_model + s.d_model));
          },
          [](const PositionalEncodingSpec&) { return std::size_t{0}; },
          [](const LayerNormSpec& s) { return static_cast<std::size_t>(2 * s.d); },
          [](const DropoutSpec&) { return std::size_t{0}; },
          [](const EmbeddingSpec& s) { return static_cast<std::size_t>(s.vocab * s.d); },
          [](const SoftmaxSpec&) { return std::size_t{0}; },
      },
      spec);
}

Var activate(Var x, Activation activation) {
  switch (activation) {
    case Activation::Linear: return x;
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  return x;
}

Matrix dense_forward(const Matrix& x, const Matrix& weight, const RowVector& bias,
                     Activation activation) {
  if (x.cols() != weight.rows() || bias.cols() != weight.cols()) {
    throw Error(Errc::ShapeError, "dense_forward shape mismatch");
  }
  Matrix y = x * weight;
  y.rowwise() += bias;
  switch (activation) {
    case Activation::Linear: break;
    case Activation::Relu: y = y.cwiseMax(0.0); break;
    case Activation::Tanh: y = y.array().tanh().matrix(); break;
    case Activation::Sigmoid: y = y.unaryExpr([](double z) { return sigmoid_scalar(z); }); break;
  }
  return y;
}

LstmState lstm_step(const RowVector& x, const LstmState& state, const Matrix& w_ih,
                    const Matrix& w_hh, const RowVector& bias) {
  const Index hidden = w_hh.rows();
  if (x.cols() != w_ih.rows() || w_ih.cols() != 4 * hidden || w_hh.cols() != 4 * hidden ||
      bias.cols() != 4 * hidden || state.h.cols() != hidden || state.c.cols() != hidden) {
    throw Error(Errc::ShapeError, "lstm_step shape mismatch");
  }
  const RowVector a = x * w_ih + state.h * w_hh + bias;
  LstmState next;
  next.c.resize(hidden);
  next.h.resize(hidden);
  for (Index k = 0; k < hidden; ++k) {
    const double i = sigmoid_scalar(a(k));
    const double f = sigmoid_scalar(a(hidden + k));
    const double g = std::tanh(a(2 * hidden + k));
    const double o = sigmoid_scalar(a(3 * hidden + k));
    next.c(k) = f * state.c(k) + i * g;
    next.h(k) = o * std::tanh(next.c(k));
  }
  return next;
}

Matrix positional_encoding(Index d, Index max_len) {
  validate(PositionalEncodingSpec{d, max_len});
  Matrix pe(max_len, d);
  for (Index pos = 0; pos < max_len; ++pos) {
    for (Index i = 0; i < d / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Mask causal_mask(Index steps) {
  Mask m(steps, steps);
  for (Index r = 0; r < steps; ++r) {
    for (Index c = 0; c < steps; ++c) m(r, c) = c <= r;
  }
  return m;
}

Var attention(Var q, Var k, Var v, Index heads, const Mask* mask) {
  if (heads <= 0 || q.cols() % heads != 0 || v.cols() % heads != 0 || k.cols() != q.cols()) {
    throw Error(Errc::ShapeError, "attention widths are not divisible into heads");
  }
  if (k.rows() != v.rows()) throw Error(Errc::ShapeError, "keys and values differ in length");
  if (mask != nullptr && (mask->rows() != q.rows() || mask->cols() != k.rows())) {
    throw Error(Errc::MaskError, "attention mask must be [queries x keys]");
  }
  const Index d_k = q.cols() / heads;
  const Index d_v = v.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_k));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : slice_cols(q, h * d_k, d_k);
    Var kh = heads == 1 ? k : slice_cols(k, h * d_k, d_k);
    Var vh = heads == 1 ? v : slice_cols(v, h * d_v, d_v);
    Var weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), mask);
    outs.push_back(matmul(weights, vh));
  }
  return heads == 1 ? outs.front() : concat_cols(outs);
}

Dense::Dense(ParameterSet& params, const std::string& name, const DenseSpec& spec, Rng& rng)
    : spec_(spec) {
  validate(spec);
  weight_ = &params.add(name + ".weight", spec.in, spec.out, Init::Xavier, rng);
  bias_ = &params.add(name + ".bias", 1, spec.out, Init::Zeros, rng);
}

Var Dense::operator()(Tape& tape, Var x) const {
  if (x.cols() != spec_.in) {
    throw Error(Errc::ShapeError, weight_->name + ": expected width " + std::to_string(spec_.in) +
                                      ", got " + std::to_string(x.cols()));
  }
  return activate(add_bias(matmul(x, tape.param(*weight_)), tape.param(*bias_)), spec_.activation);
}

Lstm::Lstm(ParameterSet& params, const std::string& name, const LstmSpec& spec, Rng& rng)
    : spec_(spec) {
  validate(spec);
  w_ih_ = &params.add(name + ".w_ih", spec.in, 4 * spec.hidden, Init::LstmUniform, rng);
  w_hh_ = &params.add(name + ".w_hh", spec.hidden, 4 * spec.hidden, Init::LstmUniform, rng);
  bias_ = &params.add(name + ".bias", 1, 4 * spec.hidden, Init::Zeros, rng);
  // forget gate starts open
  bias_->value.middleCols(spec.hidden, spec.hidden).setOnes();
}

Var Lstm::operator()(Tape& tape, Var x) const {
  return lstm_sequence(x, tape.param(*w_ih_), tape.param(*w_hh_), tape.param(*bias_));
}

Var Lstm::last(Tape& tape, Var x) const {
  if (x.rows() == 0) return tape.constant(Matrix::Zero(1, spec_.hidden));
  Var states = (*this)(tape, x);
  return slice_rows(states, states.rows() - 1, 1);
}

Conv1d::Conv1d(ParameterSet& params, const std::string& name, const Conv1dSpec& spec, Rng& rng)
    : spec_(spec) {
  validate(spec);
  weight_ = &params.add(name + ".weight", spec.kernel * spec.in, spec.out, Init::Xavier, rng);
  bias_ = &params.add(name + ".bias", 1, spec.out, Init::Zeros, rng);
}

Var Conv1d::operator()(Tape& tape, Var x) const {
  if (x.cols() != spec_.in) throw Error(Errc::ShapeError, "conv input channel mismatch");
  Var cols = unfold1d(x, spec_.kernel, spec_.stride, (spec_.kernel - 1) / 2);
  return activate(add_bias(matmul(cols, tape.param(*weight_)), tape.param(*bias_)),
                  spec_.activation);
}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, const LayerNormSpec& spec,
                     Rng& rng) {
  validate(spec);
  gamma_ = &params.add(name + ".gamma", 1, spec.d, Init::Ones, rng);
  beta_ = &params.add(name + ".beta", 1, spec.d, Init::Zeros, rng);
}

Var LayerNorm::operator()(Tape& tape, Var x) const {
  return layer_norm(x, tape.param(*gamma_), tape.param(*beta_));
}

Embedding::Embedding(ParameterSet& params, const std::string& name, const EmbeddingSpec& spec,
                     Rng& rng)
    : spec_(spec) {
  validate(spec);
  table_ = &params.add(name + ".table", spec.vocab, spec.d, Init::Xavier, rng);
}

Var Embedding::operator()(Tape& tape, std::span<const Index> ids) const {
  return gather_rows(tape.param(*table_), ids);
}

PositionalEncoding::PositionalEncoding(const PositionalEncodingSpec& spec)
    : table_(positional_encoding(spec.d, spec.max_len)) {}

Var PositionalEncoding::operator()(Tape& tape, Var x) const {
  if (x.rows() > table_.rows()) {
    throw Error(Errc::LengthError, "sequence of " + std::to_string(x.rows()) +
                                       " steps exceeds positional encoding length " +
                                       std::to_string(table_.rows()));
  }
  if (x.cols() != table_.cols()) throw Error(Errc::ShapeError, "positional encoding width mismatch");
  return add(x, tape.constant(table_.topRows(x.rows())));
}

MultiHeadAttention::MultiHeadAttention(ParameterSet& params, const std::string& name,
                                       const AttentionSpec& spec, Rng& rng)
    : spec_(spec) {
  validate(spec);
  q_ = Dense(params, name + ".q", {spec.d_model, spec.heads * spec.d_k}, rng);
  k_ = Dense(params, name + ".k", {spec.d_model, spec.heads * spec.d_k}, rng);
  v_ = Dense(params, name + ".v", {spec.d_model, spec.heads * spec.d_v}, rng);
  o_ = Dense(params, name + ".o", {spec.heads * spec.d_v, spec.d_model}, rng);
}

Var MultiHeadAttention::operator()(Tape& tape, Var query, Var memory, const Mask* mask) const {
  Mask combined;
  const Mask* effective = mask;
  if (spec_.causal) {
    if (query.rows() != memory.rows()) {
      throw Error(Errc::MaskError, "causal attention needs equal query and key lengths");
    }
    combined = causal_mask(query.rows());
    if (mask != nullptr) {
      if (mask->rows() != combined.rows() || mask->cols() != combined.cols()) {
        throw Error(Errc::MaskError, "attention mask must be [queries x keys]");
      }
      combined = combined.array() && mask->array();
    }
    effective = &combined;
  }
  Var q = q_(tape, query);
  Var k = k_(tape, memory);
  Var v = v_(tape, memory);
  return o_(tape, attention(q, k, v, spec_.heads, effective));
}

FeedForward::FeedForward(ParameterSet& params, const std::string& name, Index d_model, Index hidden,
                         double dropout, Rng& rng)
    : up_(params, name + ".up", {d_model, hidden, Activation::Relu}, rng),
      down_(params, name + ".down", {hidden, d_model}, rng),
      dropout_(dropout) {}

Var FeedForward::operator()(Tape& tape, Var x) const {
  return down_(tape, nn::dropout(up_(tape, x), dropout_));
}

EncoderBlock::EncoderBlock(ParameterSet& params, const std::string& name,
                           const AttentionSpec& attention, Index ffn_hidden, double dropout,
                           Rng& rng)
    : norm1_(params, name + ".norm1", {attention.d_model}, rng),
      attention_(params, name + ".attn", attention, rng),
      norm2_(params, name + ".norm2", {attention.d_model}, rng),
      ffn_(params, name + ".ffn", attention.d_model, ffn_hidden, dropout, rng),
      dropout_(dropout) {}

Var EncoderBlock::operator()(Tape& tape, Var x, const Mask* mask) const {
  Var normed = norm1_(tape, x);
  Var h = add(x, dropout(attention_(tape, normed, normed, mask), dropout_));
  return add(h, dropout(ffn_(tape, norm2_(tape, h)), dropout_));
}

DecoderBlock::DecoderBlock(ParameterSet& params, const std::string& name,
                           const AttentionSpec& attention, Index ffn_hidden, double dropout,
                           Rng& rng)
    : norm1_(params, name + ".norm1", {attention.d_model}, rng),
      self_attention_(params, name + ".self",
                      AttentionSpec{attention.d_model, attention.heads, attention.d_k, attention.d_v, true},
                      rng),
      norm2_(params, name + ".norm2", {attention.d_model}, rng),
      cross_attention_(params, name + ".cross",
                       AttentionSpec{attention.d_model, attention.heads, attention.d_k, attention.d_v, false},
                       rng),
      norm3_(params, name + ".norm3", {attention.d_model}, rng),
      ffn_(params, name + ".ffn", attention.d_model, ffn_hidden, dropout, rng),
      dropout_(dropout) {}

Var DecoderBlock::operator()(Tape& tape, Var x, Var memory, const Mask* memory_mask) const {
  Var normed = norm1_(tape, x);
  Var h = add(x, dropout(self_attention_(tape, normed, normed), dropout_));
  h = add(h, dropout(cross_attention_(tape, norm2_(tape, h), memory, memory_mask), dropout_));
  return add(h, dropout(ffn_(tape, norm3_(tape, h)), dropout_));
}

}  // namespace tempo::nn
