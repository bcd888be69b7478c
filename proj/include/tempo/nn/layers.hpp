#pragma once

#include <span>
#include <string>
#include <variant>

#include "tempo/nn/ops.hpp"
#include "tempo/nn/tape.hpp"
#include "tempo/nn/tensor.hpp"

namespace tempo::nn {

enum class Activation { Linear, Relu, Tanh, Sigmoid };

struct DenseSpec {
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::Linear;
};
struct LstmSpec {
  Index in = 0;
  Index hidden = 0;
};
struct Conv1dSpec {
  Index in = 0;
  Index out = 0;
  Index kernel = 1;
  Index stride = 1;
  Activation activation = Activation::Relu;
};
struct AttentionSpec {
  Index d_model = 0;
  Index heads = 1;
  Index d_k = 0;
  Index d_v = 0;
  bool causal = false;
};
struct PositionalEncodingSpec {
  Index d = 0;
  Index max_len = 0;
};
struct LayerNormSpec {
  Index d = 0;
};
struct DropoutSpec {
  double p = 0.0;
};
struct EmbeddingSpec {
  Index vocab = 0;
  Index d = 0;
};
struct SoftmaxSpec {};

using LayerSpec = std::variant<DenseSpec, LstmSpec, Conv1dSpec, AttentionSpec, PositionalEncodingSpec,
                               LayerNormSpec, DropoutSpec, EmbeddingSpec, SoftmaxSpec>;

/// Throws ConfigError for non-positive dimensions or inconsistent widths.
void validate(const LayerSpec& spec);
/// Closed-form trainable parameter count of one layer.
std::size_t parameter_count(const LayerSpec& spec);

Var activate(Var x, Activation activation);

/// Tape-free reference forward of a dense layer: act(x W + b).
Matrix dense_forward(const Matrix& x, const Matrix& weight, const RowVector& bias,
                     Activation activation);

struct LstmState {
  RowVector h;
  RowVector c;
};
/// One LSTM step with gates ordered (input, forget, cell, output).
LstmState lstm_step(const RowVector& x, const LstmState& state, const Matrix& w_ih,
                    const Matrix& w_hh, const RowVector& bias);

/// Sinusoidal table: PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
Matrix positional_encoding(Index d, Index max_len);

/// true = may attend. Lower-triangular including the diagonal.
Mask causal_mask(Index steps);

/// Multi-head scaled dot-product attention on already projected inputs:
/// q [Tq, heads*d_k], k [Tk, heads*d_k], v [Tk, heads*d_v] -> [Tq, heads*d_v].
Var attention(Var q, Var k, Var v, Index heads, const Mask* mask);

class Dense {
 public:
  Dense() = default;
  Dense(ParameterSet& params, const std::string& name, const DenseSpec& spec, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  const DenseSpec& spec() const { return spec_; }
  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  DenseSpec spec_;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterSet& params, const std::string& name, const LstmSpec& spec, Rng& rng);
  /// All hidden states, [T, hidden].
  Var operator()(Tape& tape, Var x) const;
  /// Final hidden state [1, hidden]; zeros for an empty sequence.
  Var last(Tape& tape, Var x) const;
  const LstmSpec& spec() const { return spec_; }

 private:
  LstmSpec spec_;
  Parameter* w_ih_ = nullptr;
  Parameter* w_hh_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// "Same"-padded 1-D convolution over time: [T, in] -> [ceil(T/stride), out].
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterSet& params, const std::string& name, const Conv1dSpec& spec, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  const Conv1dSpec& spec() const { return spec_; }

 private:
  Conv1dSpec spec_;
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, const LayerNormSpec& spec, Rng& rng);
  Var operator()(Tape& tape, Var x) const;

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterSet& params, const std::string& name, const EmbeddingSpec& spec, Rng& rng);
  Var operator()(Tape& tape, std::span<const Index> ids) const;

 private:
  EmbeddingSpec spec_;
  Parameter* table_ = nullptr;
};

class PositionalEncoding {
 public:
  PositionalEncoding() = default;
  explicit PositionalEncoding(const PositionalEncodingSpec& spec);
  /// x + PE[0:T]; LengthError when T exceeds max_len.
  Var operator()(Tape& tape, Var x) const;

 private:
  Matrix table_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterSet& params, const std::string& name, const AttentionSpec& spec,
                     Rng& rng);
  /// Projects query and memory, attends, concatenates heads and projects back
  /// to d_model. A causal spec adds the causal mask on top of `mask`.
  Var operator()(Tape& tape, Var query, Var memory, const Mask* mask = nullptr) const;
  const AttentionSpec& spec() const { return spec_; }

 private:
  AttentionSpec spec_;
  Dense q_, k_, v_, o_;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterSet& params, const std::string& name, Index d_model, Index hidden,
              double dropout, Rng& rng);
  Var operator()(Tape& tape, Var x) const;

 private:
  Dense up_, down_;
  double dropout_ = 0.0;
};

/// Pre-norm encoder block: x + Attn(LN(x)), then h + FFN(LN(h)).
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(ParameterSet& params, const std::string& name, const AttentionSpec& attention,
               Index ffn_hidden, double dropout, Rng& rng);
  Var operator()(Tape& tape, Var x, const Mask* mask = nullptr) const;

 private:
  LayerNorm norm1_;
  MultiHeadAttention attention_;
  LayerNorm norm2_;
  FeedForward ffn_;
  double dropout_ = 0.0;
};

/// Pre-norm decoder block with causal self-attention and cross-attention.
class DecoderBlock {
 public:
  DecoderBlock() = default;
  DecoderBlock(ParameterSet& params, const std::string& name, const AttentionSpec& attention,
               Index ffn_hidden, double dropout, Rng& rng);
  Var operator()(Tape& tape, Var x, Var memory, const Mask* memory_mask = nullptr) const;

 private:
  LayerNorm norm1_;
  MultiHeadAttention self_attention_;
  LayerNorm norm2_;
  MultiHeadAttention cross_attention_;
  LayerNorm norm3_;
  FeedForward ffn_;
  double dropout_ = 0.0;
};

}  // namespace tempo::nn
