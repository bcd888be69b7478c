#pragma once

#include <span>
#include <vector>

#include "tempo/nn/tape.hpp"

namespace tempo::nn {

// Differentiable primitives. Every function records one node on the tape that
// owns its arguments; mixing tapes raises GraphError, mismatched shapes raise
// ShapeError.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x[r, :] + bias[0, :] for every row r.
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);

/// Row-wise softmax with max subtraction. Entries where mask is false get
/// exactly zero weight; a fully masked row is all zeros.
Var softmax_rows(Var x, const Mask* mask = nullptr);
Var log_softmax_rows(Var x);

Var slice_rows(Var x, Index start, Index count);
Var slice_cols(Var x, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var table, std::span<const Index> rows);
Var reshape(Var x, Index rows, Index cols);
Var transpose(Var x);

/// Column means over rows: [T, C] -> [1, C].
Var mean_rows(Var x);
Var sum(Var x);
Var mean(Var x);

/// Per-row normalisation followed by gamma/beta affine ([1, C] each).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-8);

/// Inverted dropout; the identity when the tape is not in training mode.
Var dropout(Var x, double p);

/// im2col for a 1-D convolution: [T, C] -> [T_out, kernel * C] with zero
/// padding of pad_left rows before the sequence.
Var unfold1d(Var x, Index kernel, Index stride, Index pad_left);

/// Whole-sequence LSTM with gates ordered (input, forget, cell, output):
/// x [T, in], w_ih [in, 4H], w_hh [H, 4H], bias [1, 4H] -> hidden states [T, H].
/// Zero initial state. Backward is truncated nowhere (full BPTT).
Var lstm_sequence(Var x, Var w_ih, Var w_hh, Var bias);

}  // namespace tempo::nn
