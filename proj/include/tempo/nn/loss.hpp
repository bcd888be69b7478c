#pragma once

#include <span>
#include <variant>
#include <vector>

#include "tempo/nn/tape.hpp"

namespace tempo::nn {

struct WeightedCrossEntropy {
  std::vector<double> class_weights;
};
struct MeanSquaredError {};
using LossSpec = std::variant<WeightedCrossEntropy, MeanSquaredError>;

/// mean_b( -w[label_b] * log softmax(logits_b)[label_b] ), computed through
/// log-sum-exp. Note the mean divides by the batch size, not by the summed
/// weights, so a lone ASD sample with weight w costs w times the TD loss.
Var weighted_cross_entropy(Var logits, std::span<const int> labels,
                           std::span<const double> class_weights);

/// Mean of squared differences over every entry.
Var mse(Var prediction, const Matrix& target);

/// Mean of squared differences over the rows where row_mask is true; masked
/// rows contribute neither to the value nor to the gradient.
Var masked_mse(Var prediction, const Matrix& target, std::span<const bool> row_mask);

}  // namespace tempo::nn
