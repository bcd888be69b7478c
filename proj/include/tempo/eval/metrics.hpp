#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tempo::eval {

/// Positive class is ASD (label 1).
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t n() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> labels);

/// Bits set in Metrics::zero_division for ratios whose denominator was zero.
enum ZeroDivision : unsigned {
  kSensitivityUndefined = 1u << 0,
  kSpecificityUndefined = 1u << 1,
  kF1Undefined = 1u << 2,
};

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  unsigned zero_division = 0;
};

/// Undefined ratios are reported as 0 and flagged. EmptyEvaluation when n = 0.
Metrics metrics(const ConfusionCounts& counts);

/// Trapezoidal ROC area; tied scores contribute half a concordant pair.
/// DegenerateLabels unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Fold index per sample; -1 marks a held-out sample.
struct FoldPlan {
  int k = 0;
  std::vector<int> fold;

  std::vector<std::size_t> test_indices(int f) const;
  std::vector<std::size_t> train_indices(int f) const;
  std::vector<std::size_t> pool() const;
};

/// Stratified k-fold assignment. Each class is shuffled with the seed and dealt
/// round-robin, continuing from where the previous class stopped, so per-class
/// and total fold sizes each differ by at most one.
FoldPlan make_folds(std::span<const int> labels, std::span<const std::string> subjects, int k,
                    std::uint64_t seed, std::span<const std::string> holdout);

/// One cell of a results table.
struct Scores {
  double accuracy = 0.0;
  double f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double auc = 0.0;
};

nlohmann::json to_json(const Scores& s);
Scores scores_from_json(const nlohmann::json& j);

/// model -> exercise -> scores. A missing exercise renders as "---".
struct ResultTable {
  std::vector<std::string> exercises;
  std::vector<std::string> models;
  std::map<std::string, std::map<std::string, Scores>> cells;
};

/// Row per (model, metric), column per exercise plus an unweighted Average
/// over the exercises present for that model.
nlohmann::json aggregate_report(const ResultTable& table);
std::string aggregate_csv(const ResultTable& table);

/// Unweighted mean of the present cells.
double unweighted_mean(std::span<const double> values);

}  // namespace tempo::eval
