#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/eval/metrics.hpp"
#include "tempo/models/classifier.hpp"
#include "tempo/nn/optim.hpp"

namespace tempo::models {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 1e-3;
  nn::AdamConfig adam{0.9, 0.999, 1e-8, 0.01, nn::DecayMode::WeightDecay};
  int folds = 7;
  std::uint64_t seed = 0;
  std::vector<std::string> holdout;
  /// Folds run as independent jobs on this many threads.
  int jobs = 1;
  bool refit = true;
  /// Optional augmentation, off by default: repeat ASD training samples to
  /// roughly balance the split, and jitter strike times by N(0, sigma).
  bool augment_duplicate_asd = false;
  double augment_timing_noise = 0.0;
  /// Logistic regression uses full-batch gradient descent instead of Adam.
  int logreg_iterations = 2000;
  double logreg_rate = 0.5;
};

/// 100 for single-modality models, 50 for hybrids.
int default_epochs(Family f);

/// ConfigError for folds < 2, epochs < 1, non-positive batch or lr.
void validate(const TrainConfig& c);
nlohmann::json to_json(const TrainConfig& c);

/// TD/ASD count ratio. StratificationError when there is no ASD sample.
double asd_class_weight(std::span<const int> labels);

struct LogisticConfig {
  double l2 = 1e-3;
  double rate = 0.5;
  int iterations = 2000;
  std::array<double, 2> class_weights{1.0, 1.0};
};

struct LogisticModel {
  nn::RowVector weight;
  double bias = 0.0;
  std::vector<double> loss_history;  // every 20 iterations

  double decision(const nn::RowVector& x) const { return x.dot(weight) + bias; }
};

/// Minimises mean_i c[y_i] * log(1 + exp(-s_i z_i)) + l2/2 |w|^2 (bias not
/// penalised) from zero initialisation. X is [n, features].
LogisticModel logistic_baseline(const nn::Matrix& x, std::span<const int> labels, const LogisticConfig& config);

struct FitHistory {
  std::vector<double> loss;  // mean training loss per epoch
  double asd_weight = 1.0;
  double train_accuracy = 0.0;
};

/// Fits standardization and trains `model` in place on the given samples.
FitHistory fit(Classifier& model, std::span<const Sample* const> train, const TrainConfig& config,
               std::uint64_t stream_seed);

struct FoldReport {
  int fold = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  FitHistory history;
  eval::Metrics metrics;
  double auc = 0.0;
};

struct TrainResult {
  ModelDescriptor descriptor;
  TrainConfig config;
  std::size_t parameter_count = 0;
  std::vector<FoldReport> folds;
  eval::Scores average;
  std::optional<Classifier> model;
  FitHistory refit;
  std::vector<std::string> holdout_ids;
  std::optional<eval::Metrics> holdout;
  std::optional<double> holdout_auc;
};

/// k-fold cross-validation over the non-holdout samples followed by a refit
/// on the whole pool. Samples are put into id order first, so the result
/// does not depend on input order.
TrainResult train_classifier(const ModelDescriptor& descriptor, std::span<const Sample> samples,
                             const TrainConfig& config);

/// Metrics plus AUC; AUC is null when absent or not finite.
nlohmann::json metrics_json(const eval::Metrics& m, std::optional<double> auc);
nlohmann::json report_json(const TrainResult& r);

}  // namespace tempo::models
