#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tempo/data/types.hpp"

namespace tempo::models {

enum class Family {
  StrikeMLP,
  StrikeLSTM,
  MotionLSTM,
  MotionCNNLSTM,
  MotionTransformer,
  HybridMLP_LSTM,
  HybridMLP_Transformer,
  HybridLSTM_Transformer,
  LogisticRegression,
};

enum class Modality { Strikes, Motion, Combined };

inline constexpr Family kDeepFamilies[] = {Family::StrikeMLP,          Family::StrikeLSTM,
                                           Family::MotionLSTM,         Family::MotionCNNLSTM,
                                           Family::MotionTransformer,  Family::HybridMLP_LSTM,
                                           Family::HybridMLP_Transformer, Family::HybridLSTM_Transformer};

/// CLI names: mlp, lstm, cnn-lstm, transformer, mlp-lstm, mlp-transformer,
/// lstm-transformer, logreg. "lstm" is the strike LSTM unless the modality
/// is motion.
std::string_view cli_name(Family f);
Family parse_family(std::string_view name, std::optional<Modality> modality = std::nullopt);
std::string_view to_string(Family f);
std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);
/// Fixed modality of a deep family.
Modality modality_of(Family f);

struct Hyper {
  int max_strikes = 8;
  int strike_embed = 16;
  int mlp_hidden1 = 96;
  int mlp_hidden2 = 64;
  int lstm_strike_embed = 32;
  int strike_lstm_hidden = 224;
  int strike_head = 48;
  int motion_lstm_hidden = 224;
  int conv_channels = 64;
  int conv_kernel = 5;
  int d_model = 64;
  int heads = 2;
  int blocks = 2;
  int ffn_hidden = 2048;
  int pe_max_len = 512;
  int fusion_hidden = 256;
  int hybrid_strike_lstm_hidden = 160;
  double dropout = 0.0;
  double l2 = 1e-3;  // logistic regression only
};

struct ModelDescriptor {
  Family family = Family::StrikeMLP;
  Modality modality = Modality::Strikes;
  data::ExerciseType exercise = data::ExerciseType::Drumming;
  std::string preset = "paper";
  Hyper hyper;
  /// Reference approximate trainable-parameter count; 0 when none is given.
  std::size_t parameter_budget = 0;
};

/// Budget-fitted widths for the family.
ModelDescriptor paper_descriptor(Family f, data::ExerciseType exercise,
                                 std::optional<Modality> modality = std::nullopt);
/// Narrow widths for desk-scale training.
ModelDescriptor small_descriptor(Family f, data::ExerciseType exercise,
                                 std::optional<Modality> modality = std::nullopt);
ModelDescriptor make_descriptor(const std::string& preset, Family f, data::ExerciseType exercise,
                                std::optional<Modality> modality = std::nullopt);

/// ConfigError for non-positive widths or inconsistent attention shapes.
void validate(const ModelDescriptor& d);

/// Closed-form parameter count of the family topology.
std::size_t analytic_parameter_count(const ModelDescriptor& d);

nlohmann::json to_json(const ModelDescriptor& d);
ModelDescriptor descriptor_from_json(const nlohmann::json& j);

}  // namespace tempo::models
