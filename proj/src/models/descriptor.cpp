#include "tempo/models/descriptor.hpp"

#include "tempo/core/error.hpp"
#include "tempo/nn/layers.hpp"

namespace tempo::models {

using nn::parameter_count;

namespace {

struct FamilyNames {
  Family family;
  std::string_view key;
  std::string_view cli;
};

constexpr FamilyNames kNames[] = {
    {Family::StrikeMLP, "StrikeMLP", "mlp"},
    {Family::StrikeLSTM, "StrikeLSTM", "lstm"},
    {Family::MotionLSTM, "MotionLSTM", "lstm"},
    {Family::MotionCNNLSTM, "MotionCNNLSTM", "cnn-lstm"},
    {Family::MotionTransformer, "MotionTransformer", "transformer"},
    {Family::HybridMLP_LSTM, "HybridMLP_LSTM", "mlp-lstm"},
    {Family::HybridMLP_Transformer, "HybridMLP_Transformer", "mlp-transformer"},
    {Family::HybridLSTM_Transformer, "HybridLSTM_Transformer", "lstm-transformer"},
    {Family::LogisticRegression, "LogisticRegression", "logreg"},
};

std::size_t budget_of(Family f) {
  switch (f) {
    case Family::StrikeMLP: return 18'000;
    case Family::StrikeLSTM: return 241'000;
    case Family::MotionLSTM: return 224'000;
    case Family::MotionCNNLSTM: return 288'000;
    case Family::MotionTransformer: return 600'000;
    case Family::HybridMLP_LSTM: return 365'000;
    case Family::HybridMLP_Transformer: return 645'000;
    case Family::HybridLSTM_Transformer: return 735'000;
    case Family::LogisticRegression: return 0;
  }
  return 0;
}

nn::Index ix(int v) { return static_cast<nn::Index>(v); }

std::size_t strike_mlp_branch(const Hyper& h) {
  return parameter_count(nn::EmbeddingSpec{data::kBars, ix(h.strike_embed)}) +
         parameter_count(nn::DenseSpec{ix(h.max_strikes * (h.strike_embed + 1)), ix(h.mlp_hidden1)}) +
         parameter_count(nn::DenseSpec{ix(h.mlp_hidden1), ix(h.mlp_hidden2)});
}

std::size_t strike_lstm_branch(const Hyper& h, int hidden) {
  return parameter_count(nn::EmbeddingSpec{data::kBars, ix(h.lstm_strike_embed)}) +
         parameter_count(nn::LstmSpec{ix(h.lstm_strike_embed + 1), ix(hidden)});
}

std::size_t transformer_branch(const Hyper& h) {
  const nn::Index d = ix(h.d_model);
  const std::size_t block = 2 * parameter_count(nn::LayerNormSpec{d}) +
                            parameter_count(nn::AttentionSpec{d, ix(h.heads), d / h.heads, d / h.heads}) +
                            parameter_count(nn::DenseSpec{d, ix(h.ffn_hidden)}) +
                            parameter_count(nn::DenseSpec{ix(h.ffn_hidden), d});
  return parameter_count(nn::DenseSpec{data::kChannels, d}) + static_cast<std::size_t>(h.blocks) * block +
         parameter_count(nn::LayerNormSpec{d});
}

std::size_t head(int in, int hidden) {
  return parameter_count(nn::DenseSpec{ix(in), ix(hidden)}) + parameter_count(nn::DenseSpec{ix(hidden), 2});
}

}  // namespace

std::string_view cli_name(Family f) {
  for (const auto& n : kNames)
    if (n.family == f) return n.cli;
  return "unknown";
}

std::string_view to_string(Family f) {
  for (const auto& n : kNames)
    if (n.family == f) return n.key;
  return "unknown";
}

Family parse_family(std::string_view name, std::optional<Modality> modality) {
  if (name == "lstm") return modality == Modality::Motion ? Family::MotionLSTM : Family::StrikeLSTM;
  for (const auto& n : kNames)
    if (name == n.cli || name == n.key) return n.family;
  throw Error(Errc::ConfigError, "unknown model '" + std::string(name) + "'");
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Strikes: return "strikes";
    case Modality::Motion: return "motion";
    case Modality::Combined: return "combined";
  }
  return "unknown";
}

Modality parse_modality(std::string_view s) {
  if (s == "strikes") return Modality::Strikes;
  if (s == "motion") return Modality::Motion;
  if (s == "combined") return Modality::Combined;
  throw Error(Errc::ConfigError, "unknown modality '" + std::string(s) + "'");
}

Modality modality_of(Family f) {
  switch (f) {
    case Family::StrikeMLP:
    case Family::StrikeLSTM: return Modality::Strikes;
    case Family::MotionLSTM:
    case Family::MotionCNNLSTM:
    case Family::MotionTransformer: return Modality::Motion;
    default: return Modality::Combined;
  }
}

ModelDescriptor paper_descriptor(Family f, data::ExerciseType exercise, std::optional<Modality> modality) {
  ModelDescriptor d;
  d.family = f;
  d.exercise = exercise;
  d.preset = "paper";
  d.modality = f == Family::LogisticRegression ? modality.value_or(Modality::Combined) : modality_of(f);
  if (f != Family::LogisticRegression && modality && *modality != d.modality)
    throw Error(Errc::ConfigError, std::string(cli_name(f)) + " does not take the " +
                                       std::string(to_string(*modality)) + " modality");
  d.parameter_budget = budget_of(f);
  return d;
}

ModelDescriptor small_descriptor(Family f, data::ExerciseType exercise, std::optional<Modality> modality) {
  ModelDescriptor d = paper_descriptor(f, exercise, modality);
  d.preset = "small";
  d.parameter_budget = 0;
  Hyper& h = d.hyper;
  h.strike_embed = 4;
  h.mlp_hidden1 = 24;
  h.mlp_hidden2 = 16;
  h.lstm_strike_embed = 8;
  h.strike_lstm_hidden = 16;
  h.strike_head = 8;
  h.motion_lstm_hidden = 16;
  h.conv_channels = 8;
  h.d_model = 16;
  h.heads = 2;
  h.blocks = 2;
  h.ffn_hidden = 32;
  h.pe_max_len = 512;
  h.fusion_hidden = 32;
  h.hybrid_strike_lstm_hidden = 16;
  return d;
}

ModelDescriptor make_descriptor(const std::string& preset, Family f, data::ExerciseType exercise,
                                std::optional<Modality> modality) {
  if (preset == "paper") return paper_descriptor(f, exercise, modality);
  if (preset == "small") return small_descriptor(f, exercise, modality);
  throw Error(Errc::ConfigError, "unknown preset '" + preset + "'");
}

void validate(const ModelDescriptor& d) {
  const Hyper& h = d.hyper;
  for (int v : {h.max_strikes, h.strike_embed, h.mlp_hidden1, h.mlp_hidden2, h.lstm_strike_embed,
                h.strike_lstm_hidden, h.strike_head, h.motion_lstm_hidden, h.conv_channels, h.conv_kernel,
                h.d_model, h.heads, h.blocks, h.ffn_hidden, h.pe_max_len, h.fusion_hidden,
                h.hybrid_strike_lstm_hidden})
    if (v <= 0) throw Error(Errc::ConfigError, "model widths must be positive");
  if (h.d_model % h.heads != 0) throw Error(Errc::ConfigError, "d_model must be divisible by heads");
  if (h.d_model % 2 != 0) throw Error(Errc::ConfigError, "d_model must be even for positional encoding");
  if (!(h.dropout >= 0.0 && h.dropout < 1.0)) throw Error(Errc::ConfigError, "dropout must lie in [0, 1)");
  if (!(h.l2 >= 0.0)) throw Error(Errc::ConfigError, "l2 must be non-negative");
  if (d.family != Family::LogisticRegression && d.modality != modality_of(d.family))
    throw Error(Errc::ConfigError, "modality does not match the model family");
}

std::size_t analytic_parameter_count(const ModelDescriptor& d) {
  validate(d);
  const Hyper& h = d.hyper;
  switch (d.family) {
    case Family::StrikeMLP:
      return strike_mlp_branch(h) + parameter_count(nn::DenseSpec{ix(h.mlp_hidden2), 2});
    case Family::StrikeLSTM:
      return strike_lstm_branch(h, h.strike_lstm_hidden) + head(h.strike_lstm_hidden, h.strike_head);
    case Family::MotionLSTM:
      return parameter_count(nn::LstmSpec{data::kChannels, ix(h.motion_lstm_hidden)}) +
             parameter_count(nn::DenseSpec{ix(h.motion_lstm_hidden), 2});
    case Family::MotionCNNLSTM:
      return parameter_count(nn::Conv1dSpec{data::kChannels, ix(h.conv_channels), ix(h.conv_kernel)}) +
             parameter_count(nn::Conv1dSpec{ix(h.conv_channels), ix(h.conv_channels), ix(h.conv_kernel)}) +
             parameter_count(nn::LstmSpec{ix(h.conv_channels), ix(h.motion_lstm_hidden)}) +
             parameter_count(nn::DenseSpec{ix(h.motion_lstm_hidden), 2});
    case Family::MotionTransformer:
      return transformer_branch(h) + parameter_count(nn::DenseSpec{ix(h.d_model), 2});
    case Family::HybridMLP_LSTM:
      return strike_mlp_branch(h) + parameter_count(nn::LstmSpec{data::kChannels, ix(h.motion_lstm_hidden)}) +
             head(h.mlp_hidden2 + h.motion_lstm_hidden, h.fusion_hidden);
    case Family::HybridMLP_Transformer:
      return strike_mlp_branch(h) + transformer_branch(h) + head(h.mlp_hidden2 + h.d_model, h.fusion_hidden);
    case Family::HybridLSTM_Transformer:
      return strike_lstm_branch(h, h.hybrid_strike_lstm_hidden) + transformer_branch(h) +
             head(h.hybrid_strike_lstm_hidden + h.d_model, h.fusion_hidden);
    case Family::LogisticRegression: {
      const std::size_t strike = d.modality == Modality::Motion ? 0 : 3;
      const std::size_t motion = d.modality == Modality::Strikes ? 0 : 4 * data::kChannels;
      return strike + motion + 1;
    }
  }
  return 0;
}

nlohmann::json to_json(const ModelDescriptor& d) {
  const Hyper& h = d.hyper;
  return {{"family", to_string(d.family)},
          {"modality", to_string(d.modality)},
          {"exercise", data::to_string(d.exercise)},
          {"preset", d.preset},
          {"parameter_budget", d.parameter_budget},
          {"hyper",
           {{"max_strikes", h.max_strikes},
            {"strike_embed", h.strike_embed},
            {"mlp_hidden1", h.mlp_hidden1},
            {"mlp_hidden2", h.mlp_hidden2},
            {"lstm_strike_embed", h.lstm_strike_embed},
            {"strike_lstm_hidden", h.strike_lstm_hidden},
            {"strike_head", h.strike_head},
            {"motion_lstm_hidden", h.motion_lstm_hidden},
            {"conv_channels", h.conv_channels},
            {"conv_kernel", h.conv_kernel},
            {"d_model", h.d_model},
            {"heads", h.heads},
            {"blocks", h.blocks},
            {"ffn_hidden", h.ffn_hidden},
            {"pe_max_len", h.pe_max_len},
            {"fusion_hidden", h.fusion_hidden},
            {"hybrid_strike_lstm_hidden", h.hybrid_strike_lstm_hidden},
            {"dropout", h.dropout},
            {"l2", h.l2}}}};
}

ModelDescriptor descriptor_from_json(const nlohmann::json& j) {
  try {
    ModelDescriptor d;
    d.family = parse_family(j.at("family").get<std::string>());
    d.modality = parse_modality(j.at("modality").get<std::string>());
    d.exercise = data::parse_exercise(j.at("exercise").get<std::string>());
    d.preset = j.at("preset").get<std::string>();
    d.parameter_budget = j.at("parameter_budget").get<std::size_t>();
    const auto& h = j.at("hyper");
    Hyper& o = d.hyper;
    o.max_strikes = h.at("max_strikes");
    o.strike_embed = h.at("strike_embed");
    o.mlp_hidden1 = h.at("mlp_hidden1");
    o.mlp_hidden2 = h.at("mlp_hidden2");
    o.lstm_strike_embed = h.at("lstm_strike_embed");
    o.strike_lstm_hidden = h.at("strike_lstm_hidden");
    o.strike_head = h.at("strike_head");
    o.motion_lstm_hidden = h.at("motion_lstm_hidden");
    o.conv_channels = h.at("conv_channels");
    o.conv_kernel = h.at("conv_kernel");
    o.d_model = h.at("d_model");
    o.heads = h.at("heads");
    o.blocks = h.at("blocks");
    o.ffn_hidden = h.at("ffn_hidden");
    o.pe_max_len = h.at("pe_max_len");
    o.fusion_hidden = h.at("fusion_hidden");
    o.hybrid_strike_lstm_hidden = h.at("hybrid_strike_lstm_hidden");
    o.dropout = h.at("dropout");
    o.l2 = h.at("l2");
    validate(d);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("model descriptor: ") + e.what());
  }
}

}  // namespace tempo::models
