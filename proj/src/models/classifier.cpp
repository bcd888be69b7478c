#include "tempo/models/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "tempo/core/error.hpp"
#include "tempo/data/preprocess.hpp"
#include "tempo/nn/layers.hpp"
#include "tempo/nn/ops.hpp"
#include "tempo/nn/serialize.hpp"

namespace tempo::models {

using nn::Index;
using nn::Matrix;
using nn::RowVector;
using nn::Var;

namespace {

Index ix(int v) { return static_cast<Index>(v); }

bool reads_strikes(Modality m) { return m != Modality::Motion; }
bool reads_motion(Modality m) { return m != Modality::Strikes; }

std::vector<double> to_vector(const RowVector& v) { return {v.data(), v.data() + v.size()}; }

RowVector from_vector(const std::vector<double>& v) {
  RowVector r(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Index>(i)) = v[i];
  return r;
}

// Deep models: motion channels, then the strike timestamp.
constexpr Index kDeepNormWidth = data::kChannels + 1;

Standardization identity(Index n) { return {RowVector::Zero(n), RowVector::Ones(n)}; }

/// Population mean and spread per column; empty input or a spread below
/// 1e-12 gives the identity for that column.
Standardization column_stats(const Matrix& x) {
  Standardization st = identity(x.cols());
  if (x.rows() == 0) return st;
  st.mean = x.colwise().mean();
  const RowVector var = (x.rowwise() - st.mean).array().square().colwise().mean();
  for (Index c = 0; c < x.cols(); ++c) st.scale(c) = var(c) > 1e-24 ? std::sqrt(var(c)) : 1.0;
  return st;
}

}  // namespace

Sample make_sample(const data::ExerciseSegment& seg) {
  Sample s;
  s.id = seg.subject_id + "/" + std::to_string(seg.exercise_id);
  s.subject_id = seg.subject_id;
  s.exercise = seg.exercise_type;
  s.label = data::label_of(seg.group);
  const auto child = seg.strikes_by(data::Actor::Child);
  s.strikes.resize(static_cast<Index>(child.size()), 2);
  for (std::size_t i = 0; i < child.size(); ++i) {
    s.strikes(static_cast<Index>(i), 0) = child[i].bar - 1;
    s.strikes(static_cast<Index>(i), 1) = child[i].t - seg.start_t;
  }
  s.motion = data::frame_matrix(seg);
  return s;
}

std::vector<Sample> make_samples(std::span<const data::ExerciseSegment> segments,
                                 data::ExerciseType exercise) {
  std::vector<Sample> out;
  for (const auto& seg : segments)
    if (seg.exercise_type == exercise) out.push_back(make_sample(seg));
  return out;
}

Sample strip_padding(const Sample& padded_sample, std::span<const bool> motion_mask) {
  if (static_cast<Index>(motion_mask.size()) != padded_sample.motion.rows())
    throw Error(Errc::MaskError, "mask length does not match the motion rows");
  Sample s = padded_sample;
  const auto kept = std::count(motion_mask.begin(), motion_mask.end(), true);
  s.motion.resize(kept, padded_sample.motion.cols());
  Index r = 0;
  for (std::size_t i = 0; i < motion_mask.size(); ++i)
    if (motion_mask[i]) s.motion.row(r++) = padded_sample.motion.row(static_cast<Index>(i));
  return s;
}

nn::RowVector handcrafted_features(const Sample& s, Modality modality) {
  std::vector<double> f;
  if (reads_strikes(modality)) {
    const Index n = s.strikes.rows();
    double mean = 0.0, var = 0.0;
    if (n >= 2) {
      const Eigen::VectorXd isi = s.strikes.col(1).tail(n - 1) - s.strikes.col(1).head(n - 1);
      mean = isi.mean();
      var = (isi.array() - mean).square().mean();
    }
    f.insert(f.end(), {static_cast<double>(n), mean, std::sqrt(var)});
  }
  if (reads_motion(modality)) {
    for (Index c = 0; c < data::kChannels; ++c) {
      if (s.motion.rows() == 0) {
        f.insert(f.end(), {0.0, 0.0, 0.0, 0.0});
        continue;
      }
      const auto col = s.motion.col(c);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().mean());
      f.insert(f.end(), {mean, sd, col.minCoeff(), col.maxCoeff()});
    }
  }
  return from_vector(f);
}

void check_modality(const ModelDescriptor& d, data::ExerciseType exercise) {
  if (exercise == data::ExerciseType::JointAttention && reads_strikes(d.modality))
    throw Error(Errc::ModalityError,
                std::string(to_string(d.family)) + " reads strikes, which joint-attention segments lack");
}

struct Classifier::Impl {
  ModelDescriptor d;
  std::uint64_t seed = 0;
  nn::ParameterSet params;
  Standardization norm;

  nn::Embedding mlp_embed;
  nn::Dense mlp1, mlp2;
  nn::Embedding lstm_embed;
  nn::Lstm strike_lstm;
  nn::Conv1d conv1, conv2;
  nn::Lstm motion_lstm;
  nn::Dense proj;
  nn::PositionalEncoding pe;
  std::vector<nn::EncoderBlock> blocks;
  nn::LayerNorm final_norm;
  nn::Dense head1, head2;
  bool two_layer_head = false;
  nn::Parameter* lr_w = nullptr;
  nn::Parameter* lr_b = nullptr;

  void build(Rng& rng);
  Matrix strike_times(const Sample& s, Index n) const;
  Var strike_mlp(nn::Tape& tape, const Sample& s) const;
  Var strike_lstm_branch(nn::Tape& tape, const Sample& s) const;
  Var motion_input(nn::Tape& tape, const Sample& s) const;
  Var transformer(nn::Tape& tape, Var x) const;
  Var forward(nn::Tape& tape, const Sample& s) const;
};

void Classifier::Impl::build(Rng& rng) {
  const Hyper& h = d.hyper;
  auto build_mlp = [&] {
    mlp_embed = nn::Embedding(params, "strike_mlp.embed", {data::kBars, ix(h.strike_embed)}, rng);
    mlp1 = nn::Dense(params, "strike_mlp.fc1",
                     {ix(h.max_strikes * (h.strike_embed + 1)), ix(h.mlp_hidden1), nn::Activation::Relu}, rng);
    mlp2 = nn::Dense(params, "strike_mlp.fc2", {ix(h.mlp_hidden1), ix(h.mlp_hidden2), nn::Activation::Relu}, rng);
  };
  auto build_strike_lstm = [&](int hidden) {
    lstm_embed = nn::Embedding(params, "strike_lstm.embed", {data::kBars, ix(h.lstm_strike_embed)}, rng);
    strike_lstm = nn::Lstm(params, "strike_lstm.lstm", {ix(h.lstm_strike_embed + 1), ix(hidden)}, rng);
  };
  auto build_transformer = [&] {
    const Index dm = ix(h.d_model);
    proj = nn::Dense(params, "transformer.proj", {data::kChannels, dm}, rng);
    pe = nn::PositionalEncoding({dm, ix(h.pe_max_len)});
    const nn::AttentionSpec att{dm, ix(h.heads), dm / h.heads, dm / h.heads};
    for (int b = 0; b < h.blocks; ++b)
      blocks.emplace_back(params, "transformer.block" + std::to_string(b), att, ix(h.ffn_hidden), h.dropout, rng);
    final_norm = nn::LayerNorm(params, "transformer.norm", {dm}, rng);
  };
  auto build_head = [&](int in, int hidden) {
    if (hidden > 0) {
      head1 = nn::Dense(params, "head.fc1", {ix(in), ix(hidden), nn::Activation::Relu}, rng);
      head2 = nn::Dense(params, "head.fc2", {ix(hidden), 2}, rng);
      two_layer_head = true;
    } else {
      head1 = nn::Dense(params, "head.fc", {ix(in), 2}, rng);
    }
  };

  switch (d.family) {
    case Family::StrikeMLP:
      build_mlp();
      build_head(h.mlp_hidden2, 0);
      break;
    case Family::StrikeLSTM:
      build_strike_lstm(h.strike_lstm_hidden);
      build_head(h.strike_lstm_hidden, h.strike_head);
      break;
    case Family::MotionLSTM:
      motion_lstm = nn::Lstm(params, "motion_lstm", {data::kChannels, ix(h.motion_lstm_hidden)}, rng);
      build_head(h.motion_lstm_hidden, 0);
      break;
    case Family::MotionCNNLSTM:
      conv1 = nn::Conv1d(params, "conv1", {data::kChannels, ix(h.conv_channels), ix(h.conv_kernel)}, rng);
      conv2 = nn::Conv1d(params, "conv2", {ix(h.conv_channels), ix(h.conv_channels), ix(h.conv_kernel)}, rng);
      motion_lstm = nn::Lstm(params, "motion_lstm", {ix(h.conv_channels), ix(h.motion_lstm_hidden)}, rng);
      build_head(h.motion_lstm_hidden, 0);
      break;
    case Family::MotionTransformer:
      build_transformer();
      build_head(h.d_model, 0);
      break;
    case Family::HybridMLP_LSTM:
      build_mlp();
      motion_lstm = nn::Lstm(params, "motion_lstm", {data::kChannels, ix(h.motion_lstm_hidden)}, rng);
      build_head(h.mlp_hidden2 + h.motion_lstm_hidden, h.fusion_hidden);
      break;
    case Family::HybridMLP_Transformer:
      build_mlp();
      build_transformer();
      build_head(h.mlp_hidden2 + h.d_model, h.fusion_hidden);
      break;
    case Family::HybridLSTM_Transformer:
      build_strike_lstm(h.hybrid_strike_lstm_hidden);
      build_transformer();
      build_head(h.hybrid_strike_lstm_hidden + h.d_model, h.fusion_hidden);
      break;
    case Family::LogisticRegression: {
      const Index f = static_cast<Index>(analytic_parameter_count(d)) - 1;
      lr_w = &params.add("logreg.weight", f, 1, nn::Init::Zeros, rng);
      lr_b = &params.add("logreg.bias", 1, 1, nn::Init::Zeros, rng);
      norm = identity(f);
      return;
    }
  }
  norm = identity(kDeepNormWidth);
}

Matrix Classifier::Impl::strike_times(const Sample& s, Index n) const {
  const Index c = data::kChannels;
  return (s.strikes.col(1).head(n).array() - norm.mean(c)) / norm.scale(c);
}

Var Classifier::Impl::strike_mlp(nn::Tape& tape, const Sample& s) const {
  const Index max = ix(d.hyper.max_strikes);
  const Index width = ix(d.hyper.strike_embed + 1);
  const Index n = std::min(s.strikes.rows(), max);
  Var x;
  if (n == 0) {
    x = tape.constant(Matrix::Zero(max, width));
  } else {
    std::vector<Index> ids(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = static_cast<Index>(s.strikes(i, 0));
    const Var parts[] = {mlp_embed(tape, ids), tape.constant(strike_times(s, n))};
    x = nn::concat_cols(parts);
    if (n < max) {
      const Var rows[] = {x, tape.constant(Matrix::Zero(max - n, width))};
      x = nn::concat_rows(rows);
    }
  }
  return mlp2(tape, mlp1(tape, nn::reshape(x, 1, max * width)));
}

Var Classifier::Impl::strike_lstm_branch(nn::Tape& tape, const Sample& s) const {
  const Index n = s.strikes.rows();
  if (n == 0) return strike_lstm.last(tape, tape.constant(Matrix(0, ix(d.hyper.lstm_strike_embed + 1))));
  std::vector<Index> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = static_cast<Index>(s.strikes(i, 0));
  const Var parts[] = {lstm_embed(tape, ids), tape.constant(strike_times(s, n))};
  return strike_lstm.last(tape, nn::concat_cols(parts));
}

Var Classifier::Impl::motion_input(nn::Tape& tape, const Sample& s) const {
  if (s.motion.rows() == 0) throw Error(Errc::InvalidValue, "sample " + s.id + " has no motion frames");
  if (s.motion.cols() != data::kChannels) throw Error(Errc::ShapeError, "motion must have 18 channels");
  const Index c = data::kChannels;
  Matrix x = (s.motion.rowwise() - norm.mean.head(c)).array().rowwise() / norm.scale.head(c).array();
  return tape.constant(std::move(x));
}

Var Classifier::Impl::transformer(nn::Tape& tape, Var x) const {
  Var h = pe(tape, proj(tape, x));
  for (const auto& b : blocks) h = b(tape, h);
  return nn::mean_rows(final_norm(tape, h));
}

Var Classifier::Impl::forward(nn::Tape& tape, const Sample& s) const {
  if (s.exercise != d.exercise)
    throw Error(Errc::InvalidValue, "sample " + s.id + " is " + std::string(data::to_string(s.exercise)) +
                                        ", model expects " + std::string(data::to_string(d.exercise)));
  check_modality(d, s.exercise);
  for (Index i = 0; i < s.strikes.rows(); ++i) {
    const double bar = s.strikes(i, 0);
    if (!(bar >= 0 && bar < data::kBars) || bar != std::floor(bar))
      throw Error(Errc::InvalidValue, "strike bar index out of range in " + s.id);
    if (i > 0 && s.strikes(i, 1) < s.strikes(i - 1, 1))
      throw Error(Errc::InvalidValue, "strike timestamps must be non-decreasing in " + s.id);
  }

  Var features;
  switch (d.family) {
    case Family::StrikeMLP: features = strike_mlp(tape, s); break;
    case Family::StrikeLSTM: features = strike_lstm_branch(tape, s); break;
    case Family::MotionLSTM: features = motion_lstm.last(tape, motion_input(tape, s)); break;
    case Family::MotionCNNLSTM:
      features = motion_lstm.last(tape, conv2(tape, conv1(tape, motion_input(tape, s))));
      break;
    case Family::MotionTransformer: features = transformer(tape, motion_input(tape, s)); break;
    case Family::HybridMLP_LSTM: {
      const Var parts[] = {strike_mlp(tape, s), motion_lstm.last(tape, motion_input(tape, s))};
      features = nn::concat_cols(parts);
      break;
    }
    case Family::HybridMLP_Transformer: {
      const Var parts[] = {strike_mlp(tape, s), transformer(tape, motion_input(tape, s))};
      features = nn::concat_cols(parts);
      break;
    }
    case Family::HybridLSTM_Transformer: {
      const Var parts[] = {strike_lstm_branch(tape, s), transformer(tape, motion_input(tape, s))};
      features = nn::concat_cols(parts);
      break;
    }
    case Family::LogisticRegression: {
      const RowVector f =
          (handcrafted_features(s, d.modality) - norm.mean).array() / norm.scale.array();
      const Var z = nn::add_bias(nn::matmul(tape.constant(f), tape.param(*lr_w)), tape.param(*lr_b));
      const Var parts[] = {tape.constant(Matrix::Zero(1, 1)), z};
      return nn::concat_cols(parts);
    }
  }
  if (!two_layer_head) return head1(tape, features);
  return head2(tape, nn::dropout(head1(tape, features), d.hyper.dropout));
}

Classifier::Classifier(const ModelDescriptor& descriptor, std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  validate(descriptor);
  impl_->d = descriptor;
  impl_->seed = seed;
  Rng rng(seed);
  impl_->build(rng);
}

Classifier::~Classifier() = default;
Classifier::Classifier(Classifier&&) noexcept = default;
Classifier& Classifier::operator=(Classifier&&) noexcept = default;

const ModelDescriptor& Classifier::descriptor() const { return impl_->d; }
std::uint64_t Classifier::seed() const { return impl_->seed; }
nn::ParameterSet& Classifier::params() { return impl_->params; }
const nn::ParameterSet& Classifier::params() const { return impl_->params; }
std::size_t Classifier::parameter_count() const { return impl_->params.count(); }
const Standardization& Classifier::standardization() const { return impl_->norm; }

void Classifier::set_standardization(Standardization s) {
  if (s.mean.size() != impl_->norm.mean.size() || s.scale.size() != impl_->norm.scale.size())
    throw Error(Errc::ShapeError, "standardization width mismatch");
  impl_->norm = std::move(s);
}

void Classifier::fit_standardization(std::span<const Sample* const> samples) {
  const ModelDescriptor& d = impl_->d;
  if (d.family == Family::LogisticRegression) {
    Matrix x(static_cast<Index>(samples.size()), impl_->norm.mean.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      x.row(static_cast<Index>(i)) = handcrafted_features(*samples[i], d.modality);
    impl_->norm = column_stats(x);
    return;
  }
  Standardization st = identity(kDeepNormWidth);
  if (reads_motion(d.modality)) {
    Index total = 0;
    for (const Sample* s : samples) total += s->motion.rows();
    Matrix x(total, data::kChannels);
    Index r = 0;
    for (const Sample* s : samples) {
      x.middleRows(r, s->motion.rows()) = s->motion;
      r += s->motion.rows();
    }
    const Standardization m = column_stats(x);
    st.mean.head(data::kChannels) = m.mean;
    st.scale.head(data::kChannels) = m.scale;
  }
  if (reads_strikes(d.modality)) {
    Index total = 0;
    for (const Sample* s : samples) total += s->strikes.rows();
    Matrix x(total, 1);
    Index r = 0;
    for (const Sample* s : samples) {
      x.middleRows(r, s->strikes.rows()) = s->strikes.col(1);
      r += s->strikes.rows();
    }
    const Standardization t = column_stats(x);
    st.mean(data::kChannels) = t.mean(0);
    st.scale(data::kChannels) = t.scale(0);
  }
  impl_->norm = st;
}

nn::Var Classifier::logits(nn::Tape& tape, const Sample& s) const { return impl_->forward(tape, s); }

double Classifier::score(const Sample& s) const {
  nn::Tape tape;
  const Matrix& l = impl_->forward(tape, s).value();
  return 1.0 / (1.0 + std::exp(l(0, 0) - l(0, 1)));
}

int Classifier::predict(const Sample& s) const {
  nn::Tape tape;
  const Matrix& l = impl_->forward(tape, s).value();
  return l(0, 1) > l(0, 0) ? 1 : 0;
}

void Classifier::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["kind"] = "classifier";
  header["seed"] = impl_->seed;
  header["standardization"] = {{"mean", to_vector(impl_->norm.mean)}, {"scale", to_vector(impl_->norm.scale)}};
  nn::save_model_file(path.string(), to_json(impl_->d), header, impl_->params);
}

Classifier Classifier::load(const std::filesystem::path& path) {
  const nn::ModelFile file = nn::load_model_file(path.string());
  if (file.header.value("kind", "") != "classifier")
    throw Error(Errc::FormatError, path.string() + " is not a classifier model");
  try {
    Classifier c(descriptor_from_json(file.header.at("descriptor")), file.header.at("seed").get<std::uint64_t>());
    nn::load_parameters(c.params(), file);
    const auto& st = file.header.at("standardization");
    c.set_standardization({from_vector(st.at("mean").get<std::vector<double>>()),
                           from_vector(st.at("scale").get<std::vector<double>>())});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("classifier header: ") + e.what());
  }
}

}  // namespace tempo::models
