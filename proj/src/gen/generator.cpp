#include "tempo/gen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

#include "tempo/core/rng.hpp"
#include "tempo/data/preprocess.hpp"
#include "tempo/nn/layers.hpp"
#include "tempo/nn/loss.hpp"
#include "tempo/nn/ops.hpp"
#include "tempo/nn/optim.hpp"
#include "tempo/nn/serialize.hpp"

namespace tempo::gen {

using nn::Index;
using nn::Matrix;
using nn::RowVector;
using nn::Var;

namespace {

Index ix(int v) { return static_cast<Index>(v); }

std::vector<double> to_vector(const RowVector& v) { return {v.data(), v.data() + v.size()}; }

RowVector from_vector(const std::vector<double>& v) {
  RowVector r(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Index>(i)) = v[i];
  return r;
}

}  // namespace

GeneratorSpec paper_spec(data::ExerciseType exercise) {
  GeneratorSpec s;
  s.exercise = exercise;
  s.n_features = exercise == data::ExerciseType::Drumming ? 1 : data::kBars;
  return s;
}

GeneratorSpec small_spec(data::ExerciseType exercise) {
  GeneratorSpec s = paper_spec(exercise);
  s.preset = "small";
  s.d_model = 128;
  s.heads = 4;
  s.d_k = 32;
  s.d_v = 32;
  s.ffn_hidden = 512;
  s.dropout = 0.0;
  s.encoder_blocks = 2;
  s.decoder_blocks = 2;
  return s;
}

GeneratorSpec make_spec(const std::string& preset, data::ExerciseType exercise) {
  if (preset == "paper") return paper_spec(exercise);
  if (preset == "small") return small_spec(exercise);
  throw Error(Errc::ConfigError, "unknown preset '" + preset + "'");
}

void validate(const GeneratorSpec& s) {
  for (int v : {s.d_model, s.pe_max_len, s.heads, s.d_k, s.d_v, s.ffn_hidden, s.encoder_blocks, s.decoder_blocks,
                s.n_features})
    if (v <= 0) throw Error(Errc::ConfigError, "generator widths must be positive");
  if (s.d_model % 2 != 0) throw Error(Errc::ConfigError, "d_model must be even");
  if (s.preset == "paper" && s.heads * s.d_k != s.d_model)
    throw Error(Errc::ConfigError, "paper preset needs heads * d_k == d_model");
  if (!(s.dropout >= 0.0 && s.dropout < 1.0)) throw Error(Errc::ConfigError, "dropout must lie in [0, 1)");
}

std::size_t analytic_parameter_count(const GeneratorSpec& s) {
  validate(s);
  using nn::parameter_count;
  const Index d = ix(s.d_model);
  const nn::AttentionSpec att{d, ix(s.heads), ix(s.d_k), ix(s.d_v)};
  const std::size_t ln = parameter_count(nn::LayerNormSpec{d});
  const std::size_t ffn =
      parameter_count(nn::DenseSpec{d, ix(s.ffn_hidden)}) + parameter_count(nn::DenseSpec{ix(s.ffn_hidden), d});
  const std::size_t enc = 2 * ln + parameter_count(att) + ffn;
  const std::size_t dec = 3 * ln + 2 * parameter_count(att) + ffn;
  return parameter_count(nn::DenseSpec{ix(s.n_features), d}) + parameter_count(nn::DenseSpec{data::kChannels, d}) +
         static_cast<std::size_t>(s.encoder_blocks) * enc + static_cast<std::size_t>(s.decoder_blocks) * dec +
         2 * ln + parameter_count(nn::DenseSpec{d, data::kChannels});
}

nlohmann::json to_json(const GeneratorSpec& s) {
  return {{"preset", s.preset},         {"exercise", data::to_string(s.exercise)},
          {"d_model", s.d_model},       {"pe_max_len", s.pe_max_len},
          {"heads", s.heads},           {"d_k", s.d_k},
          {"d_v", s.d_v},               {"ffn_hidden", s.ffn_hidden},
          {"dropout", s.dropout},       {"encoder_blocks", s.encoder_blocks},
          {"decoder_blocks", s.decoder_blocks}, {"n_features", s.n_features}};
}

GeneratorSpec spec_from_json(const nlohmann::json& j) {
  try {
    GeneratorSpec s;
    s.preset = j.at("preset");
    s.exercise = data::parse_exercise(j.at("exercise").get<std::string>());
    s.d_model = j.at("d_model");
    s.pe_max_len = j.at("pe_max_len");
    s.heads = j.at("heads");
    s.d_k = j.at("d_k");
    s.d_v = j.at("d_v");
    s.ffn_hidden = j.at("ffn_hidden");
    s.dropout = j.at("dropout");
    s.encoder_blocks = j.at("encoder_blocks");
    s.decoder_blocks = j.at("decoder_blocks");
    s.n_features = j.at("n_features");
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("generator spec: ") + e.what());
  }
}

int target_length(data::ExerciseType exercise, std::span<const data::ExerciseSegment> segments) {
  std::map<std::size_t, std::size_t> histogram;
  for (const auto& seg : segments)
    if (seg.exercise_type == exercise && !seg.frames.empty()) ++histogram[seg.frames.size()];
  if (histogram.empty())
    throw Error(Errc::EmptyCategory, "no segments of type " + std::string(data::to_string(exercise)));
  double weighted = 0.0, count = 0.0;
  for (const auto& [length, freq] : histogram) {
    weighted += static_cast<double>(length) * static_cast<double>(freq);
    count += static_cast<double>(freq);
  }
  return static_cast<int>(std::lround(weighted / count));
}

Matrix robot_one_hot(std::span<const data::StrikeEvent> robot, int n_features) {
  if (robot.empty()) return Matrix::Zero(1, n_features);
  if (n_features == 1) {
    std::vector<data::StrikeEvent> drum(robot.begin(), robot.end());
    for (auto& s : drum) s.bar = 1;
    return data::one_hot_strikes(drum, 1, static_cast<Index>(drum.size()));
  }
  return data::one_hot_strikes(robot, n_features, static_cast<Index>(robot.size()));
}

std::vector<Pair> make_pairs(const GeneratorSpec& spec, std::span<const data::ExerciseSegment> segments,
                             int length) {
  if (length <= 0) throw Error(Errc::DomainError, "target length must be positive");
  std::vector<Pair> out;
  for (const auto& seg : segments) {
    if (seg.exercise_type != spec.exercise || seg.frames.empty()) continue;
    Pair p;
    p.id = seg.subject_id + "/" + std::to_string(seg.exercise_id);
    p.robot = robot_one_hot(seg.strikes_by(data::Actor::Robot), spec.n_features);
    const Matrix frames = data::frame_matrix(seg);
    p.initial = frames.row(0);
    p.target = Matrix::Zero(length, data::kChannels);
    const Index n = std::min<Index>(length, frames.rows());
    p.target.topRows(n) = frames.topRows(n);
    p.mask.assign(static_cast<std::size_t>(length), false);
    std::fill(p.mask.begin(), p.mask.begin() + n, true);
    out.push_back(std::move(p));
  }
  return out;
}

void validate(const GenTrainConfig& c) {
  if (c.epochs < 1 || c.batch_size < 1 || c.warmup < 1 || !(c.base_lr > 0.0))
    throw Error(Errc::ConfigError, "generator training needs positive epochs, batch, warmup and lr");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0 && c.eps > 0.0))
    throw Error(Errc::ConfigError, "invalid Adam coefficients");
  if (!(c.input_noise >= 0.0)) throw Error(Errc::ConfigError, "input_noise must be non-negative");
}

nlohmann::json to_json(const GenTrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed}, {"warmup", c.warmup},
          {"base_lr", c.base_lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps},
          {"input_noise", c.input_noise}};
}

Envelope envelope_of(std::span<const Pair> pairs) {
  Envelope env;
  env.lo.fill(INFINITY);
  env.hi.fill(-INFINITY);
  for (const Pair& p : pairs)
    for (Index r = 0; r < p.target.rows(); ++r) {
      if (!p.mask[static_cast<std::size_t>(r)]) continue;
      for (int c = 0; c < data::kChannels; ++c) {
        env.lo[c] = std::min(env.lo[c], p.target(r, c));
        env.hi[c] = std::max(env.hi[c], p.target(r, c));
      }
    }
  if (!std::isfinite(env.lo[0])) throw Error(Errc::EmptyCategory, "envelope of an empty dataset");
  for (int c = 0; c < data::kChannels; ++c) {
    const double m = std::max(kEnvelopeMargin * (env.hi[c] - env.lo[c]), kEnvelopeFloor);
    env.lo[c] -= m;
    env.hi[c] += m;
  }
  return env;
}

struct Generator::Impl {
  GeneratorSpec spec;
  std::uint64_t seed = 0;
  nn::ParameterSet params;
  nn::Dense enc_in, dec_in, out;
  nn::PositionalEncoding pe;
  std::vector<nn::EncoderBlock> encoder;
  std::vector<nn::DecoderBlock> decoder;
  nn::LayerNorm enc_norm, dec_norm;
  RowVector mean = RowVector::Zero(data::kChannels);
  RowVector scale = RowVector::Ones(data::kChannels);
  Envelope envelope;
  int length = 0;
  bool trained = false;

  Matrix standardize(const Matrix& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
  Matrix destandardize(const Matrix& x) const {
    return (x.array().rowwise() * scale.array()).matrix().rowwise() + mean;
  }

  Var encode(nn::Tape& tape, const Matrix& robot) const {
    if (robot.cols() != spec.n_features)
      throw Error(Errc::ShapeError, "robot one-hot must have " + std::to_string(spec.n_features) + " columns");
    Var h = pe(tape, enc_in(tape, tape.constant(robot)));
    for (const auto& b : encoder) h = b(tape, h);
    return enc_norm(tape, h);
  }

  /// Standardized predictions for a standardized decoder input.
  Var decode(nn::Tape& tape, Var memory, const Matrix& input) const {
    Var h = pe(tape, dec_in(tape, tape.constant(input)));
    for (const auto& b : decoder) h = b(tape, h, memory);
    return out(tape, dec_norm(tape, h));
  }

  /// Rows [initial, target_0 .. target_{L-2}], standardized.
  Matrix shifted_input(const Pair& p) const {
    Matrix in(p.target.rows(), data::kChannels);
    in.row(0) = p.initial;
    if (p.target.rows() > 1) in.bottomRows(p.target.rows() - 1) = p.target.topRows(p.target.rows() - 1);
    Matrix z = standardize(in);
    for (Index r = 1; r < in.rows(); ++r)
      if (!p.mask[static_cast<std::size_t>(r - 1)]) z.row(r).setZero();
    return z;
  }
};

Generator::Generator(const GeneratorSpec& spec, std::uint64_t seed) : impl_(std::make_unique<Impl>()) {
  validate(spec);
  Impl& m = *impl_;
  m.spec = spec;
  m.seed = seed;
  Rng rng(seed);
  const Index d = ix(spec.d_model);
  const nn::AttentionSpec att{d, ix(spec.heads), ix(spec.d_k), ix(spec.d_v)};
  m.enc_in = nn::Dense(m.params, "encoder.input", {ix(spec.n_features), d}, rng);
  m.dec_in = nn::Dense(m.params, "decoder.input", {data::kChannels, d}, rng);
  m.pe = nn::PositionalEncoding({d, ix(spec.pe_max_len)});
  for (int b = 0; b < spec.encoder_blocks; ++b)
    m.encoder.emplace_back(m.params, "encoder.block" + std::to_string(b), att, ix(spec.ffn_hidden), spec.dropout, rng);
  for (int b = 0; b < spec.decoder_blocks; ++b)
    m.decoder.emplace_back(m.params, "decoder.block" + std::to_string(b), att, ix(spec.ffn_hidden), spec.dropout, rng);
  m.enc_norm = nn::LayerNorm(m.params, "encoder.norm", {d}, rng);
  m.dec_norm = nn::LayerNorm(m.params, "decoder.norm", {d}, rng);
  m.out = nn::Dense(m.params, "output", {d, data::kChannels}, rng);
}

Generator::~Generator() = default;
Generator::Generator(Generator&&) noexcept = default;
Generator& Generator::operator=(Generator&&) noexcept = default;

const GeneratorSpec& Generator::spec() const { return impl_->spec; }
std::size_t Generator::parameter_count() const { return impl_->params.count(); }
nn::ParameterSet& Generator::params() { return impl_->params; }
const nn::ParameterSet& Generator::params() const { return impl_->params; }
bool Generator::trained() const { return impl_->trained; }
int Generator::target_length() const { return impl_->length; }
const Envelope& Generator::envelope() const { return impl_->envelope; }

Matrix Generator::teacher_forced(const Pair& pair) const {
  nn::Tape tape;
  const Var memory = impl_->encode(tape, pair.robot);
  return impl_->destandardize(impl_->decode(tape, memory, impl_->shifted_input(pair)).value());
}

Var Generator::teacher_forced_mse(nn::Tape& tape, const Pair& pair) const {
  const Var memory = impl_->encode(tape, pair.robot);
  const Var pred = impl_->decode(tape, memory, impl_->shifted_input(pair));
  const auto flags = std::make_unique<bool[]>(pair.mask.size());
  std::copy(pair.mask.begin(), pair.mask.end(), flags.get());
  return nn::masked_mse(pred, impl_->standardize(pair.target), std::span<const bool>(flags.get(), pair.mask.size()));
}

Matrix Generator::generate(const Matrix& robot, const RowVector& initial, int horizon) const {
  if (horizon <= 0) throw Error(Errc::DomainError, "horizon must be positive");
  if (!impl_->trained) throw Error(Errc::ModelStateError, "generator has not been trained or loaded");
  if (initial.size() != data::kChannels) throw Error(Errc::ShapeError, "initial frame must have 18 channels");
  if (!initial.allFinite()) throw Error(Errc::InvalidValue, "initial frame must be finite");
  const Impl& m = *impl_;
  nn::Tape enc_tape;
  const Matrix memory_value = m.encode(enc_tape, robot).value();

  // Full-horizon input buffer: row t+1 receives prediction t. The causal mask
  // keeps unfilled rows from reaching earlier outputs.
  Matrix input = Matrix::Zero(horizon, data::kChannels);
  input.row(0) = m.standardize(initial);
  Matrix pred(horizon, data::kChannels);
  for (int t = 0; t < horizon; ++t) {
    nn::Tape tape;
    const Var out = m.decode(tape, tape.constant(memory_value), input);
    pred.row(t) = out.value().row(t);
    if (t + 1 < horizon) input.row(t + 1) = pred.row(t);
  }
  Matrix frames = m.destandardize(pred);
  if (!frames.allFinite()) throw Error(Errc::NumericalError, "generated trajectory is not finite");
  for (Index r = 0; r < frames.rows(); ++r)
    for (int c = 0; c < data::kChannels; ++c)
      if (data::is_angle_channel(c)) frames(r, c) = data::remap_angle(frames(r, c));
  return frames;
}

void Generator::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  const Impl& m = *impl_;
  nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
  header["kind"] = "generator";
  header["seed"] = m.seed;
  header["preset"] = m.spec.preset;
  header["trained"] = m.trained;
  header["target_length"] = m.length;
  header["standardization"] = {{"mean", to_vector(m.mean)}, {"scale", to_vector(m.scale)}};
  header["envelope"] = {{"lo", m.envelope.lo}, {"hi", m.envelope.hi}};
  nn::save_model_file(path.string(), to_json(m.spec), header, m.params);
}

Generator Generator::load(const std::filesystem::path& path) {
  const nn::ModelFile file = nn::load_model_file(path.string());
  if (file.header.value("kind", "") != "generator")
    throw Error(Errc::FormatError, path.string() + " is not a generator model");
  try {
    const auto& h = file.header;
    Generator g(spec_from_json(h.at("descriptor")), h.at("seed").get<std::uint64_t>());
    nn::load_parameters(g.params(), file);
    Impl& m = *g.impl_;
    m.trained = h.at("trained").get<bool>();
    m.length = h.at("target_length").get<int>();
    m.mean = from_vector(h.at("standardization").at("mean").get<std::vector<double>>());
    m.scale = from_vector(h.at("standardization").at("scale").get<std::vector<double>>());
    m.envelope.lo = h.at("envelope").at("lo").get<data::Channels>();
    m.envelope.hi = h.at("envelope").at("hi").get<data::Channels>();
    if (m.mean.size() != data::kChannels || m.scale.size() != data::kChannels)
      throw Error(Errc::FormatError, "generator standardization must have 18 channels");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("generator header: ") + e.what());
  }
}

namespace {

void check_pairs(const Generator& g, std::span<const Pair> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyCategory, "no training pairs");
  const Index length = pairs.front().target.rows();
  for (const Pair& p : pairs) {
    if (p.target.rows() != length || p.target.cols() != data::kChannels ||
        static_cast<Index>(p.mask.size()) != length)
      throw Error(Errc::ShapeError, "pairs must share one target length with 18 channels");
    if (p.robot.cols() != g.spec().n_features) throw Error(Errc::ShapeError, "robot width mismatch in " + p.id);
    if (p.initial.size() != data::kChannels) throw Error(Errc::ShapeError, "initial frame width mismatch");
  }
}

std::vector<Matrix> snapshot(const nn::ParameterSet& params) {
  std::vector<Matrix> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

}  // namespace

void Generator::fit_data(std::span<const Pair> pairs) {
  check_pairs(*this, pairs);
  Impl& m = *impl_;
  std::vector<const Pair*> sorted;
  for (const Pair& p : pairs) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Pair* a, const Pair* b) { return a->id < b->id; });

  // Channel statistics over real target frames.
  Index frames = 0;
  RowVector sum = RowVector::Zero(data::kChannels);
  for (const Pair* p : sorted)
    for (Index r = 0; r < p->target.rows(); ++r)
      if (p->mask[static_cast<std::size_t>(r)]) {
        sum += p->target.row(r);
        ++frames;
      }
  m.mean = sum / static_cast<double>(frames);
  RowVector var = RowVector::Zero(data::kChannels);
  for (const Pair* p : sorted)
    for (Index r = 0; r < p->target.rows(); ++r)
      if (p->mask[static_cast<std::size_t>(r)]) var += (p->target.row(r) - m.mean).array().square().matrix();
  var /= static_cast<double>(frames);
  for (int c = 0; c < data::kChannels; ++c) m.scale(c) = var(c) > 1e-24 ? std::sqrt(var(c)) : 1.0;
  m.envelope = envelope_of(pairs);
  m.length = static_cast<int>(sorted.front()->target.rows());
  m.trained = false;

}

GenTrainResult train_generator(Generator& model, std::span<const Pair> pairs, const GenTrainConfig& config) {
  validate(config);
  Generator::Impl& m = *model.impl_;
  std::vector<const Pair*> sorted;
  for (const Pair& p : pairs) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Pair* a, const Pair* b) { return a->id < b->id; });

  model.fit_data(pairs);

  std::vector<Matrix> targets, inputs;
  for (const Pair* p : sorted) {
    targets.push_back(m.standardize(p->target));
    inputs.push_back(m.shifted_input(*p));
  }

  const nn::AdamConfig adam{config.beta1, config.beta2, config.eps, 0.0, nn::DecayMode::WeightDecay};
  Rng rng(config.seed);
  std::vector<std::size_t> order(sorted.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Matrix> last_good = snapshot(m.params);
  std::int64_t step = 0;
  GenTrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    double count = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      nn::Tape tape(true, mix_seed(config.seed, static_cast<std::uint64_t>(step + 1)));
      std::vector<Var> preds;
      std::vector<Matrix> batch_targets;
      std::vector<bool> mask;
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t k = order[i];
        if (config.input_noise > 0.0) {
          Matrix noisy = inputs[k];
          for (Index r = 0; r < noisy.rows(); ++r)
            for (Index c = 0; c < noisy.cols(); ++c) noisy(r, c) += rng.normal(0.0, config.input_noise);
          preds.push_back(m.decode(tape, m.encode(tape, sorted[k]->robot), noisy));
        } else {
          preds.push_back(m.decode(tape, m.encode(tape, sorted[k]->robot), inputs[k]));
        }
        batch_targets.push_back(targets[k]);
        mask.insert(mask.end(), sorted[k]->mask.begin(), sorted[k]->mask.end());
      }
      Matrix target(static_cast<Index>(mask.size()), data::kChannels);
      Index r = 0;
      for (const Matrix& t : batch_targets) {
        target.middleRows(r, t.rows()) = t;
        r += t.rows();
      }
      const auto flags = std::make_unique<bool[]>(mask.size());
      std::copy(mask.begin(), mask.end(), flags.get());
      const Var loss = nn::masked_mse(nn::concat_rows(preds), target, std::span<const bool>(flags.get(), mask.size()));
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value))
        throw DivergenceError("generator loss became non-finite in epoch " + std::to_string(epoch), epoch,
                              std::move(last_good));
      m.params.zero_grad();
      tape.backward(loss);
      nn::adam_step(m.params, nn::noam_lr(++step, config.warmup, config.base_lr), adam);
      const double real = static_cast<double>(std::count(mask.begin(), mask.end(), true));
      total += value * real;
      count += real;
    }
    result.loss.push_back(total / count);
    last_good = snapshot(m.params);
  }
  m.trained = true;
  return result;
}

double teacher_forced_loss(const Generator& model, std::span<const Pair> pairs) {
  check_pairs(model, pairs);
  const Generator::Impl& m = *model.impl_;
  double total = 0.0;
  double count = 0.0;
  for (const Pair& p : pairs) {
    nn::Tape tape;
    const Matrix pred = m.decode(tape, m.encode(tape, p.robot), m.shifted_input(p)).value();
    const Matrix target = m.standardize(p.target);
    for (Index r = 0; r < target.rows(); ++r) {
      if (!p.mask[static_cast<std::size_t>(r)]) continue;
      total += (pred.row(r) - target.row(r)).squaredNorm();
      count += data::kChannels;
    }
  }
  return total / count;
}

StabilityReport stability_probe(const Generator& model, std::span<const Pair> pairs, double perturbation,
                                int trials, std::uint64_t seed) {
  if (pairs.empty()) throw Error(Errc::EmptyCategory, "stability probe needs at least one pair");
  if (trials < 1) throw Error(Errc::DomainError, "trials must be at least 1");
  if (!(perturbation >= 0.0)) throw Error(Errc::DomainError, "perturbation must be non-negative");
  if (!model.trained()) throw Error(Errc::ModelStateError, "generator has not been trained or loaded");
  const Envelope& env = model.envelope();
  // Channel range of the data: the envelope minus its margins.
  data::Channels range{};
  for (int c = 0; c < data::kChannels; ++c) {
    const double width = env.hi[c] - env.lo[c];
    const double margin = std::max(kEnvelopeMargin * width / (1.0 + 2.0 * kEnvelopeMargin), kEnvelopeFloor);
    range[c] = std::max(0.0, width - 2.0 * margin);
  }
  StabilityReport rep;
  rep.perturbation = perturbation;
  rep.trials = trials;
  std::array<std::size_t, data::kChannels> inside{};
  std::size_t total = 0;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t)
    for (const Pair& p : pairs) {
      RowVector init = p.initial;
      for (int c = 0; c < data::kChannels; ++c) init(c) += rng.uniform(-perturbation, perturbation) * range[c];
      Matrix traj = model.generate(p.robot, init, model.target_length());
      for (Index r = 0; r < traj.rows(); ++r)
        for (int c = 0; c < data::kChannels; ++c)
          inside[static_cast<std::size_t>(c)] += traj(r, c) >= env.lo[c] && traj(r, c) <= env.hi[c];
      total += static_cast<std::size_t>(traj.rows());
      rep.trajectories.push_back(std::move(traj));
    }
  rep.pass = true;
  for (int c = 0; c < data::kChannels; ++c) {
    ChannelReport ch;
    ch.channel = std::string(data::channel_name(c));
    ch.lo = env.lo[c];
    ch.hi = env.hi[c];
    ch.inside = inside[static_cast<std::size_t>(c)];
    ch.total = total;
    ch.fraction = static_cast<double>(ch.inside) / static_cast<double>(total);
    rep.pass = rep.pass && ch.fraction >= kStabilityPassFraction;
    rep.channels.push_back(ch);
  }
  return rep;
}

nlohmann::json to_json(const StabilityReport& r) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& c : r.channels)
    channels.push_back({{"channel", c.channel},
                        {"lo", c.lo},
                        {"hi", c.hi},
                        {"inside", c.inside},
                        {"total", c.total},
                        {"fraction", c.fraction},
                        {"pass", c.fraction >= kStabilityPassFraction}});
  return {{"perturbation", r.perturbation},
          {"trials", r.trials},
          {"threshold", kStabilityPassFraction},
          {"pass", r.pass},
          {"channels", channels}};
}

}  // namespace tempo::gen
