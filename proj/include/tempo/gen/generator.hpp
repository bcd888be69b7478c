#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/core/error.hpp"
#include "tempo/data/types.hpp"
#include "tempo/nn/tape.hpp"

namespace tempo::gen {

struct GeneratorSpec {
  std::string preset = "paper";
  data::ExerciseType exercise = data::ExerciseType::SingleHitXylophone;
  int d_model = 512;
  int pe_max_len = 5000;
  int heads = 8;
  int d_k = 64;
  int d_v = 64;
  int ffn_hidden = 2048;
  double dropout = 0.1;
  int encoder_blocks = 6;
  int decoder_blocks = 6;
  /// One-hot width of a robot strike: 8 bars, or 1 for drumming.
  int n_features = 8;
};

GeneratorSpec paper_spec(data::ExerciseType exercise);
/// d_model 128, 4 heads, FFN 512, 2 + 2 blocks, no dropout.
GeneratorSpec small_spec(data::ExerciseType exercise);
GeneratorSpec make_spec(const std::string& preset, data::ExerciseType exercise);
/// ConfigError for non-positive widths, odd d_model, or a paper preset
/// whose heads * d_k differs from d_model.
void validate(const GeneratorSpec& spec);
/// Closed-form parameter count of the encoder-decoder.
std::size_t analytic_parameter_count(const GeneratorSpec& spec);
nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec spec_from_json(const nlohmann::json& j);

/// Frequency-weighted mean frame count of the segments of one type, rounded
/// half away from zero. EmptyCategory when there are none.
int target_length(data::ExerciseType exercise, std::span<const data::ExerciseSegment> segments);

/// One training example: robot strikes in, child motion out.
struct Pair {
  std::string id;
  /// [S, n_features] one-hot robot strikes; one zero row when the robot
  /// did not strike.
  nn::Matrix robot;
  /// [1, 18] frame at the segment start.
  nn::RowVector initial;
  /// [L, 18] motion truncated or zero-padded to the target length.
  nn::Matrix target;
  std::vector<bool> mask;  // true on real frames
};

nn::Matrix robot_one_hot(std::span<const data::StrikeEvent> robot, int n_features);
/// Pairs for every segment of the spec's exercise type, in input order.
std::vector<Pair> make_pairs(const GeneratorSpec& spec, std::span<const data::ExerciseSegment> segments,
                             int length);

struct GenTrainConfig {
  int epochs = 350;
  int batch_size = 8;
  std::uint64_t seed = 0;
  std::int64_t warmup = 400;
  double base_lr = 0.015;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  /// Std of Gaussian noise added to decoder inputs during training, in
  /// standardized units.
  double input_noise = 0.1;
};
void validate(const GenTrainConfig& c);
nlohmann::json to_json(const GenTrainConfig& c);

/// Per-channel band the training targets span, widened by
/// max(0.05 * range, 1e-3) on each side.
struct Envelope {
  data::Channels lo{};
  data::Channels hi{};
};
inline constexpr double kEnvelopeMargin = 0.05;
inline constexpr double kEnvelopeFloor = 1e-3;
Envelope envelope_of(std::span<const Pair> pairs);

struct GenTrainResult {
  std::vector<double> loss;  // mean masked MSE per epoch, standardized units
};

class Generator;
GenTrainResult train_generator(Generator& model, std::span<const Pair> pairs, const GenTrainConfig& config);
double teacher_forced_loss(const Generator& model, std::span<const Pair> pairs);

class Generator {
 public:
  Generator(const GeneratorSpec& spec, std::uint64_t seed);
  ~Generator();
  Generator(Generator&&) noexcept;
  Generator& operator=(Generator&&) noexcept;

  const GeneratorSpec& spec() const;
  std::size_t parameter_count() const;
  nn::ParameterSet& params();
  const nn::ParameterSet& params() const;
  bool trained() const;
  int target_length() const;
  const Envelope& envelope() const;

  /// Fits standardization, envelope and target length from `pairs` and
  /// marks the model untrained. train_generator calls this first.
  void fit_data(std::span<const Pair> pairs);

  /// Teacher-forced prediction [L, 18] in data units: step t sees the
  /// initial frame and target rows 0..t-1.
  nn::Matrix teacher_forced(const Pair& pair) const;
  /// Masked MSE of the teacher-forced pass on `tape`, standardized units.
  nn::Var teacher_forced_mse(nn::Tape& tape, const Pair& pair) const;
  /// Free-running decoding for `horizon` steps; angle channels are wrapped
  /// into (-180, 180]. DomainError for horizon <= 0, ModelStateError before
  /// training or loading.
  nn::Matrix generate(const nn::Matrix& robot, const nn::RowVector& initial, int horizon) const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static Generator load(const std::filesystem::path& path);

 private:
  friend GenTrainResult train_generator(Generator&, std::span<const Pair>, const GenTrainConfig&);
  friend double teacher_forced_loss(const Generator&, std::span<const Pair>);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Non-finite training loss. Carries the parameters from the last epoch
/// whose loss was finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, std::vector<nn::Matrix> checkpoint)
      : Error(Errc::DivergenceError, what), epoch_(epoch), checkpoint_(std::move(checkpoint)) {}
  int epoch() const { return epoch_; }
  const std::vector<nn::Matrix>& checkpoint() const { return checkpoint_; }

 private:
  int epoch_;
  std::vector<nn::Matrix> checkpoint_;
};

/// Fits standardization, envelope and target length from `pairs`, then
/// trains with teacher forcing under the Noam schedule. Pairs are put into
/// id order first.
GenTrainResult train_generator(Generator& model, std::span<const Pair> pairs, const GenTrainConfig& config);

/// Masked MSE of the teacher-forced predictions in standardized units.
double teacher_forced_loss(const Generator& model, std::span<const Pair> pairs);

struct ChannelReport {
  std::string channel;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t inside = 0;
  std::size_t total = 0;
  double fraction = 0.0;
};

struct StabilityReport {
  double perturbation = 0.0;
  int trials = 0;
  std::vector<ChannelReport> channels;
  bool pass = false;
  std::vector<nn::Matrix> trajectories;
};

inline constexpr double kStabilityPassFraction = 0.95;

/// For each trial and pair: initial frame + U(-s, s) * channel range, then
/// generate over the target length and count values inside the envelope.
/// EmptyCategory for no pairs; DomainError for trials < 1 or s < 0.
StabilityReport stability_probe(const Generator& model, std::span<const Pair> pairs, double perturbation,
                                int trials, std::uint64_t seed);
nlohmann::json to_json(const StabilityReport& r);

/// CSV with header t,h_x,...,l_roll and rows at k/16 s. The parser skips
/// leading '#' comment lines.
std::string trajectory_csv(const nn::Matrix& frames);
nn::Matrix parse_trajectory_csv(const std::string& text);
/// One panel per channel: generated trace, optional real trace, and the two
/// envelope bounds as polylines.
std::string overlay_svg(const nn::Matrix& generated, const nn::Matrix* real, const Envelope& envelope);

}  // namespace tempo::gen
