#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/data/types.hpp"
#include "tempo/models/descriptor.hpp"
#include "tempo/nn/tape.hpp"

namespace tempo::models {

/// One classification example built from an exercise segment.
struct Sample {
  std::string id;  // "<subject>/<exercise_id>"
  std::string subject_id;
  data::ExerciseType exercise = data::ExerciseType::Drumming;
  int label = 0;
  /// Child strikes: column 0 bar index (0-based), column 1 seconds since
  /// segment start. Rows are in time order.
  nn::Matrix strikes;
  /// [T, 18] motion frames.
  nn::Matrix motion;
};

Sample make_sample(const data::ExerciseSegment& seg);
/// Samples of one exercise type, in input order.
std::vector<Sample> make_samples(std::span<const data::ExerciseSegment> segments,
                                 data::ExerciseType exercise);

/// Strips padded steps: rows of `padded` whose mask entry is false.
Sample strip_padding(const Sample& padded_sample, std::span<const bool> motion_mask);

/// Fixed-length handcrafted features: strike count, mean and std of the
/// inter-strike interval, then per-channel motion mean, std, min and max.
/// The modality selects which blocks are present.
nn::RowVector handcrafted_features(const Sample& s, Modality modality);

/// Per-column standardization; a zero spread is stored as 1.
struct Standardization {
  nn::RowVector mean;
  nn::RowVector scale;
};

class Classifier {
 public:
  Classifier(const ModelDescriptor& descriptor, std::uint64_t seed);
  ~Classifier();
  Classifier(Classifier&&) noexcept;
  Classifier& operator=(Classifier&&) noexcept;

  const ModelDescriptor& descriptor() const;
  std::uint64_t seed() const;
  nn::ParameterSet& params();
  const nn::ParameterSet& params() const;
  std::size_t parameter_count() const;

  /// Deep models: 18 motion channels then the strike timestamp. Logistic
  /// regression: the handcrafted features. Identity until set.
  const Standardization& standardization() const;
  void set_standardization(Standardization s);
  /// Fits the statistics on the given samples.
  void fit_standardization(std::span<const Sample* const> samples);

  /// Raw logits [1, 2]. ModalityError for JointAttention on a model that
  /// reads strikes; InvalidValue for an exercise mismatch.
  nn::Var logits(nn::Tape& tape, const Sample& s) const;
  /// Softmax probability of ASD.
  double score(const Sample& s) const;
  /// argmax of the logits; ties go to TD.
  int predict(const Sample& s) const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static Classifier load(const std::filesystem::path& path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Throws ModalityError when the model cannot read this exercise.
void check_modality(const ModelDescriptor& d, data::ExerciseType exercise);

}  // namespace tempo::models
