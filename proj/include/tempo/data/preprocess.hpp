#pragma once

#include <span>
#include <string>
#include <vector>

#include "tempo/data/types.hpp"
#include "tempo/nn/tensor.hpp"

namespace tempo::data {

/// Maps degrees onto (-180, 180]: x - 360 * ceil((x - 180) / 360).
/// InvalidValue for non-finite input.
double remap_angle(double deg);

/// Samples onto the grid k/16 for ceil(16 t_first) <= k <= floor(16 t_last).
/// Positions are linearly interpolated; angles are remapped and interpolated
/// along the shorter arc. InsufficientData for fewer than two samples.
std::vector<MotionFrame> resample(std::span<const MotionFrame> samples, int rate = kRate);

/// Tail appended after the last action of a segment with no following cue.
inline constexpr double kFinalTail = 2.0;

/// One segment per cue. Segment i covers [cue_i, end_i) where end_i is the
/// midpoint between the last child strike and cue_{i+1} (the cue itself when
/// the child never struck). The last segment ends kFinalTail after its last
/// action. Frames are taken from the resampled motion.
std::vector<ExerciseSegment> segment_exercises(const SessionRecord& session);

enum class Exclusion { None, Inattentive, Fatigued, RepeatedPrior, InterStrike };
std::string_view to_string(Exclusion e);

struct Validation {
  bool valid = true;
  Exclusion reason = Exclusion::None;
};

/// Excluded when any annotation flag is set or two consecutive child strikes
/// are closer than 1/16 s. The reason is the first rule that fires in the
/// order inattentive, fatigued, repeated, inter-strike.
Validation validate_segment(const ExerciseSegment& seg);

struct Padded {
  std::vector<nn::Matrix> data;
  nn::Mask mask;
};

/// Zero-pads every [T_i, C] sequence to [target_len, C]. mask(i, t) is true on
/// real steps. LengthError if a sequence is empty or longer than target_len.
Padded pad_sequences(std::span<const nn::Matrix> sequences, nn::Index target_len);
/// Drops the masked steps of one padded sequence.
nn::Matrix unpad(const nn::Matrix& padded, const nn::Mask& mask, nn::Index row);

/// Row i is the one-hot bar of strike i; rows past the strike count are zero.
/// InvalidValue for a bar outside [1, n_features]; LengthError when there are
/// more strikes than max_strikes.
nn::Matrix one_hot_strikes(std::span<const StrikeEvent> strikes, nn::Index n_features,
                           nn::Index max_strikes);

/// Frames of a segment as a [T, 18] matrix.
nn::Matrix frame_matrix(const ExerciseSegment& seg);

}  // namespace tempo::data
