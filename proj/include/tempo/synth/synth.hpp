#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/data/types.hpp"
#include "tempo/detect/audio.hpp"
#include "tempo/detect/detector.hpp"

namespace tempo::synth {

/// Synthetic behaviour parameters. Not a model of real children.
struct BehaviorProfile {
  std::string name;
  data::Group group = data::Group::TD;
  double latency_mean = 3.0;  // cue to first child strike, seconds
  double latency_std = 0.2;
  double correct_bar_prob = 1.0;
  double strike_count_fidelity = 1.0;
  double strike_spacing = 0.5;  // between successive child strikes
  double spacing_std = 0.05;
  data::Channels motion_jitter{};  // per-channel std, metres or degrees
  double head_sway = 2.0;          // degrees
  double fatigue_dropout = 0.0;    // late exercises only
  double inattentive_prob = 0.0;
  double double_hit_prob = 0.0;    // xylophone only
  data::Channels base_pose{};      // raw angles in [0, 360)
};

/// Returns the validated profile; InvalidValue on a bad probability or std.
void check_profile(const BehaviorProfile& p);

struct ScriptItem {
  data::ExerciseType type = data::ExerciseType::Drumming;
  double cue_t = 0.0;
  double demo_end = 0.0;
  std::vector<int> robot_bars;  // bar 1 for drum beats
};

struct ScenarioScript {
  std::vector<ScriptItem> items;
  double end_t = 0.0;
};

inline constexpr double kCueSpacing = 10.0;
inline constexpr double kBeatSpacing = 0.5;

/// `per_type` exercises of each type in blocks, in the fixed type order,
/// with robot patterns of 1-4 beats drawn from the seed.
ScenarioScript default_script(int per_type, std::uint64_t seed,
                              std::span<const data::ExerciseType> types = data::kExerciseTypes);
/// InvalidValue unless cue times strictly increase.
void check_script(const ScenarioScript& script);

struct TruthSegment {
  data::ExerciseType type = data::ExerciseType::Drumming;
  double start_t = 0.0;
  double end_t = 0.0;
  bool valid = true;
  std::string reason;
};

struct SynthSession {
  data::SessionRecord session;  // session.strikes holds the ground truth
  std::vector<TruthSegment> truth;
};

SynthSession synth_session(const BehaviorProfile& profile, const ScenarioScript& script, std::uint64_t seed,
                           const std::string& subject_id);

/// Templates mixed in at strike times (drum template for drum strikes), with
/// optional white noise `snr_db` below the mean template power. Infinite
/// SNR adds no noise.
detect::AudioTrack synth_audio(std::span<const data::StrikeEvent> strikes,
                               std::span<const detect::NoteTemplate> templates, int sample_rate,
                               double duration, double snr_db, std::uint64_t seed);

/// `separation` scales the distance of the ASD profile from the TD profile.
std::array<BehaviorProfile, 2> default_profiles(double separation = 1.0);

/// Per-channel [lo, hi] a session of this profile can reach, in remapped angles.
std::array<data::Channels, 2> pose_bounds(const BehaviorProfile& p);

nlohmann::json truth_json(const SynthSession& s);

struct CohortConfig {
  int td_subjects = 10;
  int asd_subjects = 10;
  int per_type = 3;
  double separation = 1.0;
  std::uint64_t seed = 0;
  std::vector<data::ExerciseType> types{data::kExerciseTypes.begin(), data::kExerciseTypes.end()};
};

/// Subjects TD-1..TD-n then ASD-1..ASD-m, each with its own script.
std::vector<SynthSession> synth_cohort(const CohortConfig& config);

/// Segments of every session built from its ground-truth strikes; only
/// segments that pass validation are kept.
std::vector<data::ExerciseSegment> valid_segments(std::span<const SynthSession> sessions);
nlohmann::json profile_json(const BehaviorProfile& p);

}  // namespace tempo::synth
