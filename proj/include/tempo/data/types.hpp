#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempo::data {

inline constexpr int kChannels = 18;
inline constexpr int kRate = 16;
inline constexpr double kStep = 1.0 / kRate;
inline constexpr int kBars = 8;

/// headset, right controller, left controller; each x, y, z, yaw, pitch, roll.
using Channels = std::array<double, kChannels>;

inline constexpr bool is_angle_channel(int c) { return c % 6 >= 3; }
std::string_view channel_name(int c);

struct MotionFrame {
  double t = 0.0;
  Channels ch{};
};

enum class Actor { Robot, Child };
enum class Instrument { Drum, Xylophone };
enum class Group { TD, ASD };
enum class ExerciseType { Drumming, SingleHitXylophone, MultiHitXylophone, VerbalInstruction, JointAttention };

inline constexpr std::array<ExerciseType, 5> kExerciseTypes = {
    ExerciseType::Drumming, ExerciseType::SingleHitXylophone, ExerciseType::MultiHitXylophone,
    ExerciseType::VerbalInstruction, ExerciseType::JointAttention};

struct StrikeEvent {
  double t = 0.0;
  Actor actor = Actor::Child;
  Instrument instrument = Instrument::Xylophone;
  int bar = 1;
};

/// Throws InvalidValue unless bar is 1..8 for the xylophone and 1 for the drum.
void check_strike(const StrikeEvent& s);

enum Flag : unsigned {
  kInattentive = 1u << 0,
  kFatigued = 1u << 1,
  kRepeatedPrior = 1u << 2,
};

struct Annotation {
  double t0 = 0.0;
  double t1 = 0.0;
  unsigned flags = 0;
};

struct Cue {
  double t = 0.0;
  ExerciseType exercise = ExerciseType::Drumming;
  /// End of the robot demonstration window; strikes inside [t, demo_end] are the robot's.
  double demo_end = 0.0;
};

struct ExerciseSegment {
  std::string subject_id;
  Group group = Group::TD;
  ExerciseType exercise_type = ExerciseType::Drumming;
  int exercise_id = 0;
  double start_t = 0.0;
  double end_t = 0.0;
  std::vector<MotionFrame> frames;
  std::vector<StrikeEvent> strikes;
  unsigned flags = 0;

  std::vector<StrikeEvent> strikes_by(Actor actor) const;
};

struct SessionRecord {
  std::string subject_id;
  Group group = Group::TD;
  std::vector<MotionFrame> samples;
  std::vector<Cue> cues;
  std::vector<StrikeEvent> strikes;
  std::vector<Annotation> annotations;
};

std::string_view to_string(Actor a);
std::string_view to_string(Instrument i);
std::string_view to_string(Group g);
/// Canonical key, e.g. "single-hit-xylophone".
std::string_view to_string(ExerciseType e);
/// Display label, e.g. "Single-hit Xylophone".
std::string_view display_name(ExerciseType e);
std::string flag_name(unsigned single_flag);

Actor parse_actor(std::string_view s);
Group parse_group(std::string_view s);
/// Accepts canonical keys, display labels and enum spellings.
ExerciseType parse_exercise(std::string_view s);
unsigned parse_flag(std::string_view s);

Instrument instrument_for(ExerciseType e);
/// Label convention used by every classifier: TD = 0, ASD = 1.
inline int label_of(Group g) { return g == Group::ASD ? 1 : 0; }

}  // namespace tempo::data
