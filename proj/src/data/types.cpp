#include "tempo/data/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tempo/core/error.hpp"

namespace tempo::data {

namespace {

constexpr std::string_view kChannelNames[kChannels] = {
    "h_x", "h_y", "h_z", "h_yaw", "h_pitch", "h_roll",
    "r_x", "r_y", "r_z", "r_yaw", "r_pitch", "r_roll",
    "l_x", "l_y", "l_z", "l_yaw", "l_pitch", "l_roll"};

struct ExerciseNames {
  ExerciseType type;
  std::string_view key;
  std::string_view display;
  std::string_view enum_name;
};

constexpr ExerciseNames kExerciseNames[] = {
    {ExerciseType::Drumming, "drumming", "Drumming", "Drumming"},
    {ExerciseType::SingleHitXylophone, "single-hit-xylophone", "Single-hit Xylophone", "SingleHitXylophone"},
    {ExerciseType::MultiHitXylophone, "multi-hit-xylophone", "Multi-hit Xylophone", "MultiHitXylophone"},
    {ExerciseType::VerbalInstruction, "verbal-instruction", "Verbal Instruction", "VerbalInstruction"},
    {ExerciseType::JointAttention, "joint-attention", "Joint Attention", "JointAttention"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view channel_name(int c) {
  if (c < 0 || c >= kChannels) throw Error(Errc::InvalidValue, "channel index out of range");
  return kChannelNames[c];
}

void check_strike(const StrikeEvent& s) {
  if (!std::isfinite(s.t)) throw Error(Errc::InvalidValue, "strike time is not finite");
  if (s.instrument == Instrument::Drum && s.bar != 1)
    throw Error(Errc::InvalidValue, "drum strikes use bar 1");
  if (s.instrument == Instrument::Xylophone && (s.bar < 1 || s.bar > kBars))
    throw Error(Errc::InvalidValue, "xylophone bar must be in [1, 8], got " + std::to_string(s.bar));
}

std::vector<StrikeEvent> ExerciseSegment::strikes_by(Actor actor) const {
  std::vector<StrikeEvent> out;
  for (const auto& s : strikes)
    if (s.actor == actor) out.push_back(s);
  return out;
}

std::string_view to_string(Actor a) { return a == Actor::Robot ? "robot" : "child"; }
std::string_view to_string(Instrument i) { return i == Instrument::Drum ? "drum" : "xylophone"; }
std::string_view to_string(Group g) { return g == Group::ASD ? "ASD" : "TD"; }

std::string_view to_string(ExerciseType e) {
  for (const auto& n : kExerciseNames)
    if (n.type == e) return n.key;
  return "unknown";
}

std::string_view display_name(ExerciseType e) {
  for (const auto& n : kExerciseNames)
    if (n.type == e) return n.display;
  return "unknown";
}

std::string flag_name(unsigned single_flag) {
  switch (single_flag) {
    case kInattentive: return "inattentive";
    case kFatigued: return "fatigued";
    case kRepeatedPrior: return "repeated_prior";
    default: return "unknown";
  }
}

Actor parse_actor(std::string_view s) {
  const std::string v = lower(s);
  if (v == "robot") return Actor::Robot;
  if (v == "child") return Actor::Child;
  throw Error(Errc::InvalidValue, "unknown actor '" + std::string(s) + "'");
}

Group parse_group(std::string_view s) {
  const std::string v = lower(s);
  if (v == "td") return Group::TD;
  if (v == "asd") return Group::ASD;
  throw Error(Errc::InvalidValue, "unknown group '" + std::string(s) + "'");
}

ExerciseType parse_exercise(std::string_view s) {
  const std::string v = lower(s);
  for (const auto& n : kExerciseNames)
    if (v == n.key || v == lower(n.display) || v == lower(n.enum_name)) return n.type;
  throw Error(Errc::InvalidValue, "unknown exercise type '" + std::string(s) + "'");
}

unsigned parse_flag(std::string_view s) {
  const std::string v = lower(s);
  if (v == "inattentive") return kInattentive;
  if (v == "fatigued") return kFatigued;
  if (v == "repeated_prior" || v == "repeated") return kRepeatedPrior;
  throw Error(Errc::InvalidValue, "unknown annotation flag '" + std::string(s) + "'");
}

Instrument instrument_for(ExerciseType e) {
  return e == ExerciseType::Drumming ? Instrument::Drum : Instrument::Xylophone;
}

}  // namespace tempo::data
