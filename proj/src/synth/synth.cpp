#include "tempo/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tempo/core/error.hpp"
#include "tempo/core/rng.hpp"
#include "tempo/data/dataset_io.hpp"
#include "tempo/data/preprocess.hpp"

namespace tempo::synth {

using data::Actor;
using data::Channels;
using data::ExerciseType;
using data::Instrument;
using data::kChannels;
using data::StrikeEvent;

namespace {

constexpr double kReach = 0.35;    // seconds from rest to the instrument
constexpr double kTurn = 0.6;      // head turn duration in joint attention
constexpr double kGaze = 40.0;     // degrees
constexpr double kStrikeFlick = 30.0;
constexpr int kRightPitch = 10;
constexpr int kHeadYaw = 3, kHeadRoll = 5;

struct Vec3 {
  double x, y, z;
};

Vec3 bar_position(int bar) { return {-0.35 + 0.1 * (bar - 1), 0.72, 0.5}; }
constexpr Vec3 kDrum{0.0, 0.65, 0.45};

double min_jerk(double tau) {
  tau = std::clamp(tau, 0.0, 1.0);
  return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
}

struct Key {
  double t;
  std::array<double, 4> v;  // right hand dx, dy, dz, dpitch
};

/// Piecewise minimum-jerk through keys; zero outside every group.
struct KeyTrack {
  std::vector<std::vector<Key>> groups;

  std::array<double, 4> at(double t) const {
    for (const auto& g : groups) {
      if (t < g.front().t || t > g.back().t) continue;
      for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        if (t > g[i + 1].t) continue;
        const double span = g[i + 1].t - g[i].t;
        const double s = span > 0.0 ? min_jerk((t - g[i].t) / span) : 1.0;
        std::array<double, 4> out{};
        for (int k = 0; k < 4; ++k) out[k] = g[i].v[k] + s * (g[i + 1].v[k] - g[i].v[k]);
        return out;
      }
    }
    return {0.0, 0.0, 0.0, 0.0};
  }
};

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  return r >= 360.0 ? 0.0 : r;
}

int other_bar(Rng& rng, int bar) {
  int b = static_cast<int>(rng.index(data::kBars - 1)) + 1;
  return b >= bar ? b + 1 : b;
}

bool is_xylophone(ExerciseType t) {
  return t == ExerciseType::SingleHitXylophone || t == ExerciseType::MultiHitXylophone ||
         t == ExerciseType::VerbalInstruction;
}

Channels default_base_pose() {
  return {0.0,  1.15, 0.0,  10.0, 345.0, 0.0,   // headset
          0.22, 0.85, 0.25, 0.0,  20.0,  0.0,   // right controller
          -0.22, 0.85, 0.25, 0.0, 20.0,  0.0};  // left controller
}

}  // namespace

void check_profile(const BehaviorProfile& p) {
  auto prob = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidValue, std::string(what) + " must lie in [0, 1]");
  };
  prob(p.correct_bar_prob, "correct_bar_prob");
  prob(p.strike_count_fidelity, "strike_count_fidelity");
  prob(p.fatigue_dropout, "fatigue_dropout");
  prob(p.inattentive_prob, "inattentive_prob");
  prob(p.double_hit_prob, "double_hit_prob");
  if (!(p.latency_std >= 0.0) || !(p.spacing_std >= 0.0) || !(p.head_sway >= 0.0))
    throw Error(Errc::InvalidValue, "profile standard deviations must be non-negative");
  for (double j : p.motion_jitter)
    if (!(j >= 0.0)) throw Error(Errc::InvalidValue, "motion_jitter must be non-negative");
  if (!(p.latency_mean > 0.0) || !(p.strike_spacing > 0.0))
    throw Error(Errc::InvalidValue, "latency and spacing means must be positive");
}

void check_script(const ScenarioScript& script) {
  for (std::size_t i = 1; i < script.items.size(); ++i)
    if (!(script.items[i].cue_t > script.items[i - 1].cue_t))
      throw Error(Errc::InvalidValue, "script cue times must strictly increase");
}

ScenarioScript default_script(int per_type, std::uint64_t seed, std::span<const ExerciseType> types) {
  if (per_type < 1) throw Error(Errc::ConfigError, "default_script: per_type must be positive");
  Rng rng(seed);
  ScenarioScript s;
  double cue = 2.0;
  for (ExerciseType type : types) {
    for (int i = 0; i < per_type; ++i) {
      ScriptItem item;
      item.type = type;
      item.cue_t = cue;
      int beats = 0;
      switch (type) {
        case ExerciseType::Drumming:
          beats = 1 + static_cast<int>(rng.index(4));
          item.robot_bars.assign(static_cast<std::size_t>(beats), 1);
          break;
        case ExerciseType::SingleHitXylophone:
          item.robot_bars = {1 + static_cast<int>(rng.index(data::kBars))};
          break;
        case ExerciseType::MultiHitXylophone:
          beats = 2 + static_cast<int>(rng.index(3));
          for (int b = 0; b < beats; ++b) item.robot_bars.push_back(1 + static_cast<int>(rng.index(data::kBars)));
          break;
        default:
          break;
      }
      item.demo_end = item.robot_bars.empty()
                          ? cue + 1.5
                          : cue + 0.5 + kBeatSpacing * static_cast<double>(item.robot_bars.size() - 1) + 0.3;
      s.items.push_back(std::move(item));
      cue += kCueSpacing;
    }
  }
  s.end_t = cue;
  return s;
}

SynthSession synth_session(const BehaviorProfile& profile, const ScenarioScript& script, std::uint64_t seed,
                           const std::string& subject_id) {
  check_profile(profile);
  check_script(script);
  Rng rng(mix_seed(seed, 1));
  SynthSession out;
  data::SessionRecord& rec = out.session;
  rec.subject_id = subject_id;
  rec.group = profile.group;

  KeyTrack hand;
  std::vector<std::pair<double, double>> gaze;  // (turn start, signed amplitude)
  const std::size_t n = script.items.size();

  for (std::size_t i = 0; i < n; ++i) {
    const ScriptItem& item = script.items[i];
    rec.cues.push_back({item.cue_t, item.type, item.demo_end});
    for (std::size_t k = 0; k < item.robot_bars.size(); ++k)
      rec.strikes.push_back({item.cue_t + 0.5 + kBeatSpacing * static_cast<double>(k), Actor::Robot,
                             data::instrument_for(item.type), item.robot_bars[k]});

    const bool fatigued = i >= n / 2 && rng.bernoulli(profile.fatigue_dropout);
    const bool inattentive = rng.bernoulli(profile.inattentive_prob);
    unsigned flags = 0;
    if (fatigued) flags |= data::kFatigued;
    if (inattentive) flags |= data::kInattentive;
    if (flags) rec.annotations.push_back({item.cue_t, item.cue_t + 1.0, flags});

    const double latency =
        std::max(rng.normal(profile.latency_mean, profile.latency_std), item.demo_end - item.cue_t + 0.3);
    std::vector<StrikeEvent> child;
    bool double_hit = false;
    if (item.type == ExerciseType::JointAttention) {
      if (!fatigued) gaze.push_back({item.cue_t + latency - kTurn, rng.bernoulli(0.5) ? kGaze : -kGaze});
    } else if (!fatigued) {
      int count = item.type == ExerciseType::Drumming || item.type == ExerciseType::MultiHitXylophone
                      ? static_cast<int>(item.robot_bars.size())
                      : 1;
      if (!rng.bernoulli(profile.strike_count_fidelity))
        count = std::clamp(count + (rng.bernoulli(0.5) ? 1 : -1), 1, 5);
      const int instructed = 1 + static_cast<int>(rng.index(data::kBars));
      double t = item.cue_t + latency;
      const double limit = (i + 1 < n ? script.items[i + 1].cue_t : item.cue_t + kCueSpacing) - 1.0;
      for (int k = 0; k < count && t < limit; ++k) {
        int bar = 1;
        if (item.type != ExerciseType::Drumming) {
          const int want = item.type == ExerciseType::VerbalInstruction
                               ? instructed
                               : (k < static_cast<int>(item.robot_bars.size()) ? item.robot_bars[static_cast<std::size_t>(k)]
                                                                               : 1 + static_cast<int>(rng.index(data::kBars)));
          bar = rng.bernoulli(profile.correct_bar_prob) ? want : other_bar(rng, want);
        }
        child.push_back({t, Actor::Child, data::instrument_for(item.type), bar});
        t += std::max(0.2, rng.normal(profile.strike_spacing, profile.spacing_std));
      }
      if (is_xylophone(item.type) && rng.bernoulli(profile.double_hit_prob)) {
        const std::size_t at = static_cast<std::size_t>(rng.index(child.size()));
        const int b = child[at].bar;
        const int adjacent = b == data::kBars ? b - 1 : b + 1;
        // starts after the first clip ends and stays under 1/16 s
        const StrikeEvent extra{child[at].t + rng.uniform(0.051, 0.06), Actor::Child, Instrument::Xylophone, adjacent};
        child.insert(child.begin() + static_cast<std::ptrdiff_t>(at) + 1, extra);
        for (std::size_t m = at + 2; m < child.size(); ++m) child[m].t += 0.1;
        double_hit = true;
      }
    }

    if (!child.empty()) {
      std::vector<Key> keys;
      keys.push_back({child.front().t - kReach, {0.0, 0.0, 0.0, 0.0}});
      for (const auto& s : child) {
        const Vec3 p = s.instrument == Instrument::Drum ? kDrum : bar_position(s.bar);
        const Channels& base = profile.base_pose;
        keys.push_back({s.t, {p.x - base[6], p.y - base[7], p.z - base[8], kStrikeFlick}});
      }
      keys.push_back({child.back().t + kReach, {0.0, 0.0, 0.0, 0.0}});
      hand.groups.push_back(std::move(keys));
    }
    for (const auto& s : child) rec.strikes.push_back(s);

    TruthSegment truth;
    truth.type = item.type;
    truth.start_t = item.cue_t;
    const bool last = i + 1 == n;
    if (!last) {
      const double anchor = child.empty() ? item.cue_t : child.back().t;
      truth.end_t = 0.5 * (anchor + script.items[i + 1].cue_t);
    } else {
      double anchor = item.cue_t;
      if (!child.empty()) anchor = child.back().t;
      else if (!item.robot_bars.empty()) anchor = item.cue_t + 0.5 + kBeatSpacing * static_cast<double>(item.robot_bars.size() - 1);
      truth.end_t = anchor + data::kFinalTail;
    }
    if (inattentive) truth.reason = "inattentive";
    else if (fatigued) truth.reason = "fatigued";
    else if (double_hit) truth.reason = "inter-strike";
    truth.valid = truth.reason.empty();
    out.truth.push_back(truth);
  }
  std::stable_sort(rec.strikes.begin(), rec.strikes.end(),
                   [](const StrikeEvent& a, const StrikeEvent& b) { return a.t < b.t; });

  // motion
  Rng motion(mix_seed(seed, 2));
  const double phase1 = motion.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase2 = motion.uniform(0.0, 2.0 * std::numbers::pi);
  const double end_t = std::max(script.end_t, out.truth.empty() ? 0.0 : out.truth.back().end_t + 1.0);
  for (double t = 0.0; t <= end_t; t += motion.uniform(0.02, 0.05)) {
    data::MotionFrame f;
    f.t = t;
    f.ch = profile.base_pose;
    const auto h = hand.at(t);
    f.ch[6] += h[0];
    f.ch[7] += h[1];
    f.ch[8] += h[2];
    f.ch[kRightPitch] += h[3];
    for (const auto& [start, amp] : gaze) {
      if (t < start || t > start + 2.0 * kTurn + 2.0) continue;
      const double up = min_jerk((t - start) / kTurn);
      const double down = min_jerk((t - start - kTurn - 2.0) / kTurn);
      f.ch[kHeadYaw] += amp * (up - down);
    }
    const double sway = profile.head_sway;
    f.ch[kHeadYaw] += sway * std::sin(2.0 * std::numbers::pi * 0.25 * t + phase1);
    f.ch[kHeadRoll] += 0.5 * sway * std::sin(2.0 * std::numbers::pi * 0.17 * t + phase2);
    f.ch[0] += 0.002 * sway * std::sin(2.0 * std::numbers::pi * 0.25 * t + phase1);
    for (int c = 0; c < kChannels; ++c) {
      const double noise = std::clamp(motion.normal(), -3.0, 3.0);
      f.ch[c] += profile.motion_jitter[c] * noise;
      if (data::is_angle_channel(c)) f.ch[c] = wrap360(f.ch[c]);
    }
    rec.samples.push_back(f);
  }
  return out;
}

detect::AudioTrack synth_audio(std::span<const StrikeEvent> strikes, std::span<const detect::NoteTemplate> templates,
                               int sample_rate, double duration, double snr_db, std::uint64_t seed) {
  if (sample_rate <= 0) throw Error(Errc::ConfigError, "synth_audio: sample rate must be positive");
  detect::AudioTrack track{sample_rate,
                           std::vector<double>(static_cast<std::size_t>(std::ceil(duration * sample_rate)), 0.0)};
  Rng rng(mix_seed(seed, 3));
  double power = 0.0;
  int used = 0;
  for (const auto& s : strikes) {
    if (s.t < 0.0) throw Error(Errc::InvalidValue, "synth_audio: negative strike time");
    const detect::NoteTemplate* templ = nullptr;
    for (const auto& t : templates) {
      const bool drum = t.label == "drum";
      if ((s.instrument == Instrument::Drum) == drum && (drum || t.bar == s.bar)) templ = &t;
    }
    if (templ == nullptr) throw Error(Errc::ConfigError, "synth_audio: no template for strike");
    const double gain = rng.uniform(0.6, 1.0);
    const auto start = static_cast<std::size_t>(std::llround(s.t * sample_rate));
    double p = 0.0;
    for (std::size_t i = 0; i < templ->waveform.size(); ++i) {
      p += templ->waveform[i] * templ->waveform[i];
      if (start + i < track.samples.size()) track.samples[start + i] += gain * templ->waveform[i];
    }
    power += gain * gain * p / static_cast<double>(templ->waveform.size());
    ++used;
  }
  if (std::isfinite(snr_db) && used > 0) {
    const double sigma = std::sqrt(power / used / std::pow(10.0, snr_db / 10.0));
    for (auto& v : track.samples) v += sigma * rng.normal();
  }
  return track;
}

std::array<BehaviorProfile, 2> default_profiles(double separation) {
  if (!(separation >= 0.0)) throw Error(Errc::ConfigError, "separation must be non-negative");
  BehaviorProfile td;
  td.name = "td-synthetic";
  td.group = data::Group::TD;
  td.latency_mean = 3.0;
  td.latency_std = 0.15;
  td.correct_bar_prob = 0.97;
  td.strike_count_fidelity = 0.95;
  td.strike_spacing = 0.5;
  td.spacing_std = 0.04;
  td.head_sway = 2.0;
  td.fatigue_dropout = 0.05;
  td.inattentive_prob = 0.03;
  td.double_hit_prob = 0.03;
  td.base_pose = default_base_pose();
  for (int c = 0; c < kChannels; ++c) td.motion_jitter[c] = data::is_angle_channel(c) ? 0.4 : 0.002;

  BehaviorProfile far = td;
  far.latency_mean = 4.4;
  far.latency_std = 0.3;
  far.correct_bar_prob = 0.6;
  far.strike_count_fidelity = 0.6;
  far.strike_spacing = 0.7;
  far.spacing_std = 0.12;
  far.head_sway = 10.0;
  far.fatigue_dropout = 0.3;
  far.inattentive_prob = 0.1;
  far.double_hit_prob = 0.12;
  for (int c = 0; c < kChannels; ++c) far.motion_jitter[c] = data::is_angle_channel(c) ? 2.0 : 0.008;

  auto lerp = [&](double a, double b) { return a + separation * (b - a); };
  auto lerp_p = [&](double a, double b) { return std::clamp(lerp(a, b), 0.0, 1.0); };
  BehaviorProfile asd = td;
  asd.name = "asd-synthetic";
  asd.group = data::Group::ASD;
  asd.latency_mean = lerp(td.latency_mean, far.latency_mean);
  asd.latency_std = std::max(0.0, lerp(td.latency_std, far.latency_std));
  asd.correct_bar_prob = lerp_p(td.correct_bar_prob, far.correct_bar_prob);
  asd.strike_count_fidelity = lerp_p(td.strike_count_fidelity, far.strike_count_fidelity);
  asd.strike_spacing = lerp(td.strike_spacing, far.strike_spacing);
  asd.spacing_std = std::max(0.0, lerp(td.spacing_std, far.spacing_std));
  asd.head_sway = std::max(0.0, lerp(td.head_sway, far.head_sway));
  asd.fatigue_dropout = lerp_p(td.fatigue_dropout, far.fatigue_dropout);
  asd.inattentive_prob = lerp_p(td.inattentive_prob, far.inattentive_prob);
  asd.double_hit_prob = lerp_p(td.double_hit_prob, far.double_hit_prob);
  for (int c = 0; c < kChannels; ++c) asd.motion_jitter[c] = std::max(0.0, lerp(td.motion_jitter[c], far.motion_jitter[c]));
  return {td, asd};
}

std::array<Channels, 2> pose_bounds(const BehaviorProfile& p) {
  Channels lo{}, hi{};
  for (int c = 0; c < kChannels; ++c) {
    const double base = data::is_angle_channel(c) ? data::remap_angle(p.base_pose[c]) : p.base_pose[c];
    lo[c] = hi[c] = base;
  }
  // reach targets of the right hand
  std::vector<Vec3> targets{kDrum};
  for (int b = 1; b <= data::kBars; ++b) targets.push_back(bar_position(b));
  for (const auto& v : targets) {
    const double d[3] = {v.x - p.base_pose[6], v.y - p.base_pose[7], v.z - p.base_pose[8]};
    for (int k = 0; k < 3; ++k) {
      lo[6 + k] = std::min(lo[6 + k], p.base_pose[6 + k] + d[k]);
      hi[6 + k] = std::max(hi[6 + k], p.base_pose[6 + k] + d[k]);
    }
  }
  hi[kRightPitch] += kStrikeFlick;
  lo[kHeadYaw] -= kGaze + p.head_sway;
  hi[kHeadYaw] += kGaze + p.head_sway;
  lo[kHeadRoll] -= 0.5 * p.head_sway;
  hi[kHeadRoll] += 0.5 * p.head_sway;
  lo[0] -= 0.002 * p.head_sway;
  hi[0] += 0.002 * p.head_sway;
  for (int c = 0; c < kChannels; ++c) {
    lo[c] -= 3.0 * p.motion_jitter[c];
    hi[c] += 3.0 * p.motion_jitter[c];
  }
  return {lo, hi};
}

nlohmann::json truth_json(const SynthSession& s) {
  nlohmann::json strikes = nlohmann::json::array();
  for (const auto& st : s.session.strikes)
    strikes.push_back({{"t", st.t}, {"bar", st.bar}, {"actor", data::to_string(st.actor)},
                       {"instrument", data::to_string(st.instrument)}});
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& t : s.truth)
    segments.push_back({{"exercise_type", data::to_string(t.type)},
                        {"start_t", t.start_t},
                        {"end_t", t.end_t},
                        {"valid", t.valid},
                        {"reason", t.reason}});
  return {{"subject_id", s.session.subject_id}, {"strikes", strikes}, {"segments", segments}};
}

nlohmann::json profile_json(const BehaviorProfile& p) {
  return {{"name", p.name},
          {"group", data::to_string(p.group)},
          {"latency_mean", p.latency_mean},
          {"latency_std", p.latency_std},
          {"correct_bar_prob", p.correct_bar_prob},
          {"strike_count_fidelity", p.strike_count_fidelity},
          {"strike_spacing", p.strike_spacing},
          {"spacing_std", p.spacing_std},
          {"motion_jitter", p.motion_jitter},
          {"head_sway", p.head_sway},
          {"fatigue_dropout", p.fatigue_dropout},
          {"inattentive_prob", p.inattentive_prob},
          {"double_hit_prob", p.double_hit_prob},
          {"base_pose", p.base_pose}};
}

std::vector<SynthSession> synth_cohort(const CohortConfig& config) {
  if (config.td_subjects < 0 || config.asd_subjects < 0 || config.per_type < 1)
    throw Error(Errc::ConfigError, "cohort needs non-negative subject counts and per_type >= 1");
  const auto profiles = default_profiles(config.separation);
  std::vector<SynthSession> out;
  const int total = config.td_subjects + config.asd_subjects;
  for (int i = 0; i < total; ++i) {
    const bool td = i < config.td_subjects;
    const std::string id = (td ? "TD-" : "ASD-") + std::to_string(td ? i + 1 : i - config.td_subjects + 1);
    const auto stream = static_cast<std::uint64_t>(i);
    const ScenarioScript script = default_script(config.per_type, mix_seed(config.seed, 2 * stream), config.types);
    out.push_back(synth_session(profiles[td ? 0 : 1], script, mix_seed(config.seed, 2 * stream + 1), id));
  }
  return out;
}

std::vector<data::ExerciseSegment> valid_segments(std::span<const SynthSession> sessions) {
  std::vector<data::ExerciseSegment> out;
  for (const SynthSession& s : sessions) {
    data::Built built = data::build_segments(s.session);
    for (std::size_t i = 0; i < built.segments.size(); ++i)
      if (built.validation[i].valid) out.push_back(std::move(built.segments[i]));
  }
  return out;
}

}  // namespace tempo::synth
