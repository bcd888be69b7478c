#include "tempo/data/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "tempo/core/error.hpp"

namespace tempo::data {

double remap_angle(double deg) {
  if (!std::isfinite(deg)) throw Error(Errc::InvalidValue, "remap_angle: non-finite input");
  return deg - 360.0 * std::ceil((deg - 180.0) / 360.0);
}

std::vector<MotionFrame> resample(std::span<const MotionFrame> samples, int rate) {
  if (samples.size() < 2) throw Error(Errc::InsufficientData, "resample: need at least two samples");
  if (rate <= 0) throw Error(Errc::ConfigError, "resample: rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].t)) throw Error(Errc::InvalidValue, "resample: non-finite time");
    if (i > 0 && samples[i].t < samples[i - 1].t)
      throw Error(Errc::InvalidValue, "resample: sample times must be non-decreasing");
  }
  const double r = static_cast<double>(rate);
  const auto k0 = static_cast<long long>(std::ceil(samples.front().t * r));
  const auto k1 = static_cast<long long>(std::floor(samples.back().t * r));

  std::vector<MotionFrame> out;
  out.reserve(static_cast<std::size_t>(std::max(0LL, k1 - k0 + 1)));
  std::size_t j = 0;
  for (long long k = k0; k <= k1; ++k) {
    const double t = static_cast<double>(k) / r;
    // bracket: samples[j].t <= t < samples[j + 1].t, or j = last
    while (j + 1 < samples.size() && samples[j + 1].t <= t) ++j;
    MotionFrame f;
    f.t = t;
    const MotionFrame& a = samples[j];
    if (j + 1 == samples.size() || a.t == t) {
      for (int c = 0; c < kChannels; ++c) f.ch[c] = is_angle_channel(c) ? remap_angle(a.ch[c]) : a.ch[c];
    } else {
      const MotionFrame& b = samples[j + 1];
      const double w = (t - a.t) / (b.t - a.t);
      for (int c = 0; c < kChannels; ++c) {
        if (is_angle_channel(c)) {
          const double from = remap_angle(a.ch[c]);
          const double delta = remap_angle(remap_angle(b.ch[c]) - from);
          f.ch[c] = remap_angle(from + w * delta);
        } else {
          f.ch[c] = a.ch[c] + w * (b.ch[c] - a.ch[c]);
        }
      }
    }
    out.push_back(f);
  }
  return out;
}

std::vector<ExerciseSegment> segment_exercises(const SessionRecord& session) {
  if (session.cues.empty()) throw Error(Errc::EmptySession, "segment_exercises: session has no robot cues");
  for (std::size_t i = 1; i < session.cues.size(); ++i)
    if (!(session.cues[i].t > session.cues[i - 1].t))
      throw Error(Errc::InvalidValue, "segment_exercises: cue times must be strictly increasing");
  for (std::size_t i = 1; i < session.strikes.size(); ++i)
    if (session.strikes[i].t < session.strikes[i - 1].t)
      throw Error(Errc::InvalidValue, "segment_exercises: strikes must be sorted");

  const std::vector<MotionFrame> frames =
      session.samples.size() >= 2 ? resample(session.samples) : std::vector<MotionFrame>{};
  std::vector<ExerciseSegment> segments;
  const std::size_t n = session.cues.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Cue& cue = session.cues[i];
    const bool last = i + 1 == n;
    const double next = last ? INFINITY : session.cues[i + 1].t;

    double last_child = NAN;
    double last_any = cue.t;
    for (const auto& s : session.strikes) {
      if (s.t < cue.t || s.t >= next) continue;
      last_any = std::max(last_any, s.t);
      if (s.actor == Actor::Child) last_child = s.t;
    }
    ExerciseSegment seg;
    seg.subject_id = session.subject_id;
    seg.group = session.group;
    seg.exercise_type = cue.exercise;
    seg.exercise_id = static_cast<int>(i);
    seg.start_t = cue.t;
    if (!last)
      seg.end_t = 0.5 * ((std::isnan(last_child) ? cue.t : last_child) + next);
    else
      seg.end_t = (std::isnan(last_child) ? last_any : last_child) + kFinalTail;

    for (const auto& f : frames)
      if (f.t >= seg.start_t && f.t < seg.end_t) seg.frames.push_back(f);
    for (const auto& s : session.strikes)
      if (s.t >= seg.start_t && s.t < seg.end_t) seg.strikes.push_back(s);
    for (const auto& a : session.annotations)
      if (a.t0 < seg.end_t && a.t1 > seg.start_t) seg.flags |= a.flags;
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::string_view to_string(Exclusion e) {
  switch (e) {
    case Exclusion::None: return "none";
    case Exclusion::Inattentive: return "inattentive";
    case Exclusion::Fatigued: return "fatigued";
    case Exclusion::RepeatedPrior: return "repeated_prior";
    case Exclusion::InterStrike: return "inter-strike";
  }
  return "unknown";
}

Validation validate_segment(const ExerciseSegment& seg) {
  if (seg.flags & kInattentive) return {false, Exclusion::Inattentive};
  if (seg.flags & kFatigued) return {false, Exclusion::Fatigued};
  if (seg.flags & kRepeatedPrior) return {false, Exclusion::RepeatedPrior};
  double prev = NAN;
  for (const auto& s : seg.strikes) {
    if (s.actor != Actor::Child) continue;
    if (!std::isnan(prev) && s.t - prev < kStep) return {false, Exclusion::InterStrike};
    prev = s.t;
  }
  return {};
}

Padded pad_sequences(std::span<const nn::Matrix> sequences, nn::Index target_len) {
  Padded out;
  out.mask = nn::Mask::Constant(static_cast<nn::Index>(sequences.size()), target_len, false);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const nn::Matrix& s = sequences[i];
    if (s.rows() == 0) throw Error(Errc::LengthError, "pad_sequences: empty sequence");
    if (s.rows() > target_len)
      throw Error(Errc::LengthError, "pad_sequences: sequence of length " + std::to_string(s.rows()) +
                                         " exceeds target " + std::to_string(target_len));
    nn::Matrix p = nn::Matrix::Zero(target_len, s.cols());
    p.topRows(s.rows()) = s;
    out.data.push_back(std::move(p));
    out.mask.row(static_cast<nn::Index>(i)).head(s.rows()).setConstant(true);
  }
  return out;
}

nn::Matrix unpad(const nn::Matrix& padded, const nn::Mask& mask, nn::Index row) {
  nn::Index real = 0;
  for (nn::Index t = 0; t < mask.cols(); ++t) real += mask(row, t) ? 1 : 0;
  return padded.topRows(real);
}

nn::Matrix one_hot_strikes(std::span<const StrikeEvent> strikes, nn::Index n_features,
                           nn::Index max_strikes) {
  if (n_features <= 0 || max_strikes < 0)
    throw Error(Errc::ConfigError, "one_hot_strikes: dimensions must be positive");
  if (static_cast<nn::Index>(strikes.size()) > max_strikes)
    throw Error(Errc::LengthError, "one_hot_strikes: more strikes than max_strikes");
  nn::Matrix out = nn::Matrix::Zero(max_strikes, n_features);
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    const int bar = strikes[i].bar;
    if (bar < 1 || bar > n_features)
      throw Error(Errc::InvalidValue, "one_hot_strikes: bar " + std::to_string(bar) + " outside [1, " +
                                          std::to_string(n_features) + "]");
    out(static_cast<nn::Index>(i), bar - 1) = 1.0;
  }
  return out;
}

nn::Matrix frame_matrix(const ExerciseSegment& seg) {
  nn::Matrix m(static_cast<nn::Index>(seg.frames.size()), kChannels);
  for (std::size_t i = 0; i < seg.frames.size(); ++i)
    for (int c = 0; c < kChannels; ++c) m(static_cast<nn::Index>(i), c) = seg.frames[i].ch[c];
  return m;
}

}  // namespace tempo::data
