#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "tempo/core/error.hpp"
#include "tempo/core/rng.hpp"
#include "tempo/data/dataset_io.hpp"
#include "tempo/data/preprocess.hpp"

using namespace tempo;
using namespace tempo::data;

namespace {

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

MotionFrame frame(double t, double value) {
  MotionFrame f;
  f.t = t;
  f.ch.fill(value);
  return f;
}

StrikeEvent child(double t, int bar = 3) { return {t, Actor::Child, Instrument::Xylophone, bar}; }
StrikeEvent robot(double t, int bar = 3) { return {t, Actor::Robot, Instrument::Xylophone, bar}; }

SessionRecord session_with(std::vector<Cue> cues, std::vector<StrikeEvent> strikes, double until) {
  SessionRecord s;
  s.subject_id = "TD-7";
  s.cues = std::move(cues);
  s.strikes = std::move(strikes);
  for (double t = 0.0; t <= until; t += 0.03) s.samples.push_back(frame(t, 1.0));
  return s;
}

}  // namespace

TEST(RemapAngle, RuleExamples) {
  EXPECT_EQ(remap_angle(270.0), -90.0);
  EXPECT_EQ(remap_angle(90.0), 90.0);
  EXPECT_EQ(remap_angle(359.5), -0.5);
  EXPECT_EQ(remap_angle(180.0), 180.0);
  EXPECT_EQ(remap_angle(0.0), 0.0);
  expect_errc(Errc::InvalidValue, [] { remap_angle(NAN); });
}

TEST(RemapAngle, BijectiveAndOrderPreservingPerBranch) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(0.0, 360.0);
    const double y = remap_angle(x);
    EXPECT_GT(y, -180.0);
    EXPECT_LE(y, 180.0);
    const double back = y < 0.0 ? y + 360.0 : y;
    EXPECT_EQ(back, x);
    const double x2 = rng.uniform(0.0, 360.0);
    if ((x <= 180.0) == (x2 <= 180.0)) EXPECT_EQ(x < x2, y < remap_angle(x2));
  }
}

TEST(Resample, ConstantStaysConstant) {
  std::vector<MotionFrame> in{frame(0.013, 4.5), frame(0.4, 4.5), frame(1.71, 4.5)};
  for (const auto& f : resample(in))
    for (int c = 0; c < kChannels; ++c) EXPECT_EQ(f.ch[c], is_angle_channel(c) ? 4.5 : 4.5);
}

TEST(Resample, RampMidpoint) {
  std::vector<MotionFrame> in{frame(0.0, 0.0), frame(1.0, 1.0)};
  const auto out = resample(in);
  ASSERT_EQ(out.size(), 17u);
  EXPECT_EQ(out[8].t, 0.5);
  EXPECT_EQ(out[8].ch[0], 0.5);
}

TEST(Resample, MatchesPiecewiseLinearOracle) {
  Rng rng(2);
  std::vector<MotionFrame> in;
  double t = 0.37;
  for (int i = 0; i < 200; ++i) {
    MotionFrame f;
    f.t = t;
    for (int c = 0; c < kChannels; ++c) f.ch[c] = is_angle_channel(c) ? rng.uniform(-60.0, 60.0) : rng.normal();
    in.push_back(f);
    t += rng.uniform(0.005, 0.09);
  }
  const auto out = resample(in);
  EXPECT_EQ(out.front().t, std::ceil(0.37 * 16) / 16);
  double worst = 0.0;
  for (const auto& f : out) {
    for (std::size_t i = 0; i + 1 < in.size(); ++i) {
      if (!(in[i].t <= f.t && f.t <= in[i + 1].t)) continue;
      const double w = (f.t - in[i].t) / (in[i + 1].t - in[i].t);
      for (int c = 0; c < kChannels; ++c) {
        const double expect = (1.0 - w) * in[i].ch[c] + w * in[i + 1].ch[c];
        worst = std::max(worst, std::abs(expect - f.ch[c]));
      }
      break;
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Resample, AnglesTakeShorterArc) {
  MotionFrame a = frame(0.0, 0.0), b = frame(1.0, 0.0);
  a.ch[3] = 170.0;
  b.ch[3] = 190.0;  // -170 after remap
  const auto out = resample(std::vector<MotionFrame>{a, b});
  EXPECT_NEAR(out[8].ch[3], 180.0, 1e-12);
  EXPECT_NEAR(out[4].ch[3], 175.0, 1e-12);
  EXPECT_NEAR(out[12].ch[3], -175.0, 1e-12);
}

TEST(Resample, Idempotent) {
  Rng rng(3);
  std::vector<MotionFrame> in;
  for (int i = 0; i < 80; ++i) {
    MotionFrame f;
    f.t = 0.1 + 0.041 * i;
    for (int c = 0; c < kChannels; ++c) f.ch[c] = rng.uniform(0.0, 360.0);
    in.push_back(f);
  }
  const auto once = resample(in);
  const auto twice = resample(once);
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i)
    for (int c = 0; c < kChannels; ++c) EXPECT_LT(std::abs(once[i].ch[c] - twice[i].ch[c]), 1e-12);
}

TEST(Resample, TooFewSamples) {
  std::vector<MotionFrame> in{frame(0.0, 1.0)};
  expect_errc(Errc::InsufficientData, [&] { resample(in); });
}

TEST(Segment, MidpointRule) {
  auto s = session_with({{10.0, ExerciseType::SingleHitXylophone, 11.0}, {16.0, ExerciseType::Drumming, 17.0}},
                        {robot(10.5), child(14.0)}, 20.0);
  const auto segs = segment_exercises(s);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].start_t, 10.0);
  EXPECT_EQ(segs[0].end_t, 15.0);
}

TEST(Segment, FinalTail) {
  auto s = session_with({{10.0, ExerciseType::SingleHitXylophone, 11.0}}, {robot(10.5), child(14.0)}, 20.0);
  const auto segs = segment_exercises(s);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].end_t, 16.0);
}

TEST(Segment, NoChildStrikesEndsAtCueMidpoint) {
  auto s = session_with({{4.0, ExerciseType::JointAttention, 4.0}, {12.0, ExerciseType::Drumming, 13.0}},
                        {}, 20.0);
  EXPECT_EQ(segment_exercises(s)[0].end_t, 8.0);
}

TEST(Segment, NoCuesIsEmptySession) {
  auto s = session_with({}, {}, 2.0);
  expect_errc(Errc::EmptySession, [&] { segment_exercises(s); });
}

TEST(Segment, PartitionIsDisjoint) {
  Rng rng(4);
  std::vector<Cue> cues;
  std::vector<StrikeEvent> strikes;
  for (int i = 0; i < 6; ++i) {
    const double c = 1.0 + 8.0 * i;
    cues.push_back({c, ExerciseType::MultiHitXylophone, c + 1.0});
    strikes.push_back(robot(c + 0.5));
    const int n = static_cast<int>(rng.index(3));
    for (int j = 0; j < n; ++j) strikes.push_back(child(c + 2.0 + j * 0.7));
  }
  auto s = session_with(cues, strikes, 60.0);
  const auto segs = segment_exercises(s);
  std::map<double, int> frame_owner;
  std::size_t strike_total = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i > 0) EXPECT_LE(segs[i - 1].end_t, segs[i].start_t);
    for (const auto& f : segs[i].frames) EXPECT_EQ(frame_owner[f.t]++, 0) << f.t;
    for (const auto& st : segs[i].strikes) {
      EXPECT_GE(st.t, segs[i].start_t);
      EXPECT_LE(st.t, segs[i].end_t);
    }
    for (std::size_t k = 1; k < segs[i].frames.size(); ++k)
      EXPECT_EQ(segs[i].frames[k].t - segs[i].frames[k - 1].t, kStep);
    strike_total += segs[i].strikes.size();
  }
  EXPECT_EQ(strike_total, strikes.size());
}

TEST(Validate, Rules) {
  ExerciseSegment seg;
  seg.strikes = {child(3.00), child(3.05)};
  EXPECT_EQ(validate_segment(seg).reason, Exclusion::InterStrike);
  seg.strikes = {child(1.0), child(1.2), child(1.4)};
  EXPECT_TRUE(validate_segment(seg).valid);
  seg.flags = kFatigued;
  EXPECT_EQ(validate_segment(seg).reason, Exclusion::Fatigued);
  seg.flags = 0;
  // robot strikes never trigger the inter-strike rule
  seg.strikes = {robot(1.0), robot(1.01), child(1.5)};
  EXPECT_TRUE(validate_segment(seg).valid);
  // exactly 1/16 s is allowed
  seg.strikes = {child(1.0), child(1.0625)};
  EXPECT_TRUE(validate_segment(seg).valid);
}

TEST(Pad, ShortSequenceAndMask) {
  const nn::Matrix a = nn::Matrix::Constant(3, 2, 7.0);
  const std::vector<nn::Matrix> seqs{a};
  const Padded p = pad_sequences(seqs, 5);
  EXPECT_EQ(p.data[0].bottomRows(2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(p.mask.row(0).cast<int>().sum(), 3);
  EXPECT_FALSE(p.mask(0, 3));
  EXPECT_EQ(unpad(p.data[0], p.mask, 0), a);
}

TEST(Pad, IdentityAtTarget) {
  const nn::Matrix a = nn::Matrix::Ones(4, 3);
  const std::vector<nn::Matrix> seqs{a};
  const Padded p = pad_sequences(seqs, 4);
  EXPECT_EQ(p.data[0], a);
  EXPECT_TRUE(p.mask.all());
}

TEST(Pad, Errors) {
  const std::vector<nn::Matrix> empty{nn::Matrix(0, 3)};
  expect_errc(Errc::LengthError, [&] { pad_sequences(empty, 4); });
  const std::vector<nn::Matrix> long_one{nn::Matrix::Ones(6, 3)};
  expect_errc(Errc::LengthError, [&] { pad_sequences(long_one, 4); });
}

TEST(OneHot, SingleStrikeBarTwo) {
  const std::vector<StrikeEvent> s{robot(1.0, 2)};
  nn::Matrix expect(1, 8);
  expect << 0, 1, 0, 0, 0, 0, 0, 0;
  EXPECT_EQ(one_hot_strikes(s, 8, 1), expect);
}

TEST(OneHot, BarsTwoAndSevenPadded) {
  const std::vector<StrikeEvent> s{robot(1.0, 2), robot(1.5, 7)};
  nn::Matrix expect(3, 8);
  expect << 0, 1, 0, 0, 0, 0, 0, 0,
            0, 0, 0, 0, 0, 0, 1, 0,
            0, 0, 0, 0, 0, 0, 0, 0;
  const nn::Matrix m = one_hot_strikes(s, 8, 3);
  EXPECT_EQ(m, expect);
  EXPECT_EQ(m.row(0).sum(), 1.0);
  EXPECT_EQ(m.row(2).sum(), 0.0);
}

TEST(OneHot, ZeroStrikesAndBadBar) {
  EXPECT_EQ(one_hot_strikes({}, 8, 2), nn::Matrix::Zero(2, 8));
  const std::vector<StrikeEvent> s{robot(1.0, 9)};
  expect_errc(Errc::InvalidValue, [&] { one_hot_strikes(s, 8, 2); });
}

TEST(DatasetRows, RoundTripAndChildWinsCollision) {
  auto s = session_with({{1.0, ExerciseType::MultiHitXylophone, 2.0}}, {robot(1.5, 4), child(3.51, 5), robot(3.52, 6)},
                        8.0);
  s.group = Group::ASD;
  const auto segs = segment_exercises(s);
  const auto rows = dataset_rows(segs[0]);
  ASSERT_EQ(rows.size(), segs[0].frames.size());
  const auto back = segments_from_rows(rows);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].group, Group::ASD);
  EXPECT_EQ(back[0].frames.size(), segs[0].frames.size());
  ASSERT_EQ(back[0].strikes.size(), 2u);
  EXPECT_EQ(back[0].strikes[1].actor, Actor::Child);
  EXPECT_EQ(back[0].strikes[1].bar, 5);
  EXPECT_EQ(back[0].strikes[1].t, 3.5);
}

TEST(Counts, TableSchema) {
  CountsTable table;
  ExerciseSegment seg;
  seg.exercise_type = ExerciseType::Drumming;
  seg.group = Group::TD;
  tally(table, seg, {true, Exclusion::None});
  tally(table, seg, {false, Exclusion::Fatigued});
  const std::string text = counts_text(table);
  EXPECT_NE(text.find("TD Useful (%)"), std::string::npos);
  EXPECT_NE(text.find("1 (50.0%)"), std::string::npos);
  EXPECT_EQ(counts_json(table)["exclusions"]["fatigued"], 1);
}
