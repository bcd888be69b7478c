#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "tempo/core/error.hpp"
#include "tempo/data/preprocess.hpp"
#include "tempo/gen/generator.hpp"
#include "tempo/nn/optim.hpp"

using namespace tempo;
using namespace tempo::gen;
using data::ExerciseType;
using nn::Matrix;
using nn::RowVector;

namespace {

data::ExerciseSegment segment_of_length(std::size_t frames, ExerciseType ex = ExerciseType::SingleHitXylophone) {
  data::ExerciseSegment s;
  s.exercise_type = ex;
  s.frames.resize(frames);
  return s;
}

GeneratorSpec tiny_spec(ExerciseType ex = ExerciseType::SingleHitXylophone) {
  GeneratorSpec s = small_spec(ex);
  s.preset = "test";
  s.d_model = 16;
  s.heads = 2;
  s.d_k = 8;
  s.d_v = 8;
  s.ffn_hidden = 32;
  s.encoder_blocks = 1;
  s.decoder_blocks = 1;
  return s;
}

Pair wave_pair(const std::string& id, int length, double phase, int bar) {
  Pair p;
  p.id = id;
  p.robot = Matrix::Zero(1, 8);
  p.robot(0, bar) = 1.0;
  p.target.resize(length, data::kChannels);
  for (int r = 0; r < length; ++r)
    for (int c = 0; c < data::kChannels; ++c) p.target(r, c) = std::sin(0.3 * r + phase + c) * (1 + c % 3);
  p.initial = p.target.row(0);
  p.mask.assign(static_cast<std::size_t>(length), true);
  return p;
}

std::vector<Pair> wave_pairs(int n, int length) {
  std::vector<Pair> out;
  for (int i = 0; i < n; ++i) out.push_back(wave_pair("S-" + std::to_string(i), length, 0.4 * i, i % 8));
  return out;
}

Generator trained_tiny(const std::vector<Pair>& pairs, int epochs, std::uint64_t seed = 3) {
  Generator g(tiny_spec(), seed);
  GenTrainConfig tc;
  tc.epochs = epochs;
  tc.warmup = 50;
  train_generator(g, pairs, tc);
  return g;
}

}  // namespace

TEST(TargetLength, FrequencyWeightedMean) {
  const std::vector<data::ExerciseSegment> one{segment_of_length(32)};
  EXPECT_EQ(target_length(ExerciseType::SingleHitXylophone, one), 32);
  std::vector<data::ExerciseSegment> mix{segment_of_length(32), segment_of_length(64), segment_of_length(32),
                                         segment_of_length(32), segment_of_length(50, ExerciseType::Drumming)};
  EXPECT_EQ(target_length(ExerciseType::SingleHitXylophone, mix), 40);
  std::reverse(mix.begin(), mix.end());
  EXPECT_EQ(target_length(ExerciseType::SingleHitXylophone, mix), 40);
  try {
    target_length(ExerciseType::JointAttention, mix);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyCategory);
  }
}

TEST(Spec, PaperPresetCountEqualsClosedForm) {
  const GeneratorSpec s = paper_spec(ExerciseType::MultiHitXylophone);
  const std::size_t d = 512, ffn = 2048;
  const std::size_t ln = 2 * d;
  const std::size_t mha = 4 * (d * d + d);
  const std::size_t ff = (d * ffn + ffn) + (ffn * d + d);
  const std::size_t expected = (8 * d + d) + (18 * d + d) + 6 * (2 * ln + mha + ff) + 6 * (3 * ln + 2 * mha + ff) +
                               2 * ln + (d * 18 + 18);
  EXPECT_EQ(analytic_parameter_count(s), expected);
  EXPECT_EQ(expected, 44164114u);
  EXPECT_EQ(Generator(s, 0).parameter_count(), expected);
}

TEST(Spec, SmallPresetAndValidation) {
  const GeneratorSpec s = small_spec(ExerciseType::Drumming);
  EXPECT_EQ(s.n_features, 1);
  EXPECT_EQ(Generator(s, 0).parameter_count(), analytic_parameter_count(s));
  EXPECT_EQ(to_json(spec_from_json(to_json(s))), to_json(s));
  GeneratorSpec bad = paper_spec(ExerciseType::Drumming);
  bad.d_k = 32;
  EXPECT_THROW(validate(bad), Error);
}

TEST(Spec, NoamSequenceMatchesClosedForm) {
  for (int step = 1; step <= 1000; ++step) {
    const double expected = 0.015 * std::min(1.0 / std::sqrt(step), step * std::pow(400.0, -1.5));
    EXPECT_NEAR(nn::noam_lr(step, 400, 0.015), expected, 1e-12);
  }
}

TEST(Pairs, RobotEncoding) {
  const std::vector<data::StrikeEvent> none;
  EXPECT_EQ(robot_one_hot(none, 8), Matrix::Zero(1, 8));
  const std::vector<data::StrikeEvent> drum{{1.0, data::Actor::Robot, data::Instrument::Drum, 1},
                                            {1.5, data::Actor::Robot, data::Instrument::Drum, 1}};
  EXPECT_EQ(robot_one_hot(drum, 1), Matrix::Ones(2, 1));
}

TEST(Pairs, TruncateAndPad) {
  data::ExerciseSegment seg = segment_of_length(5);
  seg.subject_id = "TD-1";
  for (std::size_t i = 0; i < 5; ++i) seg.frames[i].ch.fill(static_cast<double>(i + 1));
  const std::vector<data::ExerciseSegment> segs{seg};
  const auto spec = tiny_spec();
  const auto padded = make_pairs(spec, segs, 8);
  ASSERT_EQ(padded.size(), 1u);
  EXPECT_EQ(padded[0].target.rows(), 8);
  EXPECT_EQ(std::count(padded[0].mask.begin(), padded[0].mask.end(), true), 5);
  EXPECT_EQ(padded[0].initial(0), 1.0);
  EXPECT_EQ(padded[0].target.row(7), RowVector::Zero(18));
  const auto cut = make_pairs(spec, segs, 3);
  EXPECT_EQ(cut[0].target(2, 0), 3.0);
}

TEST(Generate, RequiresTrainingAndPositiveHorizon) {
  const Generator g(tiny_spec(), 1);
  try {
    g.generate(Matrix::Zero(1, 8), RowVector::Zero(18), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ModelStateError);
  }
  const auto pairs = wave_pairs(2, 8);
  const Generator t = trained_tiny(pairs, 1);
  try {
    t.generate(pairs[0].robot, pairs[0].initial, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DomainError);
  }
  const Matrix one = t.generate(pairs[0].robot, pairs[0].initial, 1);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_TRUE(one.allFinite());
  EXPECT_EQ(t.generate(pairs[1].robot, pairs[1].initial, 6), t.generate(pairs[1].robot, pairs[1].initial, 6));
}

TEST(Generate, FirstStepMatchesTeacherForcedPass) {
  const auto pairs = wave_pairs(3, 12);
  const Generator g = trained_tiny(pairs, 5);
  for (const Pair& p : pairs) {
    const Matrix tf = g.teacher_forced(p);
    const Matrix free = g.generate(p.robot, p.initial, 12);
    for (int c = 0; c < data::kChannels; ++c) {
      const double expected = data::is_angle_channel(c) ? data::remap_angle(tf(0, c)) : tf(0, c);
      EXPECT_EQ(free(0, c), expected) << c;
    }
  }
}

TEST(Generate, FutureDecoderFramesDoNotReachThePast) {
  const auto pairs = wave_pairs(2, 12);
  const Generator g = trained_tiny(pairs, 3);
  const Matrix base = g.teacher_forced(pairs[0]);
  for (int t : {1, 5, 11}) {
    Pair altered = pairs[0];
    altered.target.row(t - 1).array() += 7.0;  // decoder input row t
    const Matrix out = g.teacher_forced(altered);
    EXPECT_EQ(out.topRows(t), base.topRows(t)) << t;
    EXPECT_NE(out.row(t), base.row(t)) << t;
  }
}

TEST(Train, MseDropsAndIsOrderInvariant) {
  auto pairs = wave_pairs(6, 16);
  Generator a(tiny_spec(), 5);
  GenTrainConfig tc;
  tc.epochs = 60;
  tc.warmup = 30;
  const auto ra = train_generator(a, pairs, tc);
  EXPECT_LT(ra.loss.back(), ra.loss.front());
  std::reverse(pairs.begin(), pairs.end());
  Generator b(tiny_spec(), 5);
  const auto rb = train_generator(b, pairs, tc);
  EXPECT_EQ(ra.loss.back(), rb.loss.back());
  EXPECT_EQ(teacher_forced_loss(a, pairs), teacher_forced_loss(b, pairs));
}

TEST(Train, ConstantTargetsConverge) {
  std::vector<Pair> pairs = wave_pairs(4, 10);
  for (Pair& p : pairs) {
    p.target.setConstant(2.5);
    p.initial.setConstant(2.5);
  }
  Generator g(tiny_spec(), 2);
  GenTrainConfig tc;
  tc.epochs = 1500;
  tc.warmup = 50;
  const auto r = train_generator(g, pairs, tc);
  EXPECT_LT(r.loss.back(), 1e-4);
  EXPECT_LT(teacher_forced_loss(g, pairs), 1e-4);
}

TEST(Train, PaddedTargetsContributeNothing) {
  std::vector<Pair> a = wave_pairs(3, 12);
  for (Pair& p : a) std::fill(p.mask.begin() + 8, p.mask.end(), false);
  std::vector<Pair> b = a;
  for (Pair& p : b) p.target.bottomRows(4).setConstant(999.0);
  GenTrainConfig tc;
  tc.epochs = 3;
  Generator ga(tiny_spec(), 4), gb(tiny_spec(), 4);
  train_generator(ga, a, tc);
  train_generator(gb, b, tc);
  for (std::size_t i = 0; i < ga.params().size(); ++i) EXPECT_EQ(ga.params()[i].value, gb.params()[i].value);
}

TEST(Train, NonFiniteLossRaisesDivergenceWithCheckpoint) {
  std::vector<Pair> pairs = wave_pairs(2, 6);
  pairs[1].target(3, 4) = INFINITY;
  Generator g(tiny_spec(), 8);
  const std::vector<Matrix> initial = [&] {
    std::vector<Matrix> v;
    for (const auto& p : g.params()) v.push_back(p.value);
    return v;
  }();
  GenTrainConfig tc;
  tc.epochs = 2;
  try {
    train_generator(g, pairs, tc);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.code(), Errc::DivergenceError);
    EXPECT_EQ(e.epoch(), 0);
    ASSERT_EQ(e.checkpoint().size(), initial.size());
    for (std::size_t i = 0; i < initial.size(); ++i) EXPECT_EQ(e.checkpoint()[i], initial[i]);
  }
  EXPECT_FALSE(g.trained());
}

TEST(Stability, EnvelopeFloorOnConstants) {
  std::vector<Pair> pairs = wave_pairs(1, 4);
  pairs[0].target.setConstant(3.0);
  const Envelope env = envelope_of(pairs);
  EXPECT_EQ(env.lo[0], 3.0 - kEnvelopeFloor);
  EXPECT_EQ(env.hi[17], 3.0 + kEnvelopeFloor);
  const std::vector<Pair> none;
  EXPECT_THROW(envelope_of(none), Error);
}

TEST(Stability, MemorizedSampleStaysInside) {
  std::vector<Pair> pairs{wave_pair("M-1", 12, 0.0, 2)};
  for (int c = 0; c < data::kChannels; ++c)
    if (data::is_angle_channel(c)) pairs[0].target.col(c) *= 10.0;
  pairs[0].initial = pairs[0].target.row(0);
  const Generator g = trained_tiny(pairs, 400);
  const StabilityReport rep = stability_probe(g, pairs, 0.0, 1, 1);
  EXPECT_TRUE(rep.pass);
  for (const auto& c : rep.channels) EXPECT_EQ(c.fraction, 1.0) << c.channel;
}

TEST(Stability, FractionsMatchRecount) {
  const auto pairs = wave_pairs(3, 10);
  const Generator g = trained_tiny(pairs, 20);
  const StabilityReport rep = stability_probe(g, pairs, 0.3, 2, 9);
  ASSERT_EQ(rep.trajectories.size(), 6u);
  bool all = true;
  for (int c = 0; c < data::kChannels; ++c) {
    std::size_t inside = 0, total = 0;
    for (const Matrix& t : rep.trajectories)
      for (int r = 0; r < t.rows(); ++r, ++total)
        inside += t(r, c) >= g.envelope().lo[c] && t(r, c) <= g.envelope().hi[c];
    const double fraction = static_cast<double>(inside) / static_cast<double>(total);
    EXPECT_EQ(rep.channels[static_cast<std::size_t>(c)].inside, inside);
    EXPECT_EQ(rep.channels[static_cast<std::size_t>(c)].fraction, fraction);
    all = all && fraction >= 0.95;
  }
  EXPECT_EQ(rep.pass, all);
  try {
    stability_probe(g, std::span<const Pair>(), 0.1, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyCategory);
  }
}

TEST(Export, CsvGridAndRoundTrip) {
  Rng rng(4);
  Matrix traj(16, data::kChannels);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < data::kChannels; ++c) traj(r, c) = rng.normal(0.0, 50.0);
  const std::string csv = trajectory_csv(traj);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,h_x,h_y,h_z,h_yaw,h_pitch,h_roll,r_x,r_y,r_z,r_yaw,r_pitch,r_roll,l_x,l_y,l_z,l_yaw,l_pitch,l_roll");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
  EXPECT_NE(csv.find("\n0.9375,"), std::string::npos);
  EXPECT_EQ(parse_trajectory_csv(csv), traj);
  EXPECT_EQ(parse_trajectory_csv("# tool tempo\n" + csv), traj);
}

TEST(Export, OverlayHasEnvelopeBands) {
  const auto pairs = wave_pairs(2, 8);
  const Envelope env = envelope_of(pairs);
  const std::string svg = overlay_svg(pairs[0].target, &pairs[1].target, env);
  std::size_t bands = 0;
  for (std::size_t pos = 0; (pos = svg.find("class=\"envelope\"", pos)) != std::string::npos; ++pos) ++bands;
  EXPECT_EQ(bands, 36u);
  EXPECT_NE(svg.find("class=\"generated\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"real\""), std::string::npos);
}

TEST(Model, SaveLoadKeepsGeneration) {
  const auto pairs = wave_pairs(2, 8);
  const Generator g = trained_tiny(pairs, 3);
  const auto path = std::filesystem::temp_directory_path() / "tempo_gen_test.mdl";
  g.save(path);
  const Generator back = Generator::load(path);
  EXPECT_TRUE(back.trained());
  EXPECT_EQ(back.target_length(), 8);
  EXPECT_EQ(back.generate(pairs[0].robot, pairs[0].initial, 8), g.generate(pairs[0].robot, pairs[0].initial, 8));
  std::filesystem::remove(path);
}

TEST(Train, InputNoiseIsSeededAndOptional) {
  const auto pairs = wave_pairs(3, 10);
  GenTrainConfig tc;
  tc.epochs = 4;
  Generator a(tiny_spec(), 6), b(tiny_spec(), 6), c(tiny_spec(), 6);
  train_generator(a, pairs, tc);
  train_generator(b, pairs, tc);
  tc.input_noise = 0.0;
  train_generator(c, pairs, tc);
  EXPECT_EQ(teacher_forced_loss(a, pairs), teacher_forced_loss(b, pairs));
  EXPECT_NE(teacher_forced_loss(a, pairs), teacher_forced_loss(c, pairs));
  tc.input_noise = -0.1;
  EXPECT_THROW(validate(tc), Error);
}

TEST(Train, FitDataStandardizesWithoutTraining) {
  std::vector<Pair> pairs = wave_pairs(3, 10);
  Generator g(tiny_spec(), 6);
  const Matrix w = g.params()[0].value;
  g.fit_data(pairs);
  EXPECT_FALSE(g.trained());
  EXPECT_EQ(g.params()[0].value, w);
  EXPECT_EQ(g.target_length(), 10);
  EXPECT_EQ(g.envelope().lo, envelope_of(pairs).lo);
  const double base = teacher_forced_loss(g, pairs);
  // a constant offset on a position channel is absorbed by the standardization
  for (Pair& p : pairs) {
    p.target.col(0).array() += 5.0;
    p.initial(0, 0) += 5.0;
  }
  Generator h(tiny_spec(), 6);
  h.fit_data(pairs);
  EXPECT_NEAR(teacher_forced_loss(h, pairs), base, 1e-9);
}
