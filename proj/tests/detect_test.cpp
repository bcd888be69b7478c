#include <chrono>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "tempo/core/error.hpp"
#include "tempo/core/rng.hpp"
#include "tempo/detect/detector.hpp"

using namespace tempo;
using namespace tempo::detect;

namespace {

constexpr int kSr = 8000;

AudioTrack place(const std::vector<NoteTemplate>& bank, const std::vector<std::pair<double, int>>& hits,
                 double seconds, double noise = 0.0, std::uint64_t seed = 1) {
  AudioTrack a{kSr, std::vector<double>(static_cast<std::size_t>(seconds * kSr), 0.0)};
  for (auto [t, idx] : hits) {
    const auto start = static_cast<std::size_t>(std::lround(t * kSr));
    const auto& w = bank[static_cast<std::size_t>(idx)].waveform;
    for (std::size_t i = 0; i < w.size() && start + i < a.samples.size(); ++i) a.samples[start + i] += w[i];
  }
  Rng rng(seed);
  for (auto& s : a.samples) s += noise * rng.normal();
  return a;
}

double direct_ncc(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= a.size();
  mb /= b.size();
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST(Ncc, SelfAndNegation) {
  const auto bank = synthetic_templates(kSr);
  const auto& w = bank[2].waveform;
  std::vector<double> neg(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) neg[i] = -w[i];
  EXPECT_NEAR(ncc(w, w), 1.0, 1e-12);
  EXPECT_NEAR(ncc(neg, w), -1.0, 1e-12);
}

TEST(Ncc, MatchesDirectDefinition) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(57), b(57);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() + 0.3;
    EXPECT_NEAR(ncc(a, b), direct_ncc(a, b), 1e-12);
  }
}

TEST(Ncc, SilentWindowAndDegenerateTemplate) {
  const std::vector<double> zeros(10, 0.0), flat(10, 0.5), ramp{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(ncc(zeros, ramp), 0.0);
  try {
    ncc(ramp, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateTemplate);
  }
}

TEST(Ncc, AmplitudeInvariant) {
  Rng rng(3);
  std::vector<double> a(64), b(64), scaled(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    scaled[i] = 37.5 * a[i];
  }
  EXPECT_LT(std::abs(ncc(a, b) - ncc(scaled, b)), 1e-9);
}

TEST(Templates, DistinctNotesCorrelateWeakly) {
  const auto bank = synthetic_templates(kSr);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t j = 0; j < bank.size(); ++j) {
      if (i == j) continue;
      // worst alignment of template j inside a track holding only template i
      const AudioTrack a = place(bank, {{0.2, static_cast<int>(i)}}, 0.5);
      const std::vector<NoteTemplate> one{bank[j]};
      DetectConfig cfg;
      cfg.threshold = 0.5;
      EXPECT_TRUE(detect_strikes(a, one, cfg).empty()) << bank[i].label << " vs " << bank[j].label;
    }
  }
}

TEST(Detect, SingleTemplate) {
  const auto bank = synthetic_templates(kSr);
  const auto a = place(bank, {{2.0, 4}}, 3.0);
  const auto d = detect_strikes(a, bank);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].t, 2.0, 0.1);
  EXPECT_EQ(d[0].bar, 5);
  EXPECT_NEAR(d[0].score, 1.0, 1e-9);
}

TEST(Detect, TwoNotesInOrder) {
  const auto bank = synthetic_templates(kSr);
  const auto d = detect_strikes(place(bank, {{1.0, 6}, {1.5, 1}}, 2.5), bank);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].bar, 7);
  EXPECT_EQ(d[1].bar, 2);
  EXPECT_LT(d[0].t, d[1].t);
}

TEST(Detect, SilenceGivesNothing) {
  const auto bank = synthetic_templates(kSr);
  EXPECT_TRUE(detect_strikes({kSr, std::vector<double>(kSr, 0.0)}, bank).empty());
}

TEST(Detect, EmptyAudioAndBadThreshold) {
  const auto bank = synthetic_templates(kSr);
  try {
    detect_strikes({kSr, {}}, bank);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyAudio);
  }
  DetectConfig cfg;
  cfg.threshold = 1.01;
  EXPECT_THROW(detect_strikes(place(bank, {}, 1.0), bank, cfg), Error);
}

TEST(Detect, SameNoteWithinToleranceMerges) {
  const auto bank = synthetic_templates(kSr);
  const auto d = detect_strikes(place(bank, {{1.0, 3}, {1.05, 3}}, 2.0), bank);
  EXPECT_EQ(d.size(), 1u);
}

TEST(Detect, AdjacentBarsFiftyMsApartBothSurvive) {
  const auto bank = synthetic_templates(kSr);
  const auto d = detect_strikes(place(bank, {{1.0, 3}, {1.05, 4}}, 2.0), bank);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].bar, 4);
  EXPECT_EQ(d[1].bar, 5);
}

TEST(Detect, ShiftEquivariant) {
  const auto bank = synthetic_templates(kSr);
  const std::vector<std::pair<double, int>> hits{{0.5, 0}, {1.3, 5}, {2.2, 8}};
  const auto base = detect_strikes(place(bank, hits, 4.0, 0.01), bank);
  auto shifted_hits = hits;
  const double delta = 0.37;
  for (auto& h : shifted_hits) h.first += delta;
  const auto shifted = detect_strikes(place(bank, shifted_hits, 4.0 + delta, 0.0), bank);
  ASSERT_EQ(base.size(), shifted.size());
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(shifted[i].t - base[i].t, delta, 1.0 / kSr + 1e-12);
}

TEST(Detect, AmplitudeScalingKeepsScores) {
  const auto bank = synthetic_templates(kSr);
  auto a = place(bank, {{0.4, 2}, {1.1, 7}}, 2.0, 0.01);
  const auto d1 = detect_strikes(a, bank);
  for (auto& s : a.samples) s *= 0.25;
  const auto d2 = detect_strikes(a, bank);
  ASSERT_EQ(d1.size(), d2.size());
  for (std::size_t i = 0; i < d1.size(); ++i) EXPECT_LT(std::abs(d1[i].score - d2[i].score), 1e-9);
}

TEST(Detect, NoisyRecallAndPrecision) {
  const auto bank = synthetic_templates(kSr);
  Rng rng(5);
  std::vector<std::pair<double, int>> hits;
  double t = 0.3;
  for (int i = 0; i < 60; ++i) {
    hits.push_back({t, static_cast<int>(rng.index(bank.size()))});
    t += rng.uniform(0.15, 0.6);
  }
  // peak template amplitude 0.8; noise at 20 dB below the template RMS
  double energy = 0.0;
  for (double v : bank[0].waveform) energy += v * v;
  const double rms = std::sqrt(energy / bank[0].waveform.size());
  const auto a = place(bank, hits, t + 0.5, rms / 10.0, 9);
  const auto start = std::chrono::steady_clock::now();
  const auto d = detect_strikes(a, bank);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
  ASSERT_EQ(d.size(), hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    EXPECT_NEAR(d[i].t, hits[i].first, 0.1);
    EXPECT_EQ(d[i].label, bank[static_cast<std::size_t>(hits[i].second)].label);
  }
}

TEST(Detect, ParallelMatchesSerial) {
  const auto bank = synthetic_templates(kSr);
  const auto a = place(bank, {{0.3, 1}, {0.9, 2}, {1.6, 8}}, 2.0, 0.02);
  DetectConfig par;
  par.jobs = 3;
  const auto d1 = detect_strikes(a, bank);
  const auto d2 = detect_strikes(a, bank, par);
  ASSERT_EQ(d1.size(), d2.size());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    EXPECT_EQ(d1[i].t, d2[i].t);
    EXPECT_EQ(d1[i].score, d2[i].score);
  }
}

TEST(Review, RoundTripEditsAndMismatch) {
  const auto bank = synthetic_templates(kSr);
  const auto d = detect_strikes(place(bank, {{0.5, 2}, {1.0, 3}, {1.5, 4}}, 2.0), bank);
  const auto rows = export_review(d);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_TRUE(r.contains("competitor_bar"));
  const std::vector<nlohmann::json> edits{{{"id", 0}, {"bar", 4}}};
  const auto fixed = import_review(d, edits);
  EXPECT_EQ(fixed[0].bar, 4);
  const std::vector<nlohmann::json> bad{{{"id", 7}, {"bar", 4}}};
  try {
    import_review(d, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ReviewMismatch);
  }
}

TEST(Actors, DemoWindowIsRobot) {
  std::vector<DetectedStrike> d(3);
  d[0].t = 1.2;
  d[1].t = 2.5;
  d[2].t = 4.0;
  const std::vector<data::Cue> cues{{1.0, data::ExerciseType::Drumming, 2.0}};
  attribute_actors(d, cues);
  EXPECT_EQ(d[0].actor, data::Actor::Robot);
  EXPECT_EQ(d[1].actor, data::Actor::Child);
}

TEST(Wav, RoundTripBothFormats) {
  const auto dir = std::filesystem::temp_directory_path() / "tempo_wav_test";
  std::filesystem::create_directories(dir);
  Rng rng(6);
  AudioTrack a{kSr, std::vector<double>(500)};
  for (auto& s : a.samples) s = rng.uniform(-0.9, 0.9);
  write_wav(dir / "f.wav", a, WavFormat::Float32);
  write_wav(dir / "p.wav", a, WavFormat::Pcm16);
  const auto f = read_wav(dir / "f.wav");
  const auto p = read_wav(dir / "p.wav");
  EXPECT_EQ(f.sample_rate, kSr);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_NEAR(f.samples[i], a.samples[i], 1e-7);
    EXPECT_NEAR(p.samples[i], a.samples[i], 1.0 / 32768.0);
  }
  const auto bank = synthetic_templates(kSr);
  save_templates(dir / "bank", bank, kSr);
  const auto loaded = load_templates(dir / "bank");
  ASSERT_EQ(loaded.size(), bank.size());
  EXPECT_EQ(loaded[8].label, "drum");
  std::filesystem::remove_all(dir);
}
