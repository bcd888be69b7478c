#include "tempo/detect/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <thread>

#include <Eigen/Dense>

#include "tempo/core/error.hpp"
#include "tempo/core/io.hpp"
#include "tempo/core/rng.hpp"

namespace tempo::detect {

using nlohmann::json;

namespace {

// Centered energies below this are treated as silence.
constexpr double kSilentEnergy = 1e-20;

using VecMap = Eigen::Map<const Eigen::VectorXd>;

struct WindowStats {
  std::vector<double> mean;
  std::vector<double> norm;  // sqrt of centered energy, 0 when silent
};

WindowStats window_stats(const std::vector<double>& x, std::size_t len) {
  const std::size_t count = x.size() - len + 1;
  WindowStats s{std::vector<double>(count), std::vector<double>(count)};
  for (std::size_t n = 0; n < count; ++n) {
    const VecMap w(x.data() + n, static_cast<Eigen::Index>(len));
    const double mean = w.mean();
    const double energy = (w.array() - mean).square().sum();
    s.mean[n] = mean;
    s.norm[n] = energy > kSilentEnergy ? std::sqrt(energy) : 0.0;
  }
  return s;
}

struct Centered {
  Eigen::VectorXd values;
  double norm = 0.0;
};

Centered center(std::span<const double> templ) {
  const VecMap t(templ.data(), static_cast<Eigen::Index>(templ.size()));
  Centered c;
  c.values = t.array() - t.mean();
  const double energy = c.values.squaredNorm();
  if (!(energy > kSilentEnergy)) throw Error(Errc::DegenerateTemplate, "template has no energy");
  c.norm = std::sqrt(energy);
  return c;
}

std::vector<double> score_track(const std::vector<double>& x, const Centered& templ, const WindowStats& stats) {
  const std::size_t len = static_cast<std::size_t>(templ.values.size());
  std::vector<double> scores(stats.norm.size(), 0.0);
  for (std::size_t n = 0; n < scores.size(); ++n) {
    if (stats.norm[n] == 0.0) continue;
    // the template is zero-mean, so the window mean drops out of the dot product
    const double dot = VecMap(x.data() + n, static_cast<Eigen::Index>(len)).dot(templ.values);
    scores[n] = std::clamp(dot / (stats.norm[n] * templ.norm), -1.0, 1.0);
  }
  return scores;
}

struct Candidate {
  std::size_t offset;
  std::size_t templ;
  double score;
};

bool stronger(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.offset != b.offset) return a.offset < b.offset;
  return a.templ < b.templ;
}

std::vector<Candidate> suppress(std::vector<Candidate> cands, std::size_t window) {
  std::sort(cands.begin(), cands.end(), stronger);
  std::vector<Candidate> kept;
  for (const auto& c : cands) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
      const std::size_t gap = k.offset > c.offset ? k.offset - c.offset : c.offset - k.offset;
      return gap < window;
    });
    if (!clash) kept.push_back(c);
  }
  return kept;
}

}  // namespace

double ncc(std::span<const double> window, std::span<const double> templ) {
  if (window.size() != templ.size()) throw Error(Errc::ShapeError, "ncc: lengths differ");
  const Centered t = center(templ);
  const VecMap w(window.data(), static_cast<Eigen::Index>(window.size()));
  const Eigen::VectorXd wc = w.array() - w.mean();
  const double energy = wc.squaredNorm();
  if (!(energy > kSilentEnergy)) return 0.0;
  return std::clamp(wc.dot(t.values) / (std::sqrt(energy) * t.norm), -1.0, 1.0);
}

void check_config(const DetectConfig& config) {
  if (!(config.threshold >= -1.0 && config.threshold <= 1.0))
    throw Error(Errc::ConfigError, "detection threshold must lie in [-1, 1]");
  if (!(config.tolerance > 0.0)) throw Error(Errc::ConfigError, "detection tolerance must be positive");
  if (!(config.cross_window > 0.0)) throw Error(Errc::ConfigError, "cross-template window must be positive");
  if (config.jobs < 1) throw Error(Errc::ConfigError, "jobs must be at least 1");
}

std::vector<DetectedStrike> detect_strikes(const AudioTrack& track, std::span<const NoteTemplate> templates,
                                           const DetectConfig& config) {
  check_config(config);
  if (track.samples.empty()) throw Error(Errc::EmptyAudio, "detect_strikes: empty track");
  check_track(track);
  if (templates.empty()) throw Error(Errc::ConfigError, "detect_strikes: no templates");

  std::vector<Centered> centered;
  for (const auto& t : templates) centered.push_back(center(t.waveform));

  std::map<std::size_t, WindowStats> stats;
  for (const auto& t : templates)
    if (t.waveform.size() <= track.samples.size() && !stats.count(t.waveform.size()))
      stats.emplace(t.waveform.size(), window_stats(track.samples, t.waveform.size()));

  std::vector<std::vector<double>> scores(templates.size());
  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < templates.size(); i += stride) {
      const auto it = stats.find(templates[i].waveform.size());
      if (it != stats.end()) scores[i] = score_track(track.samples, centered[i], it->second);
    }
  };
  const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), templates.size());
  if (jobs <= 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(run, j, jobs);
    for (auto& th : pool) th.join();
  }

  const double sr = static_cast<double>(track.sample_rate);
  const auto tol = static_cast<std::size_t>(std::ceil(config.tolerance * sr));
  const auto cross = static_cast<std::size_t>(std::ceil(config.cross_window * sr));

  std::vector<Candidate> merged;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& s = scores[i];
    std::vector<Candidate> peaks;
    for (std::size_t n = 0; n < s.size(); ++n) {
      if (s[n] < config.threshold) continue;
      if (n > 0 && s[n - 1] > s[n]) continue;
      if (n + 1 < s.size() && s[n + 1] >= s[n]) continue;
      peaks.push_back({n, i, s[n]});
    }
    for (const auto& c : suppress(std::move(peaks), tol)) merged.push_back(c);
  }
  std::vector<Candidate> kept = suppress(std::move(merged), cross);
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    return a.offset != b.offset ? a.offset < b.offset : a.templ < b.templ;
  });

  std::vector<DetectedStrike> out;
  for (const auto& c : kept) {
    DetectedStrike d;
    d.t = static_cast<double>(c.offset) / sr;
    d.bar = templates[c.templ].bar;
    d.label = templates[c.templ].label;
    d.score = c.score;
    d.competitor_score = -1.0;
    for (std::size_t k = 0; k < templates.size(); ++k) {
      if (k == c.templ || scores[k].empty()) continue;
      const std::size_t lo = c.offset > cross ? c.offset - cross : 0;
      const std::size_t hi = std::min(scores[k].size(), c.offset + cross + 1);
      for (std::size_t n = lo; n < hi; ++n) {
        if (scores[k][n] > d.competitor_score) {
          d.competitor_score = scores[k][n];
          d.competitor_bar = templates[k].bar;
          d.competitor_label = templates[k].label;
        }
      }
    }
    if (d.competitor_score < -0.5 && d.competitor_label.empty()) d.competitor_score = 0.0;
    out.push_back(std::move(d));
  }
  return out;
}

void attribute_actors(std::vector<DetectedStrike>& strikes, std::span<const data::Cue> cues) {
  for (auto& s : strikes) {
    s.actor = data::Actor::Child;
    for (const auto& c : cues)
      if (s.t >= c.t && s.t <= c.demo_end) s.actor = data::Actor::Robot;
  }
}

std::vector<NoteTemplate> load_templates(const std::filesystem::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  std::vector<NoteTemplate> out;
  int rate = 0;
  try {
    for (const auto& entry : manifest.at("templates")) {
      const AudioTrack clip = read_wav(dir / entry.at("file").get<std::string>());
      if (rate != 0 && clip.sample_rate != rate)
        throw Error(Errc::FormatError, "template bank mixes sample rates");
      rate = clip.sample_rate;
      out.push_back({entry.at("bar").get<int>(), entry.value("label", std::string()), clip.samples});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("template manifest: ") + e.what());
  }
  if (out.empty()) throw Error(Errc::ConfigError, "template bank is empty");
  return out;
}

void save_templates(const std::filesystem::path& dir, std::span<const NoteTemplate> templates, int sample_rate) {
  std::filesystem::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const std::string file = "template_" + std::to_string(i) + "_" + templates[i].label + ".wav";
    write_wav(dir / file, {sample_rate, templates[i].waveform}, WavFormat::Float32);
    entries.push_back({{"file", file}, {"bar", templates[i].bar}, {"label", templates[i].label}});
  }
  write_json(dir / "manifest.json", {{"templates", entries}, {"sample_rate", sample_rate}});
}

std::vector<NoteTemplate> synthetic_templates(int sample_rate, bool include_drum) {
  static constexpr double kFreqs[8] = {1046.50, 1174.66, 1318.51, 1396.91, 1567.98, 1760.00, 1975.53, 2093.00};
  static constexpr const char* kNames[8] = {"C6", "D6", "E6", "F6", "G6", "A6", "B6", "C7"};
  const auto len = static_cast<std::size_t>(std::lround(0.05 * sample_rate));
  const double tau = 0.025;
  std::vector<NoteTemplate> out;
  for (int b = 0; b < 8; ++b) {
    NoteTemplate t{b + 1, kNames[b], std::vector<double>(len)};
    for (std::size_t i = 0; i < len; ++i) {
      const double s = static_cast<double>(i) / sample_rate;
      t.waveform[i] = 0.8 * std::exp(-s / tau) * std::sin(2.0 * std::numbers::pi * kFreqs[b] * s);
    }
    out.push_back(std::move(t));
  }
  if (include_drum) {
    NoteTemplate d{1, "drum", std::vector<double>(len)};
    Rng rng(0xD2D2);
    for (std::size_t i = 0; i < len; ++i) {
      const double s = static_cast<double>(i) / sample_rate;
      d.waveform[i] = std::exp(-s / 0.02) * (0.7 * std::sin(2.0 * std::numbers::pi * 150.0 * s) + 0.2 * rng.normal());
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<json> export_review(std::span<const DetectedStrike> detections) {
  std::vector<json> rows;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    rows.push_back({{"id", i},
                    {"t", d.t},
                    {"bar", d.bar},
                    {"label", d.label},
                    {"score", d.score},
                    {"competitor_bar", d.competitor_bar},
                    {"competitor_label", d.competitor_label},
                    {"competitor_score", d.competitor_score},
                    {"actor", data::to_string(d.actor)}});
  }
  return rows;
}

std::vector<DetectedStrike> import_review(std::span<const DetectedStrike> detections, std::span<const json> edits) {
  std::vector<DetectedStrike> out(detections.begin(), detections.end());
  std::vector<bool> removed(out.size(), false);
  try {
    for (const auto& e : edits) {
      const auto id = e.at("id").get<long long>();
      if (id < 0 || static_cast<std::size_t>(id) >= out.size())
        throw Error(Errc::ReviewMismatch, "review references unknown detection id " + std::to_string(id));
      auto& d = out[static_cast<std::size_t>(id)];
      if (e.value("delete", false)) removed[static_cast<std::size_t>(id)] = true;
      if (e.contains("t")) d.t = e["t"].get<double>();
      if (e.contains("bar")) d.bar = e["bar"].get<int>();
      if (e.contains("label")) d.label = e["label"].get<std::string>();
      if (e.contains("actor")) d.actor = data::parse_actor(e["actor"].get<std::string>());
    }
  } catch (const json::exception& ex) {
    throw Error(Errc::FormatError, std::string("review: ") + ex.what());
  }
  std::vector<DetectedStrike> kept;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!removed[i]) kept.push_back(out[i]);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return kept;
}

std::vector<json> strike_rows(std::span<const DetectedStrike> detections) {
  std::vector<json> rows;
  for (const auto& d : detections)
    rows.push_back({{"t", d.t}, {"bar", d.bar}, {"score", d.score}, {"actor", data::to_string(d.actor)}});
  return rows;
}

}  // namespace tempo::detect
