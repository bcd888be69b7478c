#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/data/types.hpp"
#include "tempo/detect/audio.hpp"

namespace tempo::detect {

struct NoteTemplate {
  int bar = 1;
  std::string label;
  std::vector<double> waveform;
};

/// Zero-mean normalised correlation of two equal-length clips. A window with
/// no variance scores 0. DegenerateTemplate when the template has no energy
/// about its mean.
double ncc(std::span<const double> window, std::span<const double> templ);

struct DetectConfig {
  double threshold = 0.7;
  /// Same-template detections closer than this are merged.
  double tolerance = 0.1;
  /// Detections of different templates closer than this are merged.
  double cross_window = 1.0 / 32.0;
  int jobs = 1;
};

/// ConfigError unless threshold is in [-1, 1] and the windows are positive.
void check_config(const DetectConfig& config);

struct DetectedStrike {
  double t = 0.0;
  int bar = 1;
  std::string label;
  double score = 0.0;
  /// Best-scoring other template near t, for review.
  int competitor_bar = 0;
  std::string competitor_label;
  double competitor_score = 0.0;
  data::Actor actor = data::Actor::Child;
};

/// Slides every template over the track, keeps local maxima at or above the
/// threshold, merges within tolerance per template keeping the highest
/// score, then across templates within cross_window. Sorted by time.
/// EmptyAudio for an empty track.
std::vector<DetectedStrike> detect_strikes(const AudioTrack& track, std::span<const NoteTemplate> templates,
                                           const DetectConfig& config = {});

/// Strikes inside a cue's demonstration window [t, demo_end] are the robot's.
void attribute_actors(std::vector<DetectedStrike>& strikes, std::span<const data::Cue> cues);

/// Bank directory: manifest.json {"templates": [{"file", "bar", "label"}]} plus the WAV files.
std::vector<NoteTemplate> load_templates(const std::filesystem::path& dir);
void save_templates(const std::filesystem::path& dir, std::span<const NoteTemplate> templates, int sample_rate);

/// Decaying sines for xylophone bars 1..8 (C6 major scale) and a drum hit.
std::vector<NoteTemplate> synthetic_templates(int sample_rate, bool include_drum = true);

/// Review rows {"id", "t", "bar", "label", "score", "competitor_bar", "competitor_score", "actor"}.
std::vector<nlohmann::json> export_review(std::span<const DetectedStrike> detections);
/// Applies edited rows by id (fields t, bar, actor, and "delete": true).
/// ReviewMismatch for an unknown id. Result is re-sorted by time.
std::vector<DetectedStrike> import_review(std::span<const DetectedStrike> detections,
                                          std::span<const nlohmann::json> edits);

/// Strikes JSONL rows {"t", "bar", "score", "actor"}.
std::vector<nlohmann::json> strike_rows(std::span<const DetectedStrike> detections);

}  // namespace tempo::detect
