#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempo/data/preprocess.hpp"
#include "tempo/data/types.hpp"

namespace tempo::data {

/// Raw motion JSONL ({"t", "ch"}) plus the sidecar JSON
/// {subject_id, group, cues: [{t, exercise, demo_end}], annotations: [{t0, t1, flag|flags}]}.
SessionRecord read_session(const std::filesystem::path& motion, const std::filesystem::path& sidecar);
void write_session(const SessionRecord& session, const std::filesystem::path& motion,
                   const std::filesystem::path& sidecar, const nlohmann::json& meta);

nlohmann::json sidecar_json(const SessionRecord& session);

/// Strikes JSONL rows {"t", "bar", "score", "actor"}.
struct StrikeRow {
  double t = 0.0;
  int bar = 1;
  double score = 1.0;
  Actor actor = Actor::Child;
};
std::vector<StrikeRow> read_strikes(const std::filesystem::path& path);

/// Replaces session.strikes. Each strike takes its instrument from the cue it
/// follows; drum strikes are forced to bar 1.
void attach_strikes(SessionRecord& session, std::span<const StrikeRow> rows);

struct Built {
  std::vector<ExerciseSegment> segments;
  std::vector<Validation> validation;
};
/// Segments the session and validates every segment.
Built build_segments(const SessionRecord& session);

/// One JSON object per 1/16-s step. A strike lands on the row whose interval
/// contains it; when two strikes share a row the child's is kept.
std::vector<nlohmann::json> dataset_rows(const ExerciseSegment& seg);
/// Rebuilds segments (in first-appearance order) from dataset rows. Strike
/// times are quantised to their row.
std::vector<ExerciseSegment> segments_from_rows(const std::vector<nlohmann::json>& rows);
std::vector<ExerciseSegment> read_dataset(const std::filesystem::path& path);

/// Table-1 style counts: total and useful segments per exercise type and group.
struct CountsTable {
  std::map<ExerciseType, std::array<int, 2>> total;
  std::map<ExerciseType, std::array<int, 2>> useful;
  std::map<std::string, int> exclusions;
};
void tally(CountsTable& table, const ExerciseSegment& seg, const Validation& v);
nlohmann::json counts_json(const CountsTable& table);
std::string counts_text(const CountsTable& table);

}  // namespace tempo::data
