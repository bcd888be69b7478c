#include "tempo/data/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tempo/core/error.hpp"
#include "tempo/core/io.hpp"

namespace tempo::data {

using nlohmann::json;

namespace {

Channels channels_from(const json& j) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(kChannels))
    throw Error(Errc::FormatError, "expected an array of 18 channel values");
  Channels ch{};
  for (int c = 0; c < kChannels; ++c) ch[c] = j[static_cast<std::size_t>(c)].get<double>();
  return ch;
}

unsigned flags_from(const json& a) {
  unsigned flags = 0;
  if (a.contains("flag")) flags |= parse_flag(a["flag"].get<std::string>());
  if (a.contains("flags"))
    for (const auto& f : a["flags"]) flags |= parse_flag(f.get<std::string>());
  return flags;
}

json flags_json(unsigned flags) {
  json out = json::array();
  for (unsigned f : {kInattentive, kFatigued, kRepeatedPrior})
    if (flags & f) out.push_back(flag_name(f));
  return out;
}

}  // namespace

json sidecar_json(const SessionRecord& session) {
  json cues = json::array();
  for (const auto& c : session.cues)
    cues.push_back({{"t", c.t}, {"exercise", to_string(c.exercise)}, {"demo_end", c.demo_end}});
  json annotations = json::array();
  for (const auto& a : session.annotations)
    annotations.push_back({{"t0", a.t0}, {"t1", a.t1}, {"flags", flags_json(a.flags)}});
  return {{"subject_id", session.subject_id},
          {"group", to_string(session.group)},
          {"cues", std::move(cues)},
          {"annotations", std::move(annotations)}};
}

SessionRecord read_session(const std::filesystem::path& motion, const std::filesystem::path& sidecar) {
  SessionRecord s;
  const json side = read_json(sidecar);
  try {
    s.subject_id = side.at("subject_id").get<std::string>();
    s.group = parse_group(side.at("group").get<std::string>());
    for (const auto& c : side.at("cues")) {
      Cue cue;
      cue.t = c.at("t").get<double>();
      cue.exercise = parse_exercise(c.at("exercise").get<std::string>());
      cue.demo_end = c.value("demo_end", cue.t);
      s.cues.push_back(cue);
    }
    if (side.contains("annotations"))
      for (const auto& a : side["annotations"])
        s.annotations.push_back({a.at("t0").get<double>(), a.at("t1").get<double>(), flags_from(a)});
    for (const auto& row : read_jsonl(motion))
      s.samples.push_back({row.at("t").get<double>(), channels_from(row.at("ch"))});
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("session: ") + e.what());
  }
  for (std::size_t i = 1; i < s.samples.size(); ++i)
    if (s.samples[i].t < s.samples[i - 1].t)
      throw Error(Errc::InvalidValue, "session: raw samples must be non-decreasing in t");
  return s;
}

void write_session(const SessionRecord& session, const std::filesystem::path& motion,
                   const std::filesystem::path& sidecar, const json& meta) {
  std::vector<json> rows;
  rows.reserve(session.samples.size());
  for (const auto& f : session.samples) rows.push_back({{"t", f.t}, {"ch", f.ch}});
  write_jsonl(motion, rows, &meta);
  json side = sidecar_json(session);
  side["meta"] = meta;
  write_json(sidecar, side);
}

std::vector<StrikeRow> read_strikes(const std::filesystem::path& path) {
  std::vector<StrikeRow> out;
  try {
    for (const auto& row : read_jsonl(path)) {
      StrikeRow r;
      r.t = row.at("t").get<double>();
      r.bar = row.at("bar").get<int>();
      r.score = row.value("score", 1.0);
      r.actor = parse_actor(row.value("actor", std::string("child")));
      out.push_back(r);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("strikes: ") + e.what());
  }
  return out;
}

void attach_strikes(SessionRecord& session, std::span<const StrikeRow> rows) {
  session.strikes.clear();
  for (const auto& r : rows) {
    StrikeEvent s;
    s.t = r.t;
    s.actor = r.actor;
    s.bar = r.bar;
    s.instrument = Instrument::Xylophone;
    for (const auto& c : session.cues)
      if (c.t <= r.t) s.instrument = instrument_for(c.exercise);
    if (s.instrument == Instrument::Drum) s.bar = 1;
    check_strike(s);
    session.strikes.push_back(s);
  }
  std::stable_sort(session.strikes.begin(), session.strikes.end(),
                   [](const StrikeEvent& a, const StrikeEvent& b) { return a.t < b.t; });
}

Built build_segments(const SessionRecord& session) {
  Built out;
  out.segments = segment_exercises(session);
  for (const auto& seg : out.segments) out.validation.push_back(validate_segment(seg));
  return out;
}

std::vector<json> dataset_rows(const ExerciseSegment& seg) {
  std::vector<json> rows;
  if (seg.frames.empty()) return rows;
  const auto k0 = std::llround(seg.frames.front().t * kRate);
  const auto n = static_cast<long long>(seg.frames.size());
  std::vector<const StrikeEvent*> at(seg.frames.size(), nullptr);
  for (const auto& s : seg.strikes) {
    long long r = static_cast<long long>(std::floor(s.t * kRate)) - k0;
    r = std::clamp(r, 0LL, n - 1);
    const StrikeEvent*& slot = at[static_cast<std::size_t>(r)];
    if (slot == nullptr || (slot->actor == Actor::Robot && s.actor == Actor::Child)) slot = &s;
  }
  for (std::size_t i = 0; i < seg.frames.size(); ++i) {
    json row = {{"subject", seg.subject_id},
                {"group", to_string(seg.group)},
                {"exercise_type", to_string(seg.exercise_type)},
                {"exercise_id", seg.exercise_id},
                {"t", seg.frames[i].t}};
    if (at[i]) {
      row["actor"] = to_string(at[i]->actor);
      row["bar"] = at[i]->bar;
    } else {
      row["actor"] = "none";
      row["bar"] = nullptr;
    }
    row["ch"] = seg.frames[i].ch;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ExerciseSegment> segments_from_rows(const std::vector<json>& rows) {
  std::vector<ExerciseSegment> out;
  std::map<std::string, std::size_t> index;
  try {
    for (const auto& row : rows) {
      const std::string subject = row.at("subject").get<std::string>();
      const int id = row.at("exercise_id").get<int>();
      const std::string key = subject + '\x1f' + std::to_string(id);
      auto it = index.find(key);
      if (it == index.end()) {
        ExerciseSegment seg;
        seg.subject_id = subject;
        seg.group = parse_group(row.at("group").get<std::string>());
        seg.exercise_type = parse_exercise(row.at("exercise_type").get<std::string>());
        seg.exercise_id = id;
        it = index.emplace(key, out.size()).first;
        out.push_back(std::move(seg));
      }
      ExerciseSegment& seg = out[it->second];
      MotionFrame f{row.at("t").get<double>(), channels_from(row.at("ch"))};
      if (!seg.frames.empty() && !(f.t > seg.frames.back().t))
        throw Error(Errc::FormatError, "dataset: frame times must increase within a segment");
      seg.frames.push_back(f);
      const std::string actor = row.value("actor", std::string("none"));
      if (actor != "none") {
        StrikeEvent s;
        s.t = f.t;
        s.actor = parse_actor(actor);
        s.instrument = instrument_for(seg.exercise_type);
        s.bar = row.at("bar").get<int>();
        seg.strikes.push_back(s);
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("dataset: ") + e.what());
  }
  for (auto& seg : out) {
    seg.start_t = seg.frames.front().t;
    seg.end_t = seg.frames.back().t + kStep;
  }
  return out;
}

std::vector<ExerciseSegment> read_dataset(const std::filesystem::path& path) {
  return segments_from_rows(read_jsonl(path));
}

void tally(CountsTable& table, const ExerciseSegment& seg, const Validation& v) {
  const int g = label_of(seg.group);
  ++table.total[seg.exercise_type][static_cast<std::size_t>(g)];
  table.useful[seg.exercise_type];
  if (v.valid)
    ++table.useful[seg.exercise_type][static_cast<std::size_t>(g)];
  else
    ++table.exclusions[std::string(to_string(v.reason))];
}

namespace {

double percent(int useful, int total) { return total == 0 ? 0.0 : 100.0 * useful / total; }

}  // namespace

json counts_json(const CountsTable& table) {
  json rows = json::array();
  for (ExerciseType e : kExerciseTypes) {
    const auto t = table.total.count(e) ? table.total.at(e) : std::array<int, 2>{0, 0};
    const auto u = table.useful.count(e) ? table.useful.at(e) : std::array<int, 2>{0, 0};
    rows.push_back({{"exercise_type", display_name(e)},
                    {"td", {{"total", t[0]}, {"useful", u[0]}, {"useful_pct", percent(u[0], t[0])}}},
                    {"asd", {{"total", t[1]}, {"useful", u[1]}, {"useful_pct", percent(u[1], t[1])}}}});
  }
  return {{"rows", rows}, {"exclusions", table.exclusions}};
}

std::string counts_text(const CountsTable& table) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %8s %14s %8s %14s\n", "Exercise Type", "TD Total", "TD Useful (%)",
                "ASD Total", "ASD Useful (%)");
  os << buf;
  for (ExerciseType e : kExerciseTypes) {
    const auto t = table.total.count(e) ? table.total.at(e) : std::array<int, 2>{0, 0};
    const auto u = table.useful.count(e) ? table.useful.at(e) : std::array<int, 2>{0, 0};
    char td[32], asd[32];
    std::snprintf(td, sizeof td, "%d (%.1f%%)", u[0], percent(u[0], t[0]));
    std::snprintf(asd, sizeof asd, "%d (%.1f%%)", u[1], percent(u[1], t[1]));
    std::snprintf(buf, sizeof buf, "%-22s %8d %14s %8d %14s\n", std::string(display_name(e)).c_str(), t[0], td,
                  t[1], asd);
    os << buf;
  }
  return os.str();
}

}  // namespace tempo::data
