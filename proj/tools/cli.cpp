#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tempo/check/gradcheck_suite.hpp"
#include "tempo/core/error.hpp"
#include "tempo/core/io.hpp"
#include "tempo/core/rng.hpp"
#include "tempo/data/dataset_io.hpp"
#include "tempo/detect/audio.hpp"
#include "tempo/detect/detector.hpp"
#include "tempo/eval/metrics.hpp"
#include "tempo/gen/generator.hpp"
#include "tempo/models/classifier.hpp"
#include "tempo/models/train.hpp"
#include "tempo/synth/synth.hpp"

namespace tempo::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kSynthSampleRate = 8000;
constexpr double kRobotBeatSpacing = 0.5;
constexpr std::size_t kQuotedGeneratorCount = 2'650'000;

// Keys accepted in a --config file. Anything else is a usage error.
const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"paths",
       {"audio", "templates", "session", "strikes", "dataset", "model", "initial_frame", "out", "report", "plot"}},
      {"detection", {"threshold", "tolerance", "jobs"}},
      {"training", {"model", "modality", "exercise", "folds", "holdout", "seed", "epochs", "preset", "jobs"}},
      {"generation", {"horizon", "perturbation", "trials", "seed", "strikes"}},
      {"synth", {"profile", "sessions", "seed", "audio", "per_type", "separation", "snr"}},
      {"gradcheck", {"tolerance"}},
  };
  return schema;
}

void check_config_keys(const json& config) {
  if (!config.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  const auto& schema = config_schema();
  for (const auto& [section, body] : config.items()) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw Error(Errc::ConfigError, "unknown config section '" + section + "'");
    if (!body.is_object()) throw Error(Errc::ConfigError, "config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items())
      if (!it->second.count(key)) throw Error(Errc::ConfigError, "unknown config key '" + section + "." + key + "'");
  }
}

struct Binding {
  std::string section;
  std::string key;
  CLI::Option* option = nullptr;
  bool required = false;
  bool from_config = false;
  std::function<json()> get;
  std::function<void(const json&)> set;

  bool given() const { return option->count() > 0 || from_config; }
};

template <class T>
void assign(T& target, const json& value) {
  if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    target = value.is_string() ? std::vector<std::string>{value.get<std::string>()} : value.get<T>();
  } else {
    target = value.get<T>();
  }
}

struct Context;

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app(parent.add_subcommand(name, description)), name_(name) {}

  template <class T>
  Command& option(const std::string& flag, T& target, const std::string& section, const std::string& key,
                  const std::string& help, bool required = false) {
    Binding b;
    b.section = section;
    b.key = key;
    b.required = required;
    if constexpr (std::is_same_v<T, bool>)
      b.option = app->add_flag(flag, target, help);
    else
      b.option = app->add_option(flag, target, help);
    if constexpr (!std::is_same_v<T, bool>) {
      if (!required) b.option->capture_default_str();
    }
    b.get = [&target] { return json(target); };
    b.set = [&target](const json& v) { assign(target, v); };
    bindings_.push_back(std::move(b));
    return *this;
  }

  /// Fills options not given on the command line from the config file.
  void apply(const json& config) {
    for (Binding& b : bindings_) {
      if (b.option->count() > 0 || !config.contains(b.section) || !config[b.section].contains(b.key)) continue;
      try {
        b.set(config[b.section][b.key]);
      } catch (const json::exception&) {
        throw Error(Errc::ConfigError, "config key '" + b.section + "." + b.key + "' has the wrong type");
      }
      b.from_config = true;
    }
    for (const Binding& b : bindings_)
      if (b.required && !b.given())
        throw Error(Errc::ConfigError, b.option->get_name() + " is required (flag or " + b.section + "." + b.key + ")");
  }

  json resolved() const {
    json j = json::object();
    for (const Binding& b : bindings_) j[b.section][b.key] = b.get();
    return j;
  }

  const std::string& name() const { return name_; }

  CLI::App* app;
  std::function<int(Context&)> run;

 private:
  std::string name_;
  std::vector<Binding> bindings_;
};

struct Context {
  json meta;
  std::ostream& out;
};

json with_meta(json body, const json& meta) {
  body["meta"] = meta;
  return body;
}

std::string comment_line(const json& meta) { return "# " + meta.dump() + "\n"; }

// Usage errors from value parsing (unknown names) exit with code 2.
template <class F>
auto usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.what());
  }
}

std::vector<data::Cue> read_cues(const fs::path& sidecar) {
  const json j = read_json(sidecar);
  std::vector<data::Cue> cues;
  for (const json& c : j.at("cues")) {
    data::Cue cue;
    cue.t = c.at("t").get<double>();
    cue.exercise = data::parse_exercise(c.at("exercise").get<std::string>());
    cue.demo_end = c.at("demo_end").get<double>();
    cues.push_back(cue);
  }
  return cues;
}

std::vector<data::ExerciseSegment> read_datasets(const std::vector<std::string>& paths) {
  std::vector<data::ExerciseSegment> segments;
  for (const std::string& p : paths) {
    auto part = data::read_dataset(p);
    segments.insert(segments.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return segments;
}

std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> ids;
  std::stringstream in(list);
  std::string id;
  while (std::getline(in, id, ','))
    if (!id.empty()) ids.push_back(id);
  return ids;
}

std::string report_path(const std::string& report, const std::string& out) {
  return report.empty() ? out + ".report.json" : report;
}

// ---- detect-strikes ---------------------------------------------------------

struct DetectArgs {
  std::string audio, templates, session, out;
  double threshold = 0.7;
  double tolerance = 0.1;
  int jobs = 1;
};

int run_detect(const DetectArgs& a, Context& ctx) {
  detect::DetectConfig config;
  config.threshold = a.threshold;
  config.tolerance = a.tolerance;
  config.jobs = a.jobs;
  detect::check_config(config);
  const auto templates = detect::load_templates(a.templates);
  auto strikes = detect::detect_strikes(detect::read_wav(a.audio), templates, config);
  if (!a.session.empty()) detect::attribute_actors(strikes, read_cues(a.session));
  write_jsonl(a.out, detect::strike_rows(strikes), &ctx.meta);
  ctx.out << strikes.size() << " strikes -> " << a.out << "\n";
  return kOk;
}

// ---- build-dataset ----------------------------------------------------------

struct BuildArgs {
  std::vector<std::string> sessions, strikes;
  std::string out, report;
};

fs::path motion_path_for(const std::string& sidecar) {
  constexpr std::string_view kSuffix = ".session.json";
  if (sidecar.size() <= kSuffix.size() || sidecar.compare(sidecar.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0)
    throw Error(Errc::ConfigError, "--session expects <ID>.session.json, got " + sidecar);
  return sidecar.substr(0, sidecar.size() - kSuffix.size()) + ".motion.jsonl";
}

int run_build(const BuildArgs& a, Context& ctx) {
  if (a.sessions.size() != a.strikes.size())
    throw Error(Errc::ConfigError, "--session and --strikes must be given in pairs");
  data::CountsTable table;
  std::vector<json> rows;
  json segments = json::array();
  for (std::size_t i = 0; i < a.sessions.size(); ++i) {
    data::SessionRecord session = data::read_session(motion_path_for(a.sessions[i]), a.sessions[i]);
    const auto strikes = data::read_strikes(a.strikes[i]);
    data::attach_strikes(session, strikes);
    const data::Built built = data::build_segments(session);
    for (std::size_t s = 0; s < built.segments.size(); ++s) {
      const auto& seg = built.segments[s];
      const auto& v = built.validation[s];
      data::tally(table, seg, v);
      segments.push_back({{"subject_id", seg.subject_id},
                          {"group", data::to_string(seg.group)},
                          {"exercise", data::to_string(seg.exercise_type)},
                          {"exercise_id", seg.exercise_id},
                          {"start_t", seg.start_t},
                          {"end_t", seg.end_t},
                          {"valid", v.valid},
                          {"reason", data::to_string(v.reason)}});
      if (!v.valid) continue;
      auto seg_rows = data::dataset_rows(seg);
      rows.insert(rows.end(), std::make_move_iterator(seg_rows.begin()), std::make_move_iterator(seg_rows.end()));
    }
  }
  write_jsonl(a.out, rows, &ctx.meta);
  write_json(report_path(a.report, a.out),
             with_meta({{"counts", data::counts_json(table)}, {"segments", segments}}, ctx.meta));
  ctx.out << data::counts_text(table);
  return kOk;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string profile, out;
  int sessions = 1;
  std::uint64_t seed = 0;
  bool audio = false;
  int per_type = 3;
  double separation = 1.0;
  double snr = 20.0;
};

int run_synth(const SynthArgs& a, Context& ctx) {
  const data::Group group = usage([&] { return data::parse_group(a.profile); });
  if (a.sessions < 1) throw Error(Errc::ConfigError, "--sessions must be at least 1");
  const auto profiles = synth::default_profiles(a.separation);
  const synth::BehaviorProfile& profile = profiles[group == data::Group::ASD ? 1 : 0];
  const fs::path dir = a.out;
  fs::create_directories(dir);

  std::vector<detect::NoteTemplate> bank;
  if (a.audio) {
    bank = detect::synthetic_templates(kSynthSampleRate);
    detect::save_templates(dir / "templates", bank, kSynthSampleRate);
    const fs::path manifest = dir / "templates" / "manifest.json";
    write_json(manifest, with_meta(read_json(manifest), ctx.meta));
  }
  json subjects = json::array();
  for (int i = 0; i < a.sessions; ++i) {
    const std::string id = std::string(data::to_string(group)) + "-" + std::to_string(i + 1);
    const std::uint64_t stream = 2 * static_cast<std::uint64_t>(i);
    // The script (robot protocol) is shared across groups; the behaviour stream is not.
    const auto script = synth::default_script(a.per_type, mix_seed(a.seed, stream));
    const std::uint64_t session_seed = mix_seed(mix_seed(a.seed, stream + 1), data::label_of(group));
    const synth::SynthSession s = synth::synth_session(profile, script, session_seed, id);

    data::write_session(s.session, dir / (id + ".motion.jsonl"), dir / (id + ".session.json"), ctx.meta);
    std::vector<json> strikes;
    for (const auto& st : s.session.strikes)
      strikes.push_back({{"t", st.t}, {"bar", st.bar}, {"score", 1.0}, {"actor", data::to_string(st.actor)}});
    write_jsonl(dir / (id + ".strikes.jsonl"), strikes, &ctx.meta);
    write_json(dir / (id + ".truth.json"), with_meta(synth::truth_json(s), ctx.meta));
    if (a.audio) {
      const auto track = synth::synth_audio(s.session.strikes, bank, kSynthSampleRate, s.session.samples.back().t,
                                            a.snr, mix_seed(session_seed, 1));
      detect::write_wav(dir / (id + ".wav"), track);
    }
    subjects.push_back(id);
  }
  json manifest = {{"profile", synth::profile_json(profile)}, {"subjects", subjects}};
  if (a.audio) manifest["sample_rate"] = kSynthSampleRate;
  write_json(dir / (std::string(data::to_string(group)) + ".manifest.json"), with_meta(manifest, ctx.meta));
  ctx.out << subjects.size() << " " << data::to_string(group) << " sessions -> " << dir.string() << "\n";
  return kOk;
}

// ---- train-classifier -------------------------------------------------------

struct TrainArgs {
  std::string model, modality, exercise, holdout, preset = "small", out, report;
  std::vector<std::string> datasets;
  int folds = 7;
  std::uint64_t seed = 0;
  int epochs = 0;
  int jobs = 1;
};

void print_scores(std::ostream& out, const std::string& label, const json& m) {
  out << std::fixed << std::setprecision(3) << label << ": accuracy " << m.at("accuracy").get<double>()
      << "  f1 " << m.at("f1").get<double>() << "  sensitivity " << m.at("sensitivity").get<double>()
      << "  specificity " << m.at("specificity").get<double>();
  if (!m.at("auc").is_null()) out << "  auc " << m.at("auc").get<double>();
  out << "\n" << std::defaultfloat;
}

int run_train(const TrainArgs& a, Context& ctx) {
  const data::ExerciseType exercise = usage([&] { return data::parse_exercise(a.exercise); });
  std::optional<models::Modality> modality;
  if (!a.modality.empty()) modality = usage([&] { return models::parse_modality(a.modality); });
  const models::Family family = usage([&] { return models::parse_family(a.model, modality); });
  const models::ModelDescriptor desc =
      usage([&] { return models::make_descriptor(a.preset, family, exercise, modality); });

  models::TrainConfig config;
  config.folds = a.folds;
  config.seed = a.seed;
  config.holdout = split_ids(a.holdout);
  config.jobs = a.jobs;
  config.epochs = a.epochs > 0 ? a.epochs : models::default_epochs(family);
  usage([&] { models::validate(config); return 0; });

  const auto segments = read_datasets(a.datasets);
  const auto samples = models::make_samples(segments, exercise);
  const models::TrainResult result = models::train_classifier(desc, samples, config);
  result.model->save(a.out, {{"meta", ctx.meta}});
  json report = models::report_json(result);
  write_json(report_path(a.report, a.out), with_meta(report, ctx.meta));

  ctx.out << report["model"].get<std::string>() << " (" << report["modality"].get<std::string>() << ", "
          << a.exercise << ", " << result.parameter_count << " parameters, " << samples.size() << " samples)\n";
  print_scores(ctx.out, std::to_string(config.folds) + "-fold mean", report["average"]);
  if (!report["holdout"].is_null()) print_scores(ctx.out, "holdout", report["holdout"]["metrics"]);
  return kOk;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string model, out;
  std::vector<std::string> datasets;
};

int run_evaluate(const EvaluateArgs& a, Context& ctx) {
  const models::Classifier model = models::Classifier::load(a.model);
  const auto segments = read_datasets(a.datasets);
  auto samples = models::make_samples(segments, model.descriptor().exercise);
  std::sort(samples.begin(), samples.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  if (samples.empty()) throw Error(Errc::EmptyEvaluation, "dataset has no segments of the model's exercise type");

  std::vector<int> predicted, labels;
  std::vector<double> scores;
  json rows = json::array();
  for (const models::Sample& s : samples) {
    predicted.push_back(model.predict(s));
    scores.push_back(model.score(s));
    labels.push_back(s.label);
    rows.push_back({{"id", s.id}, {"label", s.label}, {"predicted", predicted.back()}, {"score", scores.back()}});
  }
  std::optional<double> area;
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (both) area = eval::auc(scores, labels);
  const json m = models::metrics_json(eval::metrics(eval::confusion(predicted, labels)), area);
  write_json(a.out, with_meta({{"model", models::to_json(model.descriptor())},
                               {"n", samples.size()},
                               {"metrics", m},
                               {"samples", rows}},
                              ctx.meta));
  print_scores(ctx.out, std::to_string(samples.size()) + " samples", m);
  return kOk;
}

// ---- train-generator --------------------------------------------------------

struct GenTrainArgs {
  std::string exercise, preset = "small", out, report;
  std::vector<std::string> datasets;
  int epochs = 350;
  std::uint64_t seed = 0;
};

int run_train_generator(const GenTrainArgs& a, Context& ctx) {
  const data::ExerciseType exercise = usage([&] { return data::parse_exercise(a.exercise); });
  const gen::GeneratorSpec spec = usage([&] { return gen::make_spec(a.preset, exercise); });
  gen::GenTrainConfig config;
  config.epochs = a.epochs;
  config.seed = a.seed;
  usage([&] { gen::validate(config); return 0; });

  const auto segments = read_datasets(a.datasets);
  const int length = gen::target_length(exercise, segments);
  const auto pairs = gen::make_pairs(spec, segments, length);
  gen::Generator model(spec, a.seed);
  model.fit_data(pairs);
  const double before = gen::teacher_forced_loss(model, pairs);
  const gen::GenTrainResult result = gen::train_generator(model, pairs, config);
  const double after = gen::teacher_forced_loss(model, pairs);
  model.save(a.out, {{"meta", ctx.meta}});

  const std::size_t paper_count = gen::analytic_parameter_count(gen::paper_spec(exercise));
  json report = {
      {"spec", gen::to_json(spec)},
      {"config", gen::to_json(config)},
      {"pairs", pairs.size()},
      {"target_length", length},
      {"parameter_count", model.parameter_count()},
      {"analytic_parameter_count", gen::analytic_parameter_count(spec)},
      {"paper_preset",
       {{"analytic_parameter_count", paper_count},
        {"quoted_parameter_count", kQuotedGeneratorCount},
        {"ratio", static_cast<double>(paper_count) / static_cast<double>(kQuotedGeneratorCount)},
        {"note", "the stated dimensions give the analytic count; the quoted approximate count does not match it"}}},
      {"teacher_forced_mse", {{"initial", before}, {"final", after}}},
      {"loss_history", result.loss},
  };
  write_json(report_path(a.report, a.out), with_meta(report, ctx.meta));
  ctx.out << "generator " << spec.preset << " (" << model.parameter_count() << " parameters, " << pairs.size()
          << " pairs, L=" << length << "): teacher-forced MSE " << before << " -> " << after << "\n"
          << "paper preset analytic count " << paper_count << " vs quoted " << kQuotedGeneratorCount << "\n";
  return kOk;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string model, strikes, initial_frame, out, plot;
  int horizon = 0;
};

nn::RowVector read_initial_frame(const std::string& path) {
  const std::string text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  nn::RowVector frame(data::kChannels);
  if (first != std::string::npos && text[first] == '[') {
    const json j = json::parse(text);
    if (!j.is_array() || j.size() != static_cast<std::size_t>(data::kChannels))
      throw Error(Errc::FormatError, "initial frame must be an array of 18 numbers");
    for (int c = 0; c < data::kChannels; ++c) frame[c] = j[c].get<double>();
    return frame;
  }
  const nn::Matrix rows = gen::parse_trajectory_csv(text);
  if (rows.rows() < 1) throw Error(Errc::FormatError, "initial-frame CSV has no rows");
  return rows.row(0);
}

int run_generate(const GenerateArgs& a, Context& ctx) {
  const json bars = usage([&] {
    try {
      return json::parse(a.strikes);
    } catch (const json::exception&) {
      throw Error(Errc::ConfigError, "--strikes must be a JSON array of bar numbers");
    }
  });
  if (!bars.is_array()) throw Error(Errc::ConfigError, "--strikes must be a JSON array of bar numbers");
  if (a.horizon < 0) throw Error(Errc::ConfigError, "--horizon must be positive");

  const gen::Generator model = gen::Generator::load(a.model);
  std::vector<data::StrikeEvent> robot;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    data::StrikeEvent e;
    e.t = kRobotBeatSpacing * static_cast<double>(i);
    e.actor = data::Actor::Robot;
    e.instrument = data::instrument_for(model.spec().exercise);
    e.bar = e.instrument == data::Instrument::Drum ? 1 : bars[i].get<int>();
    usage([&] { data::check_strike(e); return 0; });
    robot.push_back(e);
  }
  const int horizon = a.horizon > 0 ? a.horizon : model.target_length();
  const nn::Matrix frames =
      model.generate(gen::robot_one_hot(robot, model.spec().n_features), read_initial_frame(a.initial_frame), horizon);
  write_text(a.out, comment_line(ctx.meta) + gen::trajectory_csv(frames));
  if (!a.plot.empty())
    write_text(a.plot, "<!-- " + ctx.meta.dump() + " -->\n" + gen::overlay_svg(frames, nullptr, model.envelope()));
  ctx.out << frames.rows() << " frames -> " << a.out << "\n";
  return kOk;
}

// ---- stability-probe --------------------------------------------------------

struct ProbeArgs {
  std::string model, out;
  std::vector<std::string> datasets;
  double perturbation = 0.1;
  int trials = 50;
  std::uint64_t seed = 0;
};

int run_probe(const ProbeArgs& a, Context& ctx) {
  if (a.trials < 1 || !(a.perturbation >= 0.0)) throw Error(Errc::ConfigError, "--trials >= 1 and --perturb >= 0");
  const gen::Generator model = gen::Generator::load(a.model);
  const auto segments = read_datasets(a.datasets);
  const auto pairs = gen::make_pairs(model.spec(), segments, model.target_length());
  const gen::StabilityReport report = gen::stability_probe(model, pairs, a.perturbation, a.trials, a.seed);
  write_json(a.out, with_meta(gen::to_json(report), ctx.meta));
  ctx.out << "channel   inside  fraction\n";
  for (const auto& c : report.channels)
    ctx.out << std::left << std::setw(9) << c.channel << std::right << std::setw(7) << c.inside << "/" << c.total
            << "  " << std::fixed << std::setprecision(3) << c.fraction << std::defaultfloat << "\n";
  ctx.out << (report.pass ? "PASS" : "FAIL") << " at perturbation " << a.perturbation << "\n";
  return report.pass ? kOk : kValidationFailure;
}

// ---- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  double tolerance = 1e-4;
  std::string out;
};

int run_gradcheck(const GradcheckArgs& a, Context& ctx) {
  if (!(a.tolerance > 0.0)) throw Error(Errc::ConfigError, "--tolerance must be positive");
  const auto entries = check::gradcheck_suite(a.tolerance);
  bool pass = true;
  json rows = json::array();
  ctx.out << std::left << std::setw(30) << "check" << std::right << std::setw(10) << "params" << std::setw(14)
          << "max_rel_err" << "  result\n";
  for (const auto& e : entries) {
    pass = pass && e.pass;
    rows.push_back({{"name", e.name}, {"parameters", e.parameters}, {"max_error", e.max_error}, {"pass", e.pass}});
    ctx.out << std::left << std::setw(30) << e.name << std::right << std::setw(10) << e.parameters
            << std::setw(14) << std::scientific << std::setprecision(3) << e.max_error << std::defaultfloat
            << "  " << (e.pass ? "PASS" : "FAIL") << "\n";
  }
  if (!a.out.empty())
    write_json(a.out, with_meta({{"tolerance", a.tolerance}, {"checks", rows}, {"pass", pass}}, ctx.meta));
  return pass ? kOk : kValidationFailure;
}

json error_json(std::string_view kind, int exit_code, std::string_view message) {
  return {{"error", kind}, {"code", exit_code}, {"message", message}};
}

std::optional<json> seed_of(const json& resolved) {
  for (const char* section : {"training", "generation", "synth"})
    if (resolved.contains(section) && resolved[section].contains("seed")) return resolved[section]["seed"];
  return std::nullopt;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion and strike analysis toolkit for robot-mediated music sessions", std::string(kToolName)};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON run config with sections paths, detection, training, generation, synth and gradcheck; "
                 "flags override file values")
      ->check(CLI::ExistingFile);

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& description) -> Command& {
    commands.push_back(std::make_unique<Command>(app, name, description));
    return *commands.back();
  };

  DetectArgs detect_args;
  {
    Command& c = add("detect-strikes",
                     "Template-match strikes in a WAV recording. Templates: a directory of WAV files listed in "
                     "manifest.json {sample_rate, templates:[{file, bar, label}]}. "
                     "Output: strikes JSONL {t, bar, score, actor}.");
    c.option("--audio", detect_args.audio, "paths", "audio", "mono WAV recording (PCM16 or float32)", true)
        .option("--templates", detect_args.templates, "paths", "templates", "template directory", true)
        .option("--threshold", detect_args.threshold, "detection", "threshold", "NCC threshold in [-1, 1]")
        .option("--tolerance", detect_args.tolerance, "detection", "tolerance", "seconds between distinct strikes")
        .option("--session", detect_args.session, "paths", "session",
                "session sidecar JSON whose cues attribute strikes to robot or child")
        .option("--jobs", detect_args.jobs, "detection", "jobs", "worker threads")
        .option("--out", detect_args.out, "paths", "out", "output strikes JSONL", true);
    c.run = [&](Context& ctx) { return run_detect(detect_args, ctx); };
  }

  BuildArgs build_args;
  {
    Command& c = add("build-dataset",
                     "Segment sessions, validate segments and write the useful ones. Session: <ID>.session.json "
                     "sidecar next to <ID>.motion.jsonl rows {t, ch[18]}. Output: one JSONL row per 1/16-s step, "
                     "plus a report with the per-type TD/ASD counts table.");
    c.option("--session", build_args.sessions, "paths", "session", "session sidecar (repeatable)", true)
        .option("--strikes", build_args.strikes, "paths", "strikes", "strikes JSONL, paired with --session", true)
        .option("--out", build_args.out, "paths", "out", "output dataset JSONL", true)
        .option("--report", build_args.report, "paths", "report", "validation report JSON (default <out>.report.json)");
    c.run = [&](Context& ctx) { return run_build(build_args, ctx); };
  }

  SynthArgs synth_args;
  {
    Command& c = add("synth",
                     "Generate synthetic sessions: <ID>.motion.jsonl, <ID>.session.json, <ID>.strikes.jsonl, "
                     "<ID>.truth.json, and with --audio <ID>.wav plus templates/.");
    c.option("--profile", synth_args.profile, "synth", "profile", "td or asd", true)
        .option("--sessions", synth_args.sessions, "synth", "sessions", "number of subjects")
        .option("--seed", synth_args.seed, "synth", "seed", "random seed")
        .option("--out", synth_args.out, "paths", "out", "output directory", true)
        .option("--audio", synth_args.audio, "synth", "audio", "also render audio")
        .option("--per-type", synth_args.per_type, "synth", "per_type", "exercises of each type per session")
        .option("--separation", synth_args.separation, "synth", "separation", "TD/ASD profile separation, 0 = same")
        .option("--snr", synth_args.snr, "synth", "snr", "audio SNR in dB");
    c.run = [&](Context& ctx) { return run_synth(synth_args, ctx); };
  }

  TrainArgs train_args;
  {
    Command& c = add("train-classifier",
                     "Cross-validate and refit a TD/ASD classifier. Models: mlp, lstm, cnn-lstm, transformer, "
                     "mlp-lstm, mlp-transformer, lstm-transformer, logreg. Writes the model file and "
                     "<out>.report.json.");
    c.option("--model", train_args.model, "training", "model", "model family", true)
        .option("--modality", train_args.modality, "training", "modality",
                "strikes, motion or combined (default: the family's own)")
        .option("--exercise", train_args.exercise, "training", "exercise", "exercise type", true)
        .option("--dataset", train_args.datasets, "paths", "dataset", "dataset JSONL (repeatable)", true)
        .option("--folds", train_args.folds, "training", "folds", "cross-validation folds")
        .option("--holdout", train_args.holdout, "training", "holdout", "comma-separated held-out subject ids")
        .option("--seed", train_args.seed, "training", "seed", "random seed")
        .option("--epochs", train_args.epochs, "training", "epochs", "epochs (0: 100, or 50 for hybrids)")
        .option("--preset", train_args.preset, "training", "preset", "paper or small widths")
        .option("--jobs", train_args.jobs, "training", "jobs", "fold worker threads")
        .option("--out", train_args.out, "paths", "out", "output model file", true)
        .option("--report", train_args.report, "paths", "report", "report JSON (default <out>.report.json)");
    c.run = [&](Context& ctx) { return run_train(train_args, ctx); };
  }

  EvaluateArgs evaluate_args;
  {
    Command& c = add("evaluate", "Score a trained classifier on a dataset. Output: metrics and per-sample scores JSON.");
    c.option("--model", evaluate_args.model, "paths", "model", "classifier model file", true)
        .option("--dataset", evaluate_args.datasets, "paths", "dataset", "dataset JSONL (repeatable)", true)
        .option("--out", evaluate_args.out, "paths", "out", "output JSON", true);
    c.run = [&](Context& ctx) { return run_evaluate(evaluate_args, ctx); };
  }

  GenTrainArgs gen_train_args;
  {
    Command& c = add("train-generator",
                     "Train the motion generator with teacher forcing. Writes the model file and "
                     "<out>.report.json with parameter counts and the loss history.");
    c.option("--exercise", gen_train_args.exercise, "training", "exercise", "exercise type", true)
        .option("--preset", gen_train_args.preset, "training", "preset", "paper or small")
        .option("--dataset", gen_train_args.datasets, "paths", "dataset", "dataset JSONL (repeatable)", true)
        .option("--epochs", gen_train_args.epochs, "training", "epochs", "training epochs")
        .option("--seed", gen_train_args.seed, "training", "seed", "random seed")
        .option("--out", gen_train_args.out, "paths", "out", "output model file", true)
        .option("--report", gen_train_args.report, "paths", "report", "report JSON (default <out>.report.json)");
    c.run = [&](Context& ctx) { return run_train_generator(gen_train_args, ctx); };
  }

  GenerateArgs generate_args;
  {
    Command& c = add("generate",
                     "Generate a motion trajectory for a robot strike sequence. Initial frame: JSON array of 18 "
                     "values or a trajectory CSV (first row). Output CSV: t,h_x,...,l_roll at 1/16-s steps.");
    c.option("--model", generate_args.model, "paths", "model", "generator model file", true)
        .option("--strikes", generate_args.strikes, "generation", "strikes", "robot bars as JSON, e.g. '[2,7]'", true)
        .option("--initial-frame", generate_args.initial_frame, "paths", "initial_frame", "initial frame file", true)
        .option("--out", generate_args.out, "paths", "out", "output CSV", true)
        .option("--plot", generate_args.plot, "paths", "plot", "overlay SVG with the envelope")
        .option("--horizon", generate_args.horizon, "generation", "horizon", "steps (0: the trained target length)");
    c.run = [&](Context& ctx) { return run_generate(generate_args, ctx); };
  }

  ProbeArgs probe_args;
  {
    Command& c = add("stability-probe",
                     "Perturb initial frames and check generated trajectories stay inside the training envelope "
                     "(>= 95% per channel). Exit 1 when the check fails.");
    c.option("--model", probe_args.model, "paths", "model", "generator model file", true)
        .option("--dataset", probe_args.datasets, "paths", "dataset", "dataset JSONL (repeatable)", true)
        .option("--perturb", probe_args.perturbation, "generation", "perturbation", "fraction of channel range")
        .option("--trials", probe_args.trials, "generation", "trials", "trials per pair")
        .option("--seed", probe_args.seed, "generation", "seed", "random seed")
        .option("--out", probe_args.out, "paths", "out", "output report JSON", true);
    c.run = [&](Context& ctx) { return run_probe(probe_args, ctx); };
  }

  GradcheckArgs gradcheck_args;
  {
    Command& c = add("gradcheck", "Finite-difference gradient checks for every layer family and model. Exit 1 on failure.");
    c.option("--tolerance", gradcheck_args.tolerance, "gradcheck", "tolerance", "max relative error")
        .option("--out", gradcheck_args.out, "paths", "out", "optional JSON report");
    c.run = [&](Context& ctx) { return run_gradcheck(gradcheck_args, ctx); };
  }

  auto fail = [&](std::string_view kind, int code, std::string_view message) {
    err << error_json(kind, code, message).dump() << "\n";
    return code;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", kUsageError, e.what());
  }

  Command* command = nullptr;
  for (const auto& c : commands)
    if (c->app->parsed()) command = c.get();

  try {
    json config = json::object();
    if (!config_path.empty()) {
      try {
        config = read_json(config_path);
      } catch (const json::exception& e) {
        throw Error(Errc::ConfigError, std::string("config is not valid JSON: ") + e.what());
      }
    }
    check_config_keys(config);
    command->apply(config);

    json resolved = command->resolved();
    resolved["command"] = command->name();
    json log = {{"command", command->name()}, {"config", resolved}, {"seed", nullptr}};
    if (const auto seed = seed_of(resolved)) log["seed"] = *seed;
    err << log.dump() << "\n";

    Context ctx{provenance(resolved), out};
    return command->run(ctx);
  } catch (const Error& e) {
    const int code = e.code() == Errc::ConfigError ? kUsageError : kValidationFailure;
    return fail(to_string(e.code()), code, e.what());
  } catch (const json::exception& e) {
    return fail("FormatError", kValidationFailure, e.what());
  } catch (const std::exception& e) {
    return fail("Error", kValidationFailure, e.what());
  }
}

}  // namespace tempo::cli
