#include "tempo/eval/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "tempo/core/error.hpp"
#include "tempo/core/io.hpp"
#include "tempo/core/rng.hpp"

namespace tempo::eval {

ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size())
    throw Error(Errc::ShapeError, "confusion: prediction and label counts differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pos = labels[i] == 1;
    const bool hit = predicted[i] == 1;
    if (pos && hit) ++c.tp;
    else if (pos) ++c.fn;
    else if (hit) ++c.fp;
    else ++c.tn;
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw Error(Errc::InvalidValue, "metrics: negative count");
  if (c.n() == 0) throw Error(Errc::EmptyEvaluation, "metrics: no samples");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.n());
  auto ratio = [&](std::int64_t num, std::int64_t den, unsigned flag) {
    if (den == 0) {
      m.zero_division |= flag;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.sensitivity = ratio(c.tp, c.tp + c.fn, kSensitivityUndefined);
  m.specificity = ratio(c.tn, c.tn + c.fp, kSpecificityUndefined);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, kF1Undefined);
  return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::ShapeError, "auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double pos = 0, neg = 0;
  for (int y : labels) (y == 1 ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) throw Error(Errc::DegenerateLabels, "auc: need both classes");

  // Sweep thresholds from high to low; each block of tied scores is one ROC step.
  double area = 0.0, tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    double dtp = 0.0, dfp = 0.0;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? dtp : dfp) += 1.0;
      ++j;
    }
    area += dfp * (tp + 0.5 * dtp);
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return area / (pos * neg);
}

std::vector<std::size_t> FoldPlan::test_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] >= 0 && fold[i] != f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::pool() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] >= 0) out.push_back(i);
  return out;
}

FoldPlan make_folds(std::span<const int> labels, std::span<const std::string> subjects, int k,
                    std::uint64_t seed, std::span<const std::string> holdout) {
  if (k < 2) throw Error(Errc::ConfigError, "make_folds: k must be at least 2");
  if (!subjects.empty() && subjects.size() != labels.size())
    throw Error(Errc::ShapeError, "make_folds: subject and label counts differ");
  const std::set<std::string> held(holdout.begin(), holdout.end());
  FoldPlan plan;
  plan.k = k;
  plan.fold.assign(labels.size(), -1);

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!subjects.empty() && held.count(subjects[i])) continue;
    by_class[labels[i]].push_back(i);
  }
  if (by_class.size() < 2)
    throw Error(Errc::StratificationError, "make_folds: pool must contain both classes");
  for (const auto& [label, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(k))
      throw Error(Errc::StratificationError,
                  "make_folds: class " + std::to_string(label) + " has " +
                      std::to_string(members.size()) + " samples, fewer than k=" +
                      std::to_string(k));
  }
  Rng rng(seed);
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t idx : members) plan.fold[idx] = static_cast<int>(next++ % k);
  }
  return plan;
}

nlohmann::json to_json(const Scores& s) {
  return {{"accuracy", s.accuracy},
          {"f1", s.f1},
          {"sensitivity", s.sensitivity},
          {"specificity", s.specificity},
          {"auc", s.auc}};
}

Scores scores_from_json(const nlohmann::json& j) {
  return {j.at("accuracy").get<double>(), j.at("f1").get<double>(),
          j.at("sensitivity").get<double>(), j.at("specificity").get<double>(),
          j.at("auc").get<double>()};
}

double unweighted_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

namespace {

struct MetricColumn {
  const char* label;
  double Scores::*field;
};

constexpr MetricColumn kMetricRows[] = {{"Accuracy", &Scores::accuracy},
                                        {"F1 score", &Scores::f1},
                                        {"Sensitivity", &Scores::sensitivity},
                                        {"Specificity", &Scores::specificity},
                                        {"AUC", &Scores::auc}};

std::string fixed2(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace

nlohmann::json aggregate_report(const ResultTable& table) {
  if (table.exercises.empty()) throw Error(Errc::EmptyEvaluation, "aggregate_report: no exercises");
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& model : table.models) {
    const auto found = table.cells.find(model);
    for (const auto& metric : kMetricRows) {
      nlohmann::json row = {{"classifier", model}, {"metric", metric.label}};
      nlohmann::json cells = nlohmann::json::object();
      std::vector<double> present;
      for (const auto& ex : table.exercises) {
        if (found != table.cells.end() && found->second.count(ex)) {
          const double v = found->second.at(ex).*metric.field;
          cells[ex] = v;
          present.push_back(v);
        } else {
          cells[ex] = "---";
        }
      }
      row["exercises"] = std::move(cells);
      row["average"] = present.empty() ? nlohmann::json("---") : nlohmann::json(unweighted_mean(present));
      rows.push_back(std::move(row));
    }
  }
  return {{"columns", table.exercises}, {"rows", std::move(rows)}};
}

std::string aggregate_csv(const ResultTable& table) {
  const nlohmann::json report = aggregate_report(table);
  std::ostringstream os;
  os << "Classifier,Metric";
  for (const auto& ex : table.exercises) os << ',' << csv_field(ex);
  os << ",Average\n";
  auto cell = [](const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : fixed2(v.get<double>());
  };
  for (const auto& row : report["rows"]) {
    os << csv_field(row["classifier"].get<std::string>()) << ',' << row["metric"].get<std::string>();
    for (const auto& ex : table.exercises) os << ',' << cell(row["exercises"][ex]);
    os << ',' << cell(row["average"]) << '\n';
  }
  return os.str();
}

}  // namespace tempo::eval
