#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "tempo/core/error.hpp"
#include "tempo/core/rng.hpp"
#include "tempo/eval/metrics.hpp"

using namespace tempo;
using namespace tempo::eval;

namespace {

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double total = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      total += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return total / pairs;
}

}  // namespace

TEST(Metrics, PerfectClassifier) {
  const Metrics m = metrics({5, 0, 7, 0});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.sensitivity, 1.0);
  EXPECT_EQ(m.specificity, 1.0);
  EXPECT_EQ(m.zero_division, 0u);
}

TEST(Metrics, NoPositivesFlagsSensitivity) {
  const Metrics m = metrics({0, 2, 8, 0});
  EXPECT_EQ(m.sensitivity, 0.0);
  EXPECT_TRUE(m.zero_division & kSensitivityUndefined);
  EXPECT_FALSE(m.zero_division & kSpecificityUndefined);
}

TEST(Metrics, HandArithmetic) {
  const Metrics m = metrics({3, 1, 5, 1});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.8);
  EXPECT_DOUBLE_EQ(m.sensitivity, 0.75);
  EXPECT_DOUBLE_EQ(m.specificity, 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.f1, 0.75);
}

TEST(Metrics, EmptyIsError) {
  EXPECT_THROW(metrics({0, 0, 0, 0}), Error);
}

TEST(Metrics, LabelSwapExchangesSensitivityAndSpecificity) {
  Rng rng(3);
  std::vector<int> y(40), p(40), ys(40), ps(40);
  for (int i = 0; i < 40; ++i) {
    y[i] = rng.bernoulli(0.4);
    p[i] = rng.bernoulli(0.5);
    ys[i] = 1 - y[i];
    ps[i] = 1 - p[i];
  }
  const Metrics a = metrics(confusion(p, y));
  const Metrics b = metrics(confusion(ps, ys));
  EXPECT_DOUBLE_EQ(a.sensitivity, b.specificity);
  EXPECT_DOUBLE_EQ(a.specificity, b.sensitivity);
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(4);
  std::vector<int> y(30), p(30);
  for (int i = 0; i < 30; ++i) y[i] = rng.bernoulli(0.3), p[i] = rng.bernoulli(0.5);
  const ConfusionCounts before = confusion(p, y);
  std::vector<int> order(30);
  for (int i = 0; i < 30; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> y2, p2;
  for (int i : order) y2.push_back(y[i]), p2.push_back(p[i]);
  const ConfusionCounts after = confusion(p2, y2);
  EXPECT_EQ(before.tp, after.tp);
  EXPECT_EQ(before.fp, after.fp);
  EXPECT_EQ(before.tn, after.tn);
  EXPECT_EQ(before.fn, after.fn);
}

TEST(Auc, SeparatedIsOne) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_EQ(auc(s, y), 1.0);
}

TEST(Auc, AllTiedIsHalf) {
  const std::vector<double> s(6, 0.3);
  const std::vector<int> y{0, 1, 0, 1, 1, 0};
  EXPECT_EQ(auc(s, y), 0.5);
}

TEST(Auc, SingleClassIsDegenerate) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> y{1, 1};
  try {
    auc(s, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateLabels);
  }
}

TEST(Auc, MatchesPairwiseConcordance) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(12);
    std::vector<int> y(12);
    for (int i = 0; i < 12; ++i) {
      // coarse grid so ties occur
      s[i] = std::floor(rng.uniform() * 6.0) / 6.0;
      y[i] = i < 2 ? i : static_cast<int>(rng.bernoulli(0.5));
    }
    EXPECT_NEAR(auc(s, y), pairwise_auc(s, y), 1e-9);
  }
}

TEST(Auc, MonotoneTransformInvariant) {
  Rng rng(6);
  std::vector<double> s(20), t(20);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) {
    s[i] = rng.normal();
    t[i] = std::exp(3.0 * s[i]) + 1.0;
    y[i] = i % 3 == 0;
  }
  EXPECT_DOUBLE_EQ(auc(s, y), auc(t, y));
}

TEST(Auc, LabelSwapComplements) {
  Rng rng(7);
  std::vector<double> s(15);
  std::vector<int> y(15), ys(15);
  for (int i = 0; i < 15; ++i) {
    s[i] = std::round(rng.uniform() * 4.0);
    y[i] = i % 2;
    ys[i] = 1 - y[i];
  }
  EXPECT_NEAR(auc(s, y), 1.0 - auc(s, ys), 1e-12);
}

TEST(Folds, TwentyOneSamplesGiveSizeThree) {
  std::vector<int> y(21);
  for (int i = 0; i < 21; ++i) y[i] = i < 14 ? 0 : 1;
  const FoldPlan plan = make_folds(y, {}, 7, 1, {});
  for (int f = 0; f < 7; ++f) EXPECT_EQ(plan.test_indices(f).size(), 3u);
}

TEST(Folds, PartitionAndStratification) {
  Rng rng(8);
  std::vector<int> y(97);
  std::vector<std::string> subj(97);
  for (int i = 0; i < 97; ++i) {
    y[i] = rng.bernoulli(0.2) || i < 10;
    subj[i] = (y[i] ? "ASD-" : "TD-") + std::to_string(i % 13);
  }
  const std::vector<std::string> holdout{"TD-2", "TD-12", "ASD-2"};
  const FoldPlan plan = make_folds(y, subj, 7, 42, holdout);
  std::vector<int> seen(97, 0);
  for (int f = 0; f < 7; ++f)
    for (auto i : plan.test_indices(f)) ++seen[i];
  std::set<std::string> held(holdout.begin(), holdout.end());
  for (int i = 0; i < 97; ++i) EXPECT_EQ(seen[i], held.count(subj[i]) ? 0 : 1) << i;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<int> sizes(7, 0);
    for (int i = 0; i < 97; ++i)
      if (plan.fold[i] >= 0 && y[i] == cls) ++sizes[plan.fold[i]];
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
  }
  for (int f = 0; f < 7; ++f)
    for (auto i : plan.train_indices(f)) EXPECT_FALSE(held.count(subj[i]));
}

TEST(Folds, SameSeedSamePlan) {
  std::vector<int> y(50);
  for (int i = 0; i < 50; ++i) y[i] = i % 4 == 0;
  EXPECT_EQ(make_folds(y, {}, 7, 9, {}).fold, make_folds(y, {}, 7, 9, {}).fold);
  EXPECT_NE(make_folds(y, {}, 7, 9, {}).fold, make_folds(y, {}, 7, 10, {}).fold);
}

TEST(Folds, SmallMinorityIsStratificationError) {
  std::vector<int> y(30, 0);
  for (int i = 0; i < 6; ++i) y[i] = 1;
  try {
    make_folds(y, {}, 7, 1, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StratificationError);
  }
}

TEST(Aggregate, LstmAverageAccuracy) {
  const std::vector<double> cells{0.79, 0.78, 0.96, 0.88};
  EXPECT_NEAR(unweighted_mean(cells), 0.8525, 1e-12);
  ResultTable table;
  table.exercises = {"Drumming", "Single-hit Xylophone", "Multi-hit Xylophone", "Verbal Instruction",
                     "Joint Attention"};
  table.models = {"LSTM"};
  for (std::size_t i = 0; i < 4; ++i) table.cells["LSTM"][table.exercises[i]].accuracy = cells[i];
  const auto report = aggregate_report(table);
  EXPECT_EQ(report["rows"][0]["exercises"]["Joint Attention"], "---");
  EXPECT_NEAR(report["rows"][0]["average"].get<double>(), 0.8525, 1e-12);
  const std::string csv = aggregate_csv(table);
  EXPECT_NE(csv.find("LSTM,Accuracy,0.79,0.78,0.96,0.88,---,0.85"), std::string::npos) << csv;
}

TEST(Aggregate, SingleExerciseAverageIsThatValue) {
  ResultTable table;
  table.exercises = {"Drumming"};
  table.models = {"MLP"};
  table.cells["MLP"]["Drumming"].auc = 0.61;
  EXPECT_EQ(aggregate_report(table)["rows"][4]["average"].get<double>(), 0.61);
}
