#include "tempo/models/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <thread>

#include "tempo/core/error.hpp"
#include "tempo/nn/loss.hpp"
#include "tempo/nn/ops.hpp"

namespace tempo::models {

using nn::Index;
using nn::Matrix;

int default_epochs(Family f) { return modality_of(f) == Modality::Combined && f != Family::LogisticRegression ? 50 : 100; }

void validate(const TrainConfig& c) {
  if (c.folds < 2) throw Error(Errc::ConfigError, "folds must be at least 2");
  if (c.epochs < 1) throw Error(Errc::ConfigError, "epochs must be at least 1");
  if (c.batch_size < 1) throw Error(Errc::ConfigError, "batch_size must be at least 1");
  if (!(c.lr > 0.0)) throw Error(Errc::ConfigError, "lr must be positive");
  if (c.jobs < 1) throw Error(Errc::ConfigError, "jobs must be at least 1");
  if (!(c.augment_timing_noise >= 0.0)) throw Error(Errc::ConfigError, "timing noise must be non-negative");
  if (c.logreg_iterations < 1 || !(c.logreg_rate > 0.0))
    throw Error(Errc::ConfigError, "logistic regression needs positive iterations and rate");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"decay", c.adam.decay},
          {"decay_mode", c.adam.decay_mode == nn::DecayMode::WeightDecay ? "weight" : "lr"},
          {"folds", c.folds},
          {"seed", c.seed},
          {"holdout", c.holdout},
          {"refit", c.refit},
          {"augment_duplicate_asd", c.augment_duplicate_asd},
          {"augment_timing_noise", c.augment_timing_noise},
          {"logreg_iterations", c.logreg_iterations},
          {"logreg_rate", c.logreg_rate}};
}

double asd_class_weight(std::span<const int> labels) {
  const auto asd = std::count(labels.begin(), labels.end(), 1);
  if (asd == 0) throw Error(Errc::StratificationError, "training split has no ASD sample");
  return static_cast<double>(static_cast<std::ptrdiff_t>(labels.size()) - asd) / static_cast<double>(asd);
}

LogisticModel logistic_baseline(const Matrix& x, std::span<const int> labels, const LogisticConfig& config) {
  const Index n = x.rows();
  if (n == 0 || static_cast<Index>(labels.size()) != n)
    throw Error(Errc::ShapeError, "logistic_baseline: need one label per row");
  if (!(config.l2 >= 0.0) || !(config.rate > 0.0) || config.iterations < 1)
    throw Error(Errc::ConfigError, "logistic_baseline: invalid configuration");
  Eigen::VectorXd y(n), c(n);
  for (Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l != 0 && l != 1) throw Error(Errc::InvalidValue, "logistic_baseline: labels must be 0 or 1");
    y(i) = l;
    c(i) = config.class_weights[static_cast<std::size_t>(l)];
  }
  LogisticModel m;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = 0.0;
  for (int it = 0; it <= config.iterations; ++it) {
    const Eigen::VectorXd z = (x * w).array() + b;
    const Eigen::VectorXd p = (1.0 + (-z.array()).exp()).inverse();
    if (it % 20 == 0 || it == config.iterations) {
      // log(1 + exp(-s z)) with s = 2y - 1, written to avoid overflow.
      const Eigen::ArrayXd sz = (2.0 * y.array() - 1.0) * z.array();
      const Eigen::ArrayXd nll = (-sz).max(0.0) + (1.0 + (-sz.abs()).exp()).log();
      m.loss_history.push_back((c.array() * nll).mean() + 0.5 * config.l2 * w.squaredNorm());
    }
    if (it == config.iterations) break;
    const Eigen::VectorXd r = c.array() * (p - y).array();
    const Eigen::VectorXd gw = x.transpose() * r / static_cast<double>(n) + config.l2 * w;
    const double gb = r.mean();
    w -= config.rate * gw;
    b -= config.rate * gb;
  }
  m.weight = w.transpose();
  m.bias = b;
  return m;
}

namespace {

std::vector<int> labels_of(std::span<const Sample* const> samples) {
  std::vector<int> out;
  for (const Sample* s : samples) out.push_back(s->label);
  return out;
}

double accuracy_on(const Classifier& model, std::span<const Sample* const> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Sample* s : samples) hits += model.predict(*s) == s->label;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

FitHistory fit_logistic(Classifier& model, std::span<const Sample* const> train, const TrainConfig& config,
                        double asd_weight) {
  model.fit_standardization(train);
  const Standardization& st = model.standardization();
  const Modality modality = model.descriptor().modality;
  Matrix x(static_cast<Index>(train.size()), st.mean.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    x.row(static_cast<Index>(i)) = (handcrafted_features(*train[i], modality) - st.mean).array() / st.scale.array();
  const std::vector<int> y = labels_of(train);
  const LogisticModel lm =
      logistic_baseline(x, y, {model.descriptor().hyper.l2, config.logreg_rate, config.logreg_iterations,
                               {1.0, asd_weight}});
  model.params()[0].value = lm.weight.transpose();
  model.params()[1].value(0, 0) = lm.bias;
  FitHistory h;
  h.loss = lm.loss_history;
  h.asd_weight = asd_weight;
  return h;
}

Sample jitter(const Sample& s, double sigma, Rng& rng) {
  Sample out = s;
  for (Index i = 0; i < out.strikes.rows(); ++i) out.strikes(i, 1) = std::max(0.0, out.strikes(i, 1) + rng.normal(0.0, sigma));
  std::vector<Index> order(static_cast<std::size_t>(out.strikes.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return out.strikes(a, 1) < out.strikes(b, 1); });
  Matrix sorted(out.strikes.rows(), 2);
  for (std::size_t i = 0; i < order.size(); ++i) sorted.row(static_cast<Index>(i)) = out.strikes.row(order[i]);
  out.strikes = sorted;
  return out;
}

}  // namespace

FitHistory fit(Classifier& model, std::span<const Sample* const> train, const TrainConfig& config,
               std::uint64_t stream_seed) {
  validate(config);
  if (train.empty()) throw Error(Errc::InsufficientData, "no training samples");
  for (const Sample* s : train) check_modality(model.descriptor(), s->exercise);

  std::vector<const Sample*> pool(train.begin(), train.end());
  if (config.augment_duplicate_asd) {
    const std::vector<int> y = labels_of(train);
    const double ratio = asd_class_weight(y);
    const int copies = std::max(0, static_cast<int>(std::lround(ratio)) - 1);
    for (const Sample* s : train)
      if (s->label == 1)
        for (int c = 0; c < copies; ++c) pool.push_back(s);
  }
  const std::vector<int> labels = labels_of(pool);
  const double asd_weight = asd_class_weight(labels);
  const std::vector<double> weights{1.0, asd_weight};

  FitHistory h;
  if (model.descriptor().family == Family::LogisticRegression) {
    h = fit_logistic(model, pool, config, asd_weight);
  } else {
    model.fit_standardization(pool);
    nn::ParameterSet& params = model.params();
    Rng rng(stream_seed);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::int64_t step = 0;
    h.asd_weight = asd_weight;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      rng.shuffle(order);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        nn::Tape tape(true, mix_seed(stream_seed, static_cast<std::uint64_t>(++step)));
        std::vector<nn::Var> rows;
        std::vector<int> y;
        std::vector<Sample> noisy;
        noisy.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          const Sample* s = pool[order[i]];
          if (config.augment_timing_noise > 0.0) {
            noisy.push_back(jitter(*s, config.augment_timing_noise, rng));
            s = &noisy.back();
          }
          rows.push_back(model.logits(tape, *s));
          y.push_back(s->label);
        }
        const nn::Var loss = nn::weighted_cross_entropy(nn::concat_rows(rows), y, weights);
        params.zero_grad();
        tape.backward(loss);
        nn::adam_step(params, config.lr, config.adam);
        total += loss.value()(0, 0) * static_cast<double>(stop - start);
      }
      h.loss.push_back(total / static_cast<double>(order.size()));
    }
  }
  h.train_accuracy = accuracy_on(model, train);
  return h;
}

namespace {

eval::Metrics evaluate_on(const Classifier& model, std::span<const Sample* const> samples, std::optional<double>& auc) {
  std::vector<int> pred, labels;
  std::vector<double> scores;
  for (const Sample* s : samples) {
    scores.push_back(model.score(*s));
    pred.push_back(model.predict(*s));
    labels.push_back(s->label);
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  auc.reset();
  if (positives > 0 && positives < static_cast<std::ptrdiff_t>(labels.size())) auc = eval::auc(scores, labels);
  return eval::metrics(eval::confusion(pred, labels));
}

std::vector<std::string> ids_of(std::span<const Sample* const> samples) {
  std::vector<std::string> out;
  for (const Sample* s : samples) out.push_back(s->id);
  return out;
}

}  // namespace

TrainResult train_classifier(const ModelDescriptor& descriptor, std::span<const Sample> samples,
                             const TrainConfig& config) {
  validate(descriptor);
  validate(config);
  for (const Sample& s : samples) {
    if (s.exercise != descriptor.exercise)
      throw Error(Errc::InvalidValue, "dataset must be restricted to " + std::string(data::to_string(descriptor.exercise)));
  }
  check_modality(descriptor, descriptor.exercise);

  std::vector<const Sample*> sorted;
  for (const Sample& s : samples) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });

  std::vector<int> labels;
  std::vector<std::string> subjects;
  for (const Sample* s : sorted) {
    labels.push_back(s->label);
    subjects.push_back(s->subject_id);
  }
  const eval::FoldPlan plan = eval::make_folds(labels, subjects, config.folds, config.seed, config.holdout);
  const std::set<std::string> held(config.holdout.begin(), config.holdout.end());

  TrainResult result;
  result.descriptor = descriptor;
  result.config = config;
  result.folds.resize(static_cast<std::size_t>(config.folds));

  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<const Sample*> out;
    for (std::size_t i : idx) out.push_back(sorted[i]);
    return out;
  };
  auto model_seed = [&](int job) { return mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(job)); };

  // Job f < k is fold f; job k is the refit.
  const int jobs = config.folds + (config.refit ? 1 : 0);
  std::vector<std::optional<Classifier>> refit_slot(1);
  auto run_job = [&](int job) {
    if (job < config.folds) {
      const std::vector<const Sample*> train = gather(plan.train_indices(job));
      const std::vector<const Sample*> test = gather(plan.test_indices(job));
      for (const Sample* s : train)
        if (held.count(s->subject_id)) throw Error(Errc::StratificationError, "holdout subject in a training fold");
      Classifier model(descriptor, model_seed(job));
      FoldReport& rep = result.folds[static_cast<std::size_t>(job)];
      rep.fold = job;
      rep.train_ids = ids_of(train);
      rep.test_ids = ids_of(test);
      rep.history = fit(model, train, config, mix_seed(config.seed, static_cast<std::uint64_t>(job)));
      std::optional<double> auc;
      rep.metrics = evaluate_on(model, test, auc);
      rep.auc = auc.value_or(std::nan(""));
    } else {
      const std::vector<const Sample*> pool = gather(plan.pool());
      Classifier model(descriptor, model_seed(job));
      result.refit = fit(model, pool, config, mix_seed(config.seed, static_cast<std::uint64_t>(job)));
      refit_slot[0].emplace(std::move(model));
    }
  };

  const int threads = std::min(config.jobs, jobs);
  if (threads <= 1) {
    for (int j = 0; j < jobs; ++j) run_job(j);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int j = next++; j < jobs; j = next++) {
          try {
            run_job(j);
          } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<double> acc, f1, sens, spec, auc;
  for (const FoldReport& f : result.folds) {
    acc.push_back(f.metrics.accuracy);
    f1.push_back(f.metrics.f1);
    sens.push_back(f.metrics.sensitivity);
    spec.push_back(f.metrics.specificity);
    auc.push_back(f.auc);
  }
  result.average = {eval::unweighted_mean(acc), eval::unweighted_mean(f1), eval::unweighted_mean(sens),
                    eval::unweighted_mean(spec), eval::unweighted_mean(auc)};

  result.model = std::move(refit_slot[0]);
  result.parameter_count = Classifier(descriptor, 0).parameter_count();
  if (result.model) {
    std::vector<const Sample*> holdout;
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (plan.fold[i] < 0) holdout.push_back(sorted[i]);
    result.holdout_ids = ids_of(holdout);
    if (!holdout.empty()) {
      std::optional<double> h_auc;
      result.holdout = evaluate_on(*result.model, holdout, h_auc);
      result.holdout_auc = h_auc;
    }
  }
  return result;
}

nlohmann::json metrics_json(const eval::Metrics& m, std::optional<double> auc) {
  nlohmann::json j = {{"accuracy", m.accuracy},
                      {"f1", m.f1},
                      {"sensitivity", m.sensitivity},
                      {"specificity", m.specificity},
                      {"auc", nullptr}};
  if (auc && std::isfinite(*auc)) j["auc"] = *auc;
  return j;
}

namespace {

nlohmann::json history_json(const FitHistory& h) {
  return {{"asd_weight", h.asd_weight},
          {"train_accuracy", h.train_accuracy},
          {"initial_loss", h.loss.empty() ? 0.0 : h.loss.front()},
          {"final_loss", h.loss.empty() ? 0.0 : h.loss.back()},
          {"loss_history", h.loss}};
}

}  // namespace

nlohmann::json report_json(const TrainResult& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldReport& f : r.folds) {
    nlohmann::json j = history_json(f.history);
    j["fold"] = f.fold;
    j["n_train"] = f.train_ids.size();
    j["n_test"] = f.test_ids.size();
    j["metrics"] = metrics_json(f.metrics, f.auc);
    j["test_ids"] = f.test_ids;
    folds.push_back(std::move(j));
  }
  nlohmann::json out = {
      {"model", cli_name(r.descriptor.family)},
      {"family", to_string(r.descriptor.family)},
      {"modality", to_string(r.descriptor.modality)},
      {"exercise", data::to_string(r.descriptor.exercise)},
      {"preset", r.descriptor.preset},
      {"parameter_count", r.parameter_count},
      {"parameter_budget", r.descriptor.parameter_budget},
      {"descriptor", to_json(r.descriptor)},
      {"config", to_json(r.config)},
      {"folds", folds},
      {"average", eval::to_json(r.average)},
      {"refit", nullptr},
      {"holdout", nullptr},
  };
  if (r.model) {
    nlohmann::json refit = history_json(r.refit);
    out["refit"] = refit;
  }
  if (r.holdout) {
    out["holdout"] = {{"ids", r.holdout_ids}, {"metrics", metrics_json(*r.holdout, r.holdout_auc)}};
  }
  return out;
}

}  // namespace tempo::models
