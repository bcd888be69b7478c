#include "tempo/check/gradcheck_suite.hpp"

#include <functional>

#include "tempo/gen/generator.hpp"
#include "tempo/models/classifier.hpp"
#include "tempo/nn/gradcheck.hpp"
#include "tempo/nn/layers.hpp"
#include "tempo/nn/loss.hpp"
#include "tempo/nn/ops.hpp"

namespace tempo::check {

using namespace tempo::nn;

namespace {

constexpr double kStep = 1e-5;

Matrix random_matrix(Index r, Index c, Rng& rng) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

SuiteEntry run(const std::string& name, ParameterSet& params, const std::function<Var(Tape&)>& loss, double tol) {
  const GradCheckReport r = grad_check(params, loss, tol, kStep);
  SuiteEntry e;
  e.name = name;
  e.parameters = params.count();
  e.max_error = r.max_error();
  e.pass = r.pass();
  return e;
}

models::Sample toy_sample(int label, data::ExerciseType ex, Rng& rng) {
  models::Sample s;
  s.id = "S/" + std::to_string(label);
  s.exercise = ex;
  s.label = label;
  s.strikes.resize(3, 2);
  s.strikes << 1, 0.4, 4, 0.9, 6, 1.7;
  s.strikes.col(1).array() += 0.3 * label;
  s.motion = random_matrix(5, data::kChannels, rng);
  return s;
}

}  // namespace

std::vector<SuiteEntry> gradcheck_suite(double tol) {
  std::vector<SuiteEntry> out;
  {
    Rng rng(21);
    ParameterSet params;
    Dense d1(params, "d1", {4, 6, Activation::Tanh}, rng);
    Dense d2(params, "d2", {6, 2}, rng);
    const Matrix x = random_matrix(5, 4, rng);
    const std::vector<int> labels{0, 1, 1, 0, 1};
    const std::vector<double> w{1.0, 2.5};
    out.push_back(run("dense", params, [&](Tape& t) {
      return weighted_cross_entropy(d2(t, d1(t, t.constant(x))), labels, w);
    }, tol));
  }
  {
    Rng rng(22);
    ParameterSet params;
    Lstm lstm(params, "lstm", {3, 4}, rng);
    const Matrix x = random_matrix(4, 3, rng);
    const Matrix target = random_matrix(4, 4, rng);
    out.push_back(run("lstm", params, [&](Tape& t) { return mse(lstm(t, t.constant(x)), target); }, tol));
  }
  {
    Rng rng(23);
    ParameterSet params;
    Conv1d conv(params, "conv", {3, 4, 3, 1, Activation::Tanh}, rng);
    const Matrix x = random_matrix(6, 3, rng);
    const Matrix target = random_matrix(6, 4, rng);
    out.push_back(run("conv1d", params, [&](Tape& t) { return mse(conv(t, t.constant(x)), target); }, tol));
  }
  {
    Rng rng(24);
    ParameterSet params;
    EncoderBlock block(params, "enc", {4, 2, 2, 2}, 6, 0.0, rng);
    const Matrix x = random_matrix(5, 4, rng);
    const Matrix target = random_matrix(5, 4, rng);
    out.push_back(run("attention_block", params, [&](Tape& t) { return mse(block(t, t.constant(x)), target); }, tol));
  }
  {
    Rng rng(25);
    ParameterSet params;
    DecoderBlock block(params, "dec", {4, 2, 2, 2}, 5, 0.0, rng);
    const Matrix x = random_matrix(3, 4, rng);
    const Matrix memory = random_matrix(2, 4, rng);
    const Matrix target = random_matrix(3, 4, rng);
    out.push_back(run("decoder_block", params, [&](Tape& t) {
      return mse(block(t, t.constant(x), t.constant(memory)), target);
    }, tol));
  }
  {
    Rng rng(26);
    ParameterSet params;
    LayerNorm norm(params, "ln", {5}, rng);
    params[0].value = random_matrix(1, 5, rng);
    params[1].value = random_matrix(1, 5, rng);
    const Matrix x = random_matrix(3, 5, rng);
    const Matrix target = random_matrix(3, 5, rng);
    out.push_back(run("layernorm", params, [&](Tape& t) { return mse(norm(t, t.constant(x)), target); }, tol));
  }
  for (models::Family f : models::kDeepFamilies) {
    Rng rng(30);
    const auto ex = data::ExerciseType::MultiHitXylophone;
    models::Classifier c(models::small_descriptor(f, ex), 31);
    const models::Sample a = toy_sample(0, ex, rng);
    const models::Sample b = toy_sample(1, ex, rng);
    const std::vector<int> labels{0, 1};
    const std::vector<double> w{1.0, 3.0};
    out.push_back(run("classifier/" + std::string(models::cli_name(f)) +
                          (f == models::Family::MotionLSTM ? "(motion)" : ""),
                      c.params(), [&](Tape& t) {
                        const Var rows[] = {c.logits(t, a), c.logits(t, b)};
                        return weighted_cross_entropy(concat_rows(rows), labels, w);
                      }, tol));
  }
  {
    Rng rng(40);
    gen::GeneratorSpec spec = gen::small_spec(data::ExerciseType::MultiHitXylophone);
    spec.preset = "check";
    spec.d_model = 8;
    spec.heads = 2;
    spec.d_k = 4;
    spec.d_v = 4;
    spec.ffn_hidden = 12;
    spec.encoder_blocks = 1;
    spec.decoder_blocks = 1;
    gen::Generator g(spec, 41);
    gen::Pair p;
    p.id = "P";
    p.robot = Matrix::Zero(2, 8);
    p.robot(0, 1) = p.robot(1, 6) = 1.0;
    p.initial = random_matrix(1, data::kChannels, rng);
    p.target = random_matrix(4, data::kChannels, rng);
    p.mask = {true, true, true, false};
    out.push_back(run("generator", g.params(), [&](Tape& t) { return g.teacher_forced_mse(t, p); }, tol));
  }
  return out;
}

}  // namespace tempo::check
