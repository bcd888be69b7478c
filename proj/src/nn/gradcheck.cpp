#include "tempo/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tempo::nn {

bool GradCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

double GradCheckReport::max_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport grad_check(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                           double tolerance, double h, double floor) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).value()(0, 0);
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    entry.size = p.size();
    for (Index i = 0; i < p.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + h;
      const double up = evaluate();
      x = saved - h;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(analytic - numeric) / denom);
    }
    entry.pass = entry.max_rel_error < tolerance;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace tempo::nn
