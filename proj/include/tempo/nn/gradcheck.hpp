#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tempo/nn/tape.hpp"

namespace tempo::nn {

struct GradCheckEntry {
  std::string name;
  Index size = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool pass() const;
  double max_error() const;
};

/// Builds a fresh graph with `loss` for the analytic gradient, then perturbs
/// every scalar of every parameter by +-h for a central difference.
/// Relative error is |a - n| / max(|a|, |n|, floor) per scalar.
GradCheckReport grad_check(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                           double tolerance = 1e-4, double h = 1e-5, double floor = 1e-6);

}  // namespace tempo::nn
