#pragma once

#include <string>
#include <vector>

namespace tempo::check {

struct SuiteEntry {
  std::string name;
  std::size_t parameters = 0;
  double max_error = 0.0;
  bool pass = false;
};

/// Finite-difference checks (h = 1e-5) of every layer family, each small
/// classifier family and a small generator.
std::vector<SuiteEntry> gradcheck_suite(double tolerance = 1e-4);

}  // namespace tempo::check
