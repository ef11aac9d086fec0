#pragma once

// Acceptance checks.  Each criterion builds its own instances from fixed
// seeds, runs the production code and compares against oracles or the
// stated inequalities.

#include <string>
#include <vector>

namespace sr3::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  /// Measured quantities behind the verdict.
  std::string summary;
  double seconds = 0.0;
};

/// Runs criterion `id` in 1..13.
CriterionResult run_criterion(int id);
std::vector<CriterionResult> run_all();

/// "PASS [ 4] iterations vs conditioning (12.3 s): ..." style line.
std::string format_line(const CriterionResult& result);

}  // namespace sr3::verify
