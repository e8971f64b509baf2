#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace slowfast::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;
};

/// Runs the acceptance criteria (all of them when `only` is empty), printing
/// one PASS/FAIL line per criterion to `out` as it finishes. A criterion
/// also fails when it runs past its time limit.
std::vector<CriterionResult> run_all(std::ostream& out, int workers = 0,
                                     const std::set<int>& only = {});

}  // namespace slowfast::acceptance
