#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include "slowfast/acceptance.hpp"

// Usage: acceptance [criterion ...]
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto results = slowfast::acceptance::run_all(std::cout, 0, only);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - failed << "/" << results.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
