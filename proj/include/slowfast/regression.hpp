#pragma once

#include <vector>

namespace slowfast {

/// Ordinary least-squares fit y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
  int n = 0;
};

/// Requires at least two distinct x values; standard errors need n >= 3 and
/// are reported as 0 otherwise. Throws ConfigError on bad input.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace slowfast
