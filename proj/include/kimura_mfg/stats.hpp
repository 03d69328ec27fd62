#pragma once

#include <cstddef>
#include <vector>

namespace kmfg {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Sample mean with standard error (n-1 normalisation).
MeanSe mean_se(const std::vector<double>& x);

// Sample variance and its asymptotic standard error sqrt((m4 - s^4) / n).
MeanSe variance_se(const std::vector<double>& x);

// Difference of two independent estimates in units of their combined error.
// Returns 0 when both errors vanish and the estimates agree exactly.
double z_score(double a, double se_a, double b, double se_b);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kmfg
