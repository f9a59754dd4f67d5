#pragma once

#include <vector>

namespace casper {

double mean_of(const std::vector<double>& values);
double sample_std(const std::vector<double>& values);

struct PairedTTest {
  double t_stat = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

/// One-sided paired t-test of H1: mean(a - b) < 0. With zero variance in
/// the differences the p-value collapses to 0 or 1 by sign.
PairedTTest paired_t_test_less(const std::vector<double>& a,
                               const std::vector<double>& b);

struct Chi2Uniformity {
  double statistic = 0.0;
  double critical = 0.0;  // upper quantile at the requested alpha
  bool pass = false;
  int dof = 0;
};

/// Goodness-of-fit of observed category counts against equal expected
/// counts; passes when the statistic stays below the (1 - alpha) quantile.
Chi2Uniformity chi2_uniformity_test(const std::vector<long long>& counts,
                                    double alpha);

}  // namespace casper
