#include "casper/stats.hpp"

#include "casper/types.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace casper {

double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw InvalidInput("mean of an empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / values.size();
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) throw InvalidInput("sample std needs >= 2 values");
  const double m = mean_of(values);
  double sq = 0.0;
  for (double v : values) sq += (v - m) * (v - m);
  return std::sqrt(sq / (values.size() - 1));
}

PairedTTest paired_t_test_less(const std::vector<double>& a,
                               const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InvalidInput("paired test needs two equal samples of size >= 2");
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double m = mean_of(diff);
  const double s = sample_std(diff);
  PairedTTest result;
  result.dof = static_cast<int>(a.size()) - 1;
  if (s == 0.0) {
    result.t_stat = m < 0.0 ? -std::numeric_limits<double>::infinity()
                   : m > 0.0 ? std::numeric_limits<double>::infinity()
                             : 0.0;
    result.p_value = m < 0.0 ? 0.0 : 1.0;
    return result;
  }
  result.t_stat = m / (s / std::sqrt(static_cast<double>(a.size())));
  boost::math::students_t dist(result.dof);
  result.p_value = boost::math::cdf(dist, result.t_stat);
  return result;
}

Chi2Uniformity chi2_uniformity_test(const std::vector<long long>& counts,
                                    double alpha) {
  if (counts.size() < 2) throw InvalidInput("chi2 needs >= 2 categories");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidParameter("alpha must lie in (0, 1)");
  }
  long long total = 0;
  for (long long c : counts) {
    if (c < 0) throw InvalidInput("negative count");
    total += c;
  }
  if (total == 0) throw InvalidInput("all counts are zero");
  const double expected = static_cast<double>(total) / counts.size();
  Chi2Uniformity result;
  result.dof = static_cast<int>(counts.size()) - 1;
  for (long long c : counts) {
    const double delta = c - expected;
    result.statistic += delta * delta / expected;
  }
  boost::math::chi_squared dist(result.dof);
  result.critical = boost::math::quantile(dist, 1.0 - alpha);
  result.pass = result.statistic <= result.critical;
  return result;
}

}  // namespace casper
