#include "snptree/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

namespace snptree::stats {

double norm_cdf(double x) {
  boost::math::normal dist;
  return boost::math::cdf(dist, x);
}

double norm_quantile(double p) {
  boost::math::normal dist;
  return boost::math::quantile(dist, p);
}

double f_upper_tail(double f, double df1, double df2) {
  if (!(f > 0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  boost::math::fisher_f dist(df1, df2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

double chisq_upper_tail(double x, double df) {
  if (!(x > 0)) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double t_two_sided(double t, double df) {
  boost::math::students_t dist(df);
  double tail = boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return std::min(1.0, 2.0 * tail);
}

}  // namespace snptree::stats
