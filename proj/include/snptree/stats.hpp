#pragma once

namespace snptree::stats {

// Standard normal CDF and quantile.
double norm_cdf(double x);
double norm_quantile(double p);

// Upper tail probabilities.
double f_upper_tail(double f, double df1, double df2);
double chisq_upper_tail(double x, double df);
double t_two_sided(double t, double df);

}  // namespace snptree::stats
