#pragma once

#include <Eigen/Dense>

#include <vector>

#include "snptree/dataset.hpp"
#include "snptree/lasso.hpp"

namespace snptree {

// Low-dimensional fit on the inference half. The design is assembled as
// [intercept | clvar | x_sub]; rank-deficient columns are dropped greedily in
// that order, so controls are never dropped in favor of screened variables.
struct FitResult {
  Eigen::VectorXd coef;       // coefficients of the kept design columns
  std::vector<int> kept_clvar;  // surviving clvar columns
  std::vector<int> kept_x;      // surviving x_sub columns
  double rss = 0.0;           // gaussian
  double loglik = 0.0;        // binomial
  double deviance = 0.0;      // binomial, -2 loglik
  int df_resid = 0;
  int rank = 0;               // kept columns incl. intercept
  bool separation = false;
  bool converged = true;
};

FitResult fit_ols(const Eigen::MatrixXd& x_sub, const Eigen::VectorXd& y,
                  const Eigen::MatrixXd& clvar);

// IRLS with step halving; |deviance change| < 1e-8, cap 100 iterations.
FitResult fit_logistic(const Eigen::MatrixXd& x_sub, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& clvar);

// Upper-tail F p-value for nested gaussian fits (reduced columns inside full).
double partial_f_test(const FitResult& fit_full, const FitResult& fit_reduced);

// Likelihood ratio test for nested binomial fits; small negative deviance
// differences are clamped to zero, larger ones signal a convergence fault.
double lrt(const FitResult& fit_full, const FitResult& fit_reduced);

// Cached inference state for one sample split: the screened design on the
// inference half plus the fitted full model (controls + screened).
class SplitFit {
public:
  SplitFit() = default;
  SplitFit(const Dataset& d, const std::vector<int>& inference_rows, ScreenedSet screened);

  // p-value for H0: the group has no effect, given this split's screened set.
  // group must be a sorted list of x-column indices. Empty intersection with
  // the screened set or any fit failure gives the conservative 1.
  double group_pvalue(const std::vector<int>& group_sorted) const;

  // Model fit for the columns screened ∩ cluster only (varexpl path).
  // cluster_sorted == nullptr means "no restriction" (use all screened).
  FitResult subset_fit(const std::vector<int>* cluster_sorted) const;
  FitResult null_fit() const;  // intercept + controls only

  const std::vector<int>& screened() const { return screened_.selected; }
  int n2() const { return static_cast<int>(y2_.size()); }
  const Eigen::VectorXd& y2() const { return y2_; }
  bool failed() const { return failed_; }
  Family family() const { return family_; }

private:
  Family family_ = Family::gaussian;
  ScreenedSet screened_;
  std::vector<int> screened_sorted_;      // sorted copy of screened column ids
  std::vector<int> sorted_to_design_;     // design column of screened_sorted_[i]
  Eigen::MatrixXd design_;                // n2 x (1 + q + s)
  Eigen::VectorXd y2_;
  int q_ = 0;

  // gaussian fast path: Gram pieces of the full design
  Eigen::MatrixXd gram_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;

  // full-model summary
  double rss_full_ = 0.0;
  double dev_full_ = 0.0;
  int df_full_ = 0;
  int rank_full_ = 0;
  bool full_rank_ = false;                // no screened/clvar column dropped
  Eigen::MatrixXd cov_;                   // (Z'Z)^-1 when full rank (gaussian)
  Eigen::VectorXd beta_full_;
  FitResult logistic_full_;
  bool failed_ = false;

  double gaussian_group_pvalue(const std::vector<int>& design_cols) const;
  double binomial_group_pvalue(const std::vector<int>& design_cols) const;
};

// One-shot variant of the above (assembles the split state and tests once).
double group_pvalue(const Dataset& d, const std::vector<int>& inference_rows,
                    const ScreenedSet& screened, const std::vector<int>& group);

}  // namespace snptree
