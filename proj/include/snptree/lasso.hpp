#pragma once

#include <Eigen/Dense>

#include <vector>

#include "snptree/dataset.hpp"

namespace snptree {

struct LassoConfig {
  int n_lambda = 100;
  // 0 = auto: 0.01 when p > n, else 1e-4.
  double lambda_min_ratio = 0.0;
  // Convergence: largest coefficient change in a sweep.
  double tol = 1e-7;
  // Sweep cap per lambda.
  long max_iter = 100000;
  // Stop the path once this many variables have entered (0 = run the full grid).
  int max_entries = 0;
  bool retain_coefficients = false;
  // Complete separation along a binomial path throws instead of truncating.
  bool error_on_separation = false;
};

struct LassoPath {
  Eigen::VectorXd lambdas;       // strictly decreasing
  std::vector<int> entry_order;  // x-column indices by first nonzero appearance
  bool truncated = false;        // stopped early (max_entries or separation)

  // Filled only when retain_coefficients is set; one column per lambda.
  Eigen::MatrixXd coefs;        // p x L, penalized coefficients
  Eigen::VectorXd intercepts;   // L
  Eigen::MatrixXd clvar_coefs;  // q x L
};

// Coordinate-descent regularization path from lambda_max (all penalized
// coefficients zero) down to lambda_max * lambda_min_ratio on a log grid.
// The intercept and clvar columns are never penalized. For family=binomial,
// penalized weighted least squares inside an outer quadratic-approximation
// loop; a path hitting complete separation is truncated at the last stable
// lambda rather than failing, since screening only needs the entry prefix.
LassoPath fit_lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::MatrixXd& clvar, Family family,
                         const LassoConfig& cfg = {});

struct ScreenedSet {
  std::vector<int> selected;  // x-column indices, in path entry order
  int target_size = 0;        // floor(n_full / 6)
};

// First min(floor(n_full/6), |entry_order|) variables entering the path.
ScreenedSet screen(const LassoPath& path, int n_full);

}  // namespace snptree
