#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snptree/dataset.hpp"
#include "snptree/multisplit.hpp"

namespace snptree {

struct R2Config {
  // A split whose screened set misses the cluster contributes 0 to the mean;
  // set skip_empty to average over the non-empty splits instead.
  bool skip_empty = false;
};

// Explained variance of a cluster via multi sample splitting: per split, fit
// controls + (screened ∩ cluster) on the inference half and compute adjusted
// R^2 (gaussian) or Nagelkerke's R^2 (binomial); report the mean over splits.
// An empty cluster pointer means the whole dataset.
double compute_r2(const PreparedSplits& prep, const std::vector<std::string>* cluster,
                  const R2Config& cfg = {});

double compute_r2(const Dataset& d, const std::vector<std::string>* cluster,
                  const SplitPlan& plan, const PrepareConfig& prep_cfg = {},
                  const R2Config& cfg = {});

}  // namespace snptree
