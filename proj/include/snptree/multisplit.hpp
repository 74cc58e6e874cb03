#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include "snptree/dataset.hpp"
#include "snptree/lasso.hpp"
#include "snptree/lowdim.hpp"

namespace snptree {

struct Split {
  std::vector<int> i1;  // screening half, floor(n/2) indices, sorted
  std::vector<int> i2;  // inference half, sorted
};

struct SplitPlan {
  int n = 0;
  int B = 0;
  std::uint64_t seed = 0;
  std::vector<Split> splits;
};

// B independent uniform half-partitions, reproducible from the seed; each
// split draws from its own RNG substream.
SplitPlan make_splits(int n, int B, std::uint64_t seed);

struct GammaConfig {
  double gamma_min = 0.05;
  double factor() const;  // 1 - log(gamma_min), > 1
};

// Quantile aggregation of B dependent per-split p-values: the infimum over
// gamma in (gamma_min, 1) of the empirical gamma-quantile of {p_b / gamma},
// scaled by (1 - log gamma_min) and capped at 1. The infimum is evaluated
// exactly over the k/B grid where the quantile changes.
double aggregate_pvalues(const std::vector<double>& p_splits, const GammaConfig& cfg = {});

struct PrepareConfig {
  LassoConfig lasso;
  // Screened-set size uses the full sample size (floor(n/6)); switch to the
  // screening-half size instead.
  bool screen_on_half_n = false;
  int threads = 1;
};

// Per-dataset screening cache: the Lasso screening and the inference-half
// full fit are computed exactly once per split, then reused for every group.
class PreparedSplits {
public:
  PreparedSplits(const Dataset& d, const SplitPlan& plan, const PrepareConfig& cfg = {});

  int B() const { return static_cast<int>(fits_.size()); }
  int n_full() const { return n_; }
  const Dataset& dataset() const { return *d_; }
  const SplitFit& split_fit(int b) const { return fits_[b]; }

  // Number of Lasso screenings performed (one per split).
  long screening_fit_count() const { return screening_fits_.load(); }

  // Aggregated p-value for a group of x-column indices (need not be sorted).
  double group_pvalue(const std::vector<int>& group, const GammaConfig& cfg = {}) const;

  // Per-split p-values for a sorted group, in split order.
  std::vector<double> split_pvalues_sorted(const std::vector<int>& group_sorted) const;

private:
  const Dataset* d_ = nullptr;
  int n_ = 0;
  std::vector<SplitFit> fits_;
  std::atomic<long> screening_fits_{0};
};

// Full multi sample splitting p-value for one group.
double multisplit_pvalue(const Dataset& d, const std::vector<int>& group, const SplitPlan& plan,
                         const GammaConfig& cfg = {}, const PrepareConfig& prep_cfg = {});

}  // namespace snptree
