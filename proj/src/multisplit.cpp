#include "snptree/multisplit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snptree/parallel.hpp"
#include "snptree/rng.hpp"

namespace snptree {

SplitPlan make_splits(int n, int B, std::uint64_t seed) {
  if (n < 8) fail(errc::dimension_mismatch, "need n >= 8 to split, got " + std::to_string(n));
  if (B < 1) fail(errc::empty_input, "need at least one split");

  SplitPlan plan;
  plan.n = n;
  plan.B = B;
  plan.seed = seed;
  plan.splits.resize(B);

  const int half = n / 2;
  for (int b = 0; b < B; ++b) {
    auto rng = substream(seed, static_cast<std::uint64_t>(b));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<int> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
    Split& s = plan.splits[b];
    s.i1.assign(perm.begin(), perm.begin() + half);
    s.i2.assign(perm.begin() + half, perm.end());
    std::sort(s.i1.begin(), s.i1.end());
    std::sort(s.i2.begin(), s.i2.end());
  }
  return plan;
}

double GammaConfig::factor() const { return 1.0 - std::log(gamma_min); }

double aggregate_pvalues(const std::vector<double>& p_splits, const GammaConfig& cfg) {
  if (p_splits.empty()) fail(errc::empty_input, "no p-values to aggregate");
  const int B = static_cast<int>(p_splits.size());

  std::vector<double> sorted(p_splits);
  for (double& p : sorted) p = std::min(1.0, std::max(0.0, p));
  std::sort(sorted.begin(), sorted.end());

  // gamma-quantile = ceil(gamma*B)-th order statistic; on each piece
  // ((k-1)/B, k/B] the candidate inf is p_(k) * B / k at the right endpoint.
  int k_min = static_cast<int>(std::floor(cfg.gamma_min * B + 1e-12)) + 1;
  double best = std::numeric_limits<double>::infinity();
  for (int k = std::max(1, k_min); k <= B; ++k)
    best = std::min(best, sorted[k - 1] * B / k);
  return std::min(1.0, cfg.factor() * best);
}

PreparedSplits::PreparedSplits(const Dataset& d, const SplitPlan& plan, const PrepareConfig& cfg)
    : d_(&d), n_(d.n()) {
  if (plan.n != d.n())
    fail(errc::dimension_mismatch, "split plan was made for n=" + std::to_string(plan.n) +
                                       " but dataset has n=" + std::to_string(d.n()));
  fits_.resize(plan.B);

  parallel_for(static_cast<std::size_t>(plan.B), cfg.threads, [&](std::size_t b) {
    const Split& split = plan.splits[b];
    const int n1 = static_cast<int>(split.i1.size());

    Eigen::MatrixXd x1(n1, d.p());
    Eigen::VectorXd y1(n1);
    Eigen::MatrixXd clvar1(n1, d.q());
    for (int i = 0; i < n1; ++i) {
      x1.row(i) = d.x.row(split.i1[i]);
      y1[i] = d.y[split.i1[i]];
      for (int c = 0; c < d.q(); ++c) clvar1(i, c) = d.clvar(split.i1[i], c);
    }

    int target = cfg.screen_on_half_n ? n1 / 6 : d.n() / 6;
    LassoConfig lasso_cfg = cfg.lasso;
    lasso_cfg.max_entries = target;
    LassoPath path = fit_lasso_path(x1, y1, clvar1, d.family, lasso_cfg);
    screening_fits_.fetch_add(1, std::memory_order_relaxed);

    ScreenedSet screened = screen(path, cfg.screen_on_half_n ? n1 : d.n());
    fits_[b] = SplitFit(d, split.i2, std::move(screened));
  });
}

std::vector<double> PreparedSplits::split_pvalues_sorted(
    const std::vector<int>& group_sorted) const {
  std::vector<double> p(fits_.size());
  for (std::size_t b = 0; b < fits_.size(); ++b) p[b] = fits_[b].group_pvalue(group_sorted);
  return p;
}

double PreparedSplits::group_pvalue(const std::vector<int>& group, const GammaConfig& cfg) const {
  std::vector<int> sorted(group);
  std::sort(sorted.begin(), sorted.end());
  return aggregate_pvalues(split_pvalues_sorted(sorted), cfg);
}

double multisplit_pvalue(const Dataset& d, const std::vector<int>& group, const SplitPlan& plan,
                         const GammaConfig& cfg, const PrepareConfig& prep_cfg) {
  PreparedSplits prep(d, plan, prep_cfg);
  return prep.group_pvalue(group, cfg);
}

}  // namespace snptree
