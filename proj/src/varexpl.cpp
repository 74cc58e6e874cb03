#include "snptree/varexpl.hpp"

#include <algorithm>
#include <cmath>

namespace snptree {

namespace {

// Adjusted R^2 = 1 - (RSS/df_resid) / (TSS/(n2-1)).
double adjusted_r2(const FitResult& fit, const Eigen::VectorXd& y2) {
  const double n2 = static_cast<double>(y2.size());
  double tss = (y2.array() - y2.mean()).square().sum();
  if (!(tss > 0.0) || fit.df_resid < 1) return 0.0;
  return 1.0 - (fit.rss / fit.df_resid) / (tss / (n2 - 1.0));
}

// Nagelkerke R^2 = [1 - (L0/L1)^(2/n)] / [1 - L0^(2/n)], in log space.
double nagelkerke_r2(double loglik_full, double loglik_null, double n2) {
  double numer = -std::expm1((2.0 / n2) * (loglik_null - loglik_full));
  double denom = -std::expm1((2.0 / n2) * loglik_null);
  if (!(denom > 0.0)) return 0.0;
  return numer / denom;
}

}  // namespace

double compute_r2(const PreparedSplits& prep, const std::vector<std::string>* cluster,
                  const R2Config& cfg) {
  const Dataset& d = prep.dataset();

  std::vector<int> cluster_cols;
  if (cluster) {
    cluster_cols.reserve(cluster->size());
    for (const auto& name : *cluster) {
      int idx = d.col_index(name);
      if (idx < 0) fail(errc::unknown_colname, "column '" + name + "' not in the dataset");
      cluster_cols.push_back(idx);
    }
    std::sort(cluster_cols.begin(), cluster_cols.end());
    cluster_cols.erase(std::unique(cluster_cols.begin(), cluster_cols.end()), cluster_cols.end());
  }

  double sum = 0.0;
  int used = 0;
  for (int b = 0; b < prep.B(); ++b) {
    const SplitFit& sf = prep.split_fit(b);
    if (sf.failed()) {
      if (!cfg.skip_empty) ++used;
      continue;
    }

    bool empty = false;
    if (cluster) {
      empty = true;
      for (int c : sf.screened()) {
        if (std::binary_search(cluster_cols.begin(), cluster_cols.end(), c)) {
          empty = false;
          break;
        }
      }
    } else {
      empty = sf.screened().empty();
    }
    if (empty) {
      if (!cfg.skip_empty) ++used;  // contributes 0
      continue;
    }

    double r2 = 0.0;
    try {
      if (sf.family() == Family::gaussian) {
        FitResult fit = sf.subset_fit(cluster ? &cluster_cols : nullptr);
        r2 = adjusted_r2(fit, sf.y2());
      } else {
        FitResult fit = sf.subset_fit(cluster ? &cluster_cols : nullptr);
        FitResult null = sf.null_fit();
        r2 = nagelkerke_r2(fit.loglik, null.loglik, static_cast<double>(sf.n2()));
      }
      sum += r2;
      ++used;
    } catch (const Error&) {
      if (!cfg.skip_empty) ++used;  // degenerate split contributes 0
    }
  }
  return used > 0 ? sum / used : 0.0;
}

double compute_r2(const Dataset& d, const std::vector<std::string>* cluster,
                  const SplitPlan& plan, const PrepareConfig& prep_cfg, const R2Config& cfg) {
  PreparedSplits prep(d, plan, prep_cfg);
  return compute_r2(prep, cluster, cfg);
}

}  // namespace snptree
