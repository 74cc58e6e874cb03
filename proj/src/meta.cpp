#include "snptree/meta.hpp"

#include <algorithm>
#include <cmath>

#include "snptree/stats.hpp"

namespace snptree {

namespace {
constexpr double kClamp = 1e-15;  // keeps the normal quantile finite
}

MetaMethod meta_method_from_string(const std::string& s) {
  if (s == "tippett") return MetaMethod::tippett;
  if (s == "stouffer") return MetaMethod::stouffer;
  fail(errc::bad_format, "unknown aggregation method '" + s + "'");
}

std::string to_string(MetaMethod m) {
  return m == MetaMethod::tippett ? "tippett" : "stouffer";
}

double tippett(const std::vector<double>& p) {
  if (p.empty()) fail(errc::empty_input, "no p-values");
  double pmin = *std::min_element(p.begin(), p.end());
  pmin = std::min(1.0, std::max(0.0, pmin));
  double m = static_cast<double>(p.size());
  // 1 - (1-pmin)^m, stable for small pmin
  double out = -std::expm1(m * std::log1p(-pmin));
  return std::min(1.0, std::max(0.0, out));
}

double stouffer(const std::vector<double>& p, const std::vector<int>& n_per_study) {
  if (p.empty()) fail(errc::empty_input, "no p-values");
  if (p.size() != n_per_study.size())
    fail(errc::dimension_mismatch, "p-values and study sizes differ in length");
  double n_total = 0;
  for (int n : n_per_study) n_total += n;
  double z = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    double pl = std::min(1.0 - kClamp, std::max(kClamp, p[l]));
    z += std::sqrt(n_per_study[l] / n_total) * stats::norm_quantile(pl);
  }
  return stats::norm_cdf(z);
}

double combine(const std::vector<double>& p, const std::vector<int>& n_per_study, MetaMethod m) {
  return m == MetaMethod::tippett ? tippett(p) : stouffer(p, n_per_study);
}

double meta_group_pvalue(const std::vector<const PreparedSplits*>& per_study,
                         const std::vector<std::vector<int>>& group_per_study,
                         const MetaConfig& cfg) {
  if (per_study.empty()) fail(errc::empty_input, "no studies");
  if (per_study.size() != group_per_study.size())
    fail(errc::dimension_mismatch, "per-study groups missing");

  std::vector<double> p(per_study.size(), 1.0);
  std::vector<int> sizes(per_study.size());
  for (std::size_t l = 0; l < per_study.size(); ++l) {
    sizes[l] = per_study[l]->n_full();
    if (!group_per_study[l].empty())
      p[l] = per_study[l]->group_pvalue(group_per_study[l], cfg.gamma);
  }
  return combine(p, sizes, cfg.method);
}

Dataset pool_studies(const StudyCollection& studies) {
  if (studies.studies.empty()) fail(errc::empty_input, "no studies to pool");
  const Dataset& first = studies.studies.front();
  const int m = studies.m();

  int n_total = 0;
  int q_max = 0;
  for (const auto& d : studies.studies) {
    if (d.colnames != first.colnames)
      fail(errc::column_universe_mismatch, "pooling requires identical columns in every study");
    n_total += d.n();
    q_max = std::max(q_max, d.q());
  }
  for (const auto& d : studies.studies) {
    if (d.q() != 0 && d.q() != q_max)
      fail(errc::column_universe_mismatch, "studies disagree on control covariate count");
  }

  Eigen::MatrixXd x(n_total, first.p());
  Eigen::VectorXd y(n_total);
  // controls first, then one indicator per study after the first
  Eigen::MatrixXd clvar = Eigen::MatrixXd::Zero(n_total, q_max + (m - 1));
  int row = 0;
  for (int l = 0; l < m; ++l) {
    const Dataset& d = studies.studies[l];
    x.middleRows(row, d.n()) = d.x;
    y.segment(row, d.n()) = d.y;
    if (d.q() > 0) clvar.block(row, 0, d.n(), d.q()) = d.clvar;
    if (l > 0) clvar.block(row, q_max + l - 1, d.n(), 1).setOnes();
    row += d.n();
  }
  if (m == 1 && q_max == 0) clvar.resize(0, 0);
  return make_dataset(std::move(x), std::move(y), std::move(clvar),
                      first.colnames, first.family);
}

}  // namespace snptree
