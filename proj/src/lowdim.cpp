#include "snptree/lowdim.hpp"

#include <algorithm>
#include <cmath>

#include "snptree/stats.hpp"

namespace snptree {

namespace {

constexpr double kQrDropTol = 1e-7;     // relative residual norm, orthogonal route
constexpr double kGramDropTol = 1e-10;  // relative Schur pivot, Gram route
constexpr double kProbClamp = 1e-12;
constexpr double kPinned = 1e-10;

// Incremental QR with greedy column selection: a column is dropped when its
// residual against the span of previously kept columns is negligible.
struct GreedyQr {
  Eigen::MatrixXd q;  // n x rank, orthonormal
  Eigen::MatrixXd r;  // rank x rank, upper triangular
  std::vector<int> kept;
  int n = 0;

  explicit GreedyQr(int n_rows) : n(n_rows) {
    q.resize(n, 0);
    r.resize(0, 0);
  }

  bool offer(const Eigen::VectorXd& v, int col_id) {
    int rank = static_cast<int>(kept.size());
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(rank);
    Eigen::VectorXd w = v;
    for (int pass = 0; pass < 2; ++pass) {
      if (rank == 0) break;
      Eigen::VectorXd c = q.leftCols(rank).transpose() * w;
      w -= q.leftCols(rank) * c;
      coef += c;
    }
    double norm_v = v.norm();
    double norm_w = w.norm();
    if (norm_w <= kQrDropTol * std::max(norm_v, 1.0)) return false;

    q.conservativeResize(n, rank + 1);
    q.col(rank) = w / norm_w;
    Eigen::MatrixXd r_new = Eigen::MatrixXd::Zero(rank + 1, rank + 1);
    r_new.topLeftCorner(rank, rank) = r;
    r_new.block(0, rank, rank, 1) = coef;
    r_new(rank, rank) = norm_w;
    r = std::move(r_new);
    kept.push_back(col_id);
    return true;
  }
};

struct Design {
  Eigen::MatrixXd z;  // [1 | clvar | x_sub]
  int q = 0;
  int k = 0;  // x_sub columns
};

Design assemble(const Eigen::MatrixXd& x_sub, const Eigen::MatrixXd& clvar, Eigen::Index n) {
  Design d;
  d.q = static_cast<int>(clvar.cols());
  d.k = static_cast<int>(x_sub.cols());
  d.z.resize(n, 1 + d.q + d.k);
  d.z.col(0).setOnes();
  if (d.q > 0) d.z.middleCols(1, d.q) = clvar;
  if (d.k > 0) d.z.rightCols(d.k) = x_sub;
  return d;
}

void record_kept(const std::vector<int>& kept, int q, FitResult& fit) {
  for (int c : kept) {
    if (c == 0) continue;
    if (c <= q)
      fit.kept_clvar.push_back(c - 1);
    else
      fit.kept_x.push_back(c - 1 - q);
  }
}

FitResult ols_core(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, int q) {
  const int n = static_cast<int>(z.rows());
  GreedyQr qr(n);
  for (int c = 0; c < z.cols(); ++c) qr.offer(z.col(c), c);

  FitResult fit;
  fit.rank = static_cast<int>(qr.kept.size());
  fit.df_resid = n - fit.rank;
  if (fit.df_resid < 1) fail(errc::degenerate_fit, "no residual degrees of freedom");

  Eigen::VectorXd qty = qr.q.transpose() * y;
  fit.coef = qr.r.triangularView<Eigen::Upper>().solve(qty);
  fit.rss = std::max(0.0, y.squaredNorm() - qty.squaredNorm());
  record_kept(qr.kept, q, fit);
  return fit;
}

double binomial_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& prob) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = std::min(1.0 - kProbClamp, std::max(kProbClamp, prob[i]));
    ll += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return ll;
}

// IRLS with step halving on the kept (rank-repaired) design.
FitResult logistic_core(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, int q) {
  const int n = static_cast<int>(z.rows());
  GreedyQr qr(n);
  for (int c = 0; c < z.cols(); ++c) qr.offer(z.col(c), c);

  FitResult fit;
  fit.rank = static_cast<int>(qr.kept.size());
  fit.df_resid = n - fit.rank;
  if (fit.df_resid < 1) fail(errc::degenerate_fit, "no residual degrees of freedom");
  record_kept(qr.kept, q, fit);

  Eigen::MatrixXd zk(n, fit.rank);
  for (int c = 0; c < fit.rank; ++c) zk.col(c) = z.col(qr.kept[c]);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(fit.rank);
  double ybar = y.mean();
  beta[0] = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd eta = zk * beta;
  Eigen::VectorXd prob = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
  double dev = -2.0 * binomial_loglik(y, prob);

  fit.converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).cwiseMax(1e-9);
    Eigen::VectorXd zwork = eta + ((y - prob).array() / w.array()).matrix();
    Eigen::ArrayXd sw = w.array().sqrt();
    Eigen::MatrixXd zw = zk.array().colwise() * sw;
    Eigen::VectorXd rhs = zwork.array() * sw;
    Eigen::VectorXd proposal = zw.householderQr().solve(rhs);

    // Step halving keeps the deviance from increasing.
    double step = 1.0;
    Eigen::VectorXd beta_new;
    double dev_new = dev;
    for (int h = 0; h < 20; ++h) {
      beta_new = beta + step * (proposal - beta);
      Eigen::VectorXd eta_new = zk * beta_new;
      Eigen::VectorXd prob_new =
          eta_new.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
      dev_new = -2.0 * binomial_loglik(y, prob_new);
      if (std::isfinite(dev_new) && dev_new <= dev + 1e-10) {
        eta = std::move(eta_new);
        prob = std::move(prob_new);
        break;
      }
      step *= 0.5;
    }
    double change = std::fabs(dev - dev_new);
    beta = beta_new;
    dev = dev_new;
    if (change < 1e-8) {
      fit.converged = true;
      break;
    }
  }

  fit.coef = beta;
  fit.loglik = binomial_loglik(y, prob);
  fit.deviance = -2.0 * fit.loglik;
  fit.separation = (prob.array() < kPinned).any() || (prob.array() > 1.0 - kPinned).any();
  return fit;
}

// Greedy Cholesky over a Gram matrix: processes columns in order, skipping any
// whose Schur-complement pivot is negligible. Returns RSS and rank of the fit.
struct GramFit {
  double rss = 0.0;
  int rank = 0;
};

GramFit gram_greedy_rss(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yty,
                        const std::vector<int>& cols) {
  const int m = static_cast<int>(cols.size());
  Eigen::MatrixXd l(m, m);
  Eigen::VectorXd zvec(m);
  std::vector<int> kept;
  kept.reserve(m);

  double explained = 0.0;
  for (int c : cols) {
    int r = static_cast<int>(kept.size());
    Eigen::VectorXd lrow(r);
    for (int i = 0; i < r; ++i) {
      double s = gram(kept[i], c);
      for (int t = 0; t < i; ++t) s -= l(i, t) * lrow[t];
      lrow[i] = s / l(i, i);
    }
    double pivot = gram(c, c) - lrow.squaredNorm();
    if (pivot <= kGramDropTol * std::max(gram(c, c), 1e-300)) continue;

    double sz = xty[c];
    for (int t = 0; t < r; ++t) sz -= lrow[t] * zvec[t];
    double lz = sz / std::sqrt(pivot);

    for (int t = 0; t < r; ++t) l(r, t) = lrow[t];
    l(r, r) = std::sqrt(pivot);
    zvec[r] = lz;
    explained += lz * lz;
    kept.push_back(c);
  }

  GramFit fit;
  fit.rank = static_cast<int>(kept.size());
  fit.rss = std::max(0.0, yty - explained);
  return fit;
}

double f_pvalue_from_rss(double rss_full, int df_full, double rss_red, int rank_drop) {
  if (rank_drop <= 0) return 1.0;
  double diff = rss_red - rss_full;
  if (!(diff > 0.0)) return 1.0;
  if (rss_full <= 0.0) return 0.0;
  double f = (diff / rank_drop) / (rss_full / df_full);
  return stats::f_upper_tail(f, rank_drop, df_full);
}

}  // namespace

FitResult fit_ols(const Eigen::MatrixXd& x_sub, const Eigen::VectorXd& y,
                  const Eigen::MatrixXd& clvar) {
  Design d = assemble(x_sub, clvar, y.size());
  return ols_core(d.z, y, d.q);
}

FitResult fit_logistic(const Eigen::MatrixXd& x_sub, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& clvar) {
  Design d = assemble(x_sub, clvar, y.size());
  FitResult fit = logistic_core(d.z, y, d.q);
  if (!fit.converged) fail(errc::non_convergence, "IRLS did not converge in 100 iterations");
  return fit;
}

double partial_f_test(const FitResult& fit_full, const FitResult& fit_reduced) {
  if (fit_full.df_resid < 1) fail(errc::degenerate_fit, "full model has no residual df");
  int rank_drop = fit_reduced.df_resid - fit_full.df_resid;
  return f_pvalue_from_rss(fit_full.rss, fit_full.df_resid, fit_reduced.rss, rank_drop);
}

double lrt(const FitResult& fit_full, const FitResult& fit_reduced) {
  double stat = fit_reduced.deviance - fit_full.deviance;
  if (stat < -1e-6)
    fail(errc::negative_deviance, "reduced deviance below full deviance: convergence fault");
  if (stat < 0.0) stat = 0.0;
  int rank_drop = fit_reduced.df_resid - fit_full.df_resid;
  if (rank_drop <= 0) return 1.0;
  return stats::chisq_upper_tail(stat, rank_drop);
}

SplitFit::SplitFit(const Dataset& d, const std::vector<int>& inference_rows, ScreenedSet screened)
    : family_(d.family), screened_(std::move(screened)), q_(d.q()) {
  const int n2 = static_cast<int>(inference_rows.size());
  const int s = static_cast<int>(screened_.selected.size());

  y2_.resize(n2);
  for (int i = 0; i < n2; ++i) y2_[i] = d.y[inference_rows[i]];

  design_.resize(n2, 1 + q_ + s);
  design_.col(0).setOnes();
  for (int c = 0; c < q_; ++c)
    for (int i = 0; i < n2; ++i) design_(i, 1 + c) = d.clvar(inference_rows[i], c);
  for (int j = 0; j < s; ++j)
    for (int i = 0; i < n2; ++i) design_(i, 1 + q_ + j) = d.x(inference_rows[i], screened_.selected[j]);

  screened_sorted_ = screened_.selected;
  std::vector<int> pos(s);
  for (int j = 0; j < s; ++j) pos[j] = j;
  std::sort(pos.begin(), pos.end(),
            [&](int a, int b) { return screened_.selected[a] < screened_.selected[b]; });
  sorted_to_design_.resize(s);
  for (int i = 0; i < s; ++i) {
    screened_sorted_[i] = screened_.selected[pos[i]];
    sorted_to_design_[i] = 1 + q_ + pos[i];
  }

  try {
    if (family_ == Family::gaussian) {
      gram_ = design_.transpose() * design_;
      xty_ = design_.transpose() * y2_;
      yty_ = y2_.squaredNorm();

      std::vector<int> all(design_.cols());
      for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
      GramFit full = gram_greedy_rss(gram_, xty_, yty_, all);
      rank_full_ = full.rank;
      rss_full_ = full.rss;
      df_full_ = n2 - full.rank;
      if (df_full_ < 1) fail(errc::degenerate_fit, "no residual df in split full model");
      full_rank_ = (full.rank == static_cast<int>(design_.cols()));
      if (full_rank_) {
        Eigen::LLT<Eigen::MatrixXd> llt(gram_);
        if (llt.info() == Eigen::Success) {
          cov_ = llt.solve(Eigen::MatrixXd::Identity(design_.cols(), design_.cols()));
          beta_full_ = llt.solve(xty_);
        } else {
          full_rank_ = false;
        }
      }
    } else {
      logistic_full_ = logistic_core(design_, y2_, q_);
      if (!logistic_full_.converged || logistic_full_.separation)
        fail(errc::perfect_separation, "full model fit unusable for this split");
      dev_full_ = logistic_full_.deviance;
      rank_full_ = logistic_full_.rank;
      df_full_ = logistic_full_.df_resid;
    }
  } catch (const Error&) {
    failed_ = true;  // conservative: every group p-value becomes 1
  }
}

double SplitFit::group_pvalue(const std::vector<int>& group_sorted) const {
  if (failed_) return 1.0;

  // design columns of screened ∩ group
  std::vector<int> cols;
  std::size_t a = 0, b = 0;
  while (a < screened_sorted_.size() && b < group_sorted.size()) {
    if (screened_sorted_[a] < group_sorted[b])
      ++a;
    else if (group_sorted[b] < screened_sorted_[a])
      ++b;
    else {
      cols.push_back(sorted_to_design_[a]);
      ++a;
      ++b;
    }
  }
  if (cols.empty()) return 1.0;
  std::sort(cols.begin(), cols.end());

  try {
    return family_ == Family::gaussian ? gaussian_group_pvalue(cols) : binomial_group_pvalue(cols);
  } catch (const Error&) {
    return 1.0;
  }
}

double SplitFit::gaussian_group_pvalue(const std::vector<int>& design_cols) const {
  if (full_rank_) {
    // RSS_reduced - RSS_full = beta_G' [ (Z'Z)^-1 ]_GG^-1 beta_G
    const int g = static_cast<int>(design_cols.size());
    Eigen::MatrixXd cgg(g, g);
    Eigen::VectorXd bg(g);
    for (int i = 0; i < g; ++i) {
      bg[i] = beta_full_[design_cols[i]];
      for (int j = 0; j < g; ++j) cgg(i, j) = cov_(design_cols[i], design_cols[j]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cgg);
    if (llt.info() == Eigen::Success) {
      double diff = bg.dot(llt.solve(bg));
      if (!(diff > 0.0)) return 1.0;
      if (rss_full_ <= 0.0) return 0.0;
      double f = (diff / g) / (rss_full_ / df_full_);
      return stats::f_upper_tail(f, g, df_full_);
    }
    // fall through to the explicit reduced fit
  }

  std::vector<int> reduced;
  reduced.reserve(design_.cols() - design_cols.size());
  std::size_t next = 0;
  for (int c = 0; c < design_.cols(); ++c) {
    if (next < design_cols.size() && design_cols[next] == c) {
      ++next;
      continue;
    }
    reduced.push_back(c);
  }
  GramFit red = gram_greedy_rss(gram_, xty_, yty_, reduced);
  return f_pvalue_from_rss(rss_full_, df_full_, red.rss, rank_full_ - red.rank);
}

double SplitFit::binomial_group_pvalue(const std::vector<int>& design_cols) const {
  Eigen::MatrixXd zred(design_.rows(), design_.cols() - static_cast<Eigen::Index>(design_cols.size()));
  Eigen::Index out = 0;
  std::size_t next = 0;
  for (Eigen::Index c = 0; c < design_.cols(); ++c) {
    if (next < design_cols.size() && design_cols[next] == c) {
      ++next;
      continue;
    }
    zred.col(out++) = design_.col(c);
  }
  FitResult red = logistic_core(zred, y2_, q_);
  if (!red.converged) return 1.0;
  double stat = red.deviance - dev_full_;
  if (stat < -1e-6) return 1.0;  // convergence fault: conservative
  if (stat < 0.0) stat = 0.0;
  int rank_drop = rank_full_ - red.rank;
  if (rank_drop <= 0) return 1.0;
  return stats::chisq_upper_tail(stat, rank_drop);
}

FitResult SplitFit::subset_fit(const std::vector<int>* cluster_sorted) const {
  std::vector<int> cols;
  for (int c = 0; c <= q_; ++c) cols.push_back(c);
  for (std::size_t i = 0; i < screened_sorted_.size(); ++i) {
    if (!cluster_sorted ||
        std::binary_search(cluster_sorted->begin(), cluster_sorted->end(), screened_sorted_[i]))
      cols.push_back(sorted_to_design_[i]);
  }
  // keep design (= entry) order for the screened part
  std::sort(cols.begin(), cols.end());

  if (family_ == Family::gaussian) {
    FitResult fit;
    GramFit gf = gram_greedy_rss(gram_, xty_, yty_, cols);
    fit.rank = gf.rank;
    fit.rss = gf.rss;
    fit.df_resid = n2() - gf.rank;
    if (fit.df_resid < 1) fail(errc::degenerate_fit, "no residual df");
    return fit;
  }
  Eigen::MatrixXd z(design_.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = design_.col(cols[i]);
  FitResult fit = logistic_core(z, y2_, q_);
  if (!fit.converged) fail(errc::non_convergence, "IRLS did not converge");
  return fit;
}

FitResult SplitFit::null_fit() const {
  static const std::vector<int> empty;
  return subset_fit(&empty);
}

double group_pvalue(const Dataset& d, const std::vector<int>& inference_rows,
                    const ScreenedSet& screened, const std::vector<int>& group) {
  SplitFit sf(d, inference_rows, screened);
  std::vector<int> sorted = group;
  std::sort(sorted.begin(), sorted.end());
  return sf.group_pvalue(sorted);
}

}  // namespace snptree
