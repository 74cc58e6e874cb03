#include "snptree/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace snptree {

namespace {

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

// Unpenalized design [1 | clvar] and its thin-QR projector.
struct Unpenalized {
  Eigen::MatrixXd u;  // n x (q+1)
  Eigen::HouseholderQR<Eigen::MatrixXd> qr;

  Unpenalized(Eigen::Index n, const Eigen::MatrixXd& clvar) {
    u.resize(n, clvar.cols() + 1);
    u.col(0).setOnes();
    if (clvar.cols() > 0) u.rightCols(clvar.cols()) = clvar;
    qr.compute(u);
  }

  // Coefficients of the least-squares fit of v on [1 | clvar].
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return qr.solve(v); }

  // Residual of v after projecting onto span([1 | clvar]).
  Eigen::VectorXd project_out(const Eigen::VectorXd& v) const { return v - u * qr.solve(v); }
};

Eigen::VectorXd lambda_grid(double lambda_max, int n_lambda, double ratio) {
  Eigen::VectorXd grid(n_lambda);
  if (n_lambda == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  double log_max = std::log(lambda_max);
  double log_min = std::log(lambda_max * ratio);
  for (int k = 0; k < n_lambda; ++k)
    grid[k] = std::exp(log_max + (log_min - log_max) * k / (n_lambda - 1));
  grid[0] = lambda_max;  // exact endpoint
  return grid;
}

// Records entry order with the deterministic tie rule: variables entering at
// the same grid point are ordered by larger |gradient| at the previous lambda,
// then by column index.
struct EntryTracker {
  std::vector<char> entered;
  std::vector<int> order;

  explicit EntryTracker(int p) : entered(p, 0) {}

  template <typename GradFn>
  void observe(const Eigen::VectorXd& beta, GradFn&& grad_at_prev) {
    std::vector<int> fresh;
    for (int j = 0; j < beta.size(); ++j) {
      if (beta[j] != 0.0 && !entered[j]) fresh.push_back(j);
    }
    if (fresh.size() > 1) {
      std::vector<double> g(fresh.size());
      for (std::size_t i = 0; i < fresh.size(); ++i) g[i] = grad_at_prev(fresh[i]);
      std::vector<std::size_t> idx(fresh.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (g[a] != g[b]) return g[a] > g[b];
        return fresh[a] < fresh[b];
      });
      for (std::size_t i : idx) {
        entered[fresh[i]] = 1;
        order.push_back(fresh[i]);
      }
    } else {
      for (int j : fresh) {
        entered[j] = 1;
        order.push_back(j);
      }
    }
  }
};

// One coordinate-descent pass; returns largest coefficient change.
// active == nullptr sweeps all columns, otherwise only the listed ones.
double cd_sweep(const Eigen::MatrixXd& x, const Eigen::VectorXd& vnorm, double lambda, double n,
                Eigen::VectorXd& beta, Eigen::VectorXd& resid, const std::vector<int>* active) {
  double max_change = 0.0;
  auto update = [&](int j) {
    if (vnorm[j] <= 0.0) return;
    double rho = x.col(j).dot(resid) / n + vnorm[j] * beta[j];
    double bj = soft_threshold(rho, lambda) / vnorm[j];
    double delta = bj - beta[j];
    if (delta != 0.0) {
      resid -= x.col(j) * delta;
      beta[j] = bj;
      double a = std::fabs(delta);
      if (a > max_change) max_change = a;
    }
  };
  if (active) {
    for (int j : *active) update(j);
  } else {
    for (int j = 0; j < x.cols(); ++j) update(j);
  }
  return max_change;
}

// Full CD solve at one lambda: alternate active-set passes with full passes
// until a full pass moves nothing; guarantees the KKT conditions at exit.
void cd_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& vnorm, double lambda, double n,
              Eigen::VectorXd& beta, Eigen::VectorXd& resid, const LassoConfig& cfg) {
  long sweeps = 0;
  while (true) {
    double change = cd_sweep(x, vnorm, lambda, n, beta, resid, nullptr);
    if (++sweeps > cfg.max_iter)
      fail(errc::non_convergence, "coordinate descent exceeded sweep cap at lambda=" +
                                      std::to_string(lambda));
    if (change < cfg.tol) return;

    std::vector<int> active;
    for (int j = 0; j < beta.size(); ++j)
      if (beta[j] != 0.0) active.push_back(j);
    while (true) {
      double ac = cd_sweep(x, vnorm, lambda, n, beta, resid, &active);
      if (++sweeps > cfg.max_iter)
        fail(errc::non_convergence, "coordinate descent exceeded sweep cap at lambda=" +
                                        std::to_string(lambda));
      if (ac < cfg.tol) break;
    }
  }
}

LassoPath fit_gaussian_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& clvar, const LassoConfig& cfg) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double nd = static_cast<double>(n);

  // The unpenalized block enters jointly; projecting y and the penalized
  // columns onto its orthocomplement gives the identical solution for beta.
  Unpenalized unpen(n, clvar);
  Eigen::MatrixXd xt(n, p);
  for (Eigen::Index j = 0; j < p; ++j) xt.col(j) = unpen.project_out(x.col(j));
  Eigen::VectorXd yt = unpen.project_out(y);

  Eigen::VectorXd vnorm(p);
  for (Eigen::Index j = 0; j < p; ++j) vnorm[j] = xt.col(j).squaredNorm() / nd;

  double lambda_max = 0.0;
  for (Eigen::Index j = 0; j < p; ++j)
    lambda_max = std::max(lambda_max, std::fabs(xt.col(j).dot(yt)) / nd);

  LassoPath path;
  if (!(lambda_max > 0.0)) {
    path.lambdas = Eigen::VectorXd::Zero(1);
    if (cfg.retain_coefficients) {
      path.coefs = Eigen::MatrixXd::Zero(p, 1);
      path.intercepts = Eigen::VectorXd::Zero(1);
      path.clvar_coefs = Eigen::MatrixXd::Zero(clvar.cols(), 1);
      Eigen::VectorXd theta = unpen.solve(y);
      path.intercepts[0] = theta[0];
      if (clvar.cols() > 0) path.clvar_coefs.col(0) = theta.tail(clvar.cols());
    }
    return path;
  }

  double ratio = cfg.lambda_min_ratio > 0 ? cfg.lambda_min_ratio : (p > n ? 0.01 : 1e-4);
  Eigen::VectorXd grid = lambda_grid(lambda_max, cfg.n_lambda, ratio);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = yt;
  Eigen::VectorXd resid_prev = yt;
  EntryTracker tracker(static_cast<int>(p));

  std::vector<Eigen::VectorXd> kept_coefs;
  int n_done = 0;
  for (int k = 0; k < grid.size(); ++k) {
    if (k > 0) {
      resid_prev = resid;
      cd_solve(xt, vnorm, grid[k], nd, beta, resid, cfg);
    }
    ++n_done;
    tracker.observe(beta,
                    [&](int j) { return std::fabs(xt.col(j).dot(resid_prev)) / nd; });
    if (cfg.retain_coefficients) kept_coefs.push_back(beta);
    if (cfg.max_entries > 0 && static_cast<int>(tracker.order.size()) >= cfg.max_entries) {
      path.truncated = (k + 1 < grid.size());
      break;
    }
  }

  path.lambdas = grid.head(n_done);
  path.entry_order = std::move(tracker.order);
  if (cfg.retain_coefficients) {
    path.coefs.resize(p, n_done);
    path.intercepts.resize(n_done);
    path.clvar_coefs.resize(clvar.cols(), n_done);
    for (int k = 0; k < n_done; ++k) {
      path.coefs.col(k) = kept_coefs[k];
      Eigen::VectorXd theta = unpen.solve(y - x * kept_coefs[k]);
      path.intercepts[k] = theta[0];
      if (clvar.cols() > 0) path.clvar_coefs.col(k) = theta.tail(clvar.cols());
    }
  }
  return path;
}

inline double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

LassoPath fit_binomial_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& clvar, const LassoConfig& cfg) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index q = clvar.cols();
  const double nd = static_cast<double>(n);
  constexpr double kMinWeight = 1e-9;
  constexpr double kPinned = 1e-10;

  Eigen::MatrixXd u(n, q + 1);
  u.col(0).setOnes();
  if (q > 0) u.rightCols(q) = clvar;

  // Null model (intercept + controls only) fixes lambda_max.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(q + 1);
  theta[0] = std::log(y.mean() / (1.0 - y.mean()));
  Eigen::VectorXd eta = u * theta;
  {
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd prob = eta.unaryExpr([](double e) { return logistic(e); });
      Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).cwiseMax(kMinWeight);
      Eigen::VectorXd z = eta + ((y - prob).array() / w.array()).matrix();
      Eigen::MatrixXd uw = u.array().colwise() * w.array().sqrt();
      Eigen::VectorXd zw = z.array() * w.array().sqrt();
      Eigen::VectorXd next = uw.householderQr().solve(zw);
      double change = (next - theta).cwiseAbs().maxCoeff();
      theta = next;
      eta = u * theta;
      if (change < 1e-10) break;
    }
  }

  Eigen::VectorXd prob = eta.unaryExpr([](double e) { return logistic(e); });
  double lambda_max = 0.0;
  for (Eigen::Index j = 0; j < p; ++j)
    lambda_max = std::max(lambda_max, std::fabs(x.col(j).dot(y - prob)) / nd);

  LassoPath path;
  if (!(lambda_max > 0.0)) {
    path.lambdas = Eigen::VectorXd::Zero(1);
    return path;
  }

  double ratio = cfg.lambda_min_ratio > 0 ? cfg.lambda_min_ratio : (p > n ? 0.01 : 1e-4);
  Eigen::VectorXd grid = lambda_grid(lambda_max, cfg.n_lambda, ratio);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad_resid_prev = y - prob;  // for the entry tie rule
  EntryTracker tracker(static_cast<int>(p));
  std::vector<Eigen::VectorXd> kept_coefs;
  std::vector<Eigen::VectorXd> kept_theta;

  auto pinned_everywhere = [&](const Eigen::VectorXd& pr) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (pr[i] >= kPinned && pr[i] <= 1.0 - kPinned) return false;
    return true;
  };

  int n_done = 1;  // grid[0]: all penalized coefficients zero
  if (cfg.retain_coefficients) {
    kept_coefs.push_back(beta);
    kept_theta.push_back(theta);
  }

  for (int k = 1; k < grid.size(); ++k) {
    Eigen::VectorXd beta_save = beta, theta_save = theta, eta_save = eta;
    double lambda = grid[k];
    bool separated = false;
    long sweeps = 0;

    for (int outer = 0; outer < 100; ++outer) {
      prob = eta.unaryExpr([](double e) { return logistic(e); });
      if (pinned_everywhere(prob)) {
        separated = true;
        break;
      }
      Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).cwiseMax(kMinWeight);
      // Working residual of the quadratic approximation, r = z - eta.
      Eigen::VectorXd r = ((y - prob).array() / w.array()).matrix();

      Eigen::VectorXd vnorm(p);
      for (Eigen::Index j = 0; j < p; ++j)
        vnorm[j] = (x.col(j).array().square() * w.array()).sum() / nd;
      Eigen::MatrixXd uw = u.array().colwise() * w.array().sqrt();
      Eigen::HouseholderQR<Eigen::MatrixXd> uw_qr(uw);

      double outer_change = 0.0;
      auto solve_unpenalized = [&] {
        Eigen::VectorXd rw = r.array() * w.array().sqrt();
        Eigen::VectorXd delta = uw_qr.solve(rw);
        if (delta.cwiseAbs().maxCoeff() > 0) {
          r -= u * delta;
          theta += delta;
          outer_change = std::max(outer_change, delta.cwiseAbs().maxCoeff());
        }
      };

      auto weighted_sweep = [&](const std::vector<int>* active) {
        double max_change = 0.0;
        auto update = [&](int j) {
          if (vnorm[j] <= 0.0) return;
          double rho = (x.col(j).array() * w.array() * r.array()).sum() / nd + vnorm[j] * beta[j];
          double bj = soft_threshold(rho, lambda) / vnorm[j];
          double delta = bj - beta[j];
          if (delta != 0.0) {
            r -= x.col(j) * delta;
            beta[j] = bj;
            max_change = std::max(max_change, std::fabs(delta));
          }
        };
        if (active) {
          for (int j : *active) update(j);
        } else {
          for (int j = 0; j < p; ++j) update(j);
        }
        return max_change;
      };

      solve_unpenalized();
      while (true) {
        double change = weighted_sweep(nullptr);
        solve_unpenalized();
        if (++sweeps > cfg.max_iter)
          fail(errc::non_convergence,
               "penalized IRLS exceeded sweep cap at lambda=" + std::to_string(lambda));
        outer_change = std::max(outer_change, change);
        if (change < cfg.tol) break;
        std::vector<int> active;
        for (int j = 0; j < p; ++j)
          if (beta[j] != 0.0) active.push_back(j);
        while (true) {
          double ac = weighted_sweep(&active);
          if (++sweeps > cfg.max_iter)
            fail(errc::non_convergence,
                 "penalized IRLS exceeded sweep cap at lambda=" + std::to_string(lambda));
          if (ac < cfg.tol) break;
        }
      }

      eta = u * theta + x * beta;
      if (outer_change < cfg.tol) break;
    }

    if (separated) {
      if (cfg.error_on_separation)
        fail(errc::perfect_separation,
             "fitted probabilities pinned at 0/1 for every observation at lambda=" +
                 std::to_string(lambda));
      // Screening needs only the ordered prefix; keep the last stable lambda.
      beta = beta_save;
      theta = theta_save;
      eta = eta_save;
      path.truncated = true;
      break;
    }

    ++n_done;
    tracker.observe(beta, [&](int j) { return std::fabs(x.col(j).dot(grad_resid_prev)) / nd; });
    if (cfg.retain_coefficients) {
      kept_coefs.push_back(beta);
      kept_theta.push_back(theta);
    }
    prob = eta.unaryExpr([](double e) { return logistic(e); });
    grad_resid_prev = y - prob;
    if (cfg.max_entries > 0 && static_cast<int>(tracker.order.size()) >= cfg.max_entries) {
      path.truncated = path.truncated || (k + 1 < grid.size());
      break;
    }
  }

  path.lambdas = grid.head(n_done);
  path.entry_order = std::move(tracker.order);
  if (cfg.retain_coefficients) {
    path.coefs.resize(p, n_done);
    path.intercepts.resize(n_done);
    path.clvar_coefs.resize(q, n_done);
    for (int k = 0; k < n_done; ++k) {
      path.coefs.col(k) = kept_coefs[k];
      path.intercepts[k] = kept_theta[k][0];
      if (q > 0) path.clvar_coefs.col(k) = kept_theta[k].tail(q);
    }
  }
  return path;
}

}  // namespace

LassoPath fit_lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::MatrixXd& clvar, Family family, const LassoConfig& cfg) {
  if (x.rows() != y.size()) fail(errc::dimension_mismatch, "x rows != y length");
  if (clvar.size() > 0 && clvar.rows() != x.rows())
    fail(errc::dimension_mismatch, "clvar rows != x rows");
  if (x.cols() == 0) fail(errc::empty_input, "no penalized columns");
  return family == Family::gaussian ? fit_gaussian_path(x, y, clvar, cfg)
                                    : fit_binomial_path(x, y, clvar, cfg);
}

ScreenedSet screen(const LassoPath& path, int n_full) {
  ScreenedSet s;
  s.target_size = n_full / 6;
  std::size_t take = std::min<std::size_t>(s.target_size, path.entry_order.size());
  s.selected.assign(path.entry_order.begin(), path.entry_order.begin() + take);
  return s;
}

}  // namespace snptree
