#include "snptree/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "snptree/meta.hpp"
#include "snptree/parallel.hpp"
#include "snptree/rng.hpp"

namespace snptree {

namespace {
constexpr double kThreshold = 0.75;  // latent cut points at +-0.75 sd

// stream ids for substream derivation
enum : std::uint64_t { kDesign = 1, kFix = 2, kActive = 3, kResponse = 4, kSplit = 5 };
}  // namespace

CorrelationSpec correlation_from_string(const std::string& s) {
  CorrelationSpec c;
  if (s == "independent") {
    c.kind = CorrelationSpec::Kind::independent;
    return c;
  }
  auto parse_tail = [&](const std::string& tail, int parts) {
    std::vector<double> vals;
    std::stringstream ss(tail);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        fail(errc::bad_format, "malformed correlation spec '" + s + "'");
      }
    }
    if (static_cast<int>(vals.size()) != parts)
      fail(errc::bad_format, "malformed correlation spec '" + s + "'");
    return vals;
  };
  if (s.rfind("ar1:", 0) == 0) {
    c.kind = CorrelationSpec::Kind::ar1;
    c.rho = parse_tail(s.substr(4), 1)[0];
  } else if (s.rfind("block:", 0) == 0) {
    c.kind = CorrelationSpec::Kind::block;
    auto vals = parse_tail(s.substr(6), 2);
    c.rho = vals[0];
    c.block_size = static_cast<int>(vals[1]);
    if (c.block_size < 1) fail(errc::bad_format, "block size must be positive in '" + s + "'");
  } else {
    fail(errc::bad_format, "unknown correlation spec '" + s + "'");
  }
  if (c.rho < 0.0 || c.rho >= 1.0)
    fail(errc::bad_format, "correlation rho must lie in [0,1) in '" + s + "'");
  return c;
}

std::string to_string(const CorrelationSpec& c) {
  switch (c.kind) {
    case CorrelationSpec::Kind::independent:
      return "independent";
    case CorrelationSpec::Kind::ar1:
      return "ar1:" + std::to_string(c.rho);
    default:
      return "block:" + std::to_string(c.rho) + ":" + std::to_string(c.block_size);
  }
}

std::string to_string(SimMethod m) {
  switch (m) {
    case SimMethod::tippett:
      return "tippett";
    case SimMethod::stouffer:
      return "stouffer";
    default:
      return "pooling";
  }
}

Eigen::MatrixXd gen_design(int n, int p, const CorrelationSpec& correlation, std::uint64_t seed) {
  Eigen::MatrixXd x(n, p);
  std::normal_distribution<double> gauss;

  auto discretize = [](double z) { return z < -kThreshold ? 0.0 : (z <= kThreshold ? 1.0 : 2.0); };

  // rows are independent; each row owns a substream
  for (int i = 0; i < n; ++i) {
    auto rng = substream(seed, kDesign, static_cast<std::uint64_t>(i));
    switch (correlation.kind) {
      case CorrelationSpec::Kind::independent: {
        for (int j = 0; j < p; ++j) x(i, j) = discretize(gauss(rng));
        break;
      }
      case CorrelationSpec::Kind::ar1: {
        double prev = gauss(rng);
        x(i, 0) = discretize(prev);
        double scale = std::sqrt(1.0 - correlation.rho * correlation.rho);
        for (int j = 1; j < p; ++j) {
          prev = correlation.rho * prev + scale * gauss(rng);
          x(i, j) = discretize(prev);
        }
        break;
      }
      case CorrelationSpec::Kind::block: {
        double shared = 0.0;
        double w_shared = std::sqrt(correlation.rho);
        double w_own = std::sqrt(1.0 - correlation.rho);
        for (int j = 0; j < p; ++j) {
          if (j % correlation.block_size == 0) shared = gauss(rng);
          x(i, j) = discretize(w_shared * shared + w_own * gauss(rng));
        }
        break;
      }
    }
  }

  // Re-draw constant or duplicated columns so downstream fits stay sane.
  std::unordered_map<std::size_t, std::vector<int>> column_hash;
  auto hash_col = [&](int j) {
    std::size_t h = 1469598103934665603ull;
    for (int i = 0; i < n; ++i) {
      h ^= static_cast<std::size_t>(x(i, j));
      h *= 1099511628211ull;
    }
    return h;
  };
  auto equal_cols = [&](int a, int b) { return (x.col(a).array() == x.col(b).array()).all(); };
  auto constant_col = [&](int j) { return (x.col(j).array() == x(0, j)).all(); };

  for (int j = 0; j < p; ++j) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      bool bad = constant_col(j);
      std::size_t h = 0;
      if (!bad) {
        h = hash_col(j);
        for (int other : column_hash[h])
          if (equal_cols(other, j)) {
            bad = true;
            break;
          }
      }
      if (!bad) {
        column_hash[h].push_back(j);
        break;
      }
      auto rng = substream(seed, kFix, static_cast<std::uint64_t>(j), attempt);
      for (int i = 0; i < n; ++i) x(i, j) = discretize(gauss(rng));
    }
  }
  return x;
}

Eigen::VectorXd gen_response(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, double sigma,
                             Family family, std::uint64_t seed) {
  if (beta.size() != x.cols()) fail(errc::dimension_mismatch, "beta length != p");
  const int n = static_cast<int>(x.rows());
  Eigen::VectorXd linear = x * beta;
  Eigen::VectorXd y(n);
  auto rng = substream(seed, kResponse);
  if (family == Family::gaussian) {
    std::normal_distribution<double> gauss;
    for (int i = 0; i < n; ++i) y[i] = linear[i] + sigma * gauss(rng);
  } else {
    std::uniform_real_distribution<double> unif;
    for (int i = 0; i < n; ++i) y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-linear[i])) ? 1.0 : 0.0;
  }
  return y;
}

double adaptive_power(const std::vector<ClusterFinding>& findings,
                      const std::vector<std::string>& active_names) {
  if (active_names.empty()) return 0.0;
  std::unordered_set<std::string> active(active_names.begin(), active_names.end());
  double sum = 0.0;
  for (const auto& f : findings) {
    bool is_true = false;
    for (const auto& name : f.group)
      if (active.count(name)) {
        is_true = true;
        break;
      }
    if (is_true && !f.group.empty()) sum += 1.0 / static_cast<double>(f.group.size());
  }
  return sum / static_cast<double>(active.size());
}

namespace {

std::vector<std::string> default_colnames(int p) {
  std::vector<std::string> names(p);
  for (int j = 0; j < p; ++j) names[j] = "SNP." + std::to_string(j + 1);
  return names;
}

template <typename T>
std::vector<T> parse_list(const std::string& value, T (*convert)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t b = tok.find_first_not_of(" \t");
    std::size_t e = tok.find_last_not_of(" \t");
    out.push_back(convert(tok.substr(b, e - b + 1)));
  }
  return out;
}

}  // namespace

SimScenario parse_scenario(const std::string& text) {
  SimScenario sc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool n_set = false;

  auto to_int = +[](const std::string& s) { return std::stoi(s); };
  auto to_double = +[](const std::string& s) { return std::stod(s); };

  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = line.substr(0, line.find('#'));
    std::size_t b = stripped.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(errc::bad_format, "scenario line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      std::size_t x = s.find_first_not_of(" \t\r");
      if (x == std::string::npos) return std::string();
      std::size_t y = s.find_last_not_of(" \t\r");
      return s.substr(x, y - x + 1);
    };
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      fail(errc::bad_format, "scenario line " + std::to_string(lineno) + ": empty key or value");

    try {
      if (key == "m")
        sc.m = std::stoi(value);
      else if (key == "n") {
        sc.n = parse_list<int>(value, to_int);
        n_set = true;
      } else if (key == "p")
        sc.p = std::stoi(value);
      else if (key == "s0")
        sc.s0 = std::stoi(value);
      else if (key == "beta")
        sc.beta = parse_list<double>(value, to_double);
      else if (key == "sigma")
        sc.sigma = parse_list<double>(value, to_double);
      else if (key == "family")
        sc.family = family_from_string(value);
      else if (key == "correlation")
        sc.correlation = correlation_from_string(value);
      else if (key == "seed")
        sc.seed = std::stoull(value);
      else if (key == "replicates")
        sc.replicates = std::stoi(value);
      else if (key == "B")
        sc.B = std::stoi(value);
      else if (key == "alpha")
        sc.alpha = std::stod(value);
      else if (key == "gamma_min")
        sc.gamma_min = std::stod(value);
      else if (key == "tree") {
        if (value == "var")
          sc.tree = SimScenario::Tree::var;
        else if (value == "position")
          sc.tree = SimScenario::Tree::position;
        else
          fail(errc::bad_format, "unknown tree kind '" + value + "'");
      } else if (key == "methods") {
        sc.methods.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          std::size_t x = tok.find_first_not_of(" \t");
          std::size_t y = tok.find_last_not_of(" \t");
          std::string name = tok.substr(x, y - x + 1);
          if (name == "tippett")
            sc.methods.push_back(SimMethod::tippett);
          else if (name == "stouffer")
            sc.methods.push_back(SimMethod::stouffer);
          else if (name == "pooling")
            sc.methods.push_back(SimMethod::pooling);
          else
            fail(errc::bad_format, "unknown method '" + name + "'");
        }
      } else {
        fail(errc::bad_format, "scenario line " + std::to_string(lineno) + ": unknown key '" +
                                   key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(errc::bad_format, "scenario line " + std::to_string(lineno) + ": malformed value '" +
                                 value + "'");
    }
  }

  // broadcast single values across studies
  if (!n_set) fail(errc::bad_format, "scenario is missing n");
  if (sc.p <= 0) fail(errc::bad_format, "scenario is missing p");
  if (sc.n.size() == 1 && sc.m > 1) sc.n.assign(sc.m, sc.n[0]);
  if (sc.beta.empty()) sc.beta.assign(sc.m, 1.0);
  if (sc.beta.size() == 1 && sc.m > 1) sc.beta.assign(sc.m, sc.beta[0]);
  if (sc.sigma.empty()) sc.sigma.assign(sc.m, 1.0);
  if (sc.sigma.size() == 1 && sc.m > 1) sc.sigma.assign(sc.m, sc.sigma[0]);
  if (static_cast<int>(sc.n.size()) != sc.m || static_cast<int>(sc.beta.size()) != sc.m ||
      static_cast<int>(sc.sigma.size()) != sc.m)
    fail(errc::bad_format, "n, beta, sigma must have one value or one per study");
  if (sc.s0 > sc.p) fail(errc::bad_format, "s0 cannot exceed p");
  for (double s : sc.sigma)
    if (!(s > 0.0)) fail(errc::bad_format, "sigma must be positive");
  if (sc.methods.empty()) fail(errc::bad_format, "scenario needs at least one method");
  return sc;
}

SimScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_format, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

PowerReport run_experiment(const SimScenario& scenario, int threads) {
  PowerReport report;
  report.scenario = scenario;

  const int m = scenario.m;
  const auto colnames = default_colnames(scenario.p);

  // designs are fixed across replicates
  std::vector<Eigen::MatrixXd> designs(m);
  for (int l = 0; l < m; ++l)
    designs[l] = gen_design(scenario.n[l], scenario.p, scenario.correlation,
                            substream(scenario.seed, kDesign, l)());

  // one joint tree for all methods (identical panels: stacking == pairwise)
  HierTree tree;
  if (scenario.tree == SimScenario::Tree::var) {
    // only x matters for clustering; the response slot is a placeholder
    std::vector<Dataset> for_tree;
    for (int l = 0; l < m; ++l)
      for_tree.push_back(make_dataset(designs[l], Eigen::VectorXd::Zero(scenario.n[l]),
                                      Eigen::MatrixXd(0, 0), colnames, Family::gaussian));
    tree = cluster_var(make_study_collection(std::move(for_tree)));
  } else {
    PositionMap pm;
    for (int j = 0; j < scenario.p; ++j) pm.entries.push_back({colnames[j], j + 1});
    tree = cluster_position(pm);
  }

  const bool want_pooling = std::count(scenario.methods.begin(), scenario.methods.end(),
                                       SimMethod::pooling) > 0;
  const bool want_tippett = std::count(scenario.methods.begin(), scenario.methods.end(),
                                       SimMethod::tippett) > 0;
  const bool want_stouffer = std::count(scenario.methods.begin(), scenario.methods.end(),
                                        SimMethod::stouffer) > 0;

  struct RepOut {
    std::vector<ReplicateLog> rows;
  };
  std::vector<RepOut> outs(scenario.replicates);

  parallel_for(static_cast<std::size_t>(scenario.replicates), threads, [&](std::size_t r) {
    // fresh active set per replicate
    auto rng = substream(scenario.seed, kActive, r);
    std::vector<int> cols(scenario.p);
    std::iota(cols.begin(), cols.end(), 0);
    for (int i = 0; i < scenario.s0; ++i) {
      std::uniform_int_distribution<int> pick(i, scenario.p - 1);
      std::swap(cols[i], cols[pick(rng)]);
    }
    std::vector<int> s0_cols(cols.begin(), cols.begin() + scenario.s0);
    std::vector<std::string> active_names;
    for (int c : s0_cols) active_names.push_back(colnames[c]);

    std::vector<Dataset> studies;
    for (int l = 0; l < m; ++l) {
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(scenario.p);
      for (int c : s0_cols) beta[c] = scenario.beta[l];
      Eigen::VectorXd y = gen_response(designs[l], beta, scenario.sigma[l], scenario.family,
                                       substream(scenario.seed, kResponse, r, l)());
      studies.push_back(make_dataset(designs[l], y, Eigen::MatrixXd(0, 0), colnames,
                                     scenario.family));
    }

    TestConfig cfg;
    cfg.B = scenario.B;
    cfg.alpha = scenario.alpha;
    cfg.gamma.gamma_min = scenario.gamma_min;
    cfg.threads = 1;  // replicates already run in parallel

    auto log_result = [&](SimMethod method, const TestResult& res) {
      ReplicateLog row;
      row.replicate = static_cast<int>(r);
      row.method = method;
      row.power = adaptive_power(res.findings, active_names);
      row.findings = static_cast<int>(res.findings.size());
      row.false_detection = false;
      std::unordered_set<std::string> active(active_names.begin(), active_names.end());
      for (const auto& f : res.findings) {
        bool any_active = false;
        for (const auto& name : f.group)
          if (active.count(name)) {
            any_active = true;
            break;
          }
        if (!any_active) row.false_detection = true;
      }
      outs[r].rows.push_back(row);
    };

    if (want_tippett || want_stouffer) {
      // screening is shared between the two aggregation rules
      std::vector<PreparedSplits> preps;
      preps.reserve(m);
      PrepareConfig prep_cfg;
      prep_cfg.threads = 1;
      for (int l = 0; l < m; ++l) {
        SplitPlan plan = make_splits(studies[l].n(), scenario.B,
                                     substream(scenario.seed, kSplit, r, l)());
        preps.emplace_back(studies[l], plan, prep_cfg);
      }
      std::vector<const PreparedSplits*> ptrs;
      for (const auto& p : preps) ptrs.push_back(&p);
      if (want_tippett) {
        cfg.agg = MetaMethod::tippett;
        log_result(SimMethod::tippett, test_hierarchy_prepared(ptrs, tree, cfg));
      }
      if (want_stouffer) {
        cfg.agg = MetaMethod::stouffer;
        log_result(SimMethod::stouffer, test_hierarchy_prepared(ptrs, tree, cfg));
      }
    }

    if (want_pooling) {
      Dataset pooled = pool_studies(make_study_collection(std::move(studies)));
      SplitPlan plan = make_splits(pooled.n(), scenario.B,
                                   substream(scenario.seed, kSplit, r, 0xB00ULL)());
      PrepareConfig prep_cfg;
      prep_cfg.threads = 1;
      PreparedSplits prep(pooled, plan, prep_cfg);
      log_result(SimMethod::pooling, test_hierarchy_prepared({&prep}, tree, cfg));
    }
  });

  // ordered reduction
  for (const auto& out : outs)
    for (const auto& row : out.rows) report.log.push_back(row);

  for (SimMethod method : scenario.methods) {
    MethodReport mr;
    mr.method = method;
    int count = 0, false_count = 0;
    double power_sum = 0.0;
    for (const auto& row : report.log) {
      if (row.method != method) continue;
      ++count;
      power_sum += row.power;
      if (row.false_detection) ++false_count;
    }
    if (count > 0) {
      mr.adaptive_power = power_sum / count;
      mr.fwer = static_cast<double>(false_count) / count;
      mr.fwer_se = std::sqrt(mr.fwer * (1.0 - mr.fwer) / count);
    }
    report.methods.push_back(mr);
  }
  return report;
}

std::string report_csv(const PowerReport& report) {
  std::ostringstream out;
  out << "method,adaptive_power,fwer,fwer_2se\n";
  out.precision(10);
  for (const auto& mr : report.methods)
    out << to_string(mr.method) << ',' << mr.adaptive_power << ',' << mr.fwer << ','
        << 2.0 * mr.fwer_se << '\n';
  out << "\nreplicate,method,power,findings,false_detection\n";
  for (const auto& row : report.log)
    out << row.replicate << ',' << to_string(row.method) << ',' << row.power << ','
        << row.findings << ',' << (row.false_detection ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace snptree
