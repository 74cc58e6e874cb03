// snptree: hierarchical group testing for high-dimensional regression.
//
// Subcommands: cluster (build a variable tree), test (FWER-controlled
// hierarchical testing), r2 (explained variance of a cluster), simulate
// (power / error-rate experiments).
//
// Exit codes: 0 ok, 2 usage, 3 data validation, 4 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snptree/dataset.hpp"
#include "snptree/hiertest.hpp"
#include "snptree/hiertree.hpp"
#include "snptree/meta.hpp"
#include "snptree/multisplit.hpp"
#include "snptree/parallel.hpp"
#include "snptree/rng.hpp"
#include "snptree/simlab.hpp"
#include "snptree/varexpl.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct StudyPaths {
  std::string x, y, clvar;
};

// Manifest: one study per line, "x_path y_path [clvar_path|-]".
std::vector<StudyPaths> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) snptree::fail(snptree::errc::bad_format, "cannot open '" + path + "'");
  std::vector<StudyPaths> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = line.substr(0, line.find('#'));
    std::istringstream fields(stripped);
    StudyPaths sp;
    if (!(fields >> sp.x)) continue;
    if (!(fields >> sp.y))
      snptree::fail(snptree::errc::bad_format,
                    path + ":" + std::to_string(lineno) + ": expected x and y paths");
    fields >> sp.clvar;
    if (sp.clvar == "-") sp.clvar.clear();
    out.push_back(sp);
  }
  if (out.empty())
    snptree::fail(snptree::errc::bad_format, "manifest '" + path + "' lists no studies");
  return out;
}

snptree::Dataset load_validated(const std::string& x_path, const std::string& y_path,
                                const std::string& clvar_path, snptree::Family family,
                                bool drop_degenerate) {
  snptree::Dataset d = snptree::load_dataset(x_path, y_path, clvar_path, family);
  snptree::ValidationReport report;
  d = snptree::validate_columns(d, drop_degenerate, &report);
  for (const auto& name : report.dropped)
    std::cerr << "note: dropped zero-variance column '" << name << "'\n";
  return d;
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path);
  if (!out) snptree::fail(snptree::errc::bad_format, "cannot write '" + out_path + "'");
  out << content;
}

int run(int argc, char** argv) {
  CLI::App app{"hierarchical group testing for high-dimensional regression"};
  app.require_subcommand(1);

  // ---- cluster ----
  auto* cluster = app.add_subcommand("cluster", "build a hierarchical variable tree");
  std::string cl_method = "var";
  std::string cl_x, cl_block, cl_position, cl_out, cl_studies;
  int cl_threads = 0;
  bool cl_drop = false;
  cluster->add_option("--method", cl_method, "var | position")->check(CLI::IsMember({"var", "position"}));
  cluster->add_option("--x", cl_x, "design matrix (method var)");
  cluster->add_option("--studies", cl_studies, "manifest of per-study x/y/clvar paths");
  cluster->add_option("--block", cl_block, "two-column colname,block file");
  cluster->add_option("--position", cl_position, "two-column colname,position file");
  cluster->add_option("--threads", cl_threads, "worker cap (0 = auto)");
  cluster->add_flag("--drop-degenerate", cl_drop, "drop zero-variance columns");
  cluster->add_option("--out", cl_out, "tree file (default: stdout)");

  // ---- test ----
  auto* test = app.add_subcommand("test", "FWER-controlled hierarchical testing");
  std::string t_x, t_y, t_clvar, t_tree, t_studies, t_out;
  std::string t_family = "gaussian", t_agg = "tippett", t_format = "human";
  int t_B = 50, t_threads = 0, t_nterms = 5;
  double t_alpha = 0.05, t_gamma_min = 0.05;
  std::uint64_t t_seed = 0;
  bool t_drop = false;
  test->add_option("--x", t_x, "design matrix");
  test->add_option("--y", t_y, "response file");
  test->add_option("--clvar", t_clvar, "control covariates");
  test->add_option("--studies", t_studies, "manifest of per-study x/y/clvar paths");
  test->add_option("--tree", t_tree, "tree file from `cluster`")->required();
  test->add_option("--family", t_family, "gaussian | binomial")
      ->check(CLI::IsMember({"gaussian", "binomial"}));
  test->add_option("--B", t_B, "number of sample splits");
  test->add_option("--alpha", t_alpha, "significance level");
  test->add_option("--gamma-min", t_gamma_min, "lower quantile bound for aggregation");
  test->add_option("--agg", t_agg, "tippett | stouffer (multi-study only)")
      ->check(CLI::IsMember({"tippett", "stouffer"}));
  test->add_option("--seed", t_seed, "RNG seed")->required();
  test->add_option("--threads", t_threads, "worker cap (0 = auto)");
  test->add_option("--n-terms", t_nterms, "cluster names shown per row");
  test->add_option("--format", t_format, "human | tsv")->check(CLI::IsMember({"human", "tsv"}));
  test->add_flag("--drop-degenerate", t_drop, "drop zero-variance columns");
  test->add_option("--out", t_out, "output file (default: stdout)");

  // ---- r2 ----
  auto* r2 = app.add_subcommand("r2", "explained variance of a cluster");
  std::string r_x, r_y, r_clvar, r_cluster;
  std::string r_family = "gaussian";
  int r_B = 50, r_threads = 0;
  std::uint64_t r_seed = 0;
  bool r_drop = false, r_skip_empty = false;
  r2->add_option("--x", r_x, "design matrix")->required();
  r2->add_option("--y", r_y, "response file")->required();
  r2->add_option("--clvar", r_clvar, "control covariates");
  r2->add_option("--family", r_family, "gaussian | binomial")
      ->check(CLI::IsMember({"gaussian", "binomial"}));
  r2->add_option("--cluster", r_cluster, "semicolon-joined column names (default: whole dataset)");
  r2->add_option("--B", r_B, "number of sample splits");
  r2->add_option("--seed", r_seed, "RNG seed")->required();
  r2->add_option("--threads", r_threads, "worker cap (0 = auto)");
  r2->add_flag("--skip-empty", r_skip_empty, "average only over splits that cover the cluster");
  r2->add_flag("--drop-degenerate", r_drop, "drop zero-variance columns");

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "run a power / FWER experiment");
  std::string s_scenario, s_out;
  int s_threads = 0;
  std::optional<std::uint64_t> s_seed;
  simulate->add_option("--scenario", s_scenario, "key-value scenario file")->required();
  simulate->add_option("--seed", s_seed, "override the scenario seed");
  simulate->add_option("--threads", s_threads, "worker cap (0 = auto)");
  simulate->add_option("--out", s_out, "report file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (cluster->parsed()) {
    snptree::HierTree tree;
    std::optional<snptree::BlockMap> block;
    if (!cl_block.empty()) block = snptree::load_blocks(cl_block);

    // response values play no role in clustering
    auto x_only_dataset = [&](const std::string& path) {
      snptree::NamedMatrix xm = snptree::load_matrix(path);
      const Eigen::Index n_rows = xm.values.rows();
      snptree::Dataset d =
          snptree::make_dataset(std::move(xm.values), Eigen::VectorXd::Zero(n_rows),
                                Eigen::MatrixXd(0, 0), std::move(xm.colnames),
                                snptree::Family::gaussian);
      snptree::ValidationReport report;
      d = snptree::validate_columns(d, cl_drop, &report);
      for (const auto& name : report.dropped)
        std::cerr << "note: dropped zero-variance column '" << name << "'\n";
      return d;
    };

    if (cl_method == "position") {
      if (cl_position.empty()) {
        std::cerr << "error: --method position requires --position\n";
        return kExitUsage;
      }
      tree = snptree::cluster_position(snptree::load_positions(cl_position),
                                       block ? &*block : nullptr);
    } else {
      if (!cl_studies.empty()) {
        std::vector<snptree::Dataset> studies;
        for (const auto& sp : read_manifest(cl_studies)) studies.push_back(x_only_dataset(sp.x));
        tree = snptree::cluster_var(snptree::make_study_collection(std::move(studies)),
                                    block ? &*block : nullptr);
      } else {
        if (cl_x.empty()) {
          std::cerr << "error: --method var requires --x (or --studies)\n";
          return kExitUsage;
        }
        tree = snptree::cluster_var(x_only_dataset(cl_x), block ? &*block : nullptr);
      }
    }
    for (const auto& w : tree.warnings) std::cerr << "note: " << w << '\n';
    write_output(cl_out, snptree::serialize_tree(tree));
    return 0;
  }

  if (test->parsed()) {
    snptree::HierTree tree = snptree::load_tree(t_tree);
    snptree::TestConfig cfg;
    cfg.B = t_B;
    cfg.seed = t_seed;
    cfg.alpha = t_alpha;
    cfg.gamma.gamma_min = t_gamma_min;
    cfg.agg = snptree::meta_method_from_string(t_agg);
    cfg.threads = t_threads;
    auto family = snptree::family_from_string(t_family);

    snptree::TestResult result;
    if (!t_studies.empty()) {
      std::vector<snptree::Dataset> studies;
      for (const auto& sp : read_manifest(t_studies))
        studies.push_back(load_validated(sp.x, sp.y, sp.clvar, family, t_drop));
      result = snptree::test_hierarchy(snptree::make_study_collection(std::move(studies)), tree, cfg);
    } else {
      if (t_x.empty() || t_y.empty()) {
        std::cerr << "error: test requires --x and --y (or --studies)\n";
        return kExitUsage;
      }
      snptree::Dataset d = load_validated(t_x, t_y, t_clvar, family, t_drop);
      result = snptree::test_hierarchy(d, tree, cfg);
    }
    write_output(t_out, t_format == "tsv" ? snptree::findings_tsv(result)
                                          : snptree::print_findings(result, t_nterms));
    return 0;
  }

  if (r2->parsed()) {
    auto family = snptree::family_from_string(r_family);
    snptree::Dataset d = load_validated(r_x, r_y, r_clvar, family, r_drop);
    std::optional<std::vector<std::string>> cluster;
    if (!r_cluster.empty()) {
      cluster.emplace();
      std::stringstream ss(r_cluster);
      std::string tok;
      while (std::getline(ss, tok, ';'))
        if (!tok.empty()) cluster->push_back(tok);
    }
    snptree::SplitPlan plan = snptree::make_splits(d.n(), r_B, r_seed);
    snptree::PrepareConfig prep_cfg;
    prep_cfg.threads = r_threads;
    snptree::R2Config r2_cfg;
    r2_cfg.skip_empty = r_skip_empty;
    double value = snptree::compute_r2(d, cluster ? &*cluster : nullptr, plan, prep_cfg, r2_cfg);
    std::printf("%.8g\n", value);
    return 0;
  }

  if (simulate->parsed()) {
    snptree::SimScenario scenario = snptree::load_scenario(s_scenario);
    if (s_seed) scenario.seed = *s_seed;
    snptree::PowerReport report = snptree::run_experiment(scenario, s_threads);
    write_output(s_out, snptree::report_csv(report));
    return 0;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const snptree::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return snptree::is_data_error(e.code()) ? kExitData : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
