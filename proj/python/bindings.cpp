#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "snptree/dataset.hpp"
#include "snptree/hiertest.hpp"
#include "snptree/hiertree.hpp"
#include "snptree/lasso.hpp"
#include "snptree/meta.hpp"
#include "snptree/multisplit.hpp"
#include "snptree/simlab.hpp"
#include "snptree/varexpl.hpp"

namespace py = pybind11;
using namespace snptree;

namespace {

Dataset dataset_from_arrays(Eigen::MatrixXd x, Eigen::VectorXd y,
                            std::optional<Eigen::MatrixXd> clvar,
                            std::vector<std::string> colnames, const std::string& family) {
  return make_dataset(std::move(x), std::move(y),
                      clvar ? std::move(*clvar) : Eigen::MatrixXd(0, 0), std::move(colnames),
                      family_from_string(family));
}

BlockMap block_map_from_pairs(const std::vector<std::pair<std::string, std::string>>& entries) {
  BlockMap bm;
  for (const auto& [name, label] : entries) bm.entries.push_back({name, label});
  bm.index();
  return bm;
}

PositionMap position_map_from_pairs(
    const std::vector<std::pair<std::string, long long>>& entries) {
  PositionMap pm;
  for (const auto& [name, pos] : entries) pm.entries.push_back({name, pos});
  return pm;
}

TestConfig make_test_config(int B, std::uint64_t seed, double alpha, double gamma_min,
                            const std::string& agg, int threads) {
  TestConfig cfg;
  cfg.B = B;
  cfg.seed = seed;
  cfg.alpha = alpha;
  cfg.gamma.gamma_min = gamma_min;
  cfg.agg = meta_method_from_string(agg);
  cfg.threads = threads;
  return cfg;
}

py::list result_rows(const TestResult& result) {
  py::list rows;
  for (const auto& row : result.rows()) {
    py::dict r;
    r["block"] = row.block.empty() ? py::object(py::none()) : py::object(py::str(row.block));
    r["p_value"] = row.p ? py::object(py::float_(*row.p)) : py::object(py::none());
    r["cluster"] = row.group;
    rows.append(r);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "hierarchical group testing for high-dimensional regression";

  py::register_exception<Error>(m, "SnptreeError");

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_arrays), py::arg("x"), py::arg("y"),
           py::arg("clvar") = std::nullopt, py::arg("colnames") = std::vector<std::string>{},
           py::arg("family") = "gaussian")
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("p", &Dataset::p)
      .def_readonly("colnames", &Dataset::colnames)
      .def_property_readonly("x", [](const Dataset& d) { return d.x; })
      .def_property_readonly("y", [](const Dataset& d) { return d.y; });

  m.def("load_dataset", &load_dataset, py::arg("x_path"), py::arg("y_path"),
        py::arg("clvar_path") = "", py::arg("family") = "gaussian");
  m.def(
      "validate_columns",
      [](const Dataset& d, bool drop_degenerate) {
        ValidationReport report;
        Dataset out = validate_columns(d, drop_degenerate, &report);
        return py::make_tuple(out, report.dropped);
      },
      py::arg("dataset"), py::arg("drop_degenerate") = false);

  py::class_<HierTree>(m, "HierTree")
      .def_property_readonly("n_leaves", &HierTree::n_leaves)
      .def_readonly("warnings", &HierTree::warnings)
      .def("serialize", &serialize_tree)
      .def("save", &save_tree, py::arg("path"));

  m.def(
      "cluster_var",
      [](const std::vector<Dataset>& studies,
         std::optional<std::vector<std::pair<std::string, std::string>>> block) {
        std::optional<BlockMap> bm;
        if (block) bm = block_map_from_pairs(*block);
        if (studies.size() == 1) return cluster_var(studies[0], bm ? &*bm : nullptr);
        return cluster_var(make_study_collection(studies), bm ? &*bm : nullptr);
      },
      py::arg("studies"), py::arg("block") = std::nullopt);
  m.def(
      "cluster_position",
      [](const std::vector<std::pair<std::string, long long>>& positions,
         std::optional<std::vector<std::pair<std::string, std::string>>> block) {
        std::optional<BlockMap> bm;
        if (block) bm = block_map_from_pairs(*block);
        return cluster_position(position_map_from_pairs(positions), bm ? &*bm : nullptr);
      },
      py::arg("positions"), py::arg("block") = std::nullopt);
  m.def("load_tree", &load_tree, py::arg("path"));
  m.def("parse_tree", &parse_tree, py::arg("text"));

  py::class_<TestResult>(m, "TestResult")
      .def_property_readonly("rows", &result_rows)
      .def("print", &print_findings, py::arg("n_terms") = 5)
      .def("tsv", &findings_tsv);

  m.def(
      "test_hierarchy",
      [](const std::vector<Dataset>& studies, const HierTree& tree, int B, std::uint64_t seed,
         double alpha, double gamma_min, const std::string& agg, int threads) {
        TestConfig cfg = make_test_config(B, seed, alpha, gamma_min, agg, threads);
        if (studies.size() == 1) return test_hierarchy(studies[0], tree, cfg);
        return test_hierarchy(make_study_collection(studies), tree, cfg);
      },
      py::arg("studies"), py::arg("tree"), py::arg("B") = 50, py::arg("seed") = 0,
      py::arg("alpha") = 0.05, py::arg("gamma_min") = 0.05, py::arg("agg") = "tippett",
      py::arg("threads") = 0);

  m.def(
      "compute_r2",
      [](const Dataset& d, std::optional<std::vector<std::string>> cluster, int B,
         std::uint64_t seed, int threads, bool skip_empty) {
        SplitPlan plan = make_splits(d.n(), B, seed);
        PrepareConfig prep_cfg;
        prep_cfg.threads = threads;
        R2Config cfg;
        cfg.skip_empty = skip_empty;
        return compute_r2(d, cluster ? &*cluster : nullptr, plan, prep_cfg, cfg);
      },
      py::arg("dataset"), py::arg("cluster") = std::nullopt, py::arg("B") = 50,
      py::arg("seed") = 0, py::arg("threads") = 0, py::arg("skip_empty") = false);

  m.def("adjust", &adjust, py::arg("p_raw"), py::arg("group_size"), py::arg("p_total"));
  m.def(
      "aggregate_pvalues",
      [](const std::vector<double>& p, double gamma_min) {
        GammaConfig cfg;
        cfg.gamma_min = gamma_min;
        return aggregate_pvalues(p, cfg);
      },
      py::arg("p_splits"), py::arg("gamma_min") = 0.05);
  m.def("tippett", &tippett, py::arg("p"));
  m.def("stouffer", &stouffer, py::arg("p"), py::arg("n_per_study"));

  m.def(
      "fit_lasso_path",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
         std::optional<Eigen::MatrixXd> clvar, const std::string& family, int n_lambda,
         double lambda_min_ratio) {
        LassoConfig cfg;
        cfg.n_lambda = n_lambda;
        cfg.lambda_min_ratio = lambda_min_ratio;
        cfg.retain_coefficients = true;
        LassoPath path = fit_lasso_path(x, y, clvar ? *clvar : Eigen::MatrixXd(0, 0),
                                        family_from_string(family), cfg);
        py::dict out;
        out["lambdas"] = path.lambdas;
        out["entry_order"] = path.entry_order;
        out["coefs"] = path.coefs;
        out["intercepts"] = path.intercepts;
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("clvar") = std::nullopt,
      py::arg("family") = "gaussian", py::arg("n_lambda") = 100,
      py::arg("lambda_min_ratio") = 0.0);

  m.def("gen_design", &gen_design, py::arg("n"), py::arg("p"),
        py::arg("correlation") = CorrelationSpec{}, py::arg("seed") = 1);
  m.def("correlation_spec", &correlation_from_string, py::arg("spec"));
  py::class_<CorrelationSpec>(m, "CorrelationSpec");
  m.def(
      "run_scenario",
      [](const std::string& path, int threads, std::optional<std::uint64_t> seed) {
        SimScenario sc = load_scenario(path);
        if (seed) sc.seed = *seed;
        PowerReport report = run_experiment(sc, threads);
        py::list rows;
        for (const auto& mr : report.methods) {
          py::dict r;
          r["method"] = to_string(mr.method);
          r["adaptive_power"] = mr.adaptive_power;
          r["fwer"] = mr.fwer;
          r["fwer_2se"] = 2.0 * mr.fwer_se;
          rows.append(r);
        }
        return rows;
      },
      py::arg("path"), py::arg("threads") = 0, py::arg("seed") = std::nullopt);

  m.attr("__version__") = "0.1.0";
}
