"""Hierarchical group testing for high-dimensional regression."""

from snptree._core import (  # noqa: F401
    Dataset,
    HierTree,
    SnptreeError,
    TestResult,
    adjust,
    aggregate_pvalues,
    cluster_position,
    cluster_var,
    compute_r2,
    fit_lasso_path,
    gen_design,
    load_dataset,
    load_tree,
    parse_tree,
    run_scenario,
    stouffer,
    test_hierarchy,
    tippett,
    validate_columns,
)

__all__ = [
    "Dataset",
    "HierTree",
    "SnptreeError",
    "TestResult",
    "adjust",
    "aggregate_pvalues",
    "cluster_position",
    "cluster_var",
    "compute_r2",
    "fit_lasso_path",
    "gen_design",
    "load_dataset",
    "load_tree",
    "parse_tree",
    "run_scenario",
    "stouffer",
    "test_hierarchy",
    "tippett",
    "validate_columns",
]
