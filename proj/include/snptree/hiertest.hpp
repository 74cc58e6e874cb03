#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snptree/dataset.hpp"
#include "snptree/hiertree.hpp"
#include "snptree/meta.hpp"
#include "snptree/multisplit.hpp"

namespace snptree {

// One row of the significant-cluster table.
struct ClusterFinding {
  std::string block;               // empty when the tree has no block level
  std::vector<std::string> group;  // colnames, tree leaf order
  double p_adjusted = 1.0;         // hierarchically adjusted
};

// Depth-proportional multiplicity correction: min(1, p_raw * p_total / |G|).
// The root needs no adjustment; smaller groups pay a proportionally larger
// factor.
double adjust(double p_raw, int group_size, int p_total);

struct TestConfig {
  int B = 50;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  GammaConfig gamma;
  MetaMethod agg = MetaMethod::tippett;
  LassoConfig lasso;
  bool screen_on_half_n = false;
  int threads = 0;  // 0 = resolve from environment / hardware
};

struct TestResult {
  std::vector<ClusterFinding> findings;
  std::vector<std::string> blocks;  // tree block order (for NA rows)

  // Table rows: findings plus one NA row per block without findings.
  struct Row {
    std::string block;                // may be empty
    std::optional<double> p;
    std::vector<std::string> group;   // empty for NA rows
  };
  std::vector<Row> rows() const;
};

// Top-down FWER-controlled traversal: test a node, adjust for depth, take the
// running maximum along the path, and descend only below rejected nodes.
// Emitted findings are the significant nodes with no significant child.
TestResult test_hierarchy(const Dataset& d, const HierTree& tree, const TestConfig& cfg);
TestResult test_hierarchy(const StudyCollection& studies, const HierTree& tree,
                          const TestConfig& cfg);

// Variant over already-screened studies (screening reused across calls).
TestResult test_hierarchy_prepared(const std::vector<const PreparedSplits*>& per_study,
                                   const HierTree& tree, const TestConfig& cfg);

// Human-readable table in the block / p.value / significant.cluster layout;
// clusters longer than n_terms are shortened to "name1, ..., ... [k]".
std::string print_findings(const TestResult& result, int n_terms = 5);

// Machine-readable TSV: one row per finding, cluster as semicolon-joined names.
std::string findings_tsv(const TestResult& result);

}  // namespace snptree
