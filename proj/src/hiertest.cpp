#include "snptree/hiertest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "snptree/parallel.hpp"
#include "snptree/rng.hpp"

namespace snptree {

double adjust(double p_raw, int group_size, int p_total) {
  if (group_size < 1 || group_size > p_total)
    fail(errc::dimension_mismatch, "group size " + std::to_string(group_size) +
                                       " outside [1, " + std::to_string(p_total) + "]");
  return std::min(1.0, p_raw * (static_cast<double>(p_total) / group_size));
}

namespace {

void check_tree_matches(const HierTree& tree, const std::vector<std::string>& columns) {
  std::unordered_set<std::string> known(columns.begin(), columns.end());
  const auto& root_group = tree.root().group;
  for (const auto& name : root_group) {
    if (!known.count(name))
      fail(errc::tree_dataset_mismatch, "tree column '" + name + "' not present in the data");
  }
  if (root_group.size() != known.size())
    fail(errc::tree_dataset_mismatch,
         "tree covers " + std::to_string(root_group.size()) + " columns but the data have " +
             std::to_string(known.size()));
}

struct Traversal {
  const std::vector<const PreparedSplits*>& studies;
  const HierTree& tree;
  const TestConfig& cfg;
  int p_total;
  std::vector<double> hier_adjusted;  // per node, only meaningful when visited
  std::vector<char> significant;
  std::vector<char> visited;

  Traversal(const std::vector<const PreparedSplits*>& st, const HierTree& t, const TestConfig& c)
      : studies(st), tree(t), cfg(c), p_total(static_cast<int>(t.root().group.size())),
        hier_adjusted(t.nodes.size(), 1.0), significant(t.nodes.size(), 0),
        visited(t.nodes.size(), 0) {}

  // Sorted per-study x-column indices of a node's group (columns a study does
  // not measure are skipped).
  std::vector<std::vector<int>> per_study_group(int node) const {
    const int m = static_cast<int>(studies.size());
    std::vector<std::vector<int>> out(m);
    for (int l = 0; l < m; ++l) {
      const Dataset& d = studies[l]->dataset();
      auto& g = out[l];
      g.reserve(tree.nodes[node].group.size());
      for (const auto& name : tree.nodes[node].group) {
        int idx = d.col_index(name);
        if (idx >= 0) g.push_back(idx);
      }
      std::sort(g.begin(), g.end());
    }
    return out;
  }

  double raw_pvalue_from(const std::vector<std::vector<double>>& per_study_p) const {
    const int m = static_cast<int>(studies.size());
    std::vector<double> p(m, 1.0);
    std::vector<int> sizes(m);
    for (int l = 0; l < m; ++l) {
      sizes[l] = studies[l]->n_full();
      if (!per_study_p[l].empty()) p[l] = aggregate_pvalues(per_study_p[l], cfg.gamma);
    }
    if (m == 1) return p[0];
    return combine(p, sizes, cfg.agg);
  }

  void run() {
    const int m = static_cast<int>(studies.size());
    std::vector<int> frontier{0};
    while (!frontier.empty()) {
      // flatten (node, study, split) tasks for this level
      struct Task {
        int node_pos, study, split;
      };
      std::vector<std::vector<std::vector<int>>> groups(frontier.size());
      std::vector<Task> tasks;
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        groups[i] = per_study_group(frontier[i]);
        for (int l = 0; l < m; ++l) {
          if (groups[i][l].empty()) continue;
          for (int b = 0; b < studies[l]->B(); ++b)
            tasks.push_back({static_cast<int>(i), l, b});
        }
      }

      std::vector<std::vector<std::vector<double>>> pvals(frontier.size());
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        pvals[i].resize(m);
        for (int l = 0; l < m; ++l)
          if (!groups[i][l].empty()) pvals[i][l].resize(studies[l]->B());
      }

      parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
        const Task& task = tasks[t];
        pvals[task.node_pos][task.study][task.split] =
            studies[task.study]->split_fit(task.split).group_pvalue(groups[task.node_pos][task.study]);
      });

      std::vector<int> next;
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        int node = frontier[i];
        double raw = raw_pvalue_from(pvals[i]);
        double adj = adjust(raw, static_cast<int>(tree.nodes[node].group.size()), p_total);
        double from_parent =
            tree.nodes[node].parent >= 0 ? hier_adjusted[tree.nodes[node].parent] : 0.0;
        hier_adjusted[node] = std::max(adj, from_parent);
        visited[node] = 1;
        if (hier_adjusted[node] <= cfg.alpha) {
          significant[node] = 1;
          for (int c : tree.nodes[node].children) next.push_back(c);
        }
      }
      frontier = std::move(next);
    }
  }

  // Findings in depth-first order: significant nodes with no significant child.
  void collect(int node, const std::string& inherited_block,
               std::vector<ClusterFinding>& findings) const {
    if (!visited[node] || !significant[node]) return;
    const TreeNode& tn = tree.nodes[node];
    const std::string& block = tn.block.empty() ? inherited_block : tn.block;
    bool child_significant = false;
    for (int c : tn.children)
      if (visited[c] && significant[c]) child_significant = true;
    if (!child_significant) {
      findings.push_back({block, tn.group, hier_adjusted[node]});
      return;
    }
    for (int c : tn.children) collect(c, block, findings);
  }
};

}  // namespace

TestResult test_hierarchy_prepared(const std::vector<const PreparedSplits*>& per_study,
                                   const HierTree& tree, const TestConfig& cfg) {
  if (per_study.empty()) fail(errc::empty_input, "no studies");
  if (tree.nodes.empty()) fail(errc::empty_input, "empty tree");

  std::vector<std::string> columns;
  {
    std::unordered_set<std::string> seen;
    for (const auto* prep : per_study)
      for (const auto& name : prep->dataset().colnames)
        if (seen.insert(name).second) columns.push_back(name);
  }
  check_tree_matches(tree, columns);

  Traversal traversal(per_study, tree, cfg);
  traversal.run();

  TestResult result;
  result.blocks = tree.block_order;
  traversal.collect(0, "", result.findings);
  return result;
}

TestResult test_hierarchy(const Dataset& d, const HierTree& tree, const TestConfig& cfg) {
  SplitPlan plan = make_splits(d.n(), cfg.B, cfg.seed);
  PrepareConfig prep_cfg;
  prep_cfg.lasso = cfg.lasso;
  prep_cfg.screen_on_half_n = cfg.screen_on_half_n;
  prep_cfg.threads = cfg.threads;
  PreparedSplits prep(d, plan, prep_cfg);
  return test_hierarchy_prepared({&prep}, tree, cfg);
}

TestResult test_hierarchy(const StudyCollection& studies, const HierTree& tree,
                          const TestConfig& cfg) {
  std::vector<PreparedSplits> preps;
  preps.reserve(studies.m());
  PrepareConfig prep_cfg;
  prep_cfg.lasso = cfg.lasso;
  prep_cfg.screen_on_half_n = cfg.screen_on_half_n;
  prep_cfg.threads = cfg.threads;
  for (int l = 0; l < studies.m(); ++l) {
    std::uint64_t study_seed = cfg.seed;
    if (studies.m() > 1) study_seed = substream(cfg.seed, 0x535455ULL, l)();
    SplitPlan plan = make_splits(studies.studies[l].n(), cfg.B, study_seed);
    preps.emplace_back(studies.studies[l], plan, prep_cfg);
  }
  std::vector<const PreparedSplits*> ptrs;
  for (const auto& p : preps) ptrs.push_back(&p);
  return test_hierarchy_prepared(ptrs, tree, cfg);
}

std::vector<TestResult::Row> TestResult::rows() const {
  std::vector<Row> out;
  std::unordered_set<std::string> blocks_with_findings;
  for (const auto& f : findings) {
    if (!f.block.empty()) blocks_with_findings.insert(f.block);
  }
  // findings outside any block come first
  for (const auto& f : findings)
    if (f.block.empty()) out.push_back({f.block, f.p_adjusted, f.group});
  for (const auto& b : blocks) {
    if (!blocks_with_findings.count(b)) {
      out.push_back({b, std::nullopt, {}});
      continue;
    }
    for (const auto& f : findings)
      if (f.block == b) out.push_back({f.block, f.p_adjusted, f.group});
  }
  if (out.empty()) out.push_back({"", std::nullopt, {}});
  return out;
}

namespace {

std::string format_pvalue(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.7g", p);
  return buf;
}

std::string cluster_text(const std::vector<std::string>& group, int n_terms,
                         const char* separator) {
  if (group.empty()) return "NA";
  std::string out;
  int shown = n_terms > 0 ? std::min<int>(n_terms, static_cast<int>(group.size()))
                          : static_cast<int>(group.size());
  for (int i = 0; i < shown; ++i) {
    if (i) out += separator;
    out += group[i];
  }
  int hidden = static_cast<int>(group.size()) - shown;
  if (hidden > 0) {
    out += separator;
    out += "... [" + std::to_string(hidden) + "]";
  }
  return out;
}

}  // namespace

std::string print_findings(const TestResult& result, int n_terms) {
  auto rows = result.rows();
  std::vector<std::array<std::string, 3>> cells;
  for (const auto& row : rows) {
    cells.push_back({row.block.empty() ? "NA" : row.block,
                     row.p ? format_pvalue(*row.p) : "NA",
                     cluster_text(row.group, n_terms, ", ")});
  }

  std::size_t w_index = std::to_string(cells.size()).size();
  std::size_t w_block = 5, w_p = 7;
  for (const auto& c : cells) {
    w_block = std::max(w_block, c[0].size());
    w_p = std::max(w_p, c[1].size());
  }

  std::string out;
  out.append(w_index + 1, ' ');
  out += "block";
  out.append(w_block - 5 + 1, ' ');
  out += "p.value";
  out.append(w_p - 7 + 1, ' ');
  out += "significant.cluster\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string idx = std::to_string(i + 1);
    out.append(w_index - idx.size(), ' ');
    out += idx;
    out.push_back(' ');
    out += cells[i][0];
    out.append(w_block - cells[i][0].size() + 1, ' ');
    out += cells[i][1];
    out.append(w_p - cells[i][1].size() + 1, ' ');
    out += cells[i][2];
    out.push_back('\n');
  }
  return out;
}

std::string findings_tsv(const TestResult& result) {
  std::string out = "block\tp.value\tsignificant.cluster\n";
  for (const auto& row : result.rows()) {
    out += row.block.empty() ? "NA" : row.block;
    out.push_back('\t');
    if (row.p) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.12g", *row.p);
      out += buf;
    } else {
      out += "NA";
    }
    out.push_back('\t');
    out += cluster_text(row.group, 0, ";");
    out.push_back('\n');
  }
  return out;
}

}  // namespace snptree
