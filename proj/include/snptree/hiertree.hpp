#pragma once

#include <string>
#include <vector>

#include "snptree/dataset.hpp"

namespace snptree {

// Rooted tree over variable groups. Children of every internal node partition
// the node's group; leaves are singletons; the root holds all clustered
// variables. An optional block level (typically chromosomes) sits at depth 1.
struct TreeNode {
  std::vector<std::string> group;  // colnames, in leaf order
  std::vector<int> children;       // node ids, empty for leaves
  int parent = -1;
  int depth = 0;
  double height = -1.0;            // merge dissimilarity (clustered trees only)
  std::string block;               // label on block-level nodes, else empty
};

struct HierTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::string> block_order;
  std::vector<std::string> warnings;

  const TreeNode& root() const { return nodes.front(); }
  int n_leaves() const;
};

// Agglomerative average-linkage clustering on the dissimilarity
// 1 - (empirical correlation)^2, one dendrogram per block (or one global
// tree without blocks). Equal-dissimilarity merges are resolved by the
// lexicographically smallest member names, so the tree does not depend on
// column order.
HierTree cluster_var(const Dataset& d, const BlockMap* block = nullptr);

// Multi-study variant: correlations are computed on observations stacked
// across studies, pairwise-complete per column pair when the studies measure
// different panels.
HierTree cluster_var(const StudyCollection& studies, const BlockMap* block = nullptr);

// Recursive binary partitioning of genomic positions: sort by position and
// split each node into the first ceil(k/2) variables and the remainder.
HierTree cluster_position(const PositionMap& positions, const BlockMap* block = nullptr);

std::string serialize_tree(const HierTree& tree);
HierTree parse_tree(const std::string& text);
void save_tree(const HierTree& tree, const std::string& path);
HierTree load_tree(const std::string& path);

}  // namespace snptree
