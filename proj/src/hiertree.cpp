#include "snptree/hiertree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>

namespace snptree {

int HierTree::n_leaves() const {
  return nodes.empty() ? 0 : static_cast<int>(nodes.front().group.size());
}

namespace {

// Binary agglomeration result: leaves are 0..k-1, internal node i has id k+i.
struct Dendrogram {
  std::vector<std::array<int, 2>> merges;
  std::vector<double> heights;
};

// Average-linkage agglomeration via the Lance-Williams update, with cached
// row minima. Ties are resolved by the pair's lexicographically smallest
// member names (ranks precomputed), making the result independent of column
// order. D is consumed.
Dendrogram average_linkage(Eigen::MatrixXd& d, const std::vector<int>& name_rank) {
  const int k = static_cast<int>(d.rows());
  Dendrogram out;
  if (k <= 1) return out;

  std::vector<int> active(k);
  std::iota(active.begin(), active.end(), 0);
  std::vector<double> size(k, 1.0);
  std::vector<int> rep(name_rank);  // rank of the smallest member name
  std::vector<int> id(k);
  std::iota(id.begin(), id.end(), 0);

  struct Cand {
    double dist;
    int rep_lo, rep_hi;
    int slot;
  };
  auto pair_cand = [&](int i, int j) {
    Cand c;
    c.dist = d(i, j);
    c.rep_lo = std::min(rep[i], rep[j]);
    c.rep_hi = std::max(rep[i], rep[j]);
    c.slot = j;
    return c;
  };
  auto better = [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.rep_lo != b.rep_lo) return a.rep_lo < b.rep_lo;
    return a.rep_hi < b.rep_hi;
  };

  std::vector<Cand> nn(k);
  auto recompute_nn = [&](int i) {
    Cand best{std::numeric_limits<double>::infinity(), 0, 0, -1};
    for (int j : active) {
      if (j == i) continue;
      Cand c = pair_cand(i, j);
      if (best.slot < 0 || better(c, best)) best = c;
    }
    nn[i] = best;
  };
  for (int i : active) recompute_nn(i);

  double last_height = 0.0;
  for (int step = 0; step < k - 1; ++step) {
    int a = -1;
    Cand best{std::numeric_limits<double>::infinity(), 0, 0, -1};
    for (int i : active) {
      if (nn[i].slot < 0) continue;
      if (a < 0 || better(nn[i], best)) {
        best = nn[i];
        a = i;
      }
    }
    int b = best.slot;

    double h = std::max(d(a, b), last_height);  // guards rounding in the update
    out.merges.push_back({id[a], id[b]});
    out.heights.push_back(h);
    last_height = h;

    // merged cluster replaces slot a
    double sa = size[a], sb = size[b];
    for (int j : active) {
      if (j == a || j == b) continue;
      double nd = (sa * d(a, j) + sb * d(b, j)) / (sa + sb);
      nd = std::max(nd, h);
      d(a, j) = nd;
      d(j, a) = nd;
    }
    size[a] = sa + sb;
    rep[a] = std::min(rep[a], rep[b]);
    id[a] = k + step;
    active.erase(std::find(active.begin(), active.end(), b));
    if (active.size() == 1) break;

    recompute_nn(a);
    for (int j : active) {
      if (j == a) continue;
      if (nn[j].slot == a || nn[j].slot == b) {
        recompute_nn(j);
      } else {
        Cand c = pair_cand(j, a);
        if (better(c, nn[j])) nn[j] = c;
      }
    }
  }
  return out;
}

// Appends the dendrogram below `parent`, returning the subtree root id.
// Children are ordered by their smallest member name.
int attach_dendrogram(HierTree& tree, int parent, const Dendrogram& dendro,
                      const std::vector<std::string>& names,
                      const std::vector<int>& name_rank) {
  const int k = static_cast<int>(names.size());
  // dendro node id -> tree node id, built bottom-up
  std::vector<int> tree_id(k + dendro.merges.size(), -1);
  std::vector<int> min_rank(k + dendro.merges.size());

  auto new_node = [&](int) {
    tree.nodes.emplace_back();
    return static_cast<int>(tree.nodes.size() - 1);
  };

  for (int i = 0; i < k; ++i) {
    int t = new_node(i);
    tree.nodes[t].group = {names[i]};
    tree_id[i] = t;
    min_rank[i] = name_rank[i];
  }
  for (std::size_t s = 0; s < dendro.merges.size(); ++s) {
    auto [a, b] = dendro.merges[s];
    if (min_rank[a] > min_rank[b]) std::swap(a, b);
    int t = new_node(0);
    TreeNode& node = tree.nodes[t];
    node.height = dendro.heights[s];
    node.children = {tree_id[a], tree_id[b]};
    node.group.reserve(tree.nodes[tree_id[a]].group.size() + tree.nodes[tree_id[b]].group.size());
    for (int c : node.children) {
      tree.nodes[c].parent = t;
      for (const auto& g : tree.nodes[c].group) node.group.push_back(g);
    }
    tree_id[k + s] = t;
    min_rank[k + s] = min_rank[a];
  }
  int root = tree_id[k + dendro.merges.size() - 1];
  tree.nodes[root].parent = parent;
  return root;
}

void fix_depths(HierTree& tree) {
  if (tree.nodes.empty()) return;
  // nodes were appended children-before-parents within subtrees; do a pass
  // from the root instead
  std::vector<int> stack{0};
  tree.nodes[0].depth = 0;
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    for (int c : tree.nodes[n].children) {
      tree.nodes[c].depth = tree.nodes[n].depth + 1;
      stack.push_back(c);
    }
  }
}

std::vector<int> ranks_of(const std::vector<std::string>& names) {
  std::vector<int> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return names[a] < names[b]; });
  std::vector<int> rank(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
  return rank;
}

// Groups universe columns by block, keeping universe order inside each block
// and first-appearance order across blocks. Every universe name must appear
// in the map.
struct Blocked {
  std::vector<std::string> block_labels;
  std::vector<std::vector<int>> members;  // universe indices per block
};

Blocked split_by_block(const std::vector<std::string>& universe, const BlockMap& block) {
  auto map = block.index();
  Blocked out;
  std::unordered_map<std::string, int> label_pos;
  for (std::size_t j = 0; j < universe.size(); ++j) {
    auto it = map.find(universe[j]);
    if (it == map.end())
      fail(errc::unknown_colname, "column '" + universe[j] + "' missing from block map");
    auto [pos_it, fresh] = label_pos.try_emplace(it->second, static_cast<int>(out.block_labels.size()));
    if (fresh) {
      out.block_labels.push_back(it->second);
      out.members.emplace_back();
    }
    out.members[pos_it->second].push_back(static_cast<int>(j));
  }
  return out;
}

// Dissimilarity 1 - cor^2 from accumulated pair sums.
double dissimilarity(double n, double sx, double sy, double sxx, double syy, double sxy) {
  double vx = sxx - sx * sx / n;
  double vy = syy - sy * sy / n;
  if (!(vx > 0.0) || !(vy > 0.0)) return 1.0;  // undefined pair correlation
  double c = (sxy - sx * sy / n) / std::sqrt(vx * vy);
  double d = 1.0 - c * c;
  return d < 0.0 ? 0.0 : d;
}

// Builds a HierTree over the given universe: one dendrogram per block, or a
// single global dendrogram. `dissim_for` computes the dissimilarity matrix
// for a list of universe column indices.
template <typename DissimFn>
HierTree build_clustered_tree(const std::vector<std::string>& universe, const BlockMap* block,
                              DissimFn&& dissim_for) {
  HierTree tree;
  if (universe.empty()) fail(errc::empty_input, "no columns to cluster");

  if (!block) {
    std::vector<int> all(universe.size());
    std::iota(all.begin(), all.end(), 0);
    if (all.size() == 1) {
      tree.nodes.emplace_back();
      tree.nodes[0].group = {universe[0]};
      return tree;
    }
    Eigen::MatrixXd d = dissim_for(all);
    auto rank = ranks_of(universe);
    Dendrogram dendro = average_linkage(d, rank);
    // attach with a placeholder parent and promote the subtree root
    attach_dendrogram(tree, -1, dendro, universe, rank);
    // move root to index 0
    int root = static_cast<int>(tree.nodes.size() - 1);
    std::swap(tree.nodes[0], tree.nodes[root]);
    for (auto& n : tree.nodes) {
      for (auto& c : n.children) c = (c == 0) ? root : (c == root ? 0 : c);
      if (n.parent == 0) n.parent = root;
      else if (n.parent == root) n.parent = 0;
    }
    tree.nodes[0].parent = -1;
    fix_depths(tree);
    return tree;
  }

  Blocked blocked = split_by_block(universe, *block);
  tree.nodes.emplace_back();  // root
  for (const auto& name : universe) tree.nodes[0].group.push_back(name);

  for (std::size_t bi = 0; bi < blocked.block_labels.size(); ++bi) {
    const auto& members = blocked.members[bi];
    std::vector<std::string> names;
    names.reserve(members.size());
    for (int j : members) names.push_back(universe[j]);

    int block_node;
    if (members.size() == 1) {
      tree.warnings.push_back("block '" + blocked.block_labels[bi] +
                              "' has a single variable; kept as a leaf");
      tree.nodes.emplace_back();
      block_node = static_cast<int>(tree.nodes.size() - 1);
      tree.nodes[block_node].group = names;
      tree.nodes[block_node].parent = 0;
    } else {
      Eigen::MatrixXd d = dissim_for(members);
      auto rank = ranks_of(names);
      Dendrogram dendro = average_linkage(d, rank);
      block_node = attach_dendrogram(tree, 0, dendro, names, rank);
    }
    tree.nodes[block_node].block = blocked.block_labels[bi];
    tree.nodes[0].children.push_back(block_node);
  }
  tree.block_order = blocked.block_labels;

  // root group must follow child (block) order
  tree.nodes[0].group.clear();
  for (int c : tree.nodes[0].children)
    for (const auto& g : tree.nodes[c].group) tree.nodes[0].group.push_back(g);
  fix_depths(tree);
  return tree;
}

}  // namespace

HierTree cluster_var(const Dataset& d, const BlockMap* block) {
  // centered cross products give all pairwise correlations
  Eigen::VectorXd mean = d.x.colwise().mean();
  for (int j = 0; j < d.p(); ++j) {
    double var = (d.x.col(j).array() - mean[j]).square().sum();
    if (!(var > 0.0))
      fail(errc::zero_variance, "column '" + d.colnames[j] + "' has zero variance");
  }

  auto dissim_for = [&](const std::vector<int>& cols) {
    const int k = static_cast<int>(cols.size());
    Eigen::MatrixXd c(d.n(), k);
    for (int i = 0; i < k; ++i) c.col(i) = d.x.col(cols[i]).array() - mean[cols[i]];
    Eigen::MatrixXd cross = c.transpose() * c;
    Eigen::MatrixXd out(k, k);
    for (int i = 0; i < k; ++i) {
      out(i, i) = 0.0;
      for (int j = i + 1; j < k; ++j) {
        double r2 = cross(i, j) * cross(i, j) / (cross(i, i) * cross(j, j));
        double dd = 1.0 - r2;
        if (dd < 0.0) dd = 0.0;
        out(i, j) = dd;
        out(j, i) = dd;
      }
    }
    return out;
  };
  return build_clustered_tree(d.colnames, block, dissim_for);
}

HierTree cluster_var(const StudyCollection& studies, const BlockMap* block) {
  if (studies.studies.empty()) fail(errc::empty_input, "no studies");
  if (studies.m() == 1) return cluster_var(studies.studies.front(), block);

  const auto universe = studies.column_universe();
  const int pu = static_cast<int>(universe.size());
  std::unordered_map<std::string, int> uindex;
  for (int j = 0; j < pu; ++j) uindex.emplace(universe[j], j);

  // Per-study column map into the universe.
  const int m = studies.m();
  std::vector<std::vector<int>> study_cols(m);        // universe index per study column
  std::vector<std::vector<int>> col_in_study(m);      // study column per universe index, -1 absent
  bool identical_panels = true;
  for (int s = 0; s < m; ++s) {
    const auto& d = studies.studies[s];
    col_in_study[s].assign(pu, -1);
    study_cols[s].resize(d.p());
    for (int j = 0; j < d.p(); ++j) {
      int u = uindex.at(d.colnames[j]);
      study_cols[s][j] = u;
      col_in_study[s][u] = j;
    }
    if (d.p() != pu) identical_panels = false;
  }

  // Column must vary somewhere in the rows where it is observed.
  for (int u = 0; u < pu; ++u) {
    double n = 0, sx = 0, sxx = 0;
    for (int s = 0; s < m; ++s) {
      int j = col_in_study[s][u];
      if (j < 0) continue;
      const auto col = studies.studies[s].x.col(j);
      n += col.size();
      sx += col.sum();
      sxx += col.squaredNorm();
    }
    if (!(sxx - sx * sx / n > 0.0))
      fail(errc::zero_variance, "column '" + universe[u] + "' has zero variance across studies");
  }

  if (identical_panels) {
    // Same panel everywhere: pairwise-complete equals plain stacking.
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(pu, pu);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(pu);
    double n = 0;
    for (int s = 0; s < m; ++s) {
      const auto& d = studies.studies[s];
      Eigen::MatrixXd xs(d.n(), pu);
      for (int j = 0; j < d.p(); ++j) xs.col(study_cols[s][j]) = d.x.col(j);
      cross += xs.transpose() * xs;
      for (int j = 0; j < d.p(); ++j) sum[study_cols[s][j]] += d.x.col(j).sum();
      n += d.n();
    }
    auto dissim_for = [&](const std::vector<int>& cols) {
      const int k = static_cast<int>(cols.size());
      Eigen::MatrixXd out(k, k);
      for (int i = 0; i < k; ++i) {
        out(i, i) = 0.0;
        for (int j = i + 1; j < k; ++j) {
          int a = cols[i], b = cols[j];
          double dd = dissimilarity(n, sum[a], sum[b], cross(a, a), cross(b, b), cross(a, b));
          out(i, j) = dd;
          out(j, i) = dd;
        }
      }
      return out;
    };
    return build_clustered_tree(universe, block, dissim_for);
  }

  // Mismatched panels: pairwise-complete sums per column pair.
  auto dissim_for = [&](const std::vector<int>& cols) {
    const int k = static_cast<int>(cols.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int s = 0; s < m; ++s) {
          int ca = col_in_study[s][cols[i]];
          int cb = col_in_study[s][cols[j]];
          if (ca < 0 || cb < 0) continue;
          const auto xa = studies.studies[s].x.col(ca);
          const auto xb = studies.studies[s].x.col(cb);
          n += xa.size();
          sx += xa.sum();
          sy += xb.sum();
          sxx += xa.squaredNorm();
          syy += xb.squaredNorm();
          sxy += xa.dot(xb);
        }
        double dd = (n > 1) ? dissimilarity(n, sx, sy, sxx, syy, sxy) : 1.0;
        out(i, j) = dd;
        out(j, i) = dd;
      }
    }
    return out;
  };
  return build_clustered_tree(universe, block, dissim_for);
}

namespace {

// Balanced binary split of position-sorted names below `parent`.
int attach_position_tree(HierTree& tree, int parent, const std::vector<std::string>& names,
                         int lo, int hi) {
  tree.nodes.emplace_back();
  int node = static_cast<int>(tree.nodes.size() - 1);
  tree.nodes[node].parent = parent;
  tree.nodes[node].group.assign(names.begin() + lo, names.begin() + hi);
  if (hi - lo > 1) {
    int mid = lo + (hi - lo + 1) / 2;  // left gets ceil(k/2)
    int left = attach_position_tree(tree, node, names, lo, mid);
    int right = attach_position_tree(tree, node, names, mid, hi);
    tree.nodes[node].children = {left, right};
  }
  return node;
}

}  // namespace

HierTree cluster_position(const PositionMap& positions, const BlockMap* block) {
  if (positions.entries.empty()) fail(errc::empty_input, "no positions");

  std::vector<std::string> universe;
  universe.reserve(positions.entries.size());
  std::unordered_map<std::string, long long> pos;
  for (const auto& e : positions.entries) {
    if (!pos.emplace(e.colname, e.position).second)
      fail(errc::duplicate_colname, "column '" + e.colname + "' listed twice in positions");
    universe.push_back(e.colname);
  }

  auto sorted_by_position = [&](std::vector<std::string> names, const std::string& where) {
    std::stable_sort(names.begin(), names.end(),
                     [&](const std::string& a, const std::string& b) { return pos.at(a) < pos.at(b); });
    for (std::size_t i = 1; i < names.size(); ++i) {
      if (pos.at(names[i]) == pos.at(names[i - 1]))
        fail(errc::duplicate_position, "columns '" + names[i - 1] + "' and '" + names[i] +
                                           "' share position " + std::to_string(pos.at(names[i])) +
                                           where);
    }
    return names;
  };

  HierTree tree;
  if (!block) {
    auto names = sorted_by_position(universe, "");
    attach_position_tree(tree, -1, names, 0, static_cast<int>(names.size()));
    // recursion appended parent first; root is node 0 already
    fix_depths(tree);
    return tree;
  }

  Blocked blocked = split_by_block(universe, *block);
  tree.nodes.emplace_back();
  for (std::size_t bi = 0; bi < blocked.block_labels.size(); ++bi) {
    std::vector<std::string> names;
    for (int j : blocked.members[bi]) names.push_back(universe[j]);
    names = sorted_by_position(std::move(names), " in block '" + blocked.block_labels[bi] + "'");
    if (names.size() == 1)
      tree.warnings.push_back("block '" + blocked.block_labels[bi] +
                              "' has a single variable; kept as a leaf");
    int node = attach_position_tree(tree, 0, names, 0, static_cast<int>(names.size()));
    tree.nodes[node].block = blocked.block_labels[bi];
    tree.nodes[0].children.push_back(node);
  }
  tree.block_order = blocked.block_labels;
  for (int c : tree.nodes[0].children)
    for (const auto& g : tree.nodes[c].group) tree.nodes[0].group.push_back(g);
  fix_depths(tree);
  return tree;
}

namespace {

void serialize_node(const HierTree& tree, int id, std::string& out) {
  const TreeNode& node = tree.nodes[id];
  out.append(2 * static_cast<std::size_t>(node.depth), ' ');
  out.push_back(node.children.empty() ? '-' : '+');
  if (!node.block.empty()) {
    out += " [";
    out += node.block;
    out += ']';
  }
  out.push_back(' ');
  for (std::size_t i = 0; i < node.group.size(); ++i) {
    if (i) out.push_back(',');
    out += node.group[i];
  }
  out.push_back('\n');
  for (int c : node.children) serialize_node(tree, c, out);
}

}  // namespace

std::string serialize_tree(const HierTree& tree) {
  if (tree.nodes.empty()) fail(errc::empty_input, "empty tree");
  for (const auto& node : tree.nodes) {
    for (const auto& name : node.group) {
      if (name.find_first_of(",[]\n") != std::string::npos)
        fail(errc::bad_format, "column name '" + name + "' cannot appear in a tree file");
    }
    if (node.block.find_first_of("[]\n") != std::string::npos)
      fail(errc::bad_format, "block label '" + node.block + "' cannot appear in a tree file");
  }
  std::string out;
  serialize_node(tree, 0, out);
  return out;
}

HierTree parse_tree(const std::string& text) {
  HierTree tree;
  std::istringstream in(text);
  std::string line;
  std::vector<int> stack;  // node id per depth
  int lineno = 0;
  std::unordered_set<std::string> block_seen;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t indent = line.find_first_not_of(' ');
    if (indent == std::string::npos || indent % 2 != 0)
      fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": bad indentation");
    int depth = static_cast<int>(indent / 2);
    std::size_t cur = indent;
    char marker = line[cur];
    if (marker != '+' && marker != '-')
      fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": expected '+' or '-'");
    ++cur;

    std::string block;
    if (cur + 1 < line.size() && line[cur] == ' ' && line[cur + 1] == '[') {
      std::size_t close = line.find(']', cur + 2);
      if (close == std::string::npos)
        fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": unterminated block label");
      block = line.substr(cur + 2, close - cur - 2);
      cur = close + 1;
    }
    if (cur < line.size() && line[cur] == ' ') ++cur;

    TreeNode node;
    node.depth = depth;
    node.block = block;
    std::string names = line.substr(cur);
    std::size_t start = 0;
    while (start <= names.size() && !names.empty()) {
      std::size_t comma = names.find(',', start);
      std::string name = names.substr(start, comma == std::string::npos ? std::string::npos
                                                                        : comma - start);
      if (name.empty())
        fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": empty column name");
      node.group.push_back(name);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (node.group.empty())
      fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": node without columns");
    if (marker == '-' && node.group.size() != 1)
      fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": leaf must hold one column");

    if (depth == 0) {
      if (!tree.nodes.empty())
        fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": multiple roots");
      tree.nodes.push_back(std::move(node));
      stack.assign(1, 0);
      continue;
    }
    if (static_cast<int>(stack.size()) < depth)
      fail(errc::bad_format, "tree line " + std::to_string(lineno) + ": depth jump");
    stack.resize(depth);
    int parent = stack[depth - 1];
    node.parent = parent;
    tree.nodes.push_back(std::move(node));
    int id = static_cast<int>(tree.nodes.size() - 1);
    tree.nodes[parent].children.push_back(id);
    stack.push_back(id);
    if (!tree.nodes[id].block.empty() && block_seen.insert(tree.nodes[id].block).second)
      tree.block_order.push_back(tree.nodes[id].block);
  }

  if (tree.nodes.empty()) fail(errc::bad_format, "empty tree file");

  // internal groups must equal the concatenation of their children
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    if (node.children.empty()) continue;
    std::vector<std::string> concat;
    for (int c : node.children)
      for (const auto& g : tree.nodes[c].group) concat.push_back(g);
    if (concat != node.group)
      fail(errc::bad_format, "tree node group does not match its children");
  }
  return tree;
}

void save_tree(const HierTree& tree, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::bad_format, "cannot write '" + path + "'");
  out << serialize_tree(tree);
}

HierTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_format, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_tree(buf.str());
}

}  // namespace snptree
