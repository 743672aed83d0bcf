// Graph-ordered block LDU factorization.
//
// A block system F is described by an undirected graph whose nodes carry the
// block sizes.  dfs_order() produces a leaves-first elimination list together
// with the symbolic fill pattern, and the factor/solve pairs below work in
// place on a BlockSparseMatrix that holds exactly that pattern.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "maxcoord/errors.hpp"

namespace maxcoord {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Graph

class Graph {
 public:
  /// Adds a node of block size `dim`.  Mergeable nodes (joints) may be fused
  /// into loop-opener supernodes by open_loops().
  int add_node(int dim, bool mergeable = false) {
    if (dim < 0) throw Error("node dimension must be nonnegative");
    dims_.push_back(dim);
    mergeable_.push_back(mergeable);
    adj_.emplace_back();
    return static_cast<int>(dims_.size()) - 1;
  }

  void add_edge(int a, int b) {
    check(a);
    check(b);
    if (a == b) return;
    adj_[a].insert(b);
    adj_[b].insert(a);
  }

  [[nodiscard]] int size() const { return static_cast<int>(dims_.size()); }
  [[nodiscard]] int dim(int i) const { return dims_.at(i); }
  [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
  [[nodiscard]] bool mergeable(int i) const { return mergeable_.at(i); }
  [[nodiscard]] const std::set<int>& neighbors(int i) const { return adj_.at(i); }
  [[nodiscard]] bool has_edge(int a, int b) const { return adj_.at(a).count(b) != 0; }

  [[nodiscard]] std::size_t num_edges() const {
    std::size_t n = 0;
    for (const auto& s : adj_) n += s.size();
    return n / 2;
  }

 private:
  void check(int i) const {
    if (i < 0 || i >= size()) throw Error("graph node " + std::to_string(i) + " out of range");
  }

  std::vector<int> dims_;
  std::vector<bool> mergeable_;
  std::vector<std::set<int>> adj_;
};

namespace detail {

struct DfsResult {
  std::vector<int> preorder;
  std::vector<int> component_start;  // index into preorder where each tree begins
  std::vector<int> parent;
  std::vector<std::pair<int, int>> back_edges;  // (descendant, ancestor)
};

// Iterative DFS; neighbors visited in ascending id.  `first_root` (if >= 0)
// is searched before the lowest-id roots of the remaining components.
inline DfsResult depth_first(const Graph& g, int first_root) {
  const int n = g.size();
  DfsResult r;
  r.parent.assign(n, -1);
  std::vector<char> visited(n, 0), on_stack(n, 0);
  std::vector<std::pair<int, std::set<int>::const_iterator>> stack;

  auto run = [&](int root) {
    r.component_start.push_back(static_cast<int>(r.preorder.size()));
    visited[root] = on_stack[root] = 1;
    r.preorder.push_back(root);
    stack.emplace_back(root, g.neighbors(root).begin());
    while (!stack.empty()) {
      auto& [v, it] = stack.back();
      if (it == g.neighbors(v).end()) {
        on_stack[v] = 0;
        stack.pop_back();
        continue;
      }
      const int w = *it;
      ++it;
      if (!visited[w]) {
        visited[w] = on_stack[w] = 1;
        r.parent[w] = v;
        r.preorder.push_back(w);
        stack.emplace_back(w, g.neighbors(w).begin());
      } else if (on_stack[w] && w != r.parent[v]) {
        r.back_edges.emplace_back(v, w);
      }
    }
  };

  if (first_root >= 0) run(first_root);
  for (int i = 0; i < n; ++i)
    if (!visited[i]) run(i);
  return r;
}

// Nodes on the tree path ancestor -> ... -> descendant.
inline std::vector<int> tree_path(const std::vector<int>& parent, int ancestor, int descendant) {
  std::vector<int> path;
  for (int v = descendant; v != -1; v = parent[v]) {
    path.push_back(v);
    if (v == ancestor) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loop openers

/// Graph after fusing loop-closing constraint nodes.
struct LoopOpening {
  Graph graph;
  std::vector<std::vector<int>> groups;  // original nodes per merged node
  std::vector<int> node_of;              // original node -> merged node
};

/// Fuses the closing constraint node of every DFS-detected loop with the
/// first constraint node on the loop, repeating until no closing node is a
/// lone constraint.  Merged nodes keep the order of their smallest member.
inline LoopOpening open_loops(const Graph& g) {
  const int n = g.size();
  std::vector<int> uf(n);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };

  LoopOpening out;
  for (;;) {
    std::map<int, int> merged_id;  // union-find root -> merged node
    std::vector<int> rep_min(n, n);
    for (int i = 0; i < n; ++i) rep_min[find(i)] = std::min(rep_min[find(i)], i);
    std::vector<std::pair<int, int>> order;  // (min member, root)
    for (int i = 0; i < n; ++i)
      if (find(i) == i) order.emplace_back(rep_min[i], i);
    std::sort(order.begin(), order.end());

    Graph m;
    out.groups.assign(order.size(), {});
    for (std::size_t k = 0; k < order.size(); ++k) merged_id[order[k].second] = static_cast<int>(k);
    out.node_of.assign(n, -1);
    for (int i = 0; i < n; ++i) {
      out.node_of[i] = merged_id[find(i)];
      out.groups[out.node_of[i]].push_back(i);
    }
    for (const auto& grp : out.groups) {
      int d = 0;
      bool mergeable = false;
      for (int i : grp) {
        d += g.dim(i);
        mergeable = mergeable || g.mergeable(i);
      }
      m.add_node(d, mergeable);
    }
    for (int i = 0; i < n; ++i)
      for (int j : g.neighbors(i))
        if (out.node_of[i] != out.node_of[j]) m.add_edge(out.node_of[i], out.node_of[j]);

    const auto dfs = detail::depth_first(m, -1);
    bool changed = false;
    for (const auto& [u, a] : dfs.back_edges) {
      if (!m.mergeable(u)) continue;
      const auto path = detail::tree_path(dfs.parent, a, u);
      int target = -1;
      for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        if (m.mergeable(path[k])) {
          target = path[k];
          break;
        }
      }
      if (target < 0 && m.mergeable(a)) target = a;
      if (target < 0) continue;
      const int ru = find(out.groups[u].front());
      const int rt = find(out.groups[target].front());
      if (ru != rt) {
        uf[ru] = rt;
        changed = true;
        break;  // one merge per pass; the DFS is recomputed on the new graph
      }
    }
    if (!changed) {
      out.graph = std::move(m);
      return out;
    }
  }
}

// ---------------------------------------------------------------------------
// Ordering

struct GraphOrdering {
  std::vector<int> list;      // elimination order, leaves first, roots last
  std::vector<int> position;  // position[node] = index in list
  std::vector<int> parent;    // DFS tree parent, -1 for roots
  std::vector<std::vector<int>> all_children;
  std::vector<std::vector<int>> acyclic_children;
  std::vector<std::vector<int>> cyclic_children;
  std::vector<std::vector<int>> all_parents;
  std::vector<int> loop_openers;          // ancestor end of each back edge
  std::vector<std::vector<int>> cycles;   // tree path opener -> closing node
  std::vector<std::pair<int, int>> fill;  // (earlier, later) in list order
  int k = 0;                              // number of back edges

  /// True when the cyclic algorithms are required.
  [[nodiscard]] bool has_cycles() const {
    if (k > 0 || !fill.empty()) return true;
    return std::any_of(cyclic_children.begin(), cyclic_children.end(),
                       [](const auto& c) { return !c.empty(); });
  }
};

namespace detail {

inline void complete_ordering(const Graph& g, GraphOrdering& ord) {
  const int n = g.size();
  ord.position.assign(n, -1);
  for (int k = 0; k < static_cast<int>(ord.list.size()); ++k) ord.position[ord.list[k]] = k;
  for (int i = 0; i < n; ++i)
    if (ord.position[i] < 0) throw Error("ordering list does not contain every node");

  std::vector<std::set<int>> filled(n);
  for (int i = 0; i < n; ++i) filled[i] = g.neighbors(i);
  for (int v : ord.list) {
    std::vector<int> later;
    for (int w : filled[v])
      if (ord.position[w] > ord.position[v]) later.push_back(w);
    for (std::size_t a = 0; a < later.size(); ++a) {
      for (std::size_t b = a + 1; b < later.size(); ++b) {
        const int x = later[a], y = later[b];
        if (filled[x].insert(y).second) {
          filled[y].insert(x);
          if (ord.position[x] < ord.position[y]) ord.fill.emplace_back(x, y);
          else ord.fill.emplace_back(y, x);
        }
      }
    }
  }

  auto by_pos = [&](int a, int b) { return ord.position[a] < ord.position[b]; };
  ord.all_children.assign(n, {});
  ord.all_parents.assign(n, {});
  ord.acyclic_children.assign(n, {});
  ord.cyclic_children.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int w : filled[i]) {
      if (ord.position[w] < ord.position[i]) ord.all_children[i].push_back(w);
      else ord.all_parents[i].push_back(w);
    }
    std::sort(ord.all_children[i].begin(), ord.all_children[i].end(), by_pos);
    std::sort(ord.all_parents[i].begin(), ord.all_parents[i].end(), by_pos);
    for (int c : ord.all_children[i]) {
      const bool linked = std::any_of(ord.all_children[i].begin(), ord.all_children[i].end(),
                                      [&](int o) { return o != c && filled[c].count(o); });
      (linked ? ord.cyclic_children : ord.acyclic_children)[i].push_back(c);
    }
  }
}

}  // namespace detail

/// Depth-first ordering.  `root` is searched first (-1: lowest id); the
/// remaining components start at their lowest id.  The list is the reverse
/// preorder of each tree, so the last-found node comes first and the root last.
inline GraphOrdering dfs_order(const Graph& g, int root = -1) {
  if (root >= g.size()) throw Error("root out of range");
  GraphOrdering ord;
  const auto dfs = detail::depth_first(g, root);
  ord.parent = dfs.parent;
  for (std::size_t c = 0; c < dfs.component_start.size(); ++c) {
    const int b = dfs.component_start[c];
    const int e = c + 1 < dfs.component_start.size() ? dfs.component_start[c + 1]
                                                     : static_cast<int>(dfs.preorder.size());
    for (int k = e - 1; k >= b; --k) ord.list.push_back(dfs.preorder[k]);
  }
  ord.k = static_cast<int>(dfs.back_edges.size());
  for (const auto& [u, a] : dfs.back_edges) {
    if (std::find(ord.loop_openers.begin(), ord.loop_openers.end(), a) == ord.loop_openers.end())
      ord.loop_openers.push_back(a);
    ord.cycles.push_back(detail::tree_path(dfs.parent, a, u));
  }
  detail::complete_ordering(g, ord);
  return ord;
}

/// Ordering for an arbitrary elimination list (no DFS metadata).
inline GraphOrdering ordering_from_list(const Graph& g, std::vector<int> list) {
  if (static_cast<int>(list.size()) != g.size()) throw Error("ordering list has wrong length");
  GraphOrdering ord;
  ord.list = std::move(list);
  detail::complete_ordering(g, ord);
  ord.parent.assign(g.size(), -1);
  for (int i = 0; i < g.size(); ++i)
    if (!ord.all_parents[i].empty()) ord.parent[i] = ord.all_parents[i].front();
  return ord;
}

// ---------------------------------------------------------------------------
// Block matrix

class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;

  explicit BlockSparseMatrix(std::vector<int> dims) : dims_(std::move(dims)) {
    offsets_.resize(dims_.size() + 1, 0);
    for (std::size_t i = 0; i < dims_.size(); ++i) offsets_[i + 1] = offsets_[i] + dims_[i];
    diag_.reserve(dims_.size());
    for (int d : dims_) diag_.push_back(MatX::Zero(d, d));
    off_.resize(dims_.size());
    dinv_.resize(dims_.size());
  }

  /// Diagonal blocks plus one block pair per graph edge, all zero.
  static BlockSparseMatrix with_pattern(const Graph& g) {
    BlockSparseMatrix m(g.dims());
    for (int i = 0; i < g.size(); ++i)
      for (int j : g.neighbors(i))
        if (i < j) m.add_block(i, j);
    return m;
  }

  [[nodiscard]] int num_nodes() const { return static_cast<int>(dims_.size()); }
  [[nodiscard]] int dim(int i) const { return dims_.at(i); }
  [[nodiscard]] int offset(int i) const { return offsets_.at(i); }
  [[nodiscard]] int total_dim() const { return offsets_.back(); }
  [[nodiscard]] const std::vector<int>& dims() const { return dims_; }

  /// Allocates the zero pair (i,j), (j,i) if absent.
  void add_block(int i, int j) {
    if (i == j) return;
    off_.at(i).try_emplace(j, MatX::Zero(dims_[i], dims_[j]));
    off_.at(j).try_emplace(i, MatX::Zero(dims_[j], dims_[i]));
  }

  [[nodiscard]] bool has_block(int i, int j) const {
    return i == j || off_.at(i).count(j) != 0;
  }

  MatX& block(int i, int j) {
    if (i == j) return diag_.at(i);
    auto it = off_.at(i).find(j);
    if (it == off_[i].end())
      throw Error("block (" + std::to_string(i) + "," + std::to_string(j) + ") not in pattern");
    return it->second;
  }
  [[nodiscard]] const MatX& block(int i, int j) const {
    return const_cast<BlockSparseMatrix*>(this)->block(i, j);
  }

  MatX& diag(int i) { return diag_.at(i); }
  [[nodiscard]] const MatX& diag(int i) const { return diag_.at(i); }

  /// Off-diagonal pattern as ordered pairs (i,j), i != j.
  [[nodiscard]] std::set<std::pair<int, int>> pattern() const {
    std::set<std::pair<int, int>> p;
    for (int i = 0; i < num_nodes(); ++i)
      for (const auto& kv : off_[i]) p.emplace(i, kv.first);
    return p;
  }

  void set_zero() {
    for (auto& d : diag_) d.setZero();
    for (auto& row : off_)
      for (auto& kv : row) kv.second.setZero();
  }

  [[nodiscard]] MatX to_dense() const {
    MatX a = MatX::Zero(total_dim(), total_dim());
    for (int i = 0; i < num_nodes(); ++i) {
      a.block(offset(i), offset(i), dim(i), dim(i)) = diag_[i];
      for (const auto& [j, b] : off_[i]) a.block(offset(i), offset(j), dim(i), dim(j)) = b;
    }
    return a;
  }

  /// y = F x over the stored blocks (meaningful before factorization).
  [[nodiscard]] VecX multiply(const VecX& x) const {
    if (x.size() != total_dim()) throw Error("vector has wrong dimension");
    VecX y = VecX::Zero(total_dim());
    for (int i = 0; i < num_nodes(); ++i) {
      auto yi = y.segment(offset(i), dim(i));
      yi += diag_[i] * x.segment(offset(i), dim(i));
      for (const auto& [j, b] : off_[i]) yi += b * x.segment(offset(j), dim(j));
    }
    return y;
  }

  /// Write tracking: while enabled, every block the factorization assigns is
  /// recorded as an ordered pair (diagonal as (i,i)).
  void track_writes(bool on) {
    tracking_ = on;
    writes_.clear();
  }
  [[nodiscard]] const std::set<std::pair<int, int>>& writes() const { return writes_; }
  void note_write(int i, int j) {
    if (tracking_) writes_.emplace(i, j);
  }

  /// Inverse of the pivot block D_i stored by the last factorization.
  [[nodiscard]] const MatX& pivot_inverse(int i) const { return dinv_.at(i); }
  void set_pivot_inverse(int i, MatX inv) { dinv_.at(i) = std::move(inv); }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  std::vector<MatX> diag_;
  std::vector<std::map<int, MatX>> off_;
  std::vector<MatX> dinv_;
  bool tracking_ = false;
  std::set<std::pair<int, int>> writes_;
};

/// Allocates zero blocks for every fill pair of the ordering.
inline void allocate_fill(BlockSparseMatrix& F, const GraphOrdering& ord) {
  for (const auto& [a, b] : ord.fill) F.add_block(a, b);
}

// ---------------------------------------------------------------------------
// Operation counts

/// Scalar multiply-add counts of the block operations performed.
struct FlopCount {
  std::int64_t factor = 0;
  std::int64_t solve = 0;
};

namespace flops {
inline std::int64_t mul(int m, int k, int n) { return 2LL * m * k * n; }
inline std::int64_t inv(int n) { return static_cast<std::int64_t>(n) * n * n; }
}  // namespace flops

// ---------------------------------------------------------------------------
// Factorization

inline constexpr double kPivotRatio = 1e-12;

namespace detail {

inline void factor_pivot(BlockSparseMatrix& F, int c, FlopCount& fc, double ratio) {
  const MatX& d = F.diag(c);
  if (d.rows() == 0) {
    F.set_pivot_inverse(c, MatX(0, 0));
    return;
  }
  // Row then column max-scaling, so badly scaled but regular blocks pass.
  VecX r = d.cwiseAbs().rowwise().maxCoeff();
  const bool zero_row = !(r.minCoeff() > 0.0);
  if (!zero_row) r = r.cwiseInverse();
  MatX e = r.asDiagonal() * d;
  VecX k = e.cwiseAbs().colwise().maxCoeff().transpose();
  const bool zero_col = !(k.minCoeff() > 0.0);
  if (!zero_col) k = k.cwiseInverse();
  e = e * k.asDiagonal();
  double smin = 0.0, smax = 0.0;
  if (!zero_row && !zero_col && e.allFinite()) {
    Eigen::JacobiSVD<MatX> svd(e);
    const auto& sv = svd.singularValues();
    smax = sv(0);
    smin = sv(sv.size() - 1);
  }
  if (!(smax > 0.0) || !(smin >= ratio * smax)) {
    throw SingularSystem(c, "pivot block of node " + std::to_string(c) +
                                " is singular (sigma_min/sigma_max = " +
                                std::to_string(smax > 0.0 ? smin / smax : 0.0) + ")");
  }
  F.set_pivot_inverse(c, k.asDiagonal() * e.fullPivLu().inverse() * r.asDiagonal());
  fc.factor += flops::inv(static_cast<int>(d.rows()));
}

// Lines 3-5: scale the pair (i,c) by D_c^-1 and update D_i.
inline void eliminate_child(BlockSparseMatrix& F, int i, int c, FlopCount& fc) {
  const MatX& dinv = F.pivot_inverse(c);
  MatX& fic = F.block(i, c);
  MatX& fci = F.block(c, i);
  const int ni = F.dim(i), nc = F.dim(c);
  fic = fic * dinv;
  fci = dinv * fci;
  F.diag(i) -= fic * F.diag(c) * fci;
  F.note_write(i, c);
  F.note_write(c, i);
  F.note_write(i, i);
  fc.factor += 2 * flops::mul(ni, nc, nc) + flops::mul(ni, nc, nc) + flops::mul(ni, nc, ni);
}

}  // namespace detail

/// In-place LDU for acyclic orderings.  Afterwards F(i,c) holds L, F(c,i)
/// holds U and the diagonal holds D for every processed pair.
inline FlopCount factor_acyclic(BlockSparseMatrix& F, const GraphOrdering& ord,
                                double pivot_ratio = kPivotRatio) {
  if (ord.has_cycles()) throw Error("factor_acyclic called on an ordering with cycles");
  FlopCount fc;
  for (int i : ord.list) {
    for (int c : ord.all_children[i]) detail::eliminate_child(F, i, c, fc);
    detail::factor_pivot(F, i, fc, pivot_ratio);
  }
  return fc;
}

/// In-place LDU for orderings with cycles; F must already hold the fill blocks.
inline FlopCount factor_cyclic(BlockSparseMatrix& F, const GraphOrdering& ord,
                               double pivot_ratio = kPivotRatio) {
  FlopCount fc;
  for (int i : ord.list) {
    for (int c1 : ord.acyclic_children[i]) detail::eliminate_child(F, i, c1, fc);
    for (int c1 : ord.cyclic_children[i]) {
      const auto& kids = ord.all_children[c1];
      for (int c2 : ord.cyclic_children[i]) {
        if (c1 == c2) break;
        if (std::find(kids.begin(), kids.end(), c2) == kids.end()) continue;
        MatX& fic1 = F.block(i, c1);
        MatX& fc1i = F.block(c1, i);
        const MatX& d2 = F.diag(c2);
        fic1 -= F.block(i, c2) * d2 * F.block(c2, c1);
        fc1i -= F.block(c1, c2) * d2 * F.block(c2, i);
        F.note_write(i, c1);
        F.note_write(c1, i);
        const int ni = F.dim(i), n1 = F.dim(c1), n2 = F.dim(c2);
        fc.factor += flops::mul(ni, n2, n2) + flops::mul(ni, n2, n1) + flops::mul(n1, n2, n2) +
                     flops::mul(n1, n2, ni);
      }
      detail::eliminate_child(F, i, c1, fc);
    }
    detail::factor_pivot(F, i, fc, pivot_ratio);
  }
  return fc;
}

namespace detail {

inline VecX solve_with(const BlockSparseMatrix& F, const VecX& f, const GraphOrdering& ord,
                       const std::vector<std::vector<int>>& children, FlopCount* fc) {
  if (f.size() != F.total_dim()) throw Error("right-hand side has wrong dimension");
  VecX ds(f.size());
  std::int64_t count = 0;
  for (int i : ord.list) {
    auto si = ds.segment(F.offset(i), F.dim(i));
    si = -f.segment(F.offset(i), F.dim(i));
    for (int c : children[i]) {
      si -= F.block(i, c) * ds.segment(F.offset(c), F.dim(c));
      count += flops::mul(F.dim(i), F.dim(c), 1);
    }
  }
  for (auto it = ord.list.rbegin(); it != ord.list.rend(); ++it) {
    const int i = *it;
    auto si = ds.segment(F.offset(i), F.dim(i));
    si = (F.pivot_inverse(i) * si).eval();
    count += flops::mul(F.dim(i), F.dim(i), 1);
    for (int p : ord.all_parents[i]) {
      si -= F.block(i, p) * ds.segment(F.offset(p), F.dim(p));
      count += flops::mul(F.dim(i), F.dim(p), 1);
    }
  }
  if (fc) fc->solve += count;
  return ds;
}

}  // namespace detail

/// Returns ds with F0 ds = -f for the matrix F0 that factor_acyclic consumed.
inline VecX solve_acyclic(const BlockSparseMatrix& F, const VecX& f, const GraphOrdering& ord,
                          FlopCount* fc = nullptr) {
  return detail::solve_with(F, f, ord, ord.all_children, fc);
}

/// Same contract as solve_acyclic for matrices from factor_cyclic.
inline VecX solve_cyclic(const BlockSparseMatrix& F, const VecX& f, const GraphOrdering& ord,
                         FlopCount* fc = nullptr) {
  return detail::solve_with(F, f, ord, ord.all_children, fc);
}

/// Operation count of factor_cyclic + solve_cyclic for block sizes `dims`,
/// computed symbolically without touching numbers.
inline FlopCount flop_count(const GraphOrdering& ord, const std::vector<int>& dims) {
  FlopCount fc;
  auto elim = [&](int i, int c) {
    const int ni = dims[i], nc = dims[c];
    fc.factor += 2 * flops::mul(ni, nc, nc) + flops::mul(ni, nc, nc) + flops::mul(ni, nc, ni);
  };
  for (int i : ord.list) {
    for (int c1 : ord.acyclic_children[i]) elim(i, c1);
    for (int c1 : ord.cyclic_children[i]) {
      const auto& kids = ord.all_children[c1];
      for (int c2 : ord.cyclic_children[i]) {
        if (c1 == c2) break;
        if (std::find(kids.begin(), kids.end(), c2) == kids.end()) continue;
        const int ni = dims[i], n1 = dims[c1], n2 = dims[c2];
        fc.factor += flops::mul(ni, n2, n2) + flops::mul(ni, n2, n1) + flops::mul(n1, n2, n2) +
                     flops::mul(n1, n2, ni);
      }
      elim(i, c1);
    }
    if (dims[i] > 0) fc.factor += flops::inv(dims[i]);
  }
  for (int i : ord.list) {
    for (int c : ord.all_children[i]) fc.solve += flops::mul(dims[i], dims[c], 1);
    fc.solve += flops::mul(dims[i], dims[i], 1);
    for (int p : ord.all_parents[i]) fc.solve += flops::mul(dims[i], dims[p], 1);
  }
  return fc;
}

}  // namespace maxcoord
