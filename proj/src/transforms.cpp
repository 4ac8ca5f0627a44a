#include "dagsched/transforms.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "dagsched/errors.hpp"

namespace dagsched {

namespace {

struct Agg {
  bytes_t bytes = 0;
  int count = 0;
};

// Union-find over the meta nodes of an input grouping, with incrementally
// maintained aggregated adjacency between live roots. Neighbor maps are
// always keyed by live roots; unite() re-keys the moved entries.
class GroupMerger {
 public:
  explicit GroupMerger(const GroupedGraph& in) : in_(in) {
    int n = in.node_count();
    parent_.resize(n);
    min_member_.resize(n);
    succ_.resize(n);
    pred_.resize(n);
    out_base_.assign(n, 0);
    in_base_.assign(n, 0);
    for (int g = 0; g < n; ++g) {
      parent_[g] = g;
      min_member_[g] = in.nodes[g].members.front();
    }
    for (const MetaEdge& e : in.edges) {
      succ_[e.src][e.dst] = Agg{e.tensor_bytes, e.base_count};
      pred_[e.dst][e.src] = Agg{e.tensor_bytes, e.base_count};
      out_base_[e.src] += e.base_count;
      in_base_[e.dst] += e.base_count;
    }
  }

  int find(int g) {
    while (parent_[g] != g) {
      parent_[g] = parent_[parent_[g]];
      g = parent_[g];
    }
    return g;
  }

  int out_base(int root) const { return out_base_[root]; }
  int in_base(int root) const { return in_base_[root]; }
  int min_member(int root) const { return min_member_[root]; }

  // Merges the groups of x and y; returns the surviving root.
  int unite(int x, int y) {
    int a = find(x);
    int b = find(y);
    if (a == b) return a;
    int s = a;
    int l = b;
    if (succ_[s].size() + pred_[s].size() <
        succ_[l].size() + pred_[l].size()) {
      std::swap(s, l);
    }
    min_member_[s] = std::min(min_member_[s], min_member_[l]);

    // Drop edges between the two groups; they become internal.
    if (auto it = succ_[s].find(l); it != succ_[s].end()) {
      out_base_[s] -= it->second.count;
      succ_[s].erase(it);
      pred_[l].erase(s);
    }
    if (auto it = pred_[s].find(l); it != pred_[s].end()) {
      in_base_[s] -= it->second.count;
      pred_[s].erase(it);
      succ_[l].erase(s);
    }

    for (const auto& [t, agg] : succ_[l]) {
      Agg& slot = succ_[s][t];
      slot.bytes += agg.bytes;
      slot.count += agg.count;
      out_base_[s] += agg.count;
      Agg moved = pred_[t][l];
      pred_[t].erase(l);
      Agg& rslot = pred_[t][s];
      rslot.bytes += moved.bytes;
      rslot.count += moved.count;
    }
    for (const auto& [t, agg] : pred_[l]) {
      Agg& slot = pred_[s][t];
      slot.bytes += agg.bytes;
      slot.count += agg.count;
      in_base_[s] += agg.count;
      Agg moved = succ_[t][l];
      succ_[t].erase(l);
      Agg& rslot = succ_[t][s];
      rslot.bytes += moved.bytes;
      rslot.count += moved.count;
    }
    succ_[l].clear();
    pred_[l].clear();
    parent_[l] = s;
    return s;
  }

  // Live edges sorted by (min member of src, min member of dst).
  struct EdgeRef {
    int src_key;
    int dst_key;
    int src_root;
    int dst_root;
  };
  std::vector<EdgeRef> snapshot_edges() {
    std::vector<EdgeRef> out;
    for (int g = 0; g < static_cast<int>(parent_.size()); ++g) {
      if (find(g) != g) continue;
      for (const auto& [t, agg] : succ_[g]) {
        out.push_back({min_member_[g], min_member_[t], g, t});
      }
    }
    std::sort(out.begin(), out.end(), [](const EdgeRef& a, const EdgeRef& b) {
      return std::pair(a.src_key, a.dst_key) < std::pair(b.src_key, b.dst_key);
    });
    return out;
  }

  // True iff a path a ~> b exists among live roots, excluding the direct
  // a -> b edge if present.
  bool path_besides_edge(int a, int b) {
    a = find(a);
    b = find(b);
    std::set<int> visited{a};
    std::vector<int> stack;
    for (const auto& [t, agg] : succ_[a]) {
      if (t == b) continue;
      if (visited.insert(t).second) stack.push_back(t);
    }
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == b) return true;
      for (const auto& [t, agg] : succ_[u]) {
        if (visited.insert(t).second) stack.push_back(t);
      }
    }
    return false;
  }

  bool any_path(int a, int b) {
    a = find(a);
    b = find(b);
    std::set<int> visited{a};
    std::vector<int> stack{a};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == b) return true;
      for (const auto& [t, agg] : succ_[u]) {
        if (visited.insert(t).second) stack.push_back(t);
      }
    }
    return false;
  }

  // Canonical result: groups renumbered by ascending smallest base member,
  // aggregates combined from the input grouping's meta fields.
  GroupedGraph build() {
    int n = static_cast<int>(parent_.size());
    std::vector<int> roots;
    for (int g = 0; g < n; ++g) {
      if (find(g) == g) roots.push_back(g);
    }
    std::sort(roots.begin(), roots.end(), [&](int a, int b) {
      return min_member_[a] < min_member_[b];
    });
    std::vector<int> index_of_root(n, -1);
    for (int i = 0; i < static_cast<int>(roots.size()); ++i) {
      index_of_root[roots[i]] = i;
    }

    GroupedGraph out;
    out.base = in_.base;
    out.nodes.resize(roots.size());
    for (int g = 0; g < n; ++g) {
      MetaNode& m = out.nodes[index_of_root[find(g)]];
      const MetaNode& src = in_.nodes[g];
      m.members.insert(m.members.end(), src.members.begin(),
                       src.members.end());
      m.compute_time_us += src.compute_time_us;
      m.temp_mem_bytes = std::max(m.temp_mem_bytes, src.temp_mem_bytes);
      m.perm_mem_bytes += src.perm_mem_bytes;
      m.out_mem_bytes += src.out_mem_bytes;
    }
    for (MetaNode& m : out.nodes) {
      std::sort(m.members.begin(), m.members.end());
    }
    for (int r : roots) {
      for (const auto& [t, agg] : succ_[r]) {
        out.edges.push_back(
            {index_of_root[r], index_of_root[t], agg.bytes, agg.count});
      }
    }
    std::sort(out.edges.begin(), out.edges.end(),
              [](const MetaEdge& a, const MetaEdge& b) {
                return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
              });
    out.group_of.assign(in_.base ? in_.base->node_count() : 0, -1);
    for (int base_idx = 0;
         base_idx < static_cast<int>(out.group_of.size()); ++base_idx) {
      out.group_of[base_idx] = index_of_root[find(in_.group_of[base_idx])];
    }
    out.out_edges.assign(out.node_count(), {});
    out.in_edges.assign(out.node_count(), {});
    for (int e = 0; e < out.edge_count(); ++e) {
      out.out_edges[out.edges[e].src].push_back(e);
      out.in_edges[out.edges[e].dst].push_back(e);
    }
    return out;
  }

  int built_index(int root) {
    // Index the root would get in build(); equals the rank of its min member.
    int key = min_member_[find(root)];
    int rank = 0;
    int n = static_cast<int>(parent_.size());
    for (int g = 0; g < n; ++g) {
      if (find(g) == g && min_member_[g] < key) ++rank;
    }
    return rank;
  }

 private:
  const GroupedGraph& in_;
  std::vector<int> parent_;
  std::vector<int> min_member_;
  std::vector<std::map<int, Agg>> succ_;
  std::vector<std::map<int, Agg>> pred_;
  std::vector<int> out_base_;
  std::vector<int> in_base_;
};

// Union-find over base nodes for the affinity relation used by fusion.
std::vector<int> base_affinity_roots(const ProfiledGraph& base) {
  int n = base.node_count();
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  std::map<std::string, int> first_with_label;
  for (int i = 0; i < n; ++i) {
    const OpNode& node = base.nodes[i];
    if (node.colocation_group) {
      auto [it, inserted] =
          first_with_label.emplace(*node.colocation_group, i);
      if (!inserted) unite(it->second, i);
    }
    if (node.coplace_pair) {
      unite(i, base.index_of(*node.coplace_pair));
    }
  }
  std::vector<int> roots(n);
  for (int i = 0; i < n; ++i) roots[i] = find(i);
  return roots;
}

}  // namespace

int GroupedGraph::base_out_degree(int meta) const {
  int d = 0;
  for (int e : out_edges[meta]) d += edges[e].base_count;
  return d;
}

int GroupedGraph::base_in_degree(int meta) const {
  int d = 0;
  for (int e : in_edges[meta]) d += edges[e].base_count;
  return d;
}

micros_t GroupedGraph::total_compute_us() const {
  micros_t sum = 0;
  for (const MetaNode& m : nodes) sum += m.compute_time_us;
  return sum;
}

GroupedGraph singleton_groups(std::shared_ptr<const ProfiledGraph> base) {
  GroupedGraph gg;
  gg.base = base;
  const ProfiledGraph& g = *base;
  gg.nodes.resize(g.node_count());
  gg.group_of.resize(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) {
    const OpNode& n = g.nodes[i];
    gg.nodes[i] = {{i},
                   n.compute_time_us,
                   n.temp_mem_bytes,
                   n.perm_mem_bytes,
                   n.out_mem_bytes};
    gg.group_of[i] = i;
  }
  gg.edges.reserve(g.edge_count());
  for (const Edge& e : g.edges) {
    gg.edges.push_back(
        {g.index_of(e.src), g.index_of(e.dst), e.tensor_bytes, 1});
  }
  gg.out_edges.assign(g.node_count(), {});
  gg.in_edges.assign(g.node_count(), {});
  for (int e = 0; e < gg.edge_count(); ++e) {
    gg.out_edges[gg.edges[e].src].push_back(e);
    gg.in_edges[gg.edges[e].dst].push_back(e);
  }
  return gg;
}

GroupedGraph apply_colocation(const GroupedGraph& gg) {
  GroupMerger merger(gg);
  const ProfiledGraph& base = *gg.base;
  std::map<std::string, int> first_group;
  for (int i = 0; i < base.node_count(); ++i) {
    if (!base.nodes[i].colocation_group) continue;
    auto [it, inserted] =
        first_group.emplace(*base.nodes[i].colocation_group, gg.group_of[i]);
    if (!inserted) merger.unite(it->second, gg.group_of[i]);
  }
  GroupedGraph out = merger.build();
  try {
    meta_topo_order(out);
  } catch (const CycleError& e) {
    throw CycleError(std::string("colocation-induced cycle: ") + e.what(),
                     e.cycle());
  }
  return out;
}

GroupedGraph apply_colocation(std::shared_ptr<const ProfiledGraph> base) {
  return apply_colocation(singleton_groups(std::move(base)));
}

GroupedGraph apply_coplacement(const GroupedGraph& gg) {
  GroupMerger merger(gg);
  const ProfiledGraph& base = *gg.base;

  // Coplace pairs first. A pair whose contraction would close a cycle is
  // skipped; it remains affinity metadata for fusion.
  for (int i = 0; i < base.node_count(); ++i) {
    if (!base.nodes[i].coplace_pair) continue;
    int peer = base.index_of(*base.nodes[i].coplace_pair);
    if (peer < i) continue;  // each pair once, ascending
    int a = merger.find(gg.group_of[i]);
    int b = merger.find(gg.group_of[peer]);
    if (a == b) continue;
    if (merger.path_besides_edge(a, b) || merger.path_besides_edge(b, a)) {
      continue;
    }
    merger.unite(a, b);
  }

  // An output consumed over a single base edge never needs a transfer;
  // merge producer into consumer, repeated to a fixpoint.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& ref : merger.snapshot_edges()) {
      int a = merger.find(ref.src_root);
      int b = merger.find(ref.dst_root);
      if (a == b) continue;
      if (merger.out_base(a) == 1) {
        merger.unite(a, b);
        changed = true;
      }
    }
  }
  return merger.build();
}

GroupedGraph fuse_operators(const GroupedGraph& gg,
                            const MergeObserver& observer) {
  GroupMerger merger(gg);
  const ProfiledGraph& base = *gg.base;
  std::vector<int> aff = base_affinity_roots(base);

  std::vector<int> aff_size(base.node_count(), 0);
  for (int r : aff) aff_size[r]++;
  // Affinity root sets per merger root; singleton affinity classes carry no
  // information and are dropped.
  std::vector<std::set<int>> aff_sets(gg.node_count());
  for (int i = 0; i < base.node_count(); ++i) {
    if (aff_size[aff[i]] >= 2) {
      aff_sets[merger.find(gg.group_of[i])].insert(aff[i]);
    }
  }
  auto affine = [&](int a, int b) {
    const std::set<int>& sa = aff_sets[a];
    const std::set<int>& sb = aff_sets[b];
    if (sa.empty() || sb.empty()) return false;
    auto ia = sa.begin();
    auto ib = sb.begin();
    while (ia != sa.end() && ib != sb.end()) {
      if (*ia == *ib) return true;
      if (*ia < *ib) {
        ++ia;
      } else {
        ++ib;
      }
    }
    return false;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& ref : merger.snapshot_edges()) {
      int a = merger.find(ref.src_root);
      int b = merger.find(ref.dst_root);
      if (a == b) continue;
      if (!affine(a, b)) continue;
      if (merger.out_base(a) != 1 && merger.in_base(b) != 1) continue;
      if (observer) {
        observer(merger.build(), merger.built_index(a), merger.built_index(b));
      }
      int survivor = merger.unite(a, b);
      int loser = survivor == a ? b : a;
      aff_sets[survivor].insert(aff_sets[loser].begin(),
                                aff_sets[loser].end());
      aff_sets[loser].clear();
      changed = true;
    }
  }
  return merger.build();
}

std::vector<int> meta_topo_order(const GroupedGraph& gg) {
  std::vector<int> indeg(gg.node_count(), 0);
  for (const MetaEdge& e : gg.edges) indeg[e.dst]++;
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < gg.node_count(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  order.reserve(gg.node_count());
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int e : gg.out_edges[u]) {
      if (--indeg[gg.edges[e].dst] == 0) ready.push(gg.edges[e].dst);
    }
  }
  if (static_cast<int>(order.size()) != gg.node_count()) {
    std::vector<NodeId> stuck;
    for (int i = 0; i < gg.node_count(); ++i) {
      if (indeg[i] > 0 && gg.base) {
        stuck.push_back(gg.base->nodes[gg.nodes[i].members.front()].id);
      }
    }
    std::ostringstream msg;
    msg << "meta graph is cyclic; groups of base node ids {";
    for (std::size_t i = 0; i < stuck.size(); ++i) {
      msg << (i ? ", " : "") << stuck[i];
    }
    msg << "} remain";
    throw CycleError(msg.str(), stuck);
  }
  return order;
}

bool meta_path_besides_edge(const GroupedGraph& gg, int src, int dst) {
  std::vector<char> visited(gg.node_count(), 0);
  std::vector<int> stack;
  visited[src] = 1;
  for (int e : gg.out_edges[src]) {
    int v = gg.edges[e].dst;
    if (v == dst) continue;
    if (!visited[v]) {
      visited[v] = 1;
      stack.push_back(v);
    }
  }
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    if (u == dst) return true;
    for (int e : gg.out_edges[u]) {
      int v = gg.edges[e].dst;
      if (!visited[v]) {
        visited[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return false;
}

}  // namespace dagsched
