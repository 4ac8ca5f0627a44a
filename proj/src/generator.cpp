#include "dagsched/generator.hpp"

#include <algorithm>
#include <random>

#include "dagsched/errors.hpp"

namespace dagsched {

namespace {

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::int64_t uniform_range(std::mt19937_64& rng, std::int64_t lo,
                           std::int64_t hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<std::int64_t>(
                  uniform_unit(rng) * static_cast<double>(hi - lo + 1));
}

struct Skeleton {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::string> names;
};

Skeleton random_dag_skeleton(const GenSpec& spec, std::mt19937_64& rng) {
  Skeleton sk;
  sk.names.reserve(spec.node_count);
  for (int i = 0; i < spec.node_count; ++i) {
    sk.names.push_back("op" + std::to_string(i));
  }
  for (int i = 0; i < spec.node_count; ++i) {
    for (int j = i + 1; j < spec.node_count; ++j) {
      if (uniform_unit(rng) < spec.edge_prob) sk.edges.push_back({i, j});
    }
  }
  return sk;
}

Skeleton layered_chain_skeleton(const GenSpec& spec) {
  Skeleton sk;
  int layers = std::max(1, std::min(spec.layers, spec.node_count));
  int cells = (spec.node_count + layers - 1) / layers;
  auto exists = [&](int l, int c) {
    return l * cells + c < spec.node_count && c < cells;
  };
  for (int i = 0; i < spec.node_count; ++i) {
    int l = i / cells;
    int c = i % cells;
    sk.names.push_back("cell_" + std::to_string(l) + "_" + std::to_string(c));
    if (exists(l, c + 1)) sk.edges.push_back({i, l * cells + c + 1});
    if (exists(l + 1, c)) sk.edges.push_back({i, (l + 1) * cells + c});
  }
  return sk;
}

Skeleton branchy_skeleton(const GenSpec& spec) {
  Skeleton sk;
  int b = std::max(2, spec.branching);
  int prev = -1;  // joins blocks together
  int next_id = 0;
  auto add = [&](const std::string& name) {
    sk.names.push_back(name + std::to_string(next_id));
    return next_id++;
  };
  while (spec.node_count - next_id >= b + 2) {
    int split = add("split");
    if (prev >= 0) sk.edges.push_back({prev, split});
    int join = -1;
    std::vector<int> branches;
    for (int i = 0; i < b; ++i) branches.push_back(add("branch"));
    join = add("join");
    for (int br : branches) {
      sk.edges.push_back({split, br});
      sk.edges.push_back({br, join});
    }
    prev = join;
  }
  while (next_id < spec.node_count) {
    int tail = add("tail");
    if (prev >= 0) sk.edges.push_back({prev, tail});
    prev = tail;
  }
  return sk;
}

// Tracks the graph as already-labeled groups get contracted, so each new
// label is checked against the joint contraction, not the original graph.
// Two separately safe contractions can still be cyclic together.
class ContractionTracker {
 public:
  ContractionTracker(int n, const std::vector<std::pair<int, int>>& edges)
      : parent_(n), edges_(edges) {
    for (int i = 0; i < n; ++i) parent_[i] = i;
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // True iff contracting (src, dst) keeps the contracted graph acyclic:
  // no route from src's group to dst's group besides direct edges.
  bool safe(int src, int dst) {
    int a = find(src);
    int b = find(dst);
    std::vector<std::vector<int>> adj(parent_.size());
    for (const auto& [u, v] : edges_) {
      int ru = find(u);
      int rv = find(v);
      if (ru != rv) adj[ru].push_back(rv);
    }
    std::vector<char> seen(parent_.size(), 0);
    std::vector<int> stack;
    seen[a] = 1;
    for (int v : adj[a]) {
      if (v != b && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == b) return false;
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return true;
  }

  void contract(int src, int dst) {
    int a = find(src);
    int b = find(dst);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
  const std::vector<std::pair<int, int>>& edges_;
};

}  // namespace

GraphFamily parse_family(const std::string& name) {
  if (name == "branchy") return GraphFamily::Branchy;
  if (name == "layered-chain") return GraphFamily::LayeredChain;
  if (name == "random-dag") return GraphFamily::RandomDag;
  throw ValidationError("unknown graph family: " + name);
}

std::string family_name(GraphFamily family) {
  switch (family) {
    case GraphFamily::Branchy:
      return "branchy";
    case GraphFamily::LayeredChain:
      return "layered-chain";
    case GraphFamily::RandomDag:
      return "random-dag";
  }
  return "?";
}

ProfiledGraph generate_graph(const GenSpec& spec) {
  if (spec.node_count < 1) {
    throw ValidationError("node_count must be at least 1");
  }
  if (spec.edge_prob < 0 || spec.edge_prob > 1 ||
      spec.colocate_edge_frac < 0 || spec.colocate_edge_frac > 1 ||
      spec.coplace_frac < 0 || spec.coplace_frac > 1) {
    throw ValidationError("generator fractions must lie in [0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  Skeleton sk;
  switch (spec.family) {
    case GraphFamily::RandomDag:
      sk = random_dag_skeleton(spec, rng);
      break;
    case GraphFamily::LayeredChain:
      sk = layered_chain_skeleton(spec);
      break;
    case GraphFamily::Branchy:
      sk = branchy_skeleton(spec);
      break;
  }

  std::vector<OpNode> nodes(spec.node_count);
  std::vector<bytes_t> out_tensor(spec.node_count);
  for (int i = 0; i < spec.node_count; ++i) {
    OpNode& n = nodes[i];
    n.id = i;
    n.name = sk.names[i];
    n.compute_time_us =
        uniform_range(rng, spec.compute_min_us, spec.compute_max_us);
    n.temp_mem_bytes =
        uniform_range(rng, spec.temp_min_bytes, spec.temp_max_bytes);
    n.perm_mem_bytes =
        uniform_range(rng, spec.perm_min_bytes, spec.perm_max_bytes);
    n.out_mem_bytes =
        uniform_range(rng, spec.out_min_bytes, spec.out_max_bytes);
    out_tensor[i] =
        uniform_range(rng, spec.tensor_min_bytes, spec.tensor_max_bytes);
  }
  std::vector<Edge> edges;
  edges.reserve(sk.edges.size());
  for (const auto& [src, dst] : sk.edges) {
    edges.push_back({src, dst, out_tensor[src]});
  }

  if (spec.colocate_edge_frac > 0) {
    ContractionTracker tracker(spec.node_count, sk.edges);
    int label = 0;
    for (const auto& [src, dst] : sk.edges) {
      if (uniform_unit(rng) >= spec.colocate_edge_frac) continue;
      if (nodes[src].colocation_group || nodes[dst].colocation_group) continue;
      if (!tracker.safe(src, dst)) continue;
      tracker.contract(src, dst);
      std::string name = "g" + std::to_string(label++);
      nodes[src].colocation_group = name;
      nodes[dst].colocation_group = name;
    }
  }
  if (spec.coplace_frac > 0) {
    int pairs = static_cast<int>(spec.coplace_frac * spec.node_count / 2);
    for (int k = 0; k < pairs; ++k) {
      int a = static_cast<int>(uniform_range(rng, 0, spec.node_count - 1));
      int b = static_cast<int>(uniform_range(rng, 0, spec.node_count - 1));
      if (a == b || nodes[a].coplace_pair || nodes[b].coplace_pair) continue;
      nodes[a].coplace_pair = b;
      nodes[b].coplace_pair = a;
    }
  }
  return make_graph(std::move(nodes), std::move(edges));
}

}  // namespace dagsched
