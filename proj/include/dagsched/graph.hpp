#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dagsched {

using NodeId = std::int64_t;    // external id, unique per graph
using micros_t = std::int64_t;  // integer microseconds
using bytes_t = std::int64_t;   // integer bytes

// One profiled operator. Times and memory are integral so all downstream
// arithmetic is exact.
struct OpNode {
  NodeId id = 0;
  std::string name;
  micros_t compute_time_us = 0;
  bytes_t temp_mem_bytes = 0;  // live only while the operator runs
  bytes_t perm_mem_bytes = 0;  // held for the whole run
  bytes_t out_mem_bytes = 0;   // holds this operator's outputs
  std::optional<std::string> colocation_group;
  std::optional<NodeId> coplace_pair;  // symmetric peer, placement affinity

  bool operator==(const OpNode&) const = default;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  bytes_t tensor_bytes = 0;

  bool operator==(const Edge&) const = default;
};

// Validated operator DAG. Immutable after construction; nodes are kept
// sorted by id so the dense index of a node is its position, and edges are
// sorted by (src index, dst index). Safe to share read-only across threads.
struct ProfiledGraph {
  std::vector<OpNode> nodes;  // ascending id
  std::vector<Edge> edges;    // ascending (src index, dst index)

  // Adjacency by dense node index; values are edge indices.
  std::vector<std::vector<int>> out_edges;
  std::vector<std::vector<int>> in_edges;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }

  // Dense index of an external id; throws ValidationError if unknown.
  int index_of(NodeId id) const;

  bool operator==(const ProfiledGraph& other) const {
    return nodes == other.nodes && edges == other.edges;
  }
};

// Validates invariants (unique ids, non-negative fields, symmetric coplace
// pairs, unique intra-graph edges, acyclicity) and builds adjacency.
// Throws ValidationError / CycleError.
ProfiledGraph make_graph(std::vector<OpNode> nodes, std::vector<Edge> edges);

// Interchange format: {"nodes": [...], "edges": [...]}. Unknown or missing
// keys are rejected. load_graph(save_graph(g)) == g field for field.
ProfiledGraph load_graph(const std::string& path);
ProfiledGraph parse_graph(const std::string& json_text);
std::string graph_to_json(const ProfiledGraph& g);
void save_graph(const ProfiledGraph& g, const std::string& path);

// Deterministic topological order of dense node indices: for every edge
// u -> v, u precedes v; ties broken by ascending node id.
std::vector<int> topo_order(const ProfiledGraph& g);

// True iff contracting the existing edge a -> b would create a cycle, i.e.
// a path a ~> b exists besides the direct edge. Exact reachability check.
bool detect_cycle_after_merge(const ProfiledGraph& g, NodeId a, NodeId b);

}  // namespace dagsched
