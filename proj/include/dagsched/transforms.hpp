#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dagsched/graph.hpp"

namespace dagsched {

// A schedulable unit aggregating one or more base operators.
// compute/perm/out are sums over members; temp is the max over members,
// since members run back to back and temporaries are released at each
// member's finish.
struct MetaNode {
  std::vector<int> members;  // base node indices, ascending
  micros_t compute_time_us = 0;
  bytes_t temp_mem_bytes = 0;
  bytes_t perm_mem_bytes = 0;
  bytes_t out_mem_bytes = 0;
};

// Aggregated edge between two meta nodes. tensor_bytes sums the crossing
// base edges; base_count keeps how many base edges the meta edge stands
// for, which is what the degree-based merge rules count.
struct MetaEdge {
  int src = 0;
  int dst = 0;
  bytes_t tensor_bytes = 0;
  int base_count = 1;
};

// Partition of a ProfiledGraph into meta nodes plus the induced meta DAG.
// Meta nodes are numbered by ascending smallest member index; intra-group
// base edges are dropped and contribute no communication.
struct GroupedGraph {
  std::shared_ptr<const ProfiledGraph> base;
  std::vector<MetaNode> nodes;
  std::vector<MetaEdge> edges;  // ascending (src, dst), unique
  std::vector<int> group_of;    // base index -> meta index

  std::vector<std::vector<int>> out_edges;  // meta index -> edge indices
  std::vector<std::vector<int>> in_edges;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }

  // Number of base edges leaving / entering the meta node.
  int base_out_degree(int meta) const;
  int base_in_degree(int meta) const;

  micros_t total_compute_us() const;
};

// Every base node in its own group.
GroupedGraph singleton_groups(std::shared_ptr<const ProfiledGraph> base);

// Merges nodes that share a colocation_group label into one meta node.
// Throws CycleError when a colocation group makes the meta graph cyclic;
// colocation is a hard requirement, so the group is never split instead.
GroupedGraph apply_colocation(std::shared_ptr<const ProfiledGraph> base);
GroupedGraph apply_colocation(const GroupedGraph& gg);

// Merges coplace_pair peers, then repeatedly merges every meta edge whose
// source has exactly one outgoing base edge, until a fixpoint. A pair merge
// that would create a cycle is skipped; the pair still counts as placement
// affinity for fuse_operators.
GroupedGraph apply_coplacement(const GroupedGraph& gg);

// Called just before each fusion merge with the current grouping and the
// meta edge endpoints about to merge. Used by tests to cross-check the
// degree rule against exact reachability.
using MergeObserver = std::function<void(const GroupedGraph&, int src_meta,
                                         int dst_meta)>;

// Merges directly connected meta nodes that share placement affinity
// (a colocation label or a coplace pair between any of their members) when
// the source has at most one outgoing base edge or the destination has at
// most one incoming base edge. The rule is conservative: either condition
// rules out any alternate source ~> destination path, so contraction can
// never create a cycle.
GroupedGraph fuse_operators(const GroupedGraph& gg,
                            const MergeObserver& observer = {});

// Deterministic topological order of meta indices; throws CycleError if the
// meta graph is cyclic (used as the acyclicity check after transforms).
std::vector<int> meta_topo_order(const GroupedGraph& gg);

// True iff some path src ~> dst exists in the meta graph without using the
// direct edge. Exact oracle used to validate merges.
bool meta_path_besides_edge(const GroupedGraph& gg, int src, int dst);

}  // namespace dagsched
