#pragma once

#include <cstdint>
#include <string>

#include "dagsched/graph.hpp"

namespace dagsched {

enum class GraphFamily { Branchy, LayeredChain, RandomDag };

GraphFamily parse_family(const std::string& name);
std::string family_name(GraphFamily family);

// Seeded synthetic-graph recipe. Every out edge of a node carries the same
// tensor size, one output per operator.
struct GenSpec {
  GraphFamily family = GraphFamily::RandomDag;
  int node_count = 10;
  int branching = 3;  // branches per block (branchy)
  int layers = 4;     // stacked chains (layered-chain)
  double edge_prob = 0.3;
  std::uint64_t seed = 0;

  micros_t compute_min_us = 50;
  micros_t compute_max_us = 150;
  bytes_t tensor_min_bytes = 1 << 10;
  bytes_t tensor_max_bytes = 64 << 10;
  bytes_t temp_min_bytes = 0;
  bytes_t temp_max_bytes = 1 << 16;
  bytes_t perm_min_bytes = 1 << 10;
  bytes_t perm_max_bytes = 1 << 20;
  bytes_t out_min_bytes = 1 << 10;
  bytes_t out_max_bytes = 1 << 18;

  // Fraction of edges whose endpoints get a shared colocation label (only
  // edges whose contraction is provably safe are considered) and fraction
  // of nodes joined into coplace pairs.
  double colocate_edge_frac = 0.0;
  double coplace_frac = 0.0;
};

// Deterministic for a fixed spec: same spec, same file bytes.
ProfiledGraph generate_graph(const GenSpec& spec);

}  // namespace dagsched
