#include "dagsched/graph.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "dagsched/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dagsched;
namespace tu = dagsched::testutil;

namespace {

const char* kDiamondJson = R"({
  "nodes": [
    {"id": 0, "name": "A", "compute_time_us": 2, "temp_mem_bytes": 0,
     "perm_mem_bytes": 0, "out_mem_bytes": 0, "colocation_group": null,
     "coplace_pair": null},
    {"id": 1, "name": "B", "compute_time_us": 2, "temp_mem_bytes": 0,
     "perm_mem_bytes": 0, "out_mem_bytes": 0, "colocation_group": null,
     "coplace_pair": null},
    {"id": 2, "name": "C", "compute_time_us": 2, "temp_mem_bytes": 0,
     "perm_mem_bytes": 0, "out_mem_bytes": 0, "colocation_group": null,
     "coplace_pair": null},
    {"id": 3, "name": "D", "compute_time_us": 2, "temp_mem_bytes": 0,
     "perm_mem_bytes": 0, "out_mem_bytes": 0, "colocation_group": null,
     "coplace_pair": null}
  ],
  "edges": [
    {"src": 0, "dst": 1, "tensor_bytes": 8},
    {"src": 0, "dst": 2, "tensor_bytes": 8},
    {"src": 1, "dst": 3, "tensor_bytes": 8},
    {"src": 2, "dst": 3, "tensor_bytes": 8}
  ]
})";

// Full reachability from src with the direct edge removed, independent of
// the DFS inside detect_cycle_after_merge.
bool bfs_alternate_path(const ProfiledGraph& g, NodeId a, NodeId b) {
  int src = g.index_of(a);
  int dst = g.index_of(b);
  std::vector<std::vector<int>> adj(g.node_count());
  for (const Edge& e : g.edges) {
    if (e.src == a && e.dst == b) continue;
    adj[g.index_of(e.src)].push_back(g.index_of(e.dst));
  }
  std::vector<char> seen(g.node_count(), 0);
  std::vector<int> queue{src};
  seen[src] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (int v : adj[queue[head]]) {
      if (!seen[v]) {
        seen[v] = 1;
        queue.push_back(v);
      }
    }
  }
  return seen[dst];
}

}  // namespace

TEST_CASE("well-formed diamond file loads") {
  ProfiledGraph g = parse_graph(kDiamondJson);
  CHECK(g.node_count() == 4);
  CHECK(g.edge_count() == 4);
  CHECK(g.nodes[1].name == "B");
  CHECK(g.edges[0].tensor_bytes == 8);
}

TEST_CASE("graph json round trip is exact") {
  ProfiledGraph g = parse_graph(kDiamondJson);
  CHECK(parse_graph(graph_to_json(g)) == g);

  std::mt19937_64 rng(7);
  tu::RandomDagSpec spec;
  spec.coplace_frac = 0.4;
  spec.colocate_node_frac = 0.3;
  for (int trial = 0; trial < 100; ++trial) {
    ProfiledGraph r = tu::random_dag(rng, spec);
    CHECK(parse_graph(graph_to_json(r)) == r);
  }
}

TEST_CASE("cycle on load names one cycle") {
  std::string text = kDiamondJson;
  text.replace(text.find("{\"src\": 2"), 0,
               "{\"src\": 3, \"dst\": 0, \"tensor_bytes\": 1},\n    ");
  try {
    parse_graph(text);
    FAIL("expected a cycle error");
  } catch (const CycleError& e) {
    std::set<NodeId> cycle(e.cycle().begin(), e.cycle().end());
    bool left = cycle == std::set<NodeId>{0, 1, 3};
    bool right = cycle == std::set<NodeId>{0, 2, 3};
    CHECK((left || right));
  }
}

TEST_CASE("dangling edge reference is rejected") {
  std::string text = kDiamondJson;
  text.replace(text.find("{\"src\": 2"), 0,
               "{\"src\": 99, \"dst\": 0, \"tensor_bytes\": 1},\n    ");
  CHECK_THROWS_WITH_AS(parse_graph(text),
                       doctest::Contains("dangling reference"),
                       ValidationError);
}

TEST_CASE("unknown and missing keys are rejected") {
  std::string unknown = kDiamondJson;
  unknown.replace(unknown.find("\"nodes\""), 0, "\"extra\": 1, ");
  CHECK_THROWS_AS(parse_graph(unknown), ValidationError);

  std::string bad_node = kDiamondJson;
  bad_node.replace(bad_node.find("\"name\": \"A\""), 12, "\"label\": \"A\"");
  CHECK_THROWS_AS(parse_graph(bad_node), ValidationError);
}

TEST_CASE("field validation") {
  CHECK_THROWS_AS(make_graph({tu::node(0, -5)}, {}), ValidationError);
  CHECK_THROWS_AS(make_graph({tu::node(0, 1), tu::node(0, 1)}, {}),
                  ValidationError);
  CHECK_THROWS_AS(make_graph({tu::node(0, 1)}, {{0, 0, 1}}), ValidationError);
  CHECK_THROWS_AS(
      make_graph({tu::node(0, 1), tu::node(1, 1)}, {{0, 1, 1}, {0, 1, 2}}),
      ValidationError);
  // coplace pairs must be symmetric
  auto a = tu::node(0, 1);
  a.coplace_pair = 1;
  CHECK_THROWS_AS(make_graph({a, tu::node(1, 1)}, {}), ValidationError);
}

TEST_CASE("topo order on the diamond, a chain and a point") {
  CHECK(topo_order(tu::diamond()) == std::vector<int>{0, 1, 2, 3});
  CHECK(topo_order(tu::chain(3)) == std::vector<int>{0, 1, 2});
  CHECK(topo_order(make_graph({tu::node(5, 1)}, {})) == std::vector<int>{0});
}

TEST_CASE("topo order is a precedence-respecting permutation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    ProfiledGraph g = tu::random_dag(rng, {});
    std::vector<int> order = topo_order(g);
    REQUIRE(static_cast<int>(order.size()) == g.node_count());
    std::vector<int> pos(g.node_count());
    std::set<int> unique(order.begin(), order.end());
    CHECK(static_cast<int>(unique.size()) == g.node_count());
    for (int i = 0; i < g.node_count(); ++i) pos[order[i]] = i;
    for (const Edge& e : g.edges) {
      CHECK(pos[g.index_of(e.src)] < pos[g.index_of(e.dst)]);
    }
  }
}

TEST_CASE("merge-cycle detection on the named cases") {
  CHECK_FALSE(detect_cycle_after_merge(tu::diamond(), 0, 1));
  CHECK_FALSE(detect_cycle_after_merge(tu::chain(3), 0, 1));
  ProfiledGraph g = make_graph({tu::node(0, 1), tu::node(1, 1), tu::node(2, 1)},
                               {{0, 1, 0}, {0, 2, 0}, {2, 1, 0}});
  CHECK(detect_cycle_after_merge(g, 0, 1));
  CHECK_THROWS_AS(detect_cycle_after_merge(tu::diamond(), 0, 3),
                  ValidationError);
}

TEST_CASE("merge-cycle detection agrees with a BFS oracle") {
  std::mt19937_64 rng(13);
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    ProfiledGraph g = tu::random_dag(rng, {});
    if (g.edge_count() == 0) continue;
    const Edge& e =
        g.edges[tu::range_draw(rng, 0, g.edge_count() - 1)];
    CHECK(detect_cycle_after_merge(g, e.src, e.dst) ==
          bfs_alternate_path(g, e.src, e.dst));
    ++checked;
  }
  CHECK(checked > 8000);  // the rest drew no edges
}
