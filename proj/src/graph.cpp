#include "dagsched/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "dagsched/errors.hpp"
#include "json.hpp"

namespace dagsched {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const char* what) {
  if (!obj.is_object()) {
    throw ValidationError(std::string("parse error: ") + what +
                          " is not a JSON object");
  }
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError(std::string("parse error: unknown key \"") +
                            item.key() + "\" in " + what);
    }
  }
  for (const auto& key : allowed) {
    if (!obj.contains(key)) {
      throw ValidationError(std::string("parse error: missing key \"") + key +
                            "\" in " + what);
    }
  }
}

std::int64_t require_count(const json& v, const char* what, const char* key) {
  if (!v.is_number_integer()) {
    throw ValidationError(std::string("parse error: ") + what + "." + key +
                          " must be an integer");
  }
  std::int64_t n = v.get<std::int64_t>();
  if (n < 0) {
    throw ValidationError(std::string("parse error: ") + what + "." + key +
                          " must be non-negative");
  }
  return n;
}

// Extracts one cycle from the subgraph of nodes that Kahn's algorithm could
// not remove: follow the first surviving out-edge until a node repeats.
std::vector<NodeId> extract_cycle(const ProfiledGraph& g,
                                  const std::vector<char>& remains) {
  int start = -1;
  for (int i = 0; i < g.node_count(); ++i) {
    if (remains[i]) {
      start = i;
      break;
    }
  }
  std::vector<int> path;
  std::vector<int> pos_in_path(g.node_count(), -1);
  int cur = start;
  while (pos_in_path[cur] < 0) {
    pos_in_path[cur] = static_cast<int>(path.size());
    path.push_back(cur);
    int next = -1;
    for (int e : g.out_edges[cur]) {
      int dst = g.index_of(g.edges[e].dst);
      if (remains[dst]) {
        next = dst;
        break;
      }
    }
    cur = next;
  }
  std::vector<NodeId> cycle;
  for (std::size_t i = pos_in_path[cur]; i < path.size(); ++i) {
    cycle.push_back(g.nodes[path[i]].id);
  }
  return cycle;
}

}  // namespace

int ProfiledGraph::index_of(NodeId id) const {
  auto it = std::lower_bound(
      nodes.begin(), nodes.end(), id,
      [](const OpNode& n, NodeId v) { return n.id < v; });
  if (it == nodes.end() || it->id != id) {
    throw ValidationError("dangling reference: unknown node id " +
                          std::to_string(id));
  }
  return static_cast<int>(it - nodes.begin());
}

ProfiledGraph make_graph(std::vector<OpNode> nodes, std::vector<Edge> edges) {
  ProfiledGraph g;
  std::sort(nodes.begin(), nodes.end(),
            [](const OpNode& a, const OpNode& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].id == nodes[i - 1].id) {
      throw ValidationError("duplicate node id " +
                            std::to_string(nodes[i].id));
    }
  }
  g.nodes = std::move(nodes);

  for (const OpNode& n : g.nodes) {
    if (n.compute_time_us < 0 || n.temp_mem_bytes < 0 ||
        n.perm_mem_bytes < 0 || n.out_mem_bytes < 0) {
      throw ValidationError("node " + std::to_string(n.id) +
                            " has a negative field");
    }
  }
  // coplace_pair must reference an existing node and be symmetric.
  for (const OpNode& n : g.nodes) {
    if (!n.coplace_pair) continue;
    NodeId peer = *n.coplace_pair;
    if (peer == n.id) {
      throw ValidationError("node " + std::to_string(n.id) +
                            " coplace_pair references itself");
    }
    const OpNode& p = g.nodes[g.index_of(peer)];
    if (!p.coplace_pair || *p.coplace_pair != n.id) {
      throw ValidationError("coplace_pair between " + std::to_string(n.id) +
                            " and " + std::to_string(peer) +
                            " is not symmetric");
    }
  }

  for (Edge& e : edges) {
    if (e.tensor_bytes < 0) {
      throw ValidationError("edge " + std::to_string(e.src) + "->" +
                            std::to_string(e.dst) + " has negative bytes");
    }
    if (e.src == e.dst) {
      throw ValidationError("self edge on node " + std::to_string(e.src));
    }
    g.index_of(e.src);  // throws on dangling refs
    g.index_of(e.dst);
  }
  std::sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
    return std::pair(g.index_of(a.src), g.index_of(a.dst)) <
           std::pair(g.index_of(b.src), g.index_of(b.dst));
  });
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i].src == edges[i - 1].src && edges[i].dst == edges[i - 1].dst) {
      throw ValidationError("duplicate edge " + std::to_string(edges[i].src) +
                            "->" + std::to_string(edges[i].dst));
    }
  }
  g.edges = std::move(edges);

  g.out_edges.assign(g.node_count(), {});
  g.in_edges.assign(g.node_count(), {});
  for (int e = 0; e < g.edge_count(); ++e) {
    g.out_edges[g.index_of(g.edges[e].src)].push_back(e);
    g.in_edges[g.index_of(g.edges[e].dst)].push_back(e);
  }

  // Acyclicity via Kahn; leftover nodes sit on at least one cycle.
  std::vector<int> indeg(g.node_count(), 0);
  for (const Edge& e : g.edges) indeg[g.index_of(e.dst)]++;
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < g.node_count(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  int seen = 0;
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    ++seen;
    for (int e : g.out_edges[u]) {
      int v = g.index_of(g.edges[e].dst);
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (seen != g.node_count()) {
    std::vector<char> remains(g.node_count(), 0);
    for (int i = 0; i < g.node_count(); ++i) remains[i] = indeg[i] > 0;
    std::vector<NodeId> cycle = extract_cycle(g, remains);
    std::ostringstream msg;
    msg << "graph has a cycle through node ids {";
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      msg << (i ? ", " : "") << cycle[i];
    }
    msg << "}";
    throw CycleError(msg.str(), cycle);
  }
  return g;
}

ProfiledGraph parse_graph(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("parse error: ") + e.what());
  }
  check_keys(doc, {"nodes", "edges"}, "graph");
  if (!doc["nodes"].is_array() || !doc["edges"].is_array()) {
    throw ValidationError("parse error: nodes and edges must be arrays");
  }

  std::vector<OpNode> nodes;
  for (const json& jn : doc["nodes"]) {
    check_keys(jn,
               {"id", "name", "compute_time_us", "temp_mem_bytes",
                "perm_mem_bytes", "out_mem_bytes", "colocation_group",
                "coplace_pair"},
               "node");
    OpNode n;
    if (!jn["id"].is_number_integer()) {
      throw ValidationError("parse error: node.id must be an integer");
    }
    n.id = jn["id"].get<NodeId>();
    if (!jn["name"].is_string()) {
      throw ValidationError("parse error: node.name must be a string");
    }
    n.name = jn["name"].get<std::string>();
    n.compute_time_us = require_count(jn["compute_time_us"], "node",
                                      "compute_time_us");
    n.temp_mem_bytes = require_count(jn["temp_mem_bytes"], "node",
                                     "temp_mem_bytes");
    n.perm_mem_bytes = require_count(jn["perm_mem_bytes"], "node",
                                     "perm_mem_bytes");
    n.out_mem_bytes = require_count(jn["out_mem_bytes"], "node",
                                    "out_mem_bytes");
    if (jn["colocation_group"].is_string()) {
      n.colocation_group = jn["colocation_group"].get<std::string>();
    } else if (!jn["colocation_group"].is_null()) {
      throw ValidationError(
          "parse error: node.colocation_group must be a string or null");
    }
    if (jn["coplace_pair"].is_number_integer()) {
      n.coplace_pair = jn["coplace_pair"].get<NodeId>();
    } else if (!jn["coplace_pair"].is_null()) {
      throw ValidationError(
          "parse error: node.coplace_pair must be an integer or null");
    }
    nodes.push_back(std::move(n));
  }

  std::vector<Edge> edges;
  for (const json& je : doc["edges"]) {
    check_keys(je, {"src", "dst", "tensor_bytes"}, "edge");
    Edge e;
    if (!je["src"].is_number_integer() || !je["dst"].is_number_integer()) {
      throw ValidationError("parse error: edge endpoints must be integers");
    }
    e.src = je["src"].get<NodeId>();
    e.dst = je["dst"].get<NodeId>();
    e.tensor_bytes = require_count(je["tensor_bytes"], "edge", "tensor_bytes");
    edges.push_back(e);
  }
  return make_graph(std::move(nodes), std::move(edges));
}

ProfiledGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open graph file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

std::string graph_to_json(const ProfiledGraph& g) {
  ordered_json doc;
  doc["nodes"] = ordered_json::array();
  for (const OpNode& n : g.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["name"] = n.name;
    jn["compute_time_us"] = n.compute_time_us;
    jn["temp_mem_bytes"] = n.temp_mem_bytes;
    jn["perm_mem_bytes"] = n.perm_mem_bytes;
    jn["out_mem_bytes"] = n.out_mem_bytes;
    if (n.colocation_group) {
      jn["colocation_group"] = *n.colocation_group;
    } else {
      jn["colocation_group"] = nullptr;
    }
    if (n.coplace_pair) {
      jn["coplace_pair"] = *n.coplace_pair;
    } else {
      jn["coplace_pair"] = nullptr;
    }
    doc["nodes"].push_back(std::move(jn));
  }
  doc["edges"] = ordered_json::array();
  for (const Edge& e : g.edges) {
    doc["edges"].push_back(
        {{"src", e.src}, {"dst", e.dst}, {"tensor_bytes", e.tensor_bytes}});
  }
  return doc.dump(2) + "\n";
}

void save_graph(const ProfiledGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cannot write graph file: " + path);
  }
  out << graph_to_json(g);
}

std::vector<int> topo_order(const ProfiledGraph& g) {
  std::vector<int> indeg(g.node_count(), 0);
  for (const Edge& e : g.edges) indeg[g.index_of(e.dst)]++;
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < g.node_count(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<int> order;
  order.reserve(g.node_count());
  while (!ready.empty()) {
    int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int e : g.out_edges[u]) {
      int v = g.index_of(g.edges[e].dst);
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  return order;
}

bool detect_cycle_after_merge(const ProfiledGraph& g, NodeId a, NodeId b) {
  int src = g.index_of(a);
  int dst = g.index_of(b);
  bool has_direct = false;
  for (int e : g.out_edges[src]) {
    if (g.index_of(g.edges[e].dst) == dst) has_direct = true;
  }
  if (!has_direct) {
    throw ValidationError("detect_cycle_after_merge: edge " +
                          std::to_string(a) + "->" + std::to_string(b) +
                          " does not exist");
  }
  // DFS from a, skipping the direct edge; any other route to b becomes a
  // cycle once a and b are contracted.
  std::vector<char> visited(g.node_count(), 0);
  std::vector<int> stack;
  visited[src] = 1;
  for (int e : g.out_edges[src]) {
    int v = g.index_of(g.edges[e].dst);
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
    for (int e : g.out_edges[u]) {
      int v = g.index_of(g.edges[e].dst);
      if (!visited[v]) {
        visited[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return false;
}

}  // namespace dagsched
