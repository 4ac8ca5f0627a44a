#include "dagsched/placers.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>

#include "dagsched/errors.hpp"
#include "json.hpp"

namespace dagsched {

DeviceRoster DeviceRoster::uniform(int n, bytes_t capacity) {
  DeviceRoster roster;
  for (int i = 0; i < n; ++i) roster.devices.push_back({i, capacity});
  return roster;
}

bytes_t DeviceRoster::min_capacity() const {
  if (devices.empty()) {
    throw ValidationError("device roster is empty");
  }
  bytes_t m = devices.front().capacity_bytes;
  for (const Device& d : devices) m = std::min(m, d.capacity_bytes);
  if (m <= 0) {
    throw ValidationError("device capacities must be positive");
  }
  return m;
}

PlacerState::PlacerState(int meta_count, int device_count, CommMode m)
    : mode(m),
      dev_free(device_count, 0),
      xfer_tail(device_count, 0),
      device_of(meta_count, -1),
      finish_us(meta_count, 0),
      cache_arrival(static_cast<std::size_t>(meta_count) * device_count, -1) {}

namespace {

// Shared by the estimate and the commit so both walk parents in the same
// ascending order and see identical queue interleavings.
template <typename TailRef>
micros_t schedulable_time_impl(const PlacerState& st, int j, int p,
                               const GroupedGraph& gg, const CommModel& cm,
                               TailRef&& tail, bool commit, PlacerState* mut,
                               std::vector<int>* newly_cached) {
  int n = static_cast<int>(st.dev_free.size());
  micros_t t = st.dev_free[p];
  for (int e : gg.in_edges[j]) {
    int i = gg.edges[e].src;
    int q = st.device_of[i];
    micros_t term;
    if (q == p) {
      term = st.finish_us[i];
    } else {
      micros_t cached = st.cache_arrival[static_cast<std::size_t>(i) * n + p];
      if (cached >= 0) {
        term = std::max(st.finish_us[i], cached);
      } else {
        micros_t c = comm_time(cm, gg.edges[e].tensor_bytes);
        if (st.mode == CommMode::Parallel) {
          term = st.finish_us[i] + c;
        } else {
          micros_t begin = std::max({st.finish_us[i], tail(q), tail(p)});
          term = begin + c;
          tail(q) = term;
          tail(p) = term;
        }
        if (commit) {
          mut->cache_arrival[static_cast<std::size_t>(i) * n + p] = term;
          if (newly_cached) newly_cached->push_back(i);
        }
      }
    }
    t = std::max(t, term);
  }
  return t;
}

}  // namespace

micros_t schedulable_time(const PlacerState& st, int j, int p,
                          const GroupedGraph& gg, const CommModel& cm) {
  int n = static_cast<int>(st.dev_free.size());
  std::vector<micros_t> scratch(st.xfer_tail);
  auto tail = [&scratch](int d) -> micros_t& { return scratch[d]; };
  (void)n;
  return schedulable_time_impl(st, j, p, gg, cm, tail, false, nullptr,
                               nullptr);
}

namespace {

micros_t commit_schedulable_time(PlacerState& st, int j, int p,
                                 const GroupedGraph& gg, const CommModel& cm,
                                 std::vector<int>* newly_cached = nullptr) {
  auto tail = [&st](int d) -> micros_t& { return st.xfer_tail[d]; };
  return schedulable_time_impl(st, j, p, gg, cm, tail, true, &st,
                               newly_cached);
}

struct PairEntry {
  micros_t t;
  int node;
  int dev;
  bool operator>(const PairEntry& o) const {
    return std::tie(t, node, dev) > std::tie(o.t, o.node, o.dev);
  }
};

// Earliest-pair list scheduler. An empty favorite map makes this plain
// greedy ETF; with favorites it adds awake-device reservations, urgency
// overrides, and whole-device exclusion.
Placement place_list(const GroupedGraph& gg, const DeviceRoster& roster,
                     const CommModel& cm, const FavoriteMap& fav,
                     const std::string& algo, PlacerStats* stats_out) {
  const int V = gg.node_count();
  const int n = roster.count();
  roster.min_capacity();  // validates the roster
  meta_topo_order(gg);    // validates acyclicity
  PlacerStats stats;

  PlacerState st(V, n, cm.mode);
  std::vector<bytes_t> need(V);
  std::multiset<bytes_t> remaining;
  for (int j = 0; j < V; ++j) {
    need[j] = reserve_bytes(gg.nodes[j]);
    remaining.insert(need[j]);
  }
  std::vector<bytes_t> reserved(n, 0);
  std::vector<char> excluded(n, 0);
  std::vector<char> placed(V, 0);
  std::vector<char> dead(static_cast<std::size_t>(V) * n, 0);
  std::vector<int> alive(V, n);
  std::vector<int> pending(V, 0);
  for (const MetaEdge& e : gg.edges) pending[e.dst]++;
  std::vector<micros_t> urgent_at(V, 0);
  std::vector<micros_t> start(V, 0);

  const micros_t c_max = max_comm_time(gg, cm);
  std::vector<int> awake_for(n, -1);
  std::vector<micros_t> awake_until(n, 0);

  std::priority_queue<PairEntry, std::vector<PairEntry>, std::greater<>> heap;

  auto pair_key = [&](int j, int p) {
    micros_t t = schedulable_time(st, j, p, gg, cm);
    if (awake_for[p] >= 0 && awake_for[p] != j) {
      // Reserved for another node's favorite child: a task may take the
      // device once its inputs could be anywhere (it is urgent) or once
      // the reservation has aged out, whichever comes first.
      t = std::max(t, std::min(awake_until[p], urgent_at[j]));
    }
    return t;
  };
  auto push_pairs_for_node = [&](int j) {
    for (int p = 0; p < n; ++p) {
      if (!excluded[p] && !dead[static_cast<std::size_t>(j) * n + p]) {
        heap.push({pair_key(j, p), j, p});
      }
    }
  };
  auto push_pairs_for_device = [&](int p) {
    if (excluded[p]) return;
    for (int j = 0; j < V; ++j) {
      if (!placed[j] && pending[j] == 0 &&
          !dead[static_cast<std::size_t>(j) * n + p]) {
        heap.push({pair_key(j, p), j, p});
      }
    }
  };
  auto kill_pair = [&](int j, int p) {
    dead[static_cast<std::size_t>(j) * n + p] = 1;
    if (--alive[j] == 0) {
      throw InfeasibleError("node " + std::to_string(j) +
                            " fits on no device");
    }
  };

  for (int j = 0; j < V; ++j) {
    if (pending[j] == 0) {
      urgent_at[j] = 0;
      push_pairs_for_node(j);
    }
  }

  int placed_count = 0;
  while (placed_count < V) {
    if (heap.empty()) {
      throw InfeasibleError("no schedulable (node, device) pair remains");
    }
    auto [t, j, p] = heap.top();
    heap.pop();
    if (placed[j] || excluded[p] || dead[static_cast<std::size_t>(j) * n + p]) {
      continue;
    }
    micros_t fresh = pair_key(j, p);
    if (fresh != t) {
      heap.push({fresh, j, p});
      continue;
    }
    if (reserved[p] + need[j] > roster.devices[p].capacity_bytes) {
      kill_pair(j, p);
      stats.discarded_pairs++;
      // A device that cannot fit even the smallest remaining node is out
      // of the search for good.
      if (!remaining.empty() &&
          reserved[p] + *remaining.begin() > roster.devices[p].capacity_bytes) {
        excluded[p] = 1;
        stats.excluded_devices++;
        for (int j2 = 0; j2 < V; ++j2) {
          if (!placed[j2] && !dead[static_cast<std::size_t>(j2) * n + p]) {
            kill_pair(j2, p);
          }
        }
      }
      continue;
    }

    // Commit j to p at time t.
    st.device_of[j] = p;
    start[j] = t;
    st.finish_us[j] = t + gg.nodes[j].compute_time_us;
    std::vector<int> newly_cached;
    micros_t committed = commit_schedulable_time(st, j, p, gg, cm,
                                                 &newly_cached);
    (void)committed;
    st.dev_free[p] = st.finish_us[j];
    reserved[p] += need[j];
    remaining.erase(remaining.find(need[j]));
    placed[j] = 1;
    ++placed_count;

    if (!fav.fav_child.empty()) {
      awake_for[p] = -1;
      for (int q = 0; q < n; ++q) {
        if (awake_for[q] == j) {
          // The awaited child got placed; lift the reservation and refresh
          // keys that it was holding back.
          awake_for[q] = -1;
          push_pairs_for_device(q);
        }
      }
      int h = fav.fav_child[j];
      if (h >= 0 && !placed[h]) {
        awake_for[p] = h;
        awake_until[p] = st.finish_us[j] + c_max;
        stats.awake_reservations++;
      }
      // p's reservation state changed either way; stale entries may now sit
      // above the true keys, so refresh them.
      push_pairs_for_device(p);
    }

    for (int e : gg.out_edges[j]) {
      int child = gg.edges[e].dst;
      if (--pending[child] == 0) {
        micros_t u = 0;
        for (int e2 : gg.in_edges[child]) {
          int i = gg.edges[e2].src;
          u = std::max(u, st.finish_us[i] +
                              comm_time(cm, gg.edges[e2].tensor_bytes));
        }
        urgent_at[child] = u;
        push_pairs_for_node(child);
      }
    }
    // Each parent tensor that just landed on p lowers the keys of that
    // parent's other unplaced consumers there; refresh those entries.
    for (int i : newly_cached) {
      for (int e : gg.out_edges[i]) {
        int c = gg.edges[e].dst;
        if (c != j && !placed[c] && pending[c] == 0 &&
            !dead[static_cast<std::size_t>(c) * n + p]) {
          heap.push({pair_key(c, p), c, p});
        }
      }
    }
  }

  Placement out;
  out.algorithm = algo;
  out.device_of = st.device_of;
  out.start_us = start;
  out.exec_order.assign(n, {});
  std::vector<std::pair<micros_t, int>> by_start;
  for (int j = 0; j < V; ++j) by_start.emplace_back(start[j], j);
  std::sort(by_start.begin(), by_start.end());
  for (const auto& [s, j] : by_start) {
    out.exec_order[st.device_of[j]].push_back(j);
  }
  if (stats_out) *stats_out = stats;
  return out;
}

}  // namespace

Placement place_metf(const GroupedGraph& gg, const DeviceRoster& roster,
                     const CommModel& cm, PlacerStats* stats) {
  return place_list(gg, roster, cm, FavoriteMap{}, "m-etf", stats);
}

Placement place_msct(const GroupedGraph& gg, const DeviceRoster& roster,
                     const CommModel& cm, const FavoriteMap& fav,
                     PlacerStats* stats) {
  if (!fav.fav_child.empty() &&
      static_cast<int>(fav.fav_child.size()) != gg.node_count()) {
    throw ValidationError("favorite map does not match graph size");
  }
  return place_list(gg, roster, cm, fav, "m-sct", stats);
}

Placement place_mtopo(const GroupedGraph& gg, const DeviceRoster& roster,
                      const CommModel& cm) {
  const int V = gg.node_count();
  const int n = roster.count();
  bytes_t total = 0;
  bytes_t largest = 0;
  for (int j = 0; j < V; ++j) {
    total += reserve_bytes(gg.nodes[j]);
    largest = std::max(largest, reserve_bytes(gg.nodes[j]));
  }
  bytes_t cap = (total + n - 1) / n + largest;
  if (cap > roster.min_capacity()) {
    throw InfeasibleError(
        "m-topo per-device cap " + std::to_string(cap) +
        " bytes exceeds the smallest device capacity " +
        std::to_string(roster.min_capacity()) +
        "; use m-etf or m-sct for tight memory limits");
  }

  Placement out;
  out.algorithm = "m-topo";
  out.device_of.assign(V, -1);
  out.exec_order.assign(n, {});
  std::vector<int> order = meta_topo_order(gg);
  int dev = 0;
  bytes_t used = 0;
  for (int j : order) {
    bytes_t b = reserve_bytes(gg.nodes[j]);
    if (used + b > cap && dev + 1 < n) {
      ++dev;
      used = 0;
    }
    out.device_of[j] = dev;
    out.exec_order[dev].push_back(j);
    used += b;
  }

  // Schedule estimate for the fixed assignment, same timing rules as the
  // list placers.
  PlacerState st(V, n, cm.mode);
  out.start_us.assign(V, 0);
  for (int j : order) {
    int p = out.device_of[j];
    st.device_of[j] = p;
    micros_t t = commit_schedulable_time(st, j, p, gg, cm);
    t = std::max(t, st.dev_free[p]);
    out.start_us[j] = t;
    st.finish_us[j] = t + gg.nodes[j].compute_time_us;
    st.dev_free[p] = st.finish_us[j];
  }
  return out;
}

std::string placement_to_json(const GroupedGraph& gg, const Placement& p,
                              const std::vector<micros_t>& sim_start_us,
                              micros_t makespan_us,
                              const std::vector<bytes_t>& per_device_peak) {
  nlohmann::ordered_json doc;
  doc["algorithm"] = p.algorithm;
  doc["assignments"] = nlohmann::ordered_json::array();
  for (std::size_t dev = 0; dev < p.exec_order.size(); ++dev) {
    for (int meta : p.exec_order[dev]) {
      for (int base : gg.nodes[meta].members) {
        doc["assignments"].push_back(
            {{"node", gg.base->nodes[base].id},
             {"device", dev},
             {"start_us", sim_start_us[meta]}});
      }
    }
  }
  doc["makespan_us"] = makespan_us;
  doc["per_device_peak_bytes"] = per_device_peak;
  return doc.dump(2) + "\n";
}

Placement placement_from_json(const GroupedGraph& gg,
                              const std::string& json_text, int device_count) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("algorithm") ||
      !doc.contains("assignments")) {
    throw ValidationError("placement file must carry algorithm/assignments");
  }
  Placement p;
  p.algorithm = doc["algorithm"].get<std::string>();
  p.device_of.assign(gg.node_count(), -1);
  p.start_us.assign(gg.node_count(), 0);
  p.exec_order.assign(device_count, {});
  for (const auto& row : doc["assignments"]) {
    NodeId id = row.at("node").get<NodeId>();
    int dev = row.at("device").get<int>();
    micros_t start = row.at("start_us").get<micros_t>();
    if (dev < 0 || dev >= device_count) {
      throw ValidationError("assignment device " + std::to_string(dev) +
                            " outside the roster");
    }
    int meta = gg.group_of[gg.base->index_of(id)];
    if (p.device_of[meta] >= 0 && p.device_of[meta] != dev) {
      throw ValidationError(
          "grouped nodes assigned to different devices around base node " +
          std::to_string(id));
    }
    if (p.device_of[meta] < 0) {
      p.device_of[meta] = dev;
      p.start_us[meta] = start;
      p.exec_order[dev].push_back(meta);  // file order is execution order
    }
  }
  for (int j = 0; j < gg.node_count(); ++j) {
    if (p.device_of[j] < 0) {
      throw ValidationError("placement misses meta node " + std::to_string(j));
    }
  }
  return p;
}

}  // namespace dagsched
