#include "dagsched/simulator.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>

#include "dagsched/errors.hpp"

namespace dagsched {

namespace {

enum EvKind { kFinish = 0, kXferDone = 1, kStart = 2 };

struct Ev {
  micros_t t;
  int kind;
  int a;  // meta node
  int b;  // receiving device for transfers, else 0
  bool operator>(const Ev& o) const {
    return std::tie(t, kind, a, b) > std::tie(o.t, o.kind, o.a, o.b);
  }
};

struct Sim {
  const GroupedGraph& gg;
  const Placement& pl;
  const DeviceRoster& roster;
  const CommModel& cm;
  MemoryMode mode;
  const SimOptions& opts;

  int V;
  int n;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<>> events;

  std::vector<bytes_t> mem;
  std::vector<bytes_t> peak;
  std::vector<micros_t> xfer_free;
  std::vector<int> qpos;           // next exec_order slot per device
  std::vector<char> busy;          // device currently runs a node
  std::vector<char> started, finished, start_queued;
  std::vector<char> resident;      // [meta * n + dev]
  std::vector<char> sent;          // transfer issued for (meta, dev)
  std::vector<int> consumers_left; // unfinished consumers per meta node
  SimReport report;

  Sim(const GroupedGraph& g, const Placement& p, const DeviceRoster& r,
      const CommModel& c, MemoryMode m, const SimOptions& o)
      : gg(g), pl(p), roster(r), cm(c), mode(m), opts(o) {
    V = gg.node_count();
    n = roster.count();
  }

  NodeId base_id(int meta) const {
    return gg.base->nodes[gg.nodes[meta].members.front()].id;
  }

  void trace(micros_t t, int dev, const char* what, int meta) {
    if (opts.record_trace) {
      report.trace.push_back({t, dev, what, base_id(meta)});
    }
  }

  void charge(int dev, bytes_t delta, micros_t t, int meta) {
    mem[dev] += delta;
    if (mem[dev] > peak[dev]) peak[dev] = mem[dev];
    if (mem[dev] > roster.devices[dev].capacity_bytes) {
      throw InfeasibleError(
          "memory violation on device " + std::to_string(dev) + " at t=" +
          std::to_string(t) + "us while holding node " +
          std::to_string(base_id(meta)) + ": " + std::to_string(mem[dev]) +
          " > " + std::to_string(roster.devices[dev].capacity_bytes));
    }
  }

  void validate_placement() const {
    if (static_cast<int>(pl.device_of.size()) != V ||
        static_cast<int>(pl.exec_order.size()) != n) {
      throw ValidationError("placement does not match graph or roster");
    }
    std::vector<int> seen(V, 0);
    for (int dev = 0; dev < n; ++dev) {
      for (int meta : pl.exec_order[dev]) {
        if (meta < 0 || meta >= V || pl.device_of[meta] != dev) {
          throw ValidationError("exec_order disagrees with assignments");
        }
        seen[meta]++;
      }
    }
    for (int j = 0; j < V; ++j) {
      if (pl.device_of[j] < 0 || pl.device_of[j] >= n || seen[j] != 1) {
        throw ValidationError("placement must assign every node exactly once");
      }
    }
  }

  bool inputs_resident(int j) const {
    int dev = pl.device_of[j];
    for (int e : gg.in_edges[j]) {
      int i = gg.edges[e].src;
      if (!finished[i]) return false;
      if (pl.device_of[i] != dev &&
          !resident[static_cast<std::size_t>(i) * n + dev]) {
        return false;
      }
    }
    return true;
  }

  void try_start(int dev, micros_t now) {
    if (busy[dev] || qpos[dev] >= static_cast<int>(pl.exec_order[dev].size()))
      return;
    int j = pl.exec_order[dev][qpos[dev]];
    if (start_queued[j] || !inputs_resident(j)) return;
    start_queued[j] = 1;
    events.push({now, kStart, j, 0});
  }

  void run_start(const Ev& ev) {
    int j = ev.a;
    int dev = pl.device_of[j];
    busy[dev] = 1;
    started[j] = 1;
    report.start_us[j] = ev.t;
    charge(dev, gg.nodes[j].temp_mem_bytes + gg.nodes[j].out_mem_bytes, ev.t,
           j);
    trace(ev.t, dev, "start", j);
    events.push({ev.t + gg.nodes[j].compute_time_us, kFinish, j, 0});
  }

  void run_finish(const Ev& ev) {
    int j = ev.a;
    int dev = pl.device_of[j];
    busy[dev] = 0;
    qpos[dev]++;
    finished[j] = 1;
    report.makespan_us = std::max(report.makespan_us, ev.t);
    trace(ev.t, dev, "finish", j);
    mem[dev] -= gg.nodes[j].temp_mem_bytes;
    if (mode == MemoryMode::GraphStatic) {
      if (consumers_left[j] == 0) {
        mem[dev] -= gg.nodes[j].out_mem_bytes;  // nothing consumes it
      }
      for (int e : gg.in_edges[j]) {
        int i = gg.edges[e].src;
        if (--consumers_left[i] == 0) {
          mem[pl.device_of[i]] -= gg.nodes[i].out_mem_bytes;
        }
      }
    }

    // Push the output once per consuming remote device, smallest device
    // first. In sequential mode the send waits for both endpoints' queues
    // and then holds them both.
    std::map<int, bytes_t> dests;
    for (int e : gg.out_edges[j]) {
      int cdev = pl.device_of[gg.edges[e].dst];
      if (cdev == dev) continue;
      bytes_t& slot = dests[cdev];
      slot = std::max(slot, gg.edges[e].tensor_bytes);
    }
    for (const auto& [cdev, bytes] : dests) {
      std::size_t key = static_cast<std::size_t>(j) * n + cdev;
      if (resident[key] || sent[key]) {
        report.duplicate_transfers++;
        continue;
      }
      sent[key] = 1;
      micros_t c = comm_time(cm, bytes);
      micros_t begin = ev.t;
      if (cm.mode == CommMode::Sequential) {
        begin = std::max({ev.t, xfer_free[dev], xfer_free[cdev]});
        xfer_free[dev] = begin + c;
        xfer_free[cdev] = begin + c;
      }
      report.transfer_count++;
      report.transfer_bytes += bytes;
      trace(begin, dev, "xfer_begin", j);
      events.push({begin + c, kXferDone, j, cdev});
    }
    try_start(dev, ev.t);
  }

  void run_xfer_done(const Ev& ev) {
    resident[static_cast<std::size_t>(ev.a) * n + ev.b] = 1;
    trace(ev.t, ev.b, "xfer_end", ev.a);
    try_start(ev.b, ev.t);
  }

  SimReport run() {
    validate_placement();
    mem.assign(n, 0);
    peak.assign(n, 0);
    xfer_free.assign(n, 0);
    qpos.assign(n, 0);
    busy.assign(n, 0);
    started.assign(V, 0);
    finished.assign(V, 0);
    start_queued.assign(V, 0);
    resident.assign(static_cast<std::size_t>(V) * n, 0);
    sent.assign(static_cast<std::size_t>(V) * n, 0);
    consumers_left.assign(V, 0);
    for (const MetaEdge& e : gg.edges) consumers_left[e.src]++;
    report.start_us.assign(V, 0);
    report.devices.assign(n, {});

    // Permanent memory is held for the whole run; charge it up front.
    for (int dev = 0; dev < n; ++dev) {
      for (int meta : pl.exec_order[dev]) {
        charge(dev, gg.nodes[meta].perm_mem_bytes, 0, meta);
      }
    }
    for (int dev = 0; dev < n; ++dev) try_start(dev, 0);

    int finished_count = 0;
    while (!events.empty()) {
      Ev ev = events.top();
      events.pop();
      switch (ev.kind) {
        case kStart:
          run_start(ev);
          break;
        case kFinish:
          run_finish(ev);
          finished_count++;
          break;
        case kXferDone:
          run_xfer_done(ev);
          break;
      }
    }
    if (finished_count != V) {
      for (int dev = 0; dev < n; ++dev) {
        if (qpos[dev] < static_cast<int>(pl.exec_order[dev].size())) {
          int j = pl.exec_order[dev][qpos[dev]];
          throw ValidationError(
              "deadlock: device " + std::to_string(dev) +
              " waits forever for inputs of node " +
              std::to_string(base_id(j)) +
              "; exec_order contradicts the DAG");
        }
      }
      throw ValidationError("deadlock: simulation stalled");
    }

    for (int dev = 0; dev < n; ++dev) {
      DeviceReport& d = report.devices[dev];
      d.peak_bytes = peak[dev];
      for (int meta : pl.exec_order[dev]) {
        d.busy_us += gg.nodes[meta].compute_time_us;
      }
      d.idle_us = report.makespan_us - d.busy_us;
    }
    report.cache_hits = 0;
    for (int j = 0; j < V; ++j) {
      std::map<int, int> consumers_per_dev;
      for (int e : gg.out_edges[j]) {
        int cdev = pl.device_of[gg.edges[e].dst];
        if (cdev != pl.device_of[j]) consumers_per_dev[cdev]++;
      }
      for (const auto& [dev, count] : consumers_per_dev) {
        report.cache_hits += count - 1;  // all but the first ride the cache
      }
    }
    return report;
  }
};

}  // namespace

SimReport simulate(const GroupedGraph& gg, const Placement& placement,
                   const DeviceRoster& roster, const CommModel& cm,
                   MemoryMode mode, const SimOptions& opts) {
  Sim sim(gg, placement, roster, cm, mode, opts);
  return sim.run();
}

VerifyResult verify_placement(const GroupedGraph& gg,
                              const Placement& placement,
                              const DeviceRoster& roster, const CommModel& cm,
                              MemoryMode mode) {
  VerifyResult result;
  try {
    result.report = simulate(gg, placement, roster, cm, mode);
    result.pass = true;
    result.diagnostic = "ok";
  } catch (const Error& e) {
    result.pass = false;
    result.diagnostic = e.what();
  }
  return result;
}

micros_t critical_path_us(const GroupedGraph& gg) {
  std::vector<int> order = meta_topo_order(gg);
  std::vector<micros_t> done(gg.node_count(), 0);
  micros_t best = 0;
  for (int u : order) {
    micros_t start = 0;
    for (int e : gg.in_edges[u]) {
      start = std::max(start, done[gg.edges[e].src]);
    }
    done[u] = start + gg.nodes[u].compute_time_us;
    best = std::max(best, done[u]);
  }
  return best;
}

std::string trace_to_csv(const std::vector<TraceEvent>& trace) {
  std::vector<TraceEvent> rows = trace;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     return a.time_us < b.time_us;
                   });
  std::ostringstream out;
  out << "time_us,device,event,node\n";
  for (const TraceEvent& ev : rows) {
    out << ev.time_us << "," << ev.device << "," << ev.event << "," << ev.node
        << "\n";
  }
  return out.str();
}

}  // namespace dagsched
