#include "dagsched/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>

#include "dagsched/errors.hpp"
#include "dagsched/simulator.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dagsched {

namespace {

constexpr micros_t kNoResult = std::numeric_limits<micros_t>::max();

// All DAG-consistent global orders; the per-device restriction of these
// covers exactly the deadlock-free exec_orders.
void enumerate_extensions(const GroupedGraph& gg, std::int64_t cap,
                          std::vector<std::vector<int>>& out) {
  int V = gg.node_count();
  std::vector<int> pending(V, 0);
  for (const MetaEdge& e : gg.edges) pending[e.dst]++;
  std::vector<int> prefix;
  prefix.reserve(V);

  std::function<void()> rec = [&]() {
    if (static_cast<int>(prefix.size()) == V) {
      if (static_cast<std::int64_t>(out.size()) >= cap) {
        throw InfeasibleError(
            "instance too large: more than " + std::to_string(cap) +
            " execution orders to enumerate");
      }
      out.push_back(prefix);
      return;
    }
    for (int j = 0; j < V; ++j) {
      if (pending[j] != 0) continue;
      pending[j] = -1;  // taken
      for (int e : gg.out_edges[j]) pending[gg.edges[e].dst]--;
      prefix.push_back(j);
      rec();
      prefix.pop_back();
      for (int e : gg.out_edges[j]) pending[gg.edges[e].dst]++;
      pending[j] = 0;
    }
  };
  rec();
}

// Device assignments with labels in first-use order; with identical
// capacities every labeled assignment is a relabeling of one of these.
void enumerate_assignments(int V, int n, bool canonical,
                           std::vector<std::vector<int>>& out) {
  std::vector<int> a(V, 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == V) {
      out.push_back(a);
      return;
    }
    int limit = canonical ? std::min(n, used + 1) : n;
    for (int d = 0; d < limit; ++d) {
      a[i] = d;
      rec(i + 1, std::max(used, d + 1));
    }
  };
  rec(0, 0);
}

struct OracleProblem {
  const GroupedGraph& gg;
  DeviceRoster roster;
  const CommModel& cm;
  MemoryMode mode;
  std::vector<std::vector<int>> extensions;
  std::vector<std::vector<int>> assignments;
  micros_t lower_bound = 0;
  bool capacity_limited = false;
};

OracleProblem prepare(const GroupedGraph& gg, int device_count,
                      const CommModel& cm, std::optional<bytes_t> capacity,
                      MemoryMode mode, const OracleLimits& limits) {
  if (gg.node_count() > limits.max_nodes) {
    throw InfeasibleError("instance too large: " +
                          std::to_string(gg.node_count()) + " nodes > " +
                          std::to_string(limits.max_nodes));
  }
  if (device_count < 1 || device_count > limits.max_devices) {
    throw InfeasibleError("instance too large: " +
                          std::to_string(device_count) + " devices > " +
                          std::to_string(limits.max_devices));
  }
  bytes_t cap = capacity.value_or(std::numeric_limits<bytes_t>::max() / 4);
  OracleProblem prob{gg, DeviceRoster::uniform(device_count, cap), cm, mode,
                     {}, {}, 0, capacity.has_value()};
  enumerate_extensions(gg, limits.max_extensions, prob.extensions);
  enumerate_assignments(gg.node_count(), device_count, true,
                        prob.assignments);
  micros_t total = gg.total_compute_us();
  micros_t work_bound = (total + device_count - 1) / device_count;
  prob.lower_bound = std::max(critical_path_us(gg), work_bound);
  return prob;
}

// Best makespan for one assignment over all execution orders, or kNoResult
// when the assignment never fits in memory or provably cannot beat
// best_seen. Skipping such assignments never changes the overall minimum.
micros_t score_assignment(const OracleProblem& prob,
                          const std::vector<int>& assign, micros_t best_seen) {
  const GroupedGraph& gg = prob.gg;
  int n = prob.roster.count();
  if (prob.capacity_limited) {
    std::vector<bytes_t> static_need(n, 0);
    for (int j = 0; j < gg.node_count(); ++j) {
      static_need[assign[j]] += gg.nodes[j].perm_mem_bytes;
    }
    for (int d = 0; d < n; ++d) {
      if (static_need[d] > prob.roster.devices[d].capacity_bytes) {
        return kNoResult;  // violates capacity before anything runs
      }
    }
  }
  // Any schedule of this assignment takes at least the busiest device's
  // total compute and at least the global lower bound.
  micros_t assign_floor = prob.lower_bound;
  {
    std::vector<micros_t> load(n, 0);
    for (int j = 0; j < gg.node_count(); ++j) {
      load[assign[j]] += gg.nodes[j].compute_time_us;
    }
    assign_floor = std::max(assign_floor,
                            *std::max_element(load.begin(), load.end()));
  }
  if (best_seen != kNoResult && assign_floor >= best_seen) {
    return kNoResult;
  }
  micros_t best = kNoResult;
  Placement pl;
  pl.algorithm = "oracle";
  pl.device_of = assign;
  for (const std::vector<int>& ext : prob.extensions) {
    pl.exec_order.assign(n, {});
    for (int j : ext) pl.exec_order[assign[j]].push_back(j);
    pl.start_us.assign(gg.node_count(), 0);
    try {
      SimReport rep = simulate(gg, pl, prob.roster, prob.cm, prob.mode);
      best = std::min(best, rep.makespan_us);
    } catch (const InfeasibleError&) {
      continue;  // this order runs out of memory
    }
    if (best <= assign_floor) break;  // this assignment's own floor
  }
  return best;
}

micros_t require_result(micros_t best) {
  if (best == kNoResult) {
    throw InfeasibleError(
        "no device assignment fits the memory capacities");
  }
  return best;
}

}  // namespace

micros_t oracle_makespan_serial(const GroupedGraph& gg, int device_count,
                                const CommModel& cm,
                                std::optional<bytes_t> capacity,
                                MemoryMode mode, const OracleLimits& limits) {
  OracleProblem prob = prepare(gg, device_count, cm, capacity, mode, limits);
  micros_t best = kNoResult;
  for (const std::vector<int>& assign : prob.assignments) {
    best = std::min(best, score_assignment(prob, assign, best));
    if (best <= prob.lower_bound) break;
  }
  return require_result(best);
}

micros_t oracle_makespan(const GroupedGraph& gg, int device_count,
                         const CommModel& cm, std::optional<bytes_t> capacity,
                         MemoryMode mode, const OracleLimits& limits) {
  OracleProblem prob = prepare(gg, device_count, cm, capacity, mode, limits);
  const std::int64_t count = static_cast<std::int64_t>(prob.assignments.size());
  // Seed the incumbent with the first assignment (everything on device 0)
  // so workers never start pruning blind.
  std::atomic<micros_t> best_global{
      score_assignment(prob, prob.assignments.front(), kNoResult)};
  std::atomic<bool> hit_floor{best_global.load() <= prob.lower_bound};

  // Every improvement is published immediately so all threads prune with
  // the tightest incumbent; the pruning is value-safe, so the result does
  // not depend on thread interleaving.
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 1; i < count; ++i) {
    if (hit_floor.load(std::memory_order_relaxed)) continue;
    micros_t seen = best_global.load(std::memory_order_relaxed);
    micros_t got = score_assignment(prob, prob.assignments[i], seen);
    while (got < seen && !best_global.compare_exchange_weak(
                             seen, got, std::memory_order_relaxed)) {
    }
    if (best_global.load(std::memory_order_relaxed) <= prob.lower_bound) {
      hit_floor.store(true, std::memory_order_relaxed);
    }
  }
  return require_result(best_global.load());
}

int compute_R(int device_count, double K, double J) {
  if (!((1.0 - J) * K > 1.0)) {
    throw InfeasibleError(
        "memory headroom too small: (1 - J) * K must exceed 1");
  }
  double raw = device_count * (1.0 - 1.0 / ((1.0 - J) * K));
  int r = static_cast<int>(std::ceil(raw));
  return std::clamp(r, 1, device_count);
}

BoundReport check_bounds(const GroupedGraph& gg, const DeviceRoster& roster,
                         const CommModel& cm, MemoryMode mode,
                         const Placement& placement_etf,
                         const Placement& placement_sct,
                         const OracleLimits& limits) {
  BoundReport report;
  int n = roster.count();
  ScalarReport scalars = compute_scalars(gg, roster, cm, mode);
  report.rho = scalars.rho;
  report.K = scalars.K;
  report.J = scalars.J;
  report.sct_assumption_holds = scalars.sct_assumption_holds;
  report.alpha = (2.0 + 2.0 * report.rho) / (2.0 + report.rho);
  report.c_max_us = max_comm_time(gg, cm);
  report.R = compute_R(n, report.K, report.J);

  report.etf_makespan_us =
      simulate(gg, placement_etf, roster, cm, mode).makespan_us;
  report.sct_makespan_us =
      simulate(gg, placement_sct, roster, cm, mode).makespan_us;

  CommModel zero = zero_comm_model(cm.mode);
  report.omega_opt_n_us =
      oracle_makespan(gg, n, cm, std::nullopt, mode, limits);
  report.omega_opt_n_zero_us =
      oracle_makespan(gg, n, zero, std::nullopt, mode, limits);
  report.omega_opt_r_us =
      oracle_makespan(gg, report.R, zero, std::nullopt, mode, limits);

  double n_over_r = static_cast<double>(n) / report.R;
  report.etf_bound_a = (1.0 + n_over_r + report.rho) *
                       static_cast<double>(report.omega_opt_n_zero_us);
  report.etf_bound_b =
      (2.0 + report.rho) * static_cast<double>(report.omega_opt_r_us);
  report.sct_bound =
      (n_over_r + report.alpha) * static_cast<double>(report.omega_opt_n_us) +
      (static_cast<double>(n - report.R) / report.R) *
          static_cast<double>(report.c_max_us);

  double slack = 1.0;  // integer-microsecond rounding allowance
  report.etf_pass = static_cast<double>(report.etf_makespan_us) <=
                    std::min(report.etf_bound_a, report.etf_bound_b) + slack;
  report.sct_pass =
      static_cast<double>(report.sct_makespan_us) <= report.sct_bound + slack;
  return report;
}

}  // namespace dagsched
