#pragma once

#include <optional>
#include <vector>

#include "dagsched/cost_model.hpp"
#include "dagsched/placers.hpp"
#include "dagsched/transforms.hpp"

namespace dagsched {

// Hard limits on the exhaustive search; instances beyond them error out.
struct OracleLimits {
  int max_nodes = 12;
  int max_devices = 3;
  std::int64_t max_extensions = 200000;
};

// Exact minimum makespan over every device assignment and every per-device
// execution order consistent with the DAG, scored by the simulator, so
// "optimal" means optimal within the simulator's execution model. Uniform
// device relabelings are enumerated once. Memory-infeasible assignments are
// skipped when a capacity is given; with no feasible assignment at all this
// throws InfeasibleError.
//
// oracle_makespan fans the assignment space out across OpenMP threads;
// oracle_makespan_serial is the plain reference kept for testing and
// benchmarking. Both return identical results.
micros_t oracle_makespan(const GroupedGraph& gg, int device_count,
                         const CommModel& cm,
                         std::optional<bytes_t> capacity = std::nullopt,
                         MemoryMode mode = MemoryMode::TrainingPersistent,
                         const OracleLimits& limits = {});
micros_t oracle_makespan_serial(
    const GroupedGraph& gg, int device_count, const CommModel& cm,
    std::optional<bytes_t> capacity = std::nullopt,
    MemoryMode mode = MemoryMode::TrainingPersistent,
    const OracleLimits& limits = {});

// Devices guaranteed to stay memory-sufficient under worst-case filling:
// ceil(n * (1 - 1/((1-J)*K))), clamped to [1, n]. Requires (1-J)*K > 1,
// otherwise the instance is unschedulable and this throws InfeasibleError.
int compute_R(int device_count, double K, double J);

struct BoundReport {
  double rho = 0.0;
  double K = 0.0;
  double J = 0.0;
  int R = 0;
  double alpha = 0.0;  // (2 + 2*rho) / (2 + rho)
  micros_t c_max_us = 0;

  micros_t etf_makespan_us = 0;
  micros_t sct_makespan_us = 0;
  micros_t omega_opt_n_us = 0;       // n devices, with communication
  micros_t omega_opt_n_zero_us = 0;  // n devices, zero communication
  micros_t omega_opt_r_us = 0;       // R devices, zero communication

  double etf_bound_a = 0.0;  // (1 + n/R + rho) * omega_opt_n_zero
  double etf_bound_b = 0.0;  // (2 + rho) * omega_opt_r
  double sct_bound = 0.0;    // (n/R + alpha) * omega_opt_n + (n-R)/R * c_max

  bool etf_pass = false;
  bool sct_pass = false;
  bool sct_assumption_holds = false;  // rho <= 1; bounds advisory otherwise
};

// Evaluates both makespan bounds for already-computed placements against
// oracle baselines on infinite memory. One microsecond of integer slack is
// allowed on each comparison.
BoundReport check_bounds(const GroupedGraph& gg, const DeviceRoster& roster,
                         const CommModel& cm, MemoryMode mode,
                         const Placement& placement_etf,
                         const Placement& placement_sct,
                         const OracleLimits& limits = {});

}  // namespace dagsched
