#pragma once

#include <string>
#include <vector>

#include "dagsched/cost_model.hpp"
#include "dagsched/placers.hpp"
#include "dagsched/transforms.hpp"

namespace dagsched {

struct DeviceReport {
  bytes_t peak_bytes = 0;
  micros_t busy_us = 0;
  micros_t idle_us = 0;
};

struct TraceEvent {
  micros_t time_us = 0;
  int device = 0;
  std::string event;  // start | finish | xfer_begin | xfer_end
  NodeId node = 0;
};

struct SimReport {
  micros_t makespan_us = 0;
  std::vector<DeviceReport> devices;
  std::int64_t transfer_count = 0;
  bytes_t transfer_bytes = 0;
  std::int64_t duplicate_transfers = 0;  // repeat sends of a cached tensor
  std::int64_t cache_hits = 0;           // consumers served without a send
  std::vector<micros_t> start_us;        // simulated start per meta node
  std::vector<TraceEvent> trace;
};

struct SimOptions {
  bool record_trace = false;
};

// Replays a placement event by event. Each device runs its exec_order as a
// FIFO; a node starts once the device reaches it and every input is
// resident. Permanent memory is charged up front, temporaries live for the
// node's run, and output memory follows the MemoryMode. A finished node's
// output is pushed once per consuming device and cached there; sequential
// mode serves transfers through one queue per device, each send occupying
// both endpoints' queues for its duration. Simultaneous events settle as
// finish, then transfer completion, then start, so releases land before
// reservations at the same instant.
//
// Throws InfeasibleError when a device would exceed its capacity (message
// carries the first violating time and node) and ValidationError when the
// run stalls, which means exec_order contradicts the DAG.
SimReport simulate(const GroupedGraph& gg, const Placement& placement,
                   const DeviceRoster& roster, const CommModel& cm,
                   MemoryMode mode, const SimOptions& opts = {});

struct VerifyResult {
  bool pass = false;
  std::string diagnostic;
  SimReport report;  // valid when pass
};

// simulate() with failures folded into a structured result.
VerifyResult verify_placement(const GroupedGraph& gg,
                              const Placement& placement,
                              const DeviceRoster& roster, const CommModel& cm,
                              MemoryMode mode);

// Longest compute-weighted path; no schedule can beat it.
micros_t critical_path_us(const GroupedGraph& gg);

std::string trace_to_csv(const std::vector<TraceEvent>& trace);

}  // namespace dagsched
