#pragma once

#include <string>
#include <vector>

#include "dagsched/cost_model.hpp"
#include "dagsched/lp.hpp"
#include "dagsched/transforms.hpp"

namespace dagsched {

struct Device {
  int id = 0;
  bytes_t capacity_bytes = 0;
};

struct DeviceRoster {
  std::vector<Device> devices;

  static DeviceRoster uniform(int n, bytes_t capacity);
  int count() const { return static_cast<int>(devices.size()); }
  bytes_t min_capacity() const;
};

struct Placement {
  std::string algorithm;
  std::vector<int> device_of;                // meta index -> device index
  std::vector<std::vector<int>> exec_order;  // per device, meta indices
  std::vector<micros_t> start_us;            // placer's schedule estimate

  bool operator==(const Placement&) const = default;
};

struct PlacerStats {
  std::int64_t discarded_pairs = 0;   // (node, device) dropped for memory
  std::int64_t excluded_devices = 0;  // devices that fit no remaining node
  std::int64_t awake_reservations = 0;
};

// Bytes the placers reserve on a device per meta node: the static footprint
// plus temporaries. The simulator never holds more than this at once for
// the node, so a placement that respects these reservations verifies.
inline bytes_t reserve_bytes(const MetaNode& m) {
  return m.perm_mem_bytes + m.out_mem_bytes + m.temp_mem_bytes;
}

// Partial-schedule state shared by the list placers. Exposed so the
// schedulable-time rule can be unit tested in isolation.
struct PlacerState {
  CommMode mode = CommMode::Parallel;
  std::vector<micros_t> dev_free;   // earliest idle time per device
  std::vector<micros_t> xfer_tail;  // transfer-queue tail per device
  std::vector<int> device_of;       // meta -> device, -1 while unplaced
  std::vector<micros_t> finish_us;  // meta finish time once placed
  // Arrival time of a producer's output on a device, -1 when absent.
  // Indexed meta * device_count + device.
  std::vector<micros_t> cache_arrival;

  PlacerState(int meta_count, int device_count, CommMode mode);
};

// Earliest time j could start on p: the device must be idle and every
// parent must have finished and, when remote, have its output transferred.
// In sequential mode each fresh transfer waits for both endpoints' queue
// tails and then occupies both queues; a cached tensor costs nothing new.
micros_t schedulable_time(const PlacerState& st, int j, int p,
                          const GroupedGraph& gg, const CommModel& cm);

// Fills devices in increasing id with topologically ordered nodes up to the
// balanced per-device cap (total reserve / n, rounded up, plus the largest
// single reserve). Fails when that cap exceeds the smallest capacity; the
// cap is part of the algorithm, so a tighter physical limit is an error.
Placement place_mtopo(const GroupedGraph& gg, const DeviceRoster& roster,
                      const CommModel& cm);

// Greedy earliest-pair list scheduling over (ready node, device) pairs with
// per-pair memory discards.
Placement place_metf(const GroupedGraph& gg, const DeviceRoster& roster,
                     const CommModel& cm, PlacerStats* stats = nullptr);

// place_metf plus favorite-child handling: after a node finishes, its
// device stays reserved for the node's favorite child until the child
// arrives, an urgent task claims the device, or the reservation ages out
// after the largest edge communication time. A device that cannot fit any
// remaining node is permanently excluded. With no favorites this reduces
// exactly to place_metf.
Placement place_msct(const GroupedGraph& gg, const DeviceRoster& roster,
                     const CommModel& cm, const FavoriteMap& fav,
                     PlacerStats* stats = nullptr);

// Placement interchange: {"algorithm": str, "assignments": [{"node": int,
// "device": int, "start_us": int}], "makespan_us": int,
// "per_device_peak_bytes": [int]}. Assignments list base nodes per device
// in execution order; start times and peaks come from a simulator run.
std::string placement_to_json(const GroupedGraph& gg, const Placement& p,
                              const std::vector<micros_t>& sim_start_us,
                              micros_t makespan_us,
                              const std::vector<bytes_t>& per_device_peak);
Placement placement_from_json(const GroupedGraph& gg,
                              const std::string& json_text, int device_count);

}  // namespace dagsched
