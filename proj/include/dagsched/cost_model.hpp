#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dagsched/transforms.hpp"

namespace dagsched {

// Whether a device may run several transfers at once or serves them one at
// a time through a per-device queue.
enum class CommMode { Sequential, Parallel };

// How long output tensors stay resident: freed once every consumer has
// finished (GraphStatic) or held for the whole run (TrainingPersistent).
enum class MemoryMode { GraphStatic, TrainingPersistent };

// Affine latency model: cost(bytes) = intercept_us + us_per_byte * bytes.
struct CommModel {
  double intercept_us = 0.0;
  double us_per_byte = 0.0;
  CommMode mode = CommMode::Sequential;
};

inline CommModel zero_comm_model(CommMode mode = CommMode::Parallel) {
  return CommModel{0.0, 0.0, mode};
}

// Transfer latency in integer microseconds, rounded half-up.
micros_t comm_time(const CommModel& cm, bytes_t bytes);

// Least-squares affine fit of (bytes, microseconds) samples. A negative
// fitted slope is clamped to zero and the intercept refit as the mean; a
// negative intercept is clamped to zero and the slope refit through the
// origin. Throws ValidationError when all byte counts are equal.
CommModel fit_comm_model(
    const std::vector<std::pair<bytes_t, micros_t>>& samples);

// {"intercept_us": number, "us_per_byte": number, "mode": "sequential" |
// "parallel"}; unknown or missing keys rejected.
CommModel load_comm_model(const std::string& path);
CommModel parse_comm_model(const std::string& json_text);
void save_comm_model(const CommModel& cm, const std::string& path);

// CSV with header "bytes,us".
std::vector<std::pair<bytes_t, micros_t>> load_comm_samples(
    const std::string& path);

// Memory charged against a device for the whole placement, per mode.
bytes_t static_bytes(const MetaNode& m, MemoryMode mode);

struct ScalarReport {
  double rho = 0.0;  // max edge comm time / min positive compute time
  double K = 0.0;    // total device memory / total required memory
  double J = 0.0;    // largest single requirement / smallest device memory
  bool has_zero_compute = false;  // rho denominator skipped zero-cost nodes
  bool sct_assumption_holds = false;  // rho <= 1
  bool single_task_oversized = false;  // J >= 1: some task fits no device
};

struct DeviceRoster;  // placers.hpp

ScalarReport compute_scalars(const GroupedGraph& gg, const DeviceRoster& roster,
                             const CommModel& cm, MemoryMode mode);

// Scales every meta compute time and meta edge tensor_bytes independently
// by a factor drawn uniformly from [1 - fraction, 1 + fraction]. Memory is
// untouched. Results round half-up and floor at 1 for originally positive
// values. Deterministic for a fixed seed: factors are drawn node by node in
// ascending meta index order, then edge by edge in ascending (src, dst).
GroupedGraph perturb_profiles(const GroupedGraph& gg, double fraction,
                              std::uint64_t seed);

// Max comm_time over the meta edges; 0 when there are none.
micros_t max_comm_time(const GroupedGraph& gg, const CommModel& cm);

}  // namespace dagsched
