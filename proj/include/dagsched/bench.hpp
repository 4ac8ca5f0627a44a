#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dagsched/cost_model.hpp"
#include "dagsched/generator.hpp"
#include "dagsched/lp.hpp"
#include "dagsched/oracle.hpp"
#include "dagsched/placers.hpp"
#include "dagsched/transforms.hpp"

namespace dagsched {

enum class Algo { MTopo, MEtf, MSct };

Algo parse_algo(const std::string& name);
std::string algo_name(Algo algo);

struct PipelineOptions {
  bool coplacement = true;
  bool fusion = true;
  double lp_threshold = 0.1;
};

// Colocation grouping, then optional co-placement and fusion.
GroupedGraph build_grouped(std::shared_ptr<const ProfiledGraph> graph,
                           const PipelineOptions& opts);

struct PlaceOutcome {
  Placement placement;
  double wall_ms = 0.0;  // transforms, LP solve and placement; no file IO
  PlacerStats stats;
  RoundStats round_stats;  // m-sct only
  std::optional<LpSolution> lp_solution;
};

// Runs one placer on an already grouped graph (m-sct builds, solves and
// rounds its LP internally).
PlaceOutcome run_placer(Algo algo, const GroupedGraph& gg,
                        const DeviceRoster& roster, const CommModel& cm,
                        const PipelineOptions& opts);

// ---- sweep harness ----------------------------------------------------

struct BenchConfig {
  std::vector<GraphFamily> families{GraphFamily::RandomDag};
  std::vector<int> sizes{20};
  std::vector<Algo> algos{Algo::MEtf};
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> perturbs{0.0};
  int devices = 2;
  double capacity_factor = 1.5;  // times the balanced per-device need
  CommModel cm{10.0, 0.001, CommMode::Sequential};
  MemoryMode memory_mode = MemoryMode::TrainingPersistent;
  PipelineOptions pipeline;
  int branching = 3;
  double edge_prob = 0.3;
};

struct BenchRow {
  std::string family;
  int nodes = 0;
  std::string algo;
  std::uint64_t seed = 0;
  double perturb = 0.0;
  std::string status;  // ok | validation | infeasible | solver
  double placement_ms = 0.0;
  micros_t makespan_us = 0;
  bool feasible = false;
  double makespan_ratio = 1.0;  // vs the unperturbed placement of this cell
  std::string bound_pass;       // 1 | 0 | na (outside the oracle guard)
};

// One row per (family, size, algo, seed, perturb) cell. A placement built
// from perturbed profiles is always scored on the unperturbed instance.
// Per-cell failures land in the row's status; the sweep continues. Cells
// run in a bounded worker pool; row order is deterministic.
std::vector<BenchRow> run_bench(const BenchConfig& config);

std::string bench_csv_header();
std::string bench_csv(const std::vector<BenchRow>& rows);

// Capacity every bench instance gets per device: factor times the balanced
// need (total reserve / n + max reserve).
bytes_t bench_capacity(const GroupedGraph& gg, int devices, double factor);

// ---- bound suite -------------------------------------------------------

struct BoundSuiteConfig {
  int count = 200;
  std::uint64_t seed = 1;
  std::vector<int> device_counts{2, 3};
  bool small_comm_only = true;  // regenerate until rho <= 1
};

struct BoundRow {
  std::uint64_t seed = 0;
  int n = 0;
  BoundReport report;
};

// Seeded instances with small communication times, both placers, both
// bound checks against the exhaustive baselines.
std::vector<BoundRow> run_bound_suite(const BoundSuiteConfig& config);

std::string bound_suite_csv(const std::vector<BoundRow>& rows);

}  // namespace dagsched
