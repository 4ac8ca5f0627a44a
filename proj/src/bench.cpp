#include "dagsched/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "dagsched/errors.hpp"
#include "dagsched/simulator.hpp"

namespace dagsched {

namespace {

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

Algo parse_algo(const std::string& name) {
  if (name == "m-topo") return Algo::MTopo;
  if (name == "m-etf") return Algo::MEtf;
  if (name == "m-sct") return Algo::MSct;
  throw ValidationError("unknown algorithm: " + name +
                        " (expected m-topo, m-etf or m-sct)");
}

std::string algo_name(Algo algo) {
  switch (algo) {
    case Algo::MTopo:
      return "m-topo";
    case Algo::MEtf:
      return "m-etf";
    case Algo::MSct:
      return "m-sct";
  }
  return "?";
}

GroupedGraph build_grouped(std::shared_ptr<const ProfiledGraph> graph,
                           const PipelineOptions& opts) {
  GroupedGraph gg = apply_colocation(std::move(graph));
  if (opts.coplacement) gg = apply_coplacement(gg);
  if (opts.fusion) gg = fuse_operators(gg);
  return gg;
}

PlaceOutcome run_placer(Algo algo, const GroupedGraph& gg,
                        const DeviceRoster& roster, const CommModel& cm,
                        const PipelineOptions& opts) {
  PlaceOutcome out;
  auto t0 = std::chrono::steady_clock::now();
  switch (algo) {
    case Algo::MTopo:
      out.placement = place_mtopo(gg, roster, cm);
      break;
    case Algo::MEtf:
      out.placement = place_metf(gg, roster, cm, &out.stats);
      break;
    case Algo::MSct: {
      SctLp lp = build_lp(gg, cm);
      LpSolution sol = solve_relaxed(lp);
      FavoriteMap fav =
          round_and_extract(lp, sol, opts.lp_threshold, &out.round_stats);
      out.lp_solution = std::move(sol);
      out.placement = place_msct(gg, roster, cm, fav, &out.stats);
      break;
    }
  }
  out.wall_ms = wall_ms_since(t0);
  return out;
}

bytes_t bench_capacity(const GroupedGraph& gg, int devices, double factor) {
  bytes_t total = 0;
  bytes_t largest = 0;
  for (const MetaNode& m : gg.nodes) {
    total += reserve_bytes(m);
    largest = std::max(largest, reserve_bytes(m));
  }
  double need = static_cast<double>(total) / devices +
                static_cast<double>(largest);
  return static_cast<bytes_t>(std::ceil(need * factor));
}

namespace {

struct CellKey {
  GraphFamily family;
  int nodes;
  Algo algo;
  std::uint64_t seed;
};

// Perturbation draws get their own stream, detached from the graph seed.
std::uint64_t perturb_seed(std::uint64_t seed, int perturb_index) {
  return seed * 1000003ULL + 17ULL * (perturb_index + 1);
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  std::vector<CellKey> cells;
  for (GraphFamily family : config.families) {
    for (int size : config.sizes) {
      for (Algo algo : config.algos) {
        for (std::uint64_t seed : config.seeds) {
          cells.push_back({family, size, algo, seed});
        }
      }
    }
  }
  const int cell_count = static_cast<int>(cells.size());
  const int perturb_count = static_cast<int>(config.perturbs.size());
  std::vector<BenchRow> rows(
      static_cast<std::size_t>(cell_count) * perturb_count);

#pragma omp parallel for schedule(dynamic)
  for (int ci = 0; ci < cell_count; ++ci) {
    const CellKey& cell = cells[ci];
    GenSpec spec;
    spec.family = cell.family;
    spec.node_count = cell.nodes;
    spec.branching = config.branching;
    spec.edge_prob = config.edge_prob;
    spec.seed = cell.seed;

    std::shared_ptr<const ProfiledGraph> graph;
    GroupedGraph gg;
    DeviceRoster roster;
    micros_t baseline_makespan = 0;
    bool baseline_ok = false;

    auto fill_common = [&](BenchRow& row, double perturb) {
      row.family = family_name(cell.family);
      row.nodes = cell.nodes;
      row.algo = algo_name(cell.algo);
      row.seed = cell.seed;
      row.perturb = perturb;
      row.bound_pass = "na";
    };
    auto classify = [](const Error& e) {
      switch (e.kind()) {
        case ErrorKind::Validation:
          return "validation";
        case ErrorKind::Infeasible:
          return "infeasible";
        case ErrorKind::Solver:
          return "solver";
      }
      return "error";
    };

    try {
      graph = std::make_shared<ProfiledGraph>(generate_graph(spec));
      gg = build_grouped(graph, config.pipeline);
      roster = DeviceRoster::uniform(
          config.devices,
          bench_capacity(gg, config.devices, config.capacity_factor));
    } catch (const Error& e) {
      for (int pi = 0; pi < perturb_count; ++pi) {
        BenchRow& row = rows[static_cast<std::size_t>(ci) * perturb_count + pi];
        fill_common(row, config.perturbs[pi]);
        row.status = classify(e);
      }
      continue;
    }

    // The unperturbed placement anchors every ratio in this cell.
    {
      try {
        PlaceOutcome base =
            run_placer(cell.algo, gg, roster, config.cm, config.pipeline);
        SimReport rep = simulate(gg, base.placement, roster, config.cm,
                                 config.memory_mode);
        baseline_makespan = rep.makespan_us;
        baseline_ok = true;
      } catch (const Error&) {
        baseline_ok = false;
      }
    }

    for (int pi = 0; pi < perturb_count; ++pi) {
      BenchRow& row = rows[static_cast<std::size_t>(ci) * perturb_count + pi];
      double perturb = config.perturbs[pi];
      fill_common(row, perturb);
      try {
        GroupedGraph placed_on = gg;
        if (perturb > 0) {
          placed_on =
              perturb_profiles(gg, perturb, perturb_seed(cell.seed, pi));
        }
        PlaceOutcome outcome = run_placer(cell.algo, placed_on, roster,
                                          config.cm, config.pipeline);
        row.placement_ms = outcome.wall_ms;
        // Score on the unperturbed instance, whatever profile the placer saw.
        VerifyResult verdict = verify_placement(gg, outcome.placement, roster,
                                                config.cm, config.memory_mode);
        row.feasible = verdict.pass;
        row.status = "ok";
        if (verdict.pass) {
          row.makespan_us = verdict.report.makespan_us;
          row.makespan_ratio =
              baseline_ok && baseline_makespan > 0
                  ? static_cast<double>(row.makespan_us) / baseline_makespan
                  : 1.0;
          if (gg.node_count() <= OracleLimits{}.max_nodes &&
              config.devices <= OracleLimits{}.max_devices &&
              cell.algo != Algo::MTopo) {
            PlaceOutcome etf =
                cell.algo == Algo::MEtf
                    ? outcome
                    : run_placer(Algo::MEtf, gg, roster, config.cm,
                                 config.pipeline);
            PlaceOutcome sct =
                cell.algo == Algo::MSct
                    ? outcome
                    : run_placer(Algo::MSct, gg, roster, config.cm,
                                 config.pipeline);
            BoundReport bounds =
                check_bounds(gg, roster, config.cm, config.memory_mode,
                             etf.placement, sct.placement);
            bool pass = cell.algo == Algo::MEtf ? bounds.etf_pass
                                                : bounds.sct_pass;
            row.bound_pass = pass ? "1" : "0";
          }
        }
      } catch (const Error& e) {
        row.status = classify(e);
      }
    }
  }
  return rows;
}

std::string bench_csv_header() {
  return "family,nodes,algo,seed,perturb,status,placement_ms,makespan_us,"
         "feasible,makespan_ratio,bound_pass";
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << bench_csv_header() << "\n";
  for (const BenchRow& row : rows) {
    out << row.family << "," << row.nodes << "," << row.algo << ","
        << row.seed << "," << row.perturb << "," << row.status << ","
        << row.placement_ms << "," << row.makespan_us << ","
        << (row.feasible ? 1 : 0) << "," << row.makespan_ratio << ","
        << row.bound_pass << "\n";
  }
  return out.str();
}

std::vector<BoundRow> run_bound_suite(const BoundSuiteConfig& config) {
  std::vector<BoundRow> rows(config.count);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < config.count; ++i) {
    int n = config.device_counts[i % config.device_counts.size()];
    std::uint64_t base_seed = config.seed + 7919ULL * i;

    // Regenerate until the instance satisfies the small-communication
    // assumption and stays inside the exhaustive-search guard.
    for (std::uint64_t attempt = 0;; ++attempt) {
      std::uint64_t seed = base_seed + 104729ULL * attempt;
      GenSpec spec;
      spec.family = GraphFamily::RandomDag;
      // Keep three-device instances a little smaller; the assignment space
      // grows steeply with n.
      spec.node_count = n == 2 ? 6 + static_cast<int>(seed % 5)
                               : 5 + static_cast<int>(seed % 4);
      spec.edge_prob = 0.45;
      spec.seed = seed;
      spec.compute_min_us = 60;
      spec.compute_max_us = 120;
      spec.tensor_min_bytes = 1000;
      spec.tensor_max_bytes = 5000;
      spec.temp_min_bytes = 0;
      spec.temp_max_bytes = 1 << 10;

      CommModel cm{5.0, 0.01, CommMode::Parallel};
      try {
        auto graph = std::make_shared<ProfiledGraph>(generate_graph(spec));
        PipelineOptions pipeline;
        pipeline.coplacement = false;  // keep edge sizes, and rho, intact
        pipeline.fusion = false;
        GroupedGraph gg = build_grouped(graph, pipeline);
        DeviceRoster roster =
            DeviceRoster::uniform(n, bench_capacity(gg, n, 2.0));
        ScalarReport scalars =
            compute_scalars(gg, roster, cm, MemoryMode::TrainingPersistent);
        if (config.small_comm_only && !scalars.sct_assumption_holds) continue;
        if (!((1.0 - scalars.J) * scalars.K > 1.0)) continue;

        PlaceOutcome etf = run_placer(Algo::MEtf, gg, roster, cm, pipeline);
        PlaceOutcome sct = run_placer(Algo::MSct, gg, roster, cm, pipeline);
        BoundRow row;
        row.seed = seed;
        row.n = n;
        row.report =
            check_bounds(gg, roster, cm, MemoryMode::TrainingPersistent,
                         etf.placement, sct.placement);
        rows[i] = row;
        break;
      } catch (const InfeasibleError&) {
        continue;  // guard tripped (too many orders); try the next seed
      }
    }
  }
  return rows;
}

std::string bound_suite_csv(const std::vector<BoundRow>& rows) {
  std::ostringstream out;
  out << "seed,n,rho,K,J,R,etf_makespan,sct_makespan,opt_n,opt_R,"
         "etf_bound_a,etf_bound_b,sct_bound,pass\n";
  for (const BoundRow& row : rows) {
    const BoundReport& r = row.report;
    out << row.seed << "," << row.n << "," << r.rho << "," << r.K << ","
        << r.J << "," << r.R << "," << r.etf_makespan_us << ","
        << r.sct_makespan_us << "," << r.omega_opt_n_us << ","
        << r.omega_opt_r_us << "," << r.etf_bound_a << "," << r.etf_bound_b
        << "," << r.sct_bound << ","
        << ((r.etf_pass && r.sct_pass) ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace dagsched
