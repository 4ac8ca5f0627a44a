// Command-line front end: gen | place | simulate | bench | bounds.
// Exit codes: 0 ok, 2 validation, 3 infeasible, 4 solver failure.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dagsched/bench.hpp"
#include "dagsched/errors.hpp"
#include "dagsched/generator.hpp"
#include "dagsched/oracle.hpp"
#include "dagsched/simulator.hpp"
#include "json.hpp"

namespace {

using namespace dagsched;

struct RosterFlags {
  int devices = 2;
  std::vector<bytes_t> memory;  // repeatable; one value means uniform

  DeviceRoster build() const {
    if (memory.empty()) {
      // No limit requested: effectively unconstrained devices.
      return DeviceRoster::uniform(devices,
                                   std::numeric_limits<bytes_t>::max() / 4);
    }
    if (memory.size() == 1) {
      return DeviceRoster::uniform(devices, memory.front());
    }
    DeviceRoster roster;
    for (int i = 0; i < static_cast<int>(memory.size()); ++i) {
      roster.devices.push_back({i, memory[i]});
    }
    return roster;
  }
  int count() const {
    return memory.size() > 1 ? static_cast<int>(memory.size()) : devices;
  }
};

struct CommFlags {
  std::string model_file;
  std::string mode_override;

  CommModel build() const {
    CommModel cm = zero_comm_model(CommMode::Sequential);
    if (!model_file.empty()) cm = load_comm_model(model_file);
    if (mode_override == "sequential") cm.mode = CommMode::Sequential;
    if (mode_override == "parallel") cm.mode = CommMode::Parallel;
    return cm;
  }
};

MemoryMode parse_memory_mode(const std::string& name) {
  if (name == "graph-static") return MemoryMode::GraphStatic;
  if (name == "training-persistent") return MemoryMode::TrainingPersistent;
  throw ValidationError("unknown memory mode: " + name);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

void add_roster_flags(CLI::App* cmd, RosterFlags& roster) {
  cmd->add_option("--devices", roster.devices, "Number of devices")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--memory", roster.memory,
                  "Per-device capacity in bytes; repeat for heterogeneous "
                  "capacities (default unlimited)");
}

void add_comm_flags(CLI::App* cmd, CommFlags& comm) {
  cmd->add_option("--comm-model", comm.model_file,
                  "Communication model JSON file (default zero cost)");
  cmd->add_option("--comm-mode", comm.mode_override,
                  "Override transfer mode: sequential | parallel")
      ->check(CLI::IsMember({"sequential", "parallel"}));
}

int run(int argc, char** argv) {
  CLI::App app{"Memory-constrained device placement for operator DAGs"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "Generate a synthetic graph");
  GenSpec gen_spec;
  std::string gen_family = "random-dag";
  std::string gen_out = "graph.json";
  gen->add_option("--family", gen_family,
                  "branchy | layered-chain | random-dag");
  gen->add_option("--nodes", gen_spec.node_count, "Node count")
      ->check(CLI::PositiveNumber);
  gen->add_option("--branching", gen_spec.branching, "Branches per block");
  gen->add_option("--layers", gen_spec.layers, "Layer count (layered-chain)");
  gen->add_option("--edge-prob", gen_spec.edge_prob,
                  "Edge probability (random-dag)");
  gen->add_option("--seed", gen_spec.seed, "Generator seed");
  gen->add_option("--colocate-frac", gen_spec.colocate_edge_frac,
                  "Fraction of edges given a shared colocation label");
  gen->add_option("--coplace-frac", gen_spec.coplace_frac,
                  "Fraction of nodes joined into coplace pairs");
  gen->add_option("--out", gen_out, "Output graph file");

  // ---- place ----
  auto* place = app.add_subcommand("place", "Compute a placement");
  std::string place_graph;
  std::string place_algo = "m-etf";
  std::string place_out = "placement.json";
  std::string place_lp_dump;
  std::string place_memory_mode = "training-persistent";
  RosterFlags place_roster;
  CommFlags place_comm;
  PipelineOptions place_pipeline;
  bool place_no_coplacement = false;
  bool place_no_fusion = false;
  double place_perturb = 0.0;
  std::uint64_t place_seed = 0;
  place->add_option("graph", place_graph, "Profiled graph JSON")->required();
  place->add_option("--algo", place_algo, "m-topo | m-etf | m-sct");
  add_roster_flags(place, place_roster);
  add_comm_flags(place, place_comm);
  place->add_option("--memory-mode", place_memory_mode,
                    "graph-static | training-persistent");
  place->add_option("--lp-threshold", place_pipeline.lp_threshold,
                    "Favorite rounding threshold, in (0, 0.5)");
  place->add_flag("--no-coplacement", place_no_coplacement,
                  "Skip the co-placement transform");
  place->add_flag("--no-fusion", place_no_fusion,
                  "Skip the fusion transform");
  place->add_option("--perturb", place_perturb,
                    "Perturb profiles by this fraction before placing");
  place->add_option("--seed", place_seed, "Seed for --perturb");
  place->add_option("--lp-dump", place_lp_dump,
                    "Write the relaxed program in LP text format (m-sct)");
  place->add_option("--out", place_out, "Output placement file");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Replay and verify a placement");
  std::string sim_graph, sim_placement;
  std::string sim_out = "report.json";
  std::string sim_trace_out = "trace.csv";
  std::string sim_memory_mode = "training-persistent";
  RosterFlags sim_roster;
  CommFlags sim_comm;
  bool sim_no_coplacement = false;
  bool sim_no_fusion = false;
  bool sim_trace = false;
  sim->add_option("graph", sim_graph, "Profiled graph JSON")->required();
  sim->add_option("placement", sim_placement, "Placement JSON")->required();
  add_roster_flags(sim, sim_roster);
  add_comm_flags(sim, sim_comm);
  sim->add_option("--memory-mode", sim_memory_mode,
                  "graph-static | training-persistent");
  sim->add_flag("--no-coplacement", sim_no_coplacement,
                "Skip the co-placement transform (match the place run)");
  sim->add_flag("--no-fusion", sim_no_fusion, "Skip the fusion transform");
  sim->add_flag("--trace", sim_trace, "Also write an event trace CSV");
  sim->add_option("--trace-out", sim_trace_out, "Trace CSV path");
  sim->add_option("--out", sim_out, "Report JSON path");

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Sweep families x sizes x algos");
  BenchConfig bench_config;
  std::vector<std::string> bench_families{"random-dag"};
  std::vector<std::string> bench_algos{"m-etf"};
  std::string bench_out = "bench.csv";
  std::string bench_memory_mode = "training-persistent";
  CommFlags bench_comm;
  bool bench_no_coplacement = false;
  bool bench_no_fusion = false;
  bench->add_option("--families", bench_families,
                    "branchy | layered-chain | random-dag");
  bench->add_option("--sizes", bench_config.sizes, "Node counts");
  bench->add_option("--algos", bench_algos, "Algorithms to sweep");
  bench->add_option("--seeds", bench_config.seeds, "Graph seeds");
  bench->add_option("--perturbs", bench_config.perturbs,
                    "Profile perturbation fractions (0 disables)");
  bench->add_option("--devices", bench_config.devices, "Device count");
  bench->add_option("--capacity-factor", bench_config.capacity_factor,
                    "Capacity as a multiple of the balanced need");
  bench->add_option("--branching", bench_config.branching,
                    "Branchy branching factor");
  bench->add_option("--edge-prob", bench_config.edge_prob,
                    "Random-dag edge probability");
  add_comm_flags(bench, bench_comm);
  bench->add_option("--memory-mode", bench_memory_mode,
                    "graph-static | training-persistent");
  bench->add_flag("--no-coplacement", bench_no_coplacement, "");
  bench->add_flag("--no-fusion", bench_no_fusion, "");
  bench->add_option("--out", bench_out, "Output CSV");

  // ---- bounds ----
  auto* bounds = app.add_subcommand(
      "bounds", "Exhaustive-baseline bound suite on small instances");
  BoundSuiteConfig bounds_config;
  std::string bounds_out = "bounds.csv";
  bounds->add_option("--count", bounds_config.count, "Instance count");
  bounds->add_option("--seed", bounds_config.seed, "Base seed");
  bounds->add_option("--devices", bounds_config.device_counts,
                     "Device counts to alternate through");
  bounds->add_option("--out", bounds_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    gen_spec.family = parse_family(gen_family);
    ProfiledGraph g = generate_graph(gen_spec);
    save_graph(g, gen_out);
    std::cout << "family=" << gen_family << " nodes=" << g.node_count()
              << " edges=" << g.edge_count() << " seed=" << gen_spec.seed
              << " out=" << gen_out << "\n";
    return 0;
  }

  if (place->parsed()) {
    Algo algo = parse_algo(place_algo);
    if (place_pipeline.lp_threshold <= 0 ||
        place_pipeline.lp_threshold >= 0.5) {
      throw ValidationError("--lp-threshold must lie in (0, 0.5)");
    }
    if (place_perturb < 0 || place_perturb >= 1) {
      throw ValidationError("--perturb must lie in [0, 1)");
    }
    place_pipeline.coplacement = !place_no_coplacement;
    place_pipeline.fusion = !place_no_fusion;
    auto graph = std::make_shared<ProfiledGraph>(load_graph(place_graph));
    DeviceRoster roster = place_roster.build();
    CommModel cm = place_comm.build();
    MemoryMode mm = parse_memory_mode(place_memory_mode);

    auto t0 = std::chrono::steady_clock::now();
    GroupedGraph gg = build_grouped(graph, place_pipeline);
    if (place_perturb > 0) {
      gg = perturb_profiles(gg, place_perturb, place_seed);
    }
    PlaceOutcome outcome = run_placer(algo, gg, roster, cm, place_pipeline);
    double total_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

    if (!place_lp_dump.empty() && algo == Algo::MSct) {
      write_file(place_lp_dump, lp_to_text(build_lp(gg, cm)));
    }
    SimReport rep = simulate(gg, outcome.placement, roster, cm, mm);
    std::vector<bytes_t> peaks;
    for (const DeviceReport& d : rep.devices) peaks.push_back(d.peak_bytes);
    write_file(place_out, placement_to_json(gg, outcome.placement,
                                            rep.start_us, rep.makespan_us,
                                            peaks));
    std::cout << "algorithm=" << place_algo << " nodes=" << graph->node_count()
              << " meta_nodes=" << gg.node_count()
              << " makespan_us=" << rep.makespan_us << " placement_ms="
              << total_ms << " seed=" << place_seed << " out=" << place_out
              << "\n";
    return 0;
  }

  if (sim->parsed()) {
    PipelineOptions pipeline;
    pipeline.coplacement = !sim_no_coplacement;
    pipeline.fusion = !sim_no_fusion;
    auto graph = std::make_shared<ProfiledGraph>(load_graph(sim_graph));
    GroupedGraph gg = build_grouped(graph, pipeline);
    DeviceRoster roster = sim_roster.build();
    CommModel cm = sim_comm.build();
    MemoryMode mm = parse_memory_mode(sim_memory_mode);
    std::ifstream in(sim_placement);
    if (!in) throw ValidationError("cannot open " + sim_placement);
    std::ostringstream buf;
    buf << in.rdbuf();
    Placement placement =
        placement_from_json(gg, buf.str(), roster.count());

    VerifyResult verdict = verify_placement(gg, placement, roster, cm, mm);
    nlohmann::ordered_json doc;
    doc["pass"] = verdict.pass;
    doc["diagnostic"] = verdict.diagnostic;
    if (verdict.pass) {
      const SimReport& r = verdict.report;
      doc["makespan_us"] = r.makespan_us;
      doc["transfer_count"] = r.transfer_count;
      doc["transfer_bytes"] = r.transfer_bytes;
      doc["duplicate_transfers"] = r.duplicate_transfers;
      doc["devices"] = nlohmann::ordered_json::array();
      for (const DeviceReport& d : r.devices) {
        doc["devices"].push_back({{"peak_bytes", d.peak_bytes},
                                  {"busy_us", d.busy_us},
                                  {"idle_us", d.idle_us}});
      }
    }
    write_file(sim_out, doc.dump(2) + "\n");
    if (sim_trace && verdict.pass) {
      SimOptions opts;
      opts.record_trace = true;
      SimReport traced = simulate(gg, placement, roster, cm, mm, opts);
      write_file(sim_trace_out, trace_to_csv(traced.trace));
    }
    std::cout << (verdict.pass ? "PASS" : "FAIL") << " " << verdict.diagnostic
              << " out=" << sim_out << "\n";
    return verdict.pass ? 0 : 3;
  }

  if (bench->parsed()) {
    bench_config.families.clear();
    for (const std::string& f : bench_families) {
      bench_config.families.push_back(parse_family(f));
    }
    bench_config.algos.clear();
    for (const std::string& a : bench_algos) {
      bench_config.algos.push_back(parse_algo(a));
    }
    bench_config.cm = bench_comm.build();
    bench_config.memory_mode = parse_memory_mode(bench_memory_mode);
    bench_config.pipeline.coplacement = !bench_no_coplacement;
    bench_config.pipeline.fusion = !bench_no_fusion;
    std::vector<BenchRow> rows = run_bench(bench_config);
    write_file(bench_out, bench_csv(rows));
    std::cout << "rows=" << rows.size() << " out=" << bench_out << "\n";
    return 0;
  }

  if (bounds->parsed()) {
    std::vector<BoundRow> rows = run_bound_suite(bounds_config);
    write_file(bounds_out, bound_suite_csv(rows));
    int pass = 0;
    for (const BoundRow& row : rows) {
      if (row.report.etf_pass && row.report.sct_pass) ++pass;
    }
    std::cout << "instances=" << rows.size() << " pass=" << pass
              << " out=" << bounds_out << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dagsched::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case dagsched::ErrorKind::Validation:
        return 2;
      case dagsched::ErrorKind::Infeasible:
        return 3;
      case dagsched::ErrorKind::Solver:
        return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
