#include "dagsched/simulator.hpp"

#include <memory>
#include <random>

#include "dagsched/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dagsched;
namespace tu = dagsched::testutil;

namespace {

Placement manual(const GroupedGraph& gg, std::vector<int> device_of,
                 int devices) {
  Placement p;
  p.algorithm = "manual";
  p.device_of = std::move(device_of);
  p.exec_order.assign(devices, {});
  for (int j : meta_topo_order(gg)) {
    p.exec_order[p.device_of[j]].push_back(j);
  }
  p.start_us.assign(gg.node_count(), 0);
  return p;
}

}  // namespace

TEST_CASE("single node run") {
  ProfiledGraph g = make_graph({tu::node(0, 10, 3, 5, 7)}, {});
  GroupedGraph gg = tu::singletons(std::move(g));
  SimReport rep = simulate(gg, manual(gg, {0}, 1), DeviceRoster::uniform(1, 100),
                           zero_comm_model(), MemoryMode::TrainingPersistent);
  CHECK(rep.makespan_us == 10);
  CHECK(rep.devices[0].peak_bytes == 15);
  CHECK(rep.transfer_count == 0);
  CHECK(rep.devices[0].busy_us == 10);
  CHECK(rep.devices[0].idle_us == 0);
}

TEST_CASE("cross-device chain pays one transfer") {
  ProfiledGraph g = make_graph({tu::node(0, 3), tu::node(1, 5)}, {{0, 1, 2}});
  GroupedGraph gg = tu::singletons(std::move(g));
  CommModel cm{0.0, 1.0, CommMode::Sequential};
  SimReport rep = simulate(gg, manual(gg, {0, 1}, 2),
                           DeviceRoster::uniform(2, 100), cm,
                           MemoryMode::TrainingPersistent);
  CHECK(rep.makespan_us == 10);  // 3 + 2 + 5
  CHECK(rep.transfer_count == 1);
  CHECK(rep.transfer_bytes == 2);
  CHECK(rep.start_us[1] == 5);
}

TEST_CASE("two consumers on one remote device share a single transfer") {
  ProfiledGraph g = make_graph(
      {tu::node(0, 2), tu::node(1, 2), tu::node(2, 2)},
      {{0, 1, 4}, {0, 2, 4}});
  GroupedGraph gg = tu::singletons(std::move(g));
  CommModel cm{0.0, 1.0, CommMode::Sequential};
  SimReport rep = simulate(gg, manual(gg, {0, 1, 1}, 2),
                           DeviceRoster::uniform(2, 100), cm,
                           MemoryMode::TrainingPersistent);
  CHECK(rep.transfer_count == 1);
  CHECK(rep.duplicate_transfers == 0);
  CHECK(rep.cache_hits == 1);
}

TEST_CASE("memory violation reports time and node") {
  ProfiledGraph g = make_graph(
      {tu::node(0, 5, 0, 0, 60), tu::node(1, 5, 0, 0, 60)}, {{0, 1, 0}});
  GroupedGraph gg = tu::singletons(std::move(g));
  CHECK_THROWS_WITH_AS(
      simulate(gg, manual(gg, {0, 0}, 1), DeviceRoster::uniform(1, 100),
               zero_comm_model(), MemoryMode::TrainingPersistent),
      doctest::Contains("t=5"), InfeasibleError);

  VerifyResult verdict = verify_placement(
      gg, manual(gg, {0, 0}, 1), DeviceRoster::uniform(1, 100),
      zero_comm_model(), MemoryMode::TrainingPersistent);
  CHECK_FALSE(verdict.pass);
  CHECK(verdict.diagnostic.find("memory violation") != std::string::npos);
}

TEST_CASE("graph-static mode frees outputs once consumers finish") {
  // Chain of three, 60 bytes of output each. With outputs released after
  // the consumer finishes, at most two coexist; held permanently, all three
  // pile up.
  ProfiledGraph g = make_graph(
      {tu::node(0, 5, 0, 0, 60), tu::node(1, 5, 0, 0, 60),
       tu::node(2, 5, 0, 0, 60)},
      {{0, 1, 0}, {1, 2, 0}});
  GroupedGraph gg = tu::singletons(std::move(g));
  SimReport rep = simulate(gg, manual(gg, {0, 0, 0}, 1),
                           DeviceRoster::uniform(1, 150), zero_comm_model(),
                           MemoryMode::GraphStatic);
  CHECK(rep.devices[0].peak_bytes == 120);
  CHECK(rep.makespan_us == 15);
  CHECK_THROWS_AS(
      simulate(gg, manual(gg, {0, 0, 0}, 1), DeviceRoster::uniform(1, 150),
               zero_comm_model(), MemoryMode::TrainingPersistent),
      InfeasibleError);
}

TEST_CASE("exec_order that contradicts the DAG deadlocks") {
  ProfiledGraph g = make_graph({tu::node(0, 5), tu::node(1, 5)}, {{0, 1, 0}});
  GroupedGraph gg = tu::singletons(std::move(g));
  Placement p = manual(gg, {0, 0}, 1);
  std::swap(p.exec_order[0][0], p.exec_order[0][1]);
  CHECK_THROWS_WITH_AS(
      simulate(gg, p, DeviceRoster::uniform(1, 100), zero_comm_model(),
               MemoryMode::TrainingPersistent),
      doctest::Contains("deadlock"), ValidationError);
}

TEST_CASE("a release and a reservation at the same instant interleave safely") {
  // Node 1 can only start if node 0's temporary memory is gone by then.
  ProfiledGraph g = make_graph(
      {tu::node(0, 5, 60, 0, 0), tu::node(1, 5, 60, 0, 0)}, {});
  GroupedGraph gg = tu::singletons(std::move(g));
  SimReport rep = simulate(gg, manual(gg, {0, 0}, 1),
                           DeviceRoster::uniform(1, 100), zero_comm_model(),
                           MemoryMode::TrainingPersistent);
  CHECK(rep.makespan_us == 10);
  CHECK(rep.devices[0].peak_bytes == 60);
}

TEST_CASE("simulation agrees with itself and the critical path") {
  std::mt19937_64 rng(51);
  tu::RandomDagSpec spec;
  spec.max_nodes = 18;
  spec.tensor_max = 300;
  for (int trial = 0; trial < 100; ++trial) {
    GroupedGraph gg = tu::singletons(tu::random_dag(rng, spec));
    if (gg.node_count() == 0) continue;
    int devices = 1 + static_cast<int>(tu::range_draw(rng, 0, 2));
    std::vector<int> assign(gg.node_count());
    for (int& d : assign) d = static_cast<int>(tu::range_draw(rng, 0, devices - 1));
    Placement p = manual(gg, assign, devices);
    DeviceRoster roster = DeviceRoster::uniform(devices, 1 << 28);
    CommModel seq{4.0, 0.2, CommMode::Sequential};
    CommModel par{4.0, 0.2, CommMode::Parallel};

    SimReport a = simulate(gg, p, roster, seq, MemoryMode::TrainingPersistent);
    SimReport b = simulate(gg, p, roster, seq, MemoryMode::TrainingPersistent);
    CHECK(a.makespan_us == b.makespan_us);
    CHECK(a.start_us == b.start_us);

    // Relaxing the transfer queues can only help.
    SimReport c = simulate(gg, p, roster, par, MemoryMode::TrainingPersistent);
    CHECK(c.makespan_us <= a.makespan_us);
    CHECK(a.makespan_us >= critical_path_us(gg));

    SimReport st = simulate(gg, p, roster, seq, MemoryMode::GraphStatic);
    for (int d = 0; d < devices; ++d) {
      CHECK(st.devices[d].peak_bytes <= a.devices[d].peak_bytes);
      CHECK(a.devices[d].busy_us + a.devices[d].idle_us == a.makespan_us);
    }
  }
}

TEST_CASE("zero communication on one device runs back to back") {
  GroupedGraph gg = tu::singletons(tu::chain(6, 7));
  SimReport rep = simulate(gg, manual(gg, {0, 0, 0, 0, 0, 0}, 1),
                           DeviceRoster::uniform(1, 1 << 20),
                           zero_comm_model(), MemoryMode::TrainingPersistent);
  CHECK(rep.makespan_us == 42);
  CHECK(rep.devices[0].idle_us == 0);
}

TEST_CASE("trace export is chronological and well formed") {
  ProfiledGraph g = make_graph({tu::node(0, 3), tu::node(1, 5)}, {{0, 1, 2}});
  GroupedGraph gg = tu::singletons(std::move(g));
  SimOptions opts;
  opts.record_trace = true;
  CommModel cm{0.0, 1.0, CommMode::Sequential};
  SimReport rep = simulate(gg, manual(gg, {0, 1}, 2),
                           DeviceRoster::uniform(2, 100), cm,
                           MemoryMode::TrainingPersistent, opts);
  std::string csv = trace_to_csv(rep.trace);
  CHECK(csv.rfind("time_us,device,event,node\n", 0) == 0);
  CHECK(csv.find("start") != std::string::npos);
  CHECK(csv.find("xfer_end") != std::string::npos);
}
