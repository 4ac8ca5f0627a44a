#include "dagsched/cost_model.hpp"

#include <random>

#include "dagsched/errors.hpp"
#include "dagsched/placers.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace dagsched;
namespace tu = dagsched::testutil;

TEST_CASE("affine latency with half-up rounding") {
  CommModel cm{100.0, 0.01, CommMode::Sequential};
  CHECK(comm_time(cm, 0) == 100);
  CHECK(comm_time(cm, 10000) == 200);
  CHECK(comm_time(zero_comm_model(), 123456) == 0);
  CHECK(comm_time(CommModel{0.0, 0.05, CommMode::Parallel}, 10) == 1);  // 0.5 up
}

TEST_CASE("comm_time is monotone in bytes") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    CommModel cm{tu::unit_draw(rng) * 50, tu::unit_draw(rng) * 0.1,
                 CommMode::Sequential};
    bytes_t a = tu::range_draw(rng, 0, 1 << 20);
    bytes_t b = tu::range_draw(rng, 0, 1 << 20);
    if (a > b) std::swap(a, b);
    CHECK(comm_time(cm, a) <= comm_time(cm, b));
  }
}

TEST_CASE("least-squares fit with clamping") {
  CommModel exact = fit_comm_model({{0, 100}, {10000, 200}});
  CHECK(exact.intercept_us == doctest::Approx(100.0));
  CHECK(exact.us_per_byte == doctest::Approx(0.01));

  CHECK_THROWS_AS(fit_comm_model({{0, 100}, {0, 100}, {0, 100}}),
                  ValidationError);

  // Decreasing samples: slope clamps to zero, intercept refits to the mean.
  CommModel clamped = fit_comm_model({{1000, 50}, {2000, 40}, {3000, 30}});
  CHECK(clamped.us_per_byte == 0.0);
  CHECK(clamped.intercept_us == doctest::Approx(40.0));
}

TEST_CASE("comm model file round trip and validation") {
  CommModel cm{12.5, 0.002, CommMode::Parallel};
  save_comm_model(cm, "comm_model_test.json");
  CommModel back = load_comm_model("comm_model_test.json");
  CHECK(back.intercept_us == doctest::Approx(12.5));
  CHECK(back.us_per_byte == doctest::Approx(0.002));
  CHECK(back.mode == CommMode::Parallel);
  CHECK_THROWS_AS(parse_comm_model(R"({"intercept_us":1,"us_per_byte":0})"),
                  ValidationError);
  CHECK_THROWS_AS(
      parse_comm_model(
          R"({"intercept_us":1,"us_per_byte":0,"mode":"warp"})"),
      ValidationError);
}

TEST_CASE("scalar report formulas") {
  ProfiledGraph g = make_graph(
      {tu::node(0, 2, 0, 1, 0), tu::node(1, 2, 0, 1, 0),
       tu::node(2, 2, 0, 1, 0), tu::node(3, 2, 0, 1, 0)},
      {{0, 1, 2}, {1, 2, 2}, {2, 3, 2}});
  GroupedGraph gg = tu::singletons(std::move(g));
  DeviceRoster roster = DeviceRoster::uniform(2, 4);
  CommModel cm{0.0, 1.0, CommMode::Sequential};  // c = bytes
  ScalarReport r =
      compute_scalars(gg, roster, cm, MemoryMode::TrainingPersistent);
  CHECK(r.K == doctest::Approx(2.0));    // 2 * 4 / 4
  CHECK(r.rho == doctest::Approx(1.0));  // max c 2 / min k 2
  CHECK(r.J == doctest::Approx(0.25));
  CHECK(r.sct_assumption_holds);
  CHECK_FALSE(r.single_task_oversized);
  CHECK_FALSE(r.has_zero_compute);

  // graph-static counts only the permanent part.
  ScalarReport rs = compute_scalars(gg, roster, cm, MemoryMode::GraphStatic);
  CHECK(rs.K == doctest::Approx(2.0));

  ScalarReport tight = compute_scalars(gg, DeviceRoster::uniform(2, 1), cm,
                                       MemoryMode::TrainingPersistent);
  CHECK(tight.single_task_oversized);  // J = 1
}

TEST_CASE("scalars ignore node relabeling") {
  auto build = [](std::vector<NodeId> ids) {
    std::vector<OpNode> nodes;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      nodes.push_back(tu::node(ids[i], 5 + static_cast<micros_t>(i), 0, 7, 3));
    }
    std::vector<Edge> edges{{ids[0], ids[1], 4}, {ids[1], ids[2], 9}};
    return tu::singletons(make_graph(std::move(nodes), std::move(edges)));
  };
  DeviceRoster roster = DeviceRoster::uniform(3, 100);
  CommModel cm{1.0, 0.5, CommMode::Sequential};
  ScalarReport a = compute_scalars(build({0, 1, 2}), roster, cm,
                                   MemoryMode::TrainingPersistent);
  ScalarReport b = compute_scalars(build({40, 87, 95}), roster, cm,
                                   MemoryMode::TrainingPersistent);
  CHECK(a.rho == b.rho);
  CHECK(a.K == b.K);
  CHECK(a.J == b.J);
}

TEST_CASE("perturbation contract") {
  GroupedGraph gg = tu::singletons(tu::diamond(100, 1000, 50));
  CHECK(perturb_profiles(gg, 0.0, 9).nodes[0].compute_time_us == 100);

  GroupedGraph a = perturb_profiles(gg, 0.2, 42);
  GroupedGraph b = perturb_profiles(gg, 0.2, 42);
  for (int i = 0; i < gg.node_count(); ++i) {
    CHECK(a.nodes[i].compute_time_us == b.nodes[i].compute_time_us);
    CHECK(a.nodes[i].perm_mem_bytes == gg.nodes[i].perm_mem_bytes);
  }
  for (int e = 0; e < gg.edge_count(); ++e) {
    CHECK(a.edges[e].tensor_bytes == b.edges[e].tensor_bytes);
  }
  GroupedGraph c = perturb_profiles(gg, 0.2, 43);
  bool differs = false;
  for (int i = 0; i < gg.node_count(); ++i) {
    differs |= a.nodes[i].compute_time_us != c.nodes[i].compute_time_us;
  }
  for (int e = 0; e < gg.edge_count(); ++e) {
    differs |= a.edges[e].tensor_bytes != c.edges[e].tensor_bytes;
  }
  CHECK(differs);

  CHECK_THROWS_AS(perturb_profiles(gg, 1.0, 1), ValidationError);
}

TEST_CASE("perturbed values stay inside the band") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    GroupedGraph gg = tu::singletons(tu::random_dag(rng, {}));
    double f = tu::unit_draw(rng) * 0.9;
    GroupedGraph p = perturb_profiles(gg, f, trial);
    auto in_band = [&](std::int64_t v, std::int64_t r) {
      std::int64_t lo = static_cast<std::int64_t>(
                            std::ceil((1.0 - f) * static_cast<double>(v))) - 1;
      std::int64_t hi = static_cast<std::int64_t>(
                            std::floor((1.0 + f) * static_cast<double>(v))) + 1;
      return lo <= r && r <= hi;
    };
    for (int i = 0; i < gg.node_count(); ++i) {
      std::int64_t v = gg.nodes[i].compute_time_us;
      std::int64_t r = p.nodes[i].compute_time_us;
      CHECK(in_band(v, r));
      if (v > 0) CHECK(r >= 1);
    }
    for (int e = 0; e < gg.edge_count(); ++e) {
      CHECK(in_band(gg.edges[e].tensor_bytes, p.edges[e].tensor_bytes));
    }
  }
}
