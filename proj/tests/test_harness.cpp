#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "mesu/harness.hpp"
#include "support.hpp"

using namespace mesu;

TEST_CASE("topology generation") {
  SECTION("a 5N5E network has the advertised shape") {
    Topology t = generate_topology(5, 5, 11);
    CHECK(t.node_count() == 5);
    CHECK(t.cloud() == 4);
    int ap_ap = 0, uplinks = 0;
    for (const Link& l : t.links()) {
      bool cloud = l.a == t.cloud() || l.b == t.cloud();
      (cloud ? uplinks : ap_ap) += 1;
      if (cloud)
        CHECK((l.rate_bps == 2e9 || l.rate_bps == 5e9));
      else
        CHECK((l.rate_bps == 20e9 || l.rate_bps == 40e9));
    }
    CHECK(ap_ap == 5);
    CHECK(uplinks == 4);
    CHECK_NOTHROW(build_path_table(t));  // connected
  }
  SECTION("below the required link count is an error") {
    CHECK_THROWS_AS(generate_topology(5, 3, 1), ValidationError);
    CHECK_THROWS_AS(generate_topology(5, 7, 1), ValidationError);  // above C(4,2)
  }
  SECTION("the same seed writes identical files") {
    std::ostringstream a, b;
    generate_topology(10, 23, 99).save(a);
    generate_topology(10, 23, 99).save(b);
    CHECK(a.str() == b.str());
    std::ostringstream c;
    generate_topology(10, 23, 100).save(c);
    CHECK(a.str() != c.str());
  }
  SECTION("spec strings parse") {
    CHECK(parse_topology_spec("25N50E") == std::pair<int, int>{25, 50});
    CHECK(parse_topology_spec("100N150E") == std::pair<int, int>{100, 150});
    CHECK_THROWS_AS(parse_topology_spec("banana"), ValidationError);
  }
}

TEST_CASE("initial deployment sampling") {
  Topology t = generate_topology(25, 50, 5);
  auto dep = sample_initial_deployment(t, 0.5, 2, 77);
  CHECK(dep.size() == 12);  // floor(0.5 * 24)
  std::set<NodeId> nodes;
  for (auto [n, m] : dep) {
    CHECK(m == 2);
    CHECK(n != t.cloud());
    nodes.insert(n);
  }
  CHECK(nodes.size() == dep.size());
  CHECK(sample_initial_deployment(t, 0.5, 2, 77) == dep);
  CHECK(sample_initial_deployment(t, 0.0, 2, 77).empty());
  CHECK(sample_initial_deployment(t, 0.5, 0, 77).empty());
}

namespace {

nlohmann::json base_scenario_json() {
  return nlohmann::json{
      {"schema", "mesu-scenario/1"},
      {"seed", 7},
      {"stages", 2},
      {"topology", {{"generate", "5N5E"}}},
      {"budget", {{"coverage_percent", 75.0}}},
      {"servers",
       {{"capacity_per_rpack_gb", 10.0}, {"max_rpacks", 4}, {"beta_edge_gbps", 10.0},
        {"beta_cloud_gbps", 10.0}}},
      {"workload", {{"initial_per_node", 2}}},
      {"deployment", {{"fraction", 0.5}, {"rpacks", 2}}},
  };
}

}  // namespace

TEST_CASE("scenario configuration") {
  SECTION("a full scenario builds and plans") {
    Scenario s = scenario_from_json(base_scenario_json());
    ScenarioBundle b = make_bundle(s);
    CHECK(b.inputs.workload.initial_count == 10);  // 2 per node * 5 nodes
    CHECK(b.inputs.budget_total == budget_for_coverage(5, 75.0, s.cost, 4));
    PlanTrace t = plan(b.inputs, Algorithm::H);
    CHECK(t.stages.size() == 2);
  }
  SECTION("schema violations are rejected") {
    auto j = base_scenario_json();
    j.erase("schema");
    CHECK_THROWS_AS(scenario_from_json(j), ValidationError);

    Scenario no_budget = scenario_from_json(base_scenario_json());
    no_budget.coverage_percent.reset();
    CHECK_THROWS_AS(no_budget.validate(), ValidationError);

    Scenario both_topo = scenario_from_json(base_scenario_json());
    both_topo.topology_file = "x.topo";
    CHECK_THROWS_AS(both_topo.validate(), ValidationError);

    Scenario bad_eval = scenario_from_json(base_scenario_json());
    bad_eval.eval_stages = 1;
    CHECK_THROWS_AS(bad_eval.validate(), ValidationError);
  }
  SECTION("horizon defaults to the evaluation overhang") {
    Scenario s = scenario_from_json(base_scenario_json());
    CHECK(s.horizon() == 0);
    s.eval_stages = 5;
    CHECK(s.horizon() == 3);
    s.horizon_h = 1;
    CHECK(s.horizon() == 1);
  }
}

TEST_CASE("sweep execution") {
  SweepSpec spec;
  spec.axis = SweepAxis::Budget;
  spec.values = {60.0};
  spec.repetitions = 1;
  spec.algorithms = {Algorithm::H};
  spec.base = scenario_from_json(base_scenario_json());

  SECTION("one value, one rep, one algorithm: one run row plus one summary row") {
    auto rows = run_sweep(spec);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].kind == "run");
    CHECK(rows[0].status == "ok");
    CHECK(rows[1].kind == "summary");
    CHECK(rows[1].metrics.gamma_bar_pct == rows[0].metrics.gamma_bar_pct);
    CHECK(rows[1].gamma_min == rows[0].metrics.gamma_bar_pct);
    CHECK(rows[1].gamma_stddev == 0.0);
  }
  SECTION("csv schema is stable") {
    auto rows = run_sweep(spec);
    std::ostringstream out;
    write_sweep_csv(rows, out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "kind,axis_value,seed,algorithm,gamma_bar_pct,S_hat,M_hat,C_util,dB_hat,runtime_ms,"
          "gamma_min,gamma_max,gamma_stddev,status");
    int lines = 0;
    std::string row;
    while (std::getline(in, row)) ++lines;
    CHECK(lines == 2);
  }
  SECTION("a failing cell is recorded without contaminating the sweep") {
    SweepSpec bad = spec;
    bad.values = {60.0, 1000.0};  // coverage > 100 fails validation in-cell
    auto rows = run_sweep(bad);
    int ok = 0, err = 0, summaries = 0;
    for (const auto& r : rows) {
      if (r.kind == "summary") ++summaries;
      else if (r.status == "ok") ++ok;
      else ++err;
    }
    CHECK(ok == 1);
    CHECK(err == 1);
    CHECK(summaries == 1);  // no summary over an all-failed group
  }
  SECTION("parallel execution returns the same rows") {
    SweepSpec par = spec;
    par.values = {40.0, 80.0};
    par.repetitions = 3;
    par.algorithms = {Algorithm::H, Algorithm::DO};
    auto serial = run_sweep(par);
    par.jobs = 4;
    auto parallel = run_sweep(par);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
      CHECK(serial[i].kind == parallel[i].kind);
      CHECK(serial[i].axis_value == parallel[i].axis_value);
      CHECK(serial[i].seed == parallel[i].seed);
      CHECK(serial[i].metrics.gamma_bar_pct == parallel[i].metrics.gamma_bar_pct);
    }
  }
  SECTION("the stage axis pins the evaluation horizon and prediction depth") {
    SweepSpec st = spec;
    st.axis = SweepAxis::Stages;
    st.values = {1.0, 2.0, 3.0};
    Scenario s1 = scenario_for_cell(st, 1.0);
    CHECK(s1.stages == 1);
    CHECK(s1.evaluation_stages() == 3);
    CHECK(s1.horizon() == 2);
    Scenario s3 = scenario_for_cell(st, 3.0);
    CHECK(s3.horizon() == 0);
  }
  SECTION("the cost-ratio axis rescales the infrastructure price") {
    SweepSpec cr = spec;
    cr.axis = SweepAxis::CostRatio;
    Scenario s = scenario_for_cell(cr, 8.0);
    CHECK(s.cost.infra_cost_base == 700.0);  // deploy-with-one-rpack ratio 8:1
  }
}
