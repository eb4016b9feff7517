#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "mesu/harness.hpp"
#include "mesu/planner.hpp"
#include "mesu/trace.hpp"
#include "mesu/trace_check.hpp"

using namespace mesu;

namespace {

// Four APs and the cloud. AP-AP links are fast and free of propagation;
// every AP has a slow 2 Gb/s uplink with 50 ms propagation.
Topology test_net() {
  PropagationConfig prop;
  prop.ap_ap_override_s = 0.0;
  prop.ap_cloud_override_s = 0.05;
  std::vector<Link> links = {{0, 1, 0.0, 20e9}, {1, 2, 0.0, 20e9}, {2, 3, 0.0, 20e9}};
  for (NodeId a = 0; a < 4; ++a) links.push_back({a, 4, 0.0, 2e9});
  return Topology(5, 4, links, prop);
}

Task make_task(int id, NodeId origin, double size_bits, double deadline_s, double sigma = 1.0) {
  Task t;
  t.id = id;
  t.origin = origin;
  t.base_size_bits = t.size_bits = size_bits;
  t.base_deadline_s = t.deadline_s = deadline_s;
  t.sigma = sigma;
  return t;
}

PlannerInputs base_inputs(const Topology& topo, const PathTable& paths) {
  PlannerInputs in;
  in.topology = &topo;
  in.paths = &paths;
  in.capacity_per_rpack_bits = 10e9;
  in.max_rpacks = 4;
  in.budget_total = 10000.0;
  in.planning_stages = 3;
  in.workload.initial_count = 12;
  in.master_seed = 99;
  return in;
}

}  // namespace

TEST_CASE("cluster generation") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  OffloadParams p;
  CostModel cost;

  SECTION("greedy fill takes the smallest tasks that fit") {
    ServerFleet fleet(5, 4, 5e9, 1);  // one rpack holds 5 Gb
    StageOffloader off(paths, fleet, p,
                       {make_task(0, 0, 5e9, 1.0), make_task(1, 0, 2e9, 1.0),
                        make_task(2, 0, 3e9, 1.0)},
                       1);
    auto cands = generate_clusters(off, fleet, {0}, 1e9, cost, 1, CandidateFilter::All);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].gain == 2);
    REQUIRE(cands[0].task_indices.size() == 2);
    CHECK(off.tasks()[cands[0].task_indices[0]].id == 1);
    CHECK(off.tasks()[cands[0].task_indices[1]].id == 2);
  }
  SECTION("no affordable action gives an empty list") {
    ServerFleet fleet(5, 4, 10e9, 4);
    StageOffloader off(paths, fleet, p, {make_task(0, 0, 5e9, 1.0)}, 1);
    CHECK(generate_clusters(off, fleet, {0, 1, 2, 3}, 50.0, cost, 1, CandidateFilter::All)
              .empty());
  }
  SECTION("ratio ranks an upgrade above a costlier deploy") {
    ServerFleet fleet(5, 4, 10e9, 4);
    fleet.install(1, 3, 0);
    fleet.add_load(1, 30e9);  // full: an upgrade frees capacity for one task
    // deadlines only work co-located (processing 0.9 s; any hop adds ~0.5 s)
    StageOffloader off(paths, fleet, p,
                       {make_task(0, 0, 9e9, 1.0), make_task(1, 0, 9e9, 1.0),
                        make_task(2, 1, 9e9, 1.0)},
                       1);
    auto cands =
        generate_clusters(off, fleet, {0, 1, 2, 3}, 5000.0, cost, 1, CandidateFilter::All);
    REQUIRE(cands.size() == 2);
    // upgrade at node 1: gain 1 cost 100 -> 0.01; deploy at 0: gain 2 cost 800 -> 0.0025
    CHECK(cands[0].node == 1);
    CHECK(cands[0].kind == ActionKind::Upgrade);
    CHECK(cands[0].gain == 1);
    CHECK(cands[1].node == 0);
    CHECK(cands[1].kind == ActionKind::Deploy);
    CHECK(cands[1].gain == 2);
    CHECK(cands[1].rpacks == 2);
    CHECK(cands[0].ratio > cands[1].ratio);
  }
  SECTION("the rpack count maximizing the gain wins, ties to fewer rpacks") {
    ServerFleet fleet(5, 4, 10e9, 4);
    StageOffloader off(paths, fleet, p,
                       {make_task(0, 0, 10e9, 2.0), make_task(1, 0, 10e9, 2.0),
                        make_task(2, 0, 10e9, 2.0)},
                       1);
    auto cands = generate_clusters(off, fleet, {0}, 1e9, cost, 1, CandidateFilter::All);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].gain == 3);
    CHECK(cands[0].rpacks == 3);  // m=4 adds no gain, so 3 is kept
  }
  SECTION("delay-infeasible tasks are skipped, not blocking") {
    ServerFleet fleet(5, 4, 10e9, 4);
    StageOffloader off(paths, fleet, p,
                       {make_task(0, 3, 4e9, 0.22),   // 3 hops away, misses deadline
                        make_task(1, 0, 9e9, 2.0)},
                       1);
    auto cands = generate_clusters(off, fleet, {0}, 1e9, cost, 1, CandidateFilter::All);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].gain == 1);
    CHECK(off.tasks()[cands[0].task_indices[0]].id == 1);
  }
}

TEST_CASE("deploy-upgrade-offload loop") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  OffloadParams p;
  CostModel cost;

  SECTION("zero budget means no actions") {
    ServerFleet fleet(5, 4, 10e9, 4);
    BudgetLedger ledger(0.0, 1);
    ledger.begin_stage(1);
    StageOffloader off(paths, fleet, p, {make_task(0, 0, 9e9, 2.0)}, 1);
    auto actions = deploy_upgrade_offload(off, fleet, ledger, cost, 1, Algorithm::H);
    CHECK(actions.empty());
    CHECK(off.gamma() == 0);
  }
  SECTION("a single candidate covering all tasks ends the loop") {
    ServerFleet fleet(5, 4, 10e9, 4);
    BudgetLedger ledger(5000.0, 1);
    ledger.begin_stage(1);
    StageOffloader off(paths, fleet, p,
                       {make_task(0, 0, 9e9, 2.0), make_task(1, 0, 9e9, 2.0)}, 1);
    auto actions = deploy_upgrade_offload(off, fleet, ledger, cost, 1, Algorithm::H);
    REQUIRE(actions.size() == 1);
    CHECK(actions[0].kind == ActionKind::Deploy);
    CHECK(actions[0].node == 0);
    CHECK(off.unsatisfied().empty());
    CHECK(off.gamma() == 2);
  }
  SECTION("every committed action has positive gain at commit time") {
    ServerFleet fleet(5, 4, 10e9, 4);
    BudgetLedger ledger(100000.0, 1);
    ledger.begin_stage(1);
    // 1.2 s deadlines are co-located only, so these need two separate servers
    StageOffloader off(paths, fleet, p,
                       {make_task(0, 0, 9e9, 1.2), make_task(1, 2, 9e9, 1.2)}, 1);
    auto actions = deploy_upgrade_offload(off, fleet, ledger, cost, 1, Algorithm::H);
    CHECK(actions.size() == 2);  // ample budget, but only gainful actions happen
    CHECK(off.gamma() == 2);
    CHECK(ledger.remaining() > 90000.0);
  }
}

namespace {

PlanTrace run(const PlannerInputs& in, Algorithm algo) { return plan(in, algo); }

}  // namespace

TEST_CASE("plan trivial cases") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);

  SECTION("no budget, no servers, cloud-infeasible tasks: gamma stays zero") {
    PlannerInputs in = base_inputs(topo, paths);
    in.budget_total = 0.0;
    in.planning_stages = 1;
    in.workload.initial_count = 8;
    in.workload.deadline_choices_s = {0.09};  // below the round-trip propagation
    PlanTrace t = run(in, Algorithm::H);
    CHECK(t.gamma_bar_count == 0.0);
    CHECK(t.gamma_bar_pct == 0.0);
  }
  SECTION("saturation: ample budget and loose tiny tasks reach 100%") {
    PlannerInputs in = base_inputs(topo, paths);
    in.budget_total = budget_for_coverage(5, 100.0, in.cost, in.max_rpacks);
    in.planning_stages = 1;
    in.workload.size_choices_bits = {1e9};
    in.workload.deadline_choices_s = {30.0};
    PlanTrace t = run(in, Algorithm::H);
    CHECK(t.gamma_bar_pct == 100.0);
  }
}

TEST_CASE("variant behaviour") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);
  in.workload.initial_count = 15;
  in.initial_deployment = {{0, 2}, {2, 2}};

  SECTION("DO only deploys, always with two rpacks") {
    PlanTrace t = run(in, Algorithm::DO);
    for (const StageRecord& r : t.stages)
      for (const ActionRecord& a : r.actions) {
        CHECK(a.kind == ActionKind::Deploy);
        CHECK(a.rpacks == 2);
      }
  }
  SECTION("DF takes deploys while any gainful deploy exists") {
    PlanTrace t = run(in, Algorithm::DF);
    for (const StageRecord& r : t.stages) {
      bool saw_upgrade = false;
      for (const ActionRecord& a : r.actions) {
        // within a stage, once upgrades start no deploy may follow
        if (a.kind == ActionKind::Upgrade) saw_upgrade = true;
        if (saw_upgrade) CHECK(a.kind == ActionKind::Upgrade);
      }
    }
  }
  SECTION("H with h=0 equals HO") {
    in.growth.horizon_h = 0;
    PlanTrace h = run(in, Algorithm::H);
    PlanTrace ho = run(in, Algorithm::HO);
    CHECK(h.gamma_bar_pct == ho.gamma_bar_pct);
    REQUIRE(h.stages.size() == ho.stages.size());
    for (size_t s = 0; s < h.stages.size(); ++s) {
      CHECK(h.stages[s].gamma == ho.stages[s].gamma);
      CHECK(h.stages[s].actions.size() == ho.stages[s].actions.size());
      CHECK(h.stages[s].budget_spent == ho.stages[s].budget_spent);
    }
  }
}

TEST_CASE("plans are deterministic and scale-invariant") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);
  in.initial_deployment = {{1, 2}};

  SECTION("byte-identical traces from the same seed") {
    for (Algorithm a :
         {Algorithm::H, Algorithm::HO, Algorithm::DF, Algorithm::UF, Algorithm::DO})
      CHECK(to_json(run(in, a)) == to_json(run(in, a)));
  }
  SECTION("scaling all costs by a common factor keeps the action sequence") {
    PlanTrace t1 = run(in, Algorithm::H);
    PlannerInputs scaled = in;
    scaled.budget_total *= 37.0;
    scaled.cost.infra_cost_base *= 37.0;
    scaled.cost.rpack_cost_base *= 37.0;
    PlanTrace t2 = run(scaled, Algorithm::H);
    REQUIRE(t1.stages.size() == t2.stages.size());
    for (size_t s = 0; s < t1.stages.size(); ++s) {
      REQUIRE(t1.stages[s].actions.size() == t2.stages[s].actions.size());
      for (size_t i = 0; i < t1.stages[s].actions.size(); ++i) {
        CHECK(t1.stages[s].actions[i].node == t2.stages[s].actions[i].node);
        CHECK(t1.stages[s].actions[i].kind == t2.stages[s].actions[i].kind);
        CHECK(t1.stages[s].actions[i].rpacks == t2.stages[s].actions[i].rpacks);
      }
      CHECK(t1.stages[s].gamma == t2.stages[s].gamma);
    }
  }
}

TEST_CASE("prediction spends ahead of demand") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);
  in.planning_stages = 1;
  in.eval_stages = 3;
  in.budget_total = budget_for_coverage(5, 75.0, in.cost, in.max_rpacks);
  in.workload.initial_count = 10;

  PlannerInputs with_h = in;
  with_h.growth.horizon_h = 2;
  PlanTrace predictive = run(with_h, Algorithm::H);
  PlanTrace plain = run(in, Algorithm::HO);

  REQUIRE(predictive.eval_stages == 3);
  CHECK(predictive.stages[0].budget_spent >= plain.stages[0].budget_spent);
  // no planning actions past stage T
  for (int s = 1; s < 3; ++s) {
    CHECK(predictive.stages[s].actions.empty());
    CHECK_FALSE(predictive.stages[s].planning);
  }
}

TEST_CASE("full-upgrade flexibility pays off on small reference nets") {
  // 5-node/5-link networks, three stages, 75% coverage budget. Individual
  // seeds can go either way between two greedy strategies; the mean over
  // seeds must favor the mixed strategy over deploy-only.
  double h_sum = 0.0, do_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto topo = generate_topology(5, 5, derive_seed(seed, SeedTag::Topology));
    PathTable paths = build_path_table(topo);
    PlannerInputs in;
    in.topology = &topo;
    in.paths = &paths;
    in.planning_stages = 3;
    in.budget_total = budget_for_coverage(5, 75.0, in.cost, 4);
    in.capacity_per_rpack_bits = 10e9;
    in.max_rpacks = 4;
    in.workload.initial_count = 5;
    in.initial_deployment =
        sample_initial_deployment(topo, 0.5, 2, derive_seed(seed, SeedTag::InitialDeployment));
    in.master_seed = seed;
    h_sum += plan(in, Algorithm::H).gamma_bar_pct;
    do_sum += plan(in, Algorithm::DO).gamma_bar_pct;
  }
  CHECK(h_sum > do_sum);
}

TEST_CASE("assignment dump uses the documented schema") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);
  PlanTrace t = run(in, Algorithm::H);
  std::ostringstream out;
  dump_assignments_csv(t, out);
  CHECK(out.str().rfind("stage,task,server,fraction_bits,delay_s,satisfied\n", 0) == 0);
  // cross-check one data row against the trace
  std::istringstream in2(out.str());
  std::string header, first;
  std::getline(in2, header);
  REQUIRE(std::getline(in2, first));
  CHECK(first.find(",") != std::string::npos);
}

TEST_CASE("trace serialization is valid JSON with stable keys") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);
  in.initial_deployment = {{0, 2}};
  PlanTrace t = run(in, Algorithm::H);
  std::string js = to_json(t);
  nlohmann::json parsed = nlohmann::json::parse(js);
  CHECK(parsed["schema"] == "mesu-trace/1");
  CHECK(parsed["stages"].size() == 3);
  CHECK(parsed["stages"][0].contains("tasks"));
  CHECK(parsed["stages"][0]["tasks"][0].contains("fractions"));
  // keys are emitted in sorted order, so a reparse-and-dump round trip with a
  // key-sorted writer preserves the ordering
  std::string keys;
  for (auto it = parsed.begin(); it != parsed.end(); ++it) keys += it.key() + ",";
  CHECK(keys ==
        "algorithm,budget_total,capacity_per_rpack_bits,eval_stages,gamma_bar_count,"
        "gamma_bar_pct,horizon_h,max_rpacks,planning_stages,schema,seed,stages,");
}

TEST_CASE("metrics") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);

  SECTION("no deployment leaves the server metrics at zero") {
    in.budget_total = 0.0;
    in.workload.deadline_choices_s = {0.09};
    MetricRecord m = metrics(run(in, Algorithm::H), 5);
    CHECK(m.deployed_pct == 0.0);
    CHECK(m.rpack_pct == 0.0);
    CHECK(m.utilization_pct == 0.0);
  }
  SECTION("a full, fully loaded fleet reads 100 on rpacks and utilization") {
    PlanTrace t;
    t.planning_stages = t.eval_stages = 1;
    t.capacity_per_rpack_bits = 10e9;
    t.max_rpacks = 4;
    t.budget_total = 1.0;
    StageRecord r;
    r.stage = 1;
    for (NodeId n = 0; n < 4; ++n) r.servers.push_back({n, 4, 40e9});
    t.stages.push_back(r);
    MetricRecord m = metrics(t, 5);
    CHECK(m.rpack_pct == 100.0);
    CHECK(m.utilization_pct == 100.0);
    CHECK(m.deployed_pct == 80.0);  // 4 of 5 nodes
  }
  SECTION("an untouched budget reads 100% leftover") {
    in.workload.deadline_choices_s = {0.09};  // nothing can ever be satisfied
    in.workload.size_choices_bits = {30e9};
    MetricRecord m = metrics(run(in, Algorithm::H), 5);
    CHECK_THAT(m.leftover_budget_pct, Catch::Matchers::WithinAbs(100.0, 1e-9));
  }
}

TEST_CASE("the independent checker accepts real traces and rejects tampering") {
  Topology topo = test_net();
  PathTable paths = build_path_table(topo);
  PlannerInputs in = base_inputs(topo, paths);
  in.initial_deployment = {{0, 2}, {3, 2}};

  CheckContext ctx;
  ctx.topology = &topo;
  ctx.paths = &paths;
  ctx.offload = in.offload;
  ctx.cost = in.cost;
  ctx.initial_deployment = in.initial_deployment;

  for (Algorithm a : {Algorithm::H, Algorithm::HO, Algorithm::DF, Algorithm::UF, Algorithm::DO}) {
    PlanTrace t = run(in, a);
    auto viol = check_trace(t, ctx);
    for (const std::string& v : viol) UNSCOPED_INFO(v);
    CHECK(viol.empty());
  }

  SECTION("capacity tampering is caught") {
    PlanTrace t = run(in, Algorithm::H);
    for (StageRecord& r : t.stages)
      for (TaskOutcome& o : r.assignment.outcomes)
        for (FractionAssignment& f : o.fractions)
          if (f.server != topo.cloud()) f.size_bits *= 50.0;
    CHECK_FALSE(check_trace(t, ctx).empty());
  }
  SECTION("satisfaction tampering is caught") {
    PlanTrace t = run(in, Algorithm::H);
    bool flipped = false;
    for (StageRecord& r : t.stages) {
      for (TaskOutcome& o : r.assignment.outcomes)
        if (!o.satisfied && !flipped) {
          o.satisfied = true;
          r.gamma += 1;
          flipped = true;
        }
    }
    REQUIRE(flipped);
    CHECK_FALSE(check_trace(t, ctx).empty());
  }
  SECTION("budget tampering is caught") {
    PlanTrace t = run(in, Algorithm::H);
    t.stages[0].budget_spent += 123.0;
    CHECK_FALSE(check_trace(t, ctx).empty());
  }
}
