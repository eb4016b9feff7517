#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "mesu/infrastructure.hpp"

using namespace mesu;

TEST_CASE("action costs with depreciation") {
  CostModel cost;  // I=600, rpack=100, phi=0.2

  SECTION("a four-rpack deployment at stage 1 costs 1000") {
    CHECK(cost_of({ActionKind::Deploy, 0, 4}, 1, cost, 4, 0) == 1000.0);
  }
  SECTION("a single rpack upgrade at stage 1 costs 100") {
    CHECK(cost_of({ActionKind::Upgrade, 0, 1}, 1, cost, 4, 1) == 100.0);
  }
  SECTION("stage-2 prices are depreciated") {
    CHECK_THAT(cost_of({ActionKind::Deploy, 0, 2}, 2, cost, 4, 0),
               Catch::Matchers::WithinRel(640.0, 1e-12));
  }
  SECTION("rpack counts outside the legal range are rejected") {
    CHECK_THROWS_AS(cost_of({ActionKind::Deploy, 0, 0}, 1, cost, 4, 0), ValidationError);
    CHECK_THROWS_AS(cost_of({ActionKind::Deploy, 0, 5}, 1, cost, 4, 0), ValidationError);
    CHECK_THROWS_AS(cost_of({ActionKind::Upgrade, 0, 3}, 1, cost, 4, 2), ValidationError);
  }
}

TEST_CASE("coverage budgets reproduce the reference arithmetic") {
  CostModel cost;
  CHECK(budget_for_coverage(25, 75.0, cost, 4) == 18750.0);
  CHECK(budget_for_coverage(50, 75.0, cost, 4) == 37500.0);
  CHECK(budget_for_coverage(100, 75.0, cost, 4) == 75000.0);
  CHECK(budget_for_coverage(25, 0.0, cost, 4) == 0.0);
  CHECK_THROWS_AS(budget_for_coverage(25, 120.0, cost, 4), ValidationError);
}

TEST_CASE("ledger commits, carryover and rejections") {
  ServerFleet fleet(3, 2, 10e9, 4);
  BudgetLedger ledger(2000.0, 2);

  ledger.begin_stage(1);
  CHECK(ledger.available_this_stage() == 1000.0);

  SECTION("exact spend leaves zero carryover") {
    ledger.commit({ActionKind::Deploy, 0, 4}, 1000.0, fleet);
    CHECK(ledger.remaining() == 0.0);
    CHECK(ledger.close_stage() == 0.0);
  }
  SECTION("leftover budget augments the next stage") {
    ledger.commit({ActionKind::Deploy, 0, 1}, 700.0, fleet);
    CHECK(ledger.close_stage() == 300.0);
    ledger.begin_stage(2);
    CHECK(ledger.available_this_stage() == 1300.0);
  }
  SECTION("insufficient budget is rejected") {
    CHECK_THROWS_AS(ledger.commit({ActionKind::Deploy, 0, 4}, 1200.0, fleet), ValidationError);
  }
  SECTION("a second deployment on the same node is rejected") {
    ledger.commit({ActionKind::Deploy, 0, 1}, 700.0, fleet);
    fleet.install(0, 1, 1);
    CHECK_THROWS_AS(ledger.commit({ActionKind::Deploy, 0, 1}, 100.0, fleet), ValidationError);
  }
}

TEST_CASE("fleet state stays within its bounds") {
  ServerFleet fleet(4, 3, 10e9, 4);
  CHECK_FALSE(fleet.deployed(1));
  fleet.install(1, 2, 1);
  CHECK(fleet.deployed(1));
  CHECK(fleet.capacity_bits(1) == 20e9);

  SECTION("rpacks cannot exceed the cap and the cloud hosts nothing") {
    CHECK_THROWS_AS(fleet.install(1, 3, 2), ValidationError);
    CHECK_THROWS_AS(fleet.install(3, 1, 1), ValidationError);
  }
  SECTION("load tracking and stage reset") {
    fleet.add_load(1, 15e9);
    CHECK(fleet.residual_bits(1) == 5e9);
    CHECK_THROWS_AS(fleet.add_load(1, 6e9), std::logic_error);
    fleet.reset_workloads();
    CHECK(fleet.workload_bits(1) == 0.0);
    CHECK(fleet.rpacks(1) == 2);  // capacity survives the stage boundary
  }
}

TEST_CASE("ledger conservation over random runs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    int stages = std::uniform_int_distribution<int>(1, 5)(rng);
    double total = std::uniform_real_distribution<double>(500.0, 5000.0)(rng);
    CostModel cost;
    cost.depreciation = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    ServerFleet fleet(6, 5, 10e9, 4);
    BudgetLedger ledger(total, stages);
    double spent_sum = 0.0;
    double carry = 0.0;
    for (int t = 1; t <= stages; ++t) {
      ledger.begin_stage(t);
      int tries = std::uniform_int_distribution<int>(0, 3)(rng);
      for (int i = 0; i < tries; ++i) {
        NodeId node = std::uniform_int_distribution<int>(0, 4)(rng);
        Action a{fleet.deployed(node) ? ActionKind::Upgrade : ActionKind::Deploy, node, 1};
        if (fleet.deployed(node) && fleet.rpacks(node) >= 4) continue;
        double c = a.kind == ActionKind::Deploy ? cost.deploy_cost(t, 1) : cost.upgrade_cost(t, 1);
        if (!ledger.can_afford(c)) continue;
        ledger.commit(a, c, fleet);
        fleet.install(node, 1, t);
        spent_sum += c;
      }
      carry = ledger.close_stage();
      // recorded rows never overspend the running allocation (Eq. 20 shape)
      CHECK(leq_within_slack(spent_sum, total / stages * t));
    }
    CHECK_THAT(spent_sum + carry, Catch::Matchers::WithinRel(total, 1e-9));
    CHECK_THAT(ledger.total_spent(), Catch::Matchers::WithinRel(spent_sum, 1e-12) ||
                                         Catch::Matchers::WithinAbs(spent_sum, 1e-9));
  }
}

TEST_CASE("spend log CSV schema") {
  ServerFleet fleet(3, 2, 10e9, 4);
  BudgetLedger ledger(1000.0, 1);
  ledger.begin_stage(1);
  ledger.commit({ActionKind::Deploy, 1, 2}, 800.0, fleet);
  std::ostringstream out;
  dump_spend_csv(ledger, out);
  CHECK(out.str().rfind("stage,node,kind,rpacks,cost,remaining\n1,1,deploy,2,800", 0) == 0);
}
