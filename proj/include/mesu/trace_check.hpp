#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mesu/planner.hpp"
#include "mesu/trace.hpp"

namespace mesu {

// Independent re-verification of a completed trace against the model's
// accounting rules: capacity and residuals, fraction sums, satisfaction
// deadlines, budget carryover and monotone server state. Everything is
// recomputed from the trace contents plus the immutable scenario inputs;
// nothing is taken from planner internals.

struct CheckContext {
  const Topology* topology = nullptr;
  const PathTable* paths = nullptr;
  OffloadParams offload;
  CostModel cost;
  std::vector<std::pair<NodeId, int>> initial_deployment;
};

inline std::vector<std::string> check_trace(const PlanTrace& trace, const CheckContext& ctx) {
  std::vector<std::string> bad;
  auto fail = [&](int stage, const std::string& what) {
    bad.push_back("stage " + std::to_string(stage) + ": " + what);
  };

  const int T = trace.planning_stages;
  const double per_stage = trace.budget_total / T;
  const double cp = trace.capacity_per_rpack_bits;
  const NodeId cloud = ctx.topology->cloud();

  std::map<NodeId, int> rpacks;
  for (auto [node, m] : ctx.initial_deployment) rpacks[node] += m;

  double carry = 0.0;
  double spent_cumulative = 0.0;
  for (const StageRecord& r : trace.stages) {
    const int t = r.stage;

    // budget flow: allocation plus carryover, spend within the stage
    double allocation = t <= T ? per_stage : 0.0;
    if (std::abs(r.budget_available - (allocation + carry)) > slack_for(trace.budget_total))
      fail(t, "available budget does not match allocation plus carryover");
    double spent = 0.0;
    for (const ActionRecord& a : r.actions) {
      int before = rpacks.count(a.node) ? rpacks[a.node] : 0;
      if (a.kind == ActionKind::Deploy && before > 0)
        fail(t, "deploy on node " + std::to_string(a.node) + " which already has a server");
      if (a.kind == ActionKind::Upgrade && before == 0)
        fail(t, "upgrade on node " + std::to_string(a.node) + " with no server");
      if (a.node == cloud) fail(t, "action on the cloud node");
      double expect = a.kind == ActionKind::Deploy ? ctx.cost.deploy_cost(t, a.rpacks)
                                                   : ctx.cost.upgrade_cost(t, a.rpacks);
      if (std::abs(a.cost - expect) > slack_for(expect))
        fail(t, "recorded action cost differs from the cost model");
      rpacks[a.node] = before + a.rpacks;
      if (rpacks[a.node] > trace.max_rpacks || a.rpacks < 1)
        fail(t, "rpack count out of range on node " + std::to_string(a.node));
      spent += a.cost;
    }
    if (!r.planning && !r.actions.empty()) fail(t, "actions recorded past the planning horizon");
    if (std::abs(r.budget_spent - spent) > slack_for(trace.budget_total))
      fail(t, "recorded spend does not match action costs");
    if (!leq_within_audit_slack(spent, r.budget_available)) fail(t, "stage overspends its budget");
    if (std::abs(r.budget_carryover - (r.budget_available - spent)) >
        slack_for(trace.budget_total))
      fail(t, "carryover mismatch");
    spent_cumulative += spent;
    if (t <= T && !leq_within_audit_slack(spent_cumulative, t * per_stage))
      fail(t, "cumulative spend exceeds cumulative allocation");
    carry = r.budget_carryover;

    // server snapshots vs recomputed rpack state
    std::map<NodeId, const ServerSnapshot*> snap;
    for (const ServerSnapshot& s : r.servers) snap[s.node] = &s;
    for (auto [node, m] : rpacks) {
      if (m <= 0) continue;
      auto it = snap.find(node);
      if (it == snap.end()) {
        fail(t, "deployed node " + std::to_string(node) + " missing from snapshot");
        continue;
      }
      if (it->second->rpacks != m)
        fail(t, "snapshot rpacks mismatch on node " + std::to_string(node));
    }
    if (snap.size() != static_cast<size_t>(std::count_if(
                           rpacks.begin(), rpacks.end(), [](auto& kv) { return kv.second > 0; })))
      fail(t, "snapshot lists an undeployed node");

    // per-task fraction sums and satisfaction deadlines
    std::map<NodeId, double> load;
    int satisfied = 0;
    for (const TaskOutcome& o : r.assignment.outcomes) {
      const Task& task = o.task;
      double sum = 0.0;
      std::set<NodeId> servers_used;
      double worst = 0.0;
      for (const FractionAssignment& f : o.fractions) {
        if (f.size_bits <= 0.0) fail(t, "nonpositive fraction size");
        if (!servers_used.insert(f.server).second)
          fail(t, "task " + std::to_string(task.id) + " has two fractions on one server");
        sum += f.size_bits;
        double beta = f.server == cloud ? ctx.offload.beta_cloud_bps : ctx.offload.beta_edge_bps;
        double delay = fraction_delay_s(*ctx.paths, task.origin, f.server, f.size_bits,
                                        ctx.offload.zeta, beta);
        if (std::abs(delay - f.delay_s) > slack_for(delay))
          fail(t, "stored fraction delay differs from recomputed delay");
        worst = std::max(worst, delay);
        if (f.server != cloud) {
          load[f.server] += f.size_bits;
          if (!rpacks.count(f.server) || rpacks[f.server] == 0)
            fail(t, "fraction assigned to node " + std::to_string(f.server) + " with no server");
        }
      }
      if (std::abs(sum - task.size_bits) > slack_for(task.size_bits))
        fail(t, "task " + std::to_string(task.id) + " fractions do not sum to its size");
      if (o.satisfied) {
        ++satisfied;
        if (!leq_within_audit_slack(worst, task.scaled_deadline_s()))
          fail(t, "satisfied task " + std::to_string(task.id) + " misses its scaled deadline");
      }
    }
    if (satisfied != r.gamma) fail(t, "gamma does not count the satisfied tasks");

    // server capacity and snapshot workload agreement
    for (auto [node, bits] : load) {
      double cap = (rpacks.count(node) ? rpacks[node] : 0) * cp;
      if (!leq_within_audit_slack(bits, cap))
        fail(t, "server " + std::to_string(node) + " loaded beyond capacity");
      auto it = snap.find(node);
      if (it != snap.end() && std::abs(it->second->workload_bits - bits) > slack_for(cap))
        fail(t, "snapshot workload differs from fraction totals");
    }
  }

  if (!trace.stages.empty()) {
    double final_carry = trace.stages[trace.planning_stages - 1].budget_carryover;
    double planned_spend = 0.0;
    for (int i = 0; i < trace.planning_stages; ++i) planned_spend += trace.stages[i].budget_spent;
    if (std::abs(planned_spend + final_carry - trace.budget_total) >
        slack_for(trace.budget_total))
      bad.push_back("ledger conservation: spend plus final carryover != total budget");
  }
  return bad;
}

}  // namespace mesu
