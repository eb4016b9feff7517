#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mesu/common.hpp"
#include "mesu/infrastructure.hpp"
#include "mesu/offload.hpp"
#include "mesu/topology.hpp"
#include "mesu/workload.hpp"

namespace mesu {

enum class Algorithm { H, HO, DF, UF, DO };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::H: return "H";
    case Algorithm::HO: return "HO";
    case Algorithm::DF: return "DF";
    case Algorithm::UF: return "UF";
    case Algorithm::DO: return "DO";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "H") return Algorithm::H;
  if (s == "HO") return Algorithm::HO;
  if (s == "DF") return Algorithm::DF;
  if (s == "UF") return Algorithm::UF;
  if (s == "DO") return Algorithm::DO;
  throw ValidationError("unknown algorithm '" + s + "' (expected H|HO|DF|UF|DO)");
}

struct ClusterCandidate {
  NodeId node = -1;
  ActionKind kind = ActionKind::Deploy;
  int rpacks = 0;
  std::vector<int> task_indices;  // offloader task indices, fill order
  int gain = 0;
  double cost = 0.0;
  double ratio = 0.0;
};

enum class CandidateFilter {
  All,
  DeployOnly,
  UpgradeOnly,
  // upgrade-first policy: each touched server is raised to its maximum
  // capacity (bounded by affordability), not to the gain-optimal level
  UpgradeOnlyMaximal,
  DeployExactlyTwo,
};

// One candidate per node: the affordable (kind, m) maximizing the number of
// satisfied tasks, ties to fewer rpacks. The cluster fills greedily from the
// smallest residual, subject to the post-action free capacity and each
// task's delay at the node. Candidates are ranked by gain-to-cost ratio.
inline std::vector<ClusterCandidate> generate_clusters(const StageOffloader& off,
                                                       const ServerFleet& fleet,
                                                       const std::vector<NodeId>& candidate_nodes,
                                                       double remaining_budget,
                                                       const CostModel& cost_model, int stage,
                                                       CandidateFilter filter) {
  std::vector<int> order = off.unsatisfied();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (off.residual_bits(a) != off.residual_bits(b))
      return off.residual_bits(a) < off.residual_bits(b);
    return off.tasks()[a].id < off.tasks()[b].id;
  });

  const double cp = fleet.capacity_per_rpack();
  std::vector<ClusterCandidate> out;
  std::vector<DelayCoeffs> co(fleet.node_count());
  std::vector<char> have(fleet.node_count());

  for (NodeId s : candidate_nodes) {
    bool deployed = fleet.deployed(s);
    if (deployed && (filter == CandidateFilter::DeployOnly ||
                     filter == CandidateFilter::DeployExactlyTwo))
      continue;
    if (!deployed && (filter == CandidateFilter::UpgradeOnly ||
                      filter == CandidateFilter::UpgradeOnlyMaximal))
      continue;

    int m_lo = 1, m_hi;
    ActionKind kind;
    if (!deployed) {
      kind = ActionKind::Deploy;
      m_hi = fleet.max_rpacks();
      if (filter == CandidateFilter::DeployExactlyTwo) m_lo = m_hi = 2;
      if (m_hi > fleet.max_rpacks()) continue;
    } else {
      kind = ActionKind::Upgrade;
      m_hi = fleet.max_rpacks() - fleet.rpacks(s);
      if (m_hi < 1) continue;
      if (filter == CandidateFilter::UpgradeOnlyMaximal) {
        while (m_hi > 1 &&
               !leq_within_slack(cost_model.upgrade_cost(stage, m_hi), remaining_budget))
          --m_hi;
        m_lo = m_hi;
      }
    }

    std::fill(have.begin(), have.end(), 0);
    ClusterCandidate best;
    for (int m = m_lo; m <= m_hi; ++m) {
      double cost = kind == ActionKind::Deploy ? cost_model.deploy_cost(stage, m)
                                               : cost_model.upgrade_cost(stage, m);
      if (!leq_within_slack(cost, remaining_budget)) continue;
      // the gain is attributed to the purchased capacity only; idle capacity
      // on an existing server is left for the fractional fill
      double free_cap =
          std::min(m * cp, (fleet.rpacks(s) + m) * cp - fleet.workload_bits(s));
      std::vector<int> picked;
      double used = 0.0;
      for (int i : order) {
        double need = off.residual_bits(i);
        if (!leq_within_slack(used + need, free_cap)) break;  // ascending sizes
        NodeId origin = off.tasks()[i].origin;
        if (!have[origin]) {
          co[origin] = off.coeffs(origin, s);
          have[origin] = 1;
        }
        double delay = co[origin].slope_s_per_bit * need + co[origin].intercept_s;
        if (!leq_within_slack(delay, off.tasks()[i].scaled_deadline_s())) continue;
        picked.push_back(i);
        used += need;
      }
      int gain = static_cast<int>(picked.size());
      if (gain > best.gain) {
        best.node = s;
        best.kind = kind;
        best.rpacks = m;
        best.task_indices = std::move(picked);
        best.gain = gain;
        best.cost = cost;
      }
    }
    if (best.gain > 0) {
      best.ratio = best.gain / best.cost;
      out.push_back(std::move(best));
    }
  }
  std::sort(out.begin(), out.end(), [](const ClusterCandidate& a, const ClusterCandidate& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    if (a.gain != b.gain) return a.gain > b.gain;
    return a.node < b.node;
  });
  return out;
}

struct ActionRecord {
  ActionKind kind = ActionKind::Deploy;
  NodeId node = -1;
  int rpacks = 0;
  double cost = 0.0;
};

namespace detail {

// Cheapest action a variant may still take; the action loop stops below this.
inline double min_action_cost(Algorithm algo, const CostModel& cost, int stage) {
  if (algo == Algorithm::DO) return cost.deploy_cost(stage, 2);
  return std::min(cost.deploy_cost(stage, 1), cost.upgrade_cost(stage, 1));
}

inline std::vector<ClusterCandidate> variant_candidates(Algorithm algo, const StageOffloader& off,
                                                        const ServerFleet& fleet,
                                                        const std::vector<NodeId>& nodes,
                                                        double remaining,
                                                        const CostModel& cost_model, int stage) {
  switch (algo) {
    case Algorithm::H:
    case Algorithm::HO:
      return generate_clusters(off, fleet, nodes, remaining, cost_model, stage,
                               CandidateFilter::All);
    case Algorithm::DO:
      return generate_clusters(off, fleet, nodes, remaining, cost_model, stage,
                               CandidateFilter::DeployExactlyTwo);
    case Algorithm::DF: {
      auto c = generate_clusters(off, fleet, nodes, remaining, cost_model, stage,
                                 CandidateFilter::DeployOnly);
      if (!c.empty()) return c;
      return generate_clusters(off, fleet, nodes, remaining, cost_model, stage,
                               CandidateFilter::UpgradeOnly);
    }
    case Algorithm::UF: {
      auto c = generate_clusters(off, fleet, nodes, remaining, cost_model, stage,
                                 CandidateFilter::UpgradeOnlyMaximal);
      if (!c.empty()) return c;
      return generate_clusters(off, fleet, nodes, remaining, cost_model, stage,
                               CandidateFilter::DeployOnly);
    }
  }
  return {};
}

}  // namespace detail

// Deploy-upgrade-offload loop: regenerate clusters against the updated
// unsatisfied set, act on the best ratio, offload its cluster, retire the
// node, repeat while tasks, budget and nodes remain.
inline std::vector<ActionRecord> deploy_upgrade_offload(StageOffloader& off, ServerFleet& fleet,
                                                        BudgetLedger& ledger,
                                                        const CostModel& cost_model, int stage,
                                                        Algorithm algo) {
  std::vector<ActionRecord> actions;
  std::vector<NodeId> nodes;
  for (NodeId n = 0; n < fleet.node_count(); ++n)
    if (n != fleet.cloud()) nodes.push_back(n);

  while (!off.unsatisfied().empty() && !nodes.empty() &&
         ledger.can_afford(detail::min_action_cost(algo, cost_model, stage))) {
    auto candidates = detail::variant_candidates(algo, off, fleet, nodes, ledger.remaining(),
                                                 cost_model, stage);
    if (candidates.empty()) break;
    const ClusterCandidate& top = candidates.front();
    Action act{top.kind, top.node, top.rpacks};
    ledger.commit(act, top.cost, fleet);
    fleet.install(top.node, top.rpacks, stage);
    off.offload_cluster(top.task_indices, top.node);
    actions.push_back({top.kind, top.node, top.rpacks, top.cost});
    nodes.erase(std::find(nodes.begin(), nodes.end(), top.node));
  }
  return actions;
}

struct ServerSnapshot {
  NodeId node = -1;
  int rpacks = 0;
  double workload_bits = 0.0;
};

struct StageRecord {
  int stage = 1;
  bool planning = true;  // false for evaluation-only stages past T
  StageAssignment assignment;
  int gamma = 0;
  std::vector<ActionRecord> actions;
  std::vector<ServerSnapshot> servers;
  double budget_available = 0.0;
  double budget_spent = 0.0;
  double budget_carryover = 0.0;
};

struct PlanTrace {
  Algorithm algorithm = Algorithm::H;
  std::uint64_t seed = 0;
  int planning_stages = 1;  // T
  int eval_stages = 1;      // E >= T; stages past T run offloading only
  int horizon_h = 0;
  double budget_total = 0.0;
  double capacity_per_rpack_bits = 0.0;
  int max_rpacks = 1;
  std::vector<StageRecord> stages;
  double gamma_bar_count = 0.0;  // (1/E) * sum Gamma^t
  double gamma_bar_pct = 0.0;    // mean over stages of 100 * Gamma^t / |R^t|
};

struct PlannerInputs {
  const Topology* topology = nullptr;
  const PathTable* paths = nullptr;
  OffloadParams offload;
  CostModel cost;
  GrowthParams growth;
  WorkloadSpec workload;
  double budget_total = 0.0;
  int planning_stages = 1;
  int eval_stages = 0;  // 0 -> same as planning_stages
  double capacity_per_rpack_bits = 10e9;
  int max_rpacks = 4;
  std::vector<std::pair<NodeId, int>> initial_deployment;  // (node, rpacks)
  std::uint64_t master_seed = 0;

  void validate() const {
    if (!topology || !paths) throw ValidationError("planner: missing topology/path table");
    if (budget_total < 0.0) throw ValidationError("planner: budget must be >= 0");
    if (planning_stages < 1) throw ValidationError("planner: need at least one stage");
    if (eval_stages != 0 && eval_stages < planning_stages)
      throw ValidationError("planner: eval stages must be >= planning stages");
    offload.validate();
    cost.validate();
    growth.validate();
    workload.validate();
  }
};

namespace detail {

// Final-stage planning against predicted demand: cluster decisions and
// budget spend are driven by the predicted task set on a scratch copy of the
// fleet; the purchased rpacks are then applied to the real fleet while the
// predicted load is discarded.
inline std::vector<ActionRecord> duot_against_prediction(const StageWorkload& predicted,
                                                         ServerFleet& fleet, BudgetLedger& ledger,
                                                         const PlannerInputs& in, int stage,
                                                         Algorithm algo) {
  ServerFleet mirror = fleet;
  StageOffloader pred_off(*in.paths, mirror, in.offload, predicted.tasks, stage);
  pred_off.offload_to_cloud(true);
  pred_off.reduce_via_cloud();
  auto actions = deploy_upgrade_offload(pred_off, mirror, ledger, in.cost, stage, algo);
  for (const ActionRecord& a : actions) fleet.install(a.node, a.rpacks, stage);
  return actions;
}

}  // namespace detail

inline PlanTrace plan(const PlannerInputs& in, Algorithm algo) {
  in.validate();
  const int total = in.planning_stages;
  const int eval = in.eval_stages == 0 ? total : in.eval_stages;

  auto line = workload_line(*in.topology, in.workload, in.growth, eval, in.master_seed);
  bool predictive = (algo == Algorithm::H && in.growth.horizon_h > 0);
  StageWorkload predicted;
  if (predictive)
    predicted = predicted_final_stage(line, *in.topology, in.workload, in.growth, total,
                                      in.master_seed);

  ServerFleet fleet(in.topology->node_count(), in.topology->cloud(),
                    in.capacity_per_rpack_bits, in.max_rpacks);
  for (auto [node, rpacks] : in.initial_deployment) fleet.install(node, rpacks, 0);
  BudgetLedger ledger(in.budget_total, total);

  PlanTrace trace;
  trace.algorithm = algo;
  trace.seed = in.master_seed;
  trace.planning_stages = total;
  trace.eval_stages = eval;
  trace.horizon_h = in.growth.horizon_h;
  trace.budget_total = in.budget_total;
  trace.capacity_per_rpack_bits = in.capacity_per_rpack_bits;
  trace.max_rpacks = in.max_rpacks;

  double pct_sum = 0.0;
  long long count_sum = 0;
  for (int t = 1; t <= eval; ++t) {
    fleet.reset_workloads();
    ledger.begin_stage(t);
    StageOffloader off(*in.paths, fleet, in.offload, line[t - 1].tasks, t);

    off.offload_to_cloud(true);
    off.reduce_via_cloud();

    StageRecord rec;
    rec.stage = t;
    rec.planning = t <= total;
    if (rec.planning && !off.unsatisfied().empty() &&
        ledger.can_afford(detail::min_action_cost(algo, in.cost, t))) {
      if (predictive && t == total)
        rec.actions = detail::duot_against_prediction(predicted, fleet, ledger, in, t, algo);
      else
        rec.actions = deploy_upgrade_offload(off, fleet, ledger, in.cost, t, algo);
    }
    if (!off.unsatisfied().empty()) off.offload_fractions();
    if (!off.unsatisfied().empty()) off.offload_to_cloud(false);

    rec.assignment = off.assignment();
    rec.gamma = off.gamma();
    for (NodeId n : fleet.deployed_nodes())
      rec.servers.push_back({n, fleet.rpacks(n), fleet.workload_bits(n)});
    rec.budget_available = ledger.available_this_stage();
    rec.budget_spent = ledger.spent_this_stage();
    rec.budget_carryover = ledger.close_stage();
    count_sum += rec.gamma;
    int n_tasks = static_cast<int>(line[t - 1].tasks.size());
    pct_sum += n_tasks == 0 ? 100.0 : 100.0 * rec.gamma / n_tasks;
    trace.stages.push_back(std::move(rec));
  }
  trace.gamma_bar_count = static_cast<double>(count_sum) / eval;
  trace.gamma_bar_pct = pct_sum / eval;
  return trace;
}

struct MetricRecord {
  double gamma_bar_pct = 0.0;
  double deployed_pct = 0.0;       // S_hat: servers / nodes
  double rpack_pct = 0.0;          // M_hat: rpacks / ((|V|-1) * M_max)
  double utilization_pct = 0.0;    // C: final-stage load / AP full capacity
  double leftover_budget_pct = 0.0;  // Delta B at stage T / B
};

inline MetricRecord metrics(const PlanTrace& trace, int node_count) {
  MetricRecord m;
  m.gamma_bar_pct = trace.gamma_bar_pct;
  if (trace.stages.empty()) return m;
  const StageRecord& last = trace.stages.back();
  int rpacks = 0;
  double load_bits = 0.0;
  for (const ServerSnapshot& s : last.servers) {
    rpacks += s.rpacks;
    load_bits += s.workload_bits;
  }
  int aps = node_count - 1;
  m.deployed_pct = 100.0 * static_cast<double>(last.servers.size()) / node_count;
  m.rpack_pct = 100.0 * rpacks / (static_cast<double>(aps) * trace.max_rpacks);
  m.utilization_pct =
      100.0 * load_bits / (aps * trace.capacity_per_rpack_bits * trace.max_rpacks);
  const StageRecord& final_planned = trace.stages[trace.planning_stages - 1];
  m.leftover_budget_pct =
      trace.budget_total > 0.0 ? 100.0 * final_planned.budget_carryover / trace.budget_total : 0.0;
  return m;
}

}  // namespace mesu
