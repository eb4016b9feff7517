#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "mesu/milp.hpp"
#include "mesu/offload.hpp"
#include "mesu/planner.hpp"

namespace mesu {

// Dinic max-flow on integer capacities. Quantities are bits scaled by 1000
// (1e-3-bit granularity), which keeps every value well inside int64.
class MaxFlow {
 public:
  explicit MaxFlow(int n) : graph_(n) {}

  int add_edge(int from, int to, long long cap) {
    graph_[from].push_back({to, cap, static_cast<int>(graph_[to].size())});
    graph_[to].push_back({from, 0, static_cast<int>(graph_[from].size()) - 1});
    return static_cast<int>(graph_[from].size()) - 1;
  }

  long long flow_through(int from, int edge_index) const {
    const Edge& e = graph_[from][edge_index];
    return graph_[e.to][e.rev].cap;  // residual on the reverse arc = pushed flow
  }

  long long solve(int s, int t) {
    long long flow = 0;
    while (bfs(s, t)) {
      iter_.assign(graph_.size(), 0);
      while (long long pushed = dfs(s, t, std::numeric_limits<long long>::max())) flow += pushed;
    }
    return flow;
  }

 private:
  struct Edge {
    int to;
    long long cap;
    int rev;
  };

  bool bfs(int s, int t) {
    level_.assign(graph_.size(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (const Edge& e : graph_[v])
        if (e.cap > 0 && level_[e.to] < 0) {
          level_[e.to] = level_[v] + 1;
          q.push(e.to);
        }
    }
    return level_[t] >= 0;
  }

  long long dfs(int v, int t, long long limit) {
    if (v == t) return limit;
    for (int& i = iter_[v]; i < static_cast<int>(graph_[v].size()); ++i) {
      Edge& e = graph_[v][i];
      if (e.cap <= 0 || level_[e.to] != level_[v] + 1) continue;
      long long d = dfs(e.to, t, std::min(limit, e.cap));
      if (d > 0) {
        e.cap -= d;
        graph_[e.to][e.rev].cap += d;
        return d;
      }
    }
    return 0;
  }

  std::vector<std::vector<Edge>> graph_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

// Transportation feasibility: tasks (with residual demands) as sources,
// servers as sinks, arc capacity = the largest fraction of that task the
// server can run within the scaled deadline. Feasible iff a flow saturates
// every demand. Deadline and capacity bounds carry the same numeric slack
// the offloading code uses, so anything the heuristics commit is certified.
struct FlowTask {
  NodeId origin = -1;
  double demand_bits = 0.0;
  double scaled_deadline_s = 0.0;
};

struct FlowServer {
  NodeId node = -1;
  double capacity_bits = 0.0;
};

struct TransportResult {
  bool feasible = false;
  // flows_bits[i][j]: bits of task i placed on server j
  std::vector<std::vector<double>> flows_bits;
};

inline TransportResult check_transport_feasible(const PathTable& paths, const OffloadParams& p,
                                                const std::vector<FlowTask>& tasks,
                                                const std::vector<FlowServer>& servers) {
  constexpr double kScale = 1000.0;  // 1e-3-bit integer granularity
  const int nt = static_cast<int>(tasks.size());
  const int ns = static_cast<int>(servers.size());
  const int src = 0, snk = nt + ns + 1;
  MaxFlow mf(nt + ns + 2);

  long long total_demand = 0;
  std::vector<int> task_edge(nt);
  std::vector<std::vector<std::pair<int, int>>> arc(nt);  // (server idx, edge idx)
  for (int i = 0; i < nt; ++i) {
    long long d = static_cast<long long>(std::floor(tasks[i].demand_bits * kScale));
    total_demand += d;
    task_edge[i] = mf.add_edge(src, i + 1, d);
    double limit = tasks[i].scaled_deadline_s + slack_for(tasks[i].scaled_deadline_s);
    for (int j = 0; j < ns; ++j) {
      DelayCoeffs c = delay_coeffs(paths, tasks[i].origin, servers[j].node, p.zeta,
                                   p.beta_edge_bps);
      double cap = (limit - c.intercept_s) / c.slope_s_per_bit;
      if (cap <= 0.0) continue;
      long long icap = static_cast<long long>(std::ceil(cap * kScale));
      arc[i].push_back({j, mf.add_edge(i + 1, nt + 1 + j, icap)});
    }
  }
  for (int j = 0; j < ns; ++j) {
    double cap = servers[j].capacity_bits + slack_for(servers[j].capacity_bits);
    mf.add_edge(nt + 1 + j, snk, static_cast<long long>(std::ceil(cap * kScale)));
  }

  TransportResult out;
  long long pushed = mf.solve(src, snk);
  out.feasible = pushed >= total_demand;
  out.flows_bits.assign(nt, std::vector<double>(ns, 0.0));
  for (int i = 0; i < nt; ++i)
    for (auto [j, e] : arc[i]) out.flows_bits[i][j] = mf.flow_through(i + 1, e) / kScale;
  return out;
}

struct OracleLimits {
  int max_nodes = 5;
  int max_stages = 2;
  int max_initial_tasks = 8;
  int max_rpacks = 2;
  int max_stage_tasks = 14;
};

struct ExactResult {
  double gamma_bar_count = 0.0;          // (1/T) * sum Gamma^t over planning stages
  std::vector<int> stage_gamma;
  std::vector<std::map<NodeId, int>> stage_installs;  // winning decision vector
  PlanTrace witness;
  long long configs_explored = 0;
};

namespace detail {

struct OracleStage {
  std::vector<Task> tasks;
  std::vector<int> cloud_ok;       // task indices satisfied by the cloud alone
  std::vector<int> rest;           // task indices needing edge capacity
  std::vector<double> share_bits;  // per task: maximum cloud share
};

struct OracleContext {
  const PlannerInputs* in = nullptr;
  std::vector<NodeId> aps;
  std::vector<OracleStage> stages;
  // memo: stage -> rpack vector -> (gamma, subset of `rest` positions)
  std::vector<std::map<std::vector<int>, std::pair<int, std::vector<int>>>> memo;
  long long configs = 0;
};

inline std::vector<FlowServer> active_servers(const OracleContext& ctx,
                                              const std::vector<int>& rpacks) {
  std::vector<FlowServer> servers;
  for (size_t i = 0; i < ctx.aps.size(); ++i)
    if (rpacks[i] > 0)
      servers.push_back({ctx.aps[i], rpacks[i] * ctx.in->capacity_per_rpack_bits});
  return servers;
}

// Largest satisfiable subset of the stage's remaining tasks under the given
// capacities: enumerate subsets by decreasing cardinality, first feasible
// cardinality wins, lexicographically first subset within it.
inline std::pair<int, std::vector<int>> best_subset(OracleContext& ctx, int stage,
                                                    const std::vector<int>& rpacks) {
  auto& memo = ctx.memo[stage];
  auto hit = memo.find(rpacks);
  if (hit != memo.end()) return hit->second;

  const OracleStage& st = ctx.stages[stage];
  std::vector<FlowServer> servers = active_servers(ctx, rpacks);
  double total_cap = 0.0;
  for (const FlowServer& s : servers) total_cap += s.capacity_bits;

  // tasks that cannot be placed even alone can be dropped outright
  std::vector<int> viable;
  std::vector<FlowTask> viable_flow;
  for (int idx : st.rest) {
    const Task& t = st.tasks[idx];
    double demand = t.size_bits - st.share_bits[idx];
    FlowTask ft{t.origin, demand, t.scaled_deadline_s()};
    auto alone = check_transport_feasible(*ctx.in->paths, ctx.in->offload, {ft}, servers);
    if (alone.feasible) {
      viable.push_back(idx);
      viable_flow.push_back(ft);
    }
  }

  // cardinality cap from total capacity, smallest demands first
  std::vector<double> demands;
  for (const FlowTask& f : viable_flow) demands.push_back(f.demand_bits);
  std::sort(demands.begin(), demands.end());
  int cap_k = 0;
  double acc = 0.0;
  for (double d : demands) {
    if (!leq_within_slack(acc + d, total_cap)) break;
    acc += d;
    ++cap_k;
  }

  const int n = static_cast<int>(viable.size());
  std::pair<int, std::vector<int>> best{0, {}};
  for (int k = std::min(n, cap_k); k >= 1 && best.first == 0; --k) {
    std::vector<int> comb(k);
    for (int i = 0; i < k; ++i) comb[i] = i;
    while (true) {
      std::vector<FlowTask> chosen;
      for (int i : comb) chosen.push_back(viable_flow[i]);
      if (check_transport_feasible(*ctx.in->paths, ctx.in->offload, chosen, servers).feasible) {
        best.first = k;
        for (int i : comb) best.second.push_back(viable[i]);
        break;
      }
      int pos = k - 1;
      while (pos >= 0 && comb[pos] == n - k + pos) --pos;
      if (pos < 0) break;
      ++comb[pos];
      for (int i = pos + 1; i < k; ++i) comb[i] = comb[i - 1] + 1;
    }
  }
  memo[rpacks] = best;
  return best;
}

struct SearchState {
  std::vector<int> rpacks;  // cumulative per AP
  double carry = 0.0;
  int gamma_so_far = 0;
  std::vector<std::map<NodeId, int>> installs;
};

inline void search(OracleContext& ctx, int stage, SearchState& state, int& best_gamma,
                   std::vector<std::map<NodeId, int>>& best_installs) {
  const PlannerInputs& in = *ctx.in;
  const int T = in.planning_stages;
  if (stage > T) {
    if (state.gamma_so_far > best_gamma) {
      best_gamma = state.gamma_so_far;
      best_installs = state.installs;
    }
    return;
  }
  double available = in.budget_total / T + state.carry;
  const int aps = static_cast<int>(ctx.aps.size());

  // enumerate per-AP increments lexicographically with running budget
  std::vector<int> add(aps, 0);
  while (true) {
    double cost = 0.0;
    for (int i = 0; i < aps; ++i) {
      if (add[i] == 0) continue;
      bool fresh = state.rpacks[i] == 0;
      cost += (fresh ? in.cost.infra_cost(stage) : 0.0) + add[i] * in.cost.rpack_cost(stage);
    }
    if (leq_within_slack(cost, available)) {
      ++ctx.configs;
      SearchState next = state;
      for (int i = 0; i < aps; ++i) next.rpacks[i] += add[i];
      next.carry = available - cost;
      std::map<NodeId, int> stage_install;
      for (int i = 0; i < aps; ++i)
        if (add[i] > 0) stage_install[ctx.aps[i]] = add[i];
      next.installs.push_back(stage_install);
      int gamma = static_cast<int>(ctx.stages[stage - 1].cloud_ok.size()) +
                  best_subset(ctx, stage - 1, next.rpacks).first;
      next.gamma_so_far += gamma;
      search(ctx, stage + 1, next, best_gamma, best_installs);
    }
    // next increment vector within headroom
    int pos = aps - 1;
    while (pos >= 0 && add[pos] == in.max_rpacks - state.rpacks[pos]) {
      add[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++add[pos];
  }
}

}  // namespace detail

// Exhaustive optimum for tiny instances: enumerates every budget-feasible
// per-stage rpack allocation and, per stage, the maximum satisfiable task
// set via the transportation oracle.
inline ExactResult exact_plan(const PlannerInputs& in, OracleLimits limits = {}) {
  in.validate();
  const int T = in.planning_stages;
  if (in.topology->node_count() > limits.max_nodes || T > limits.max_stages ||
      in.workload.initial_count > limits.max_initial_tasks ||
      in.max_rpacks > limits.max_rpacks)
    throw ValidationError(
        "oracle guard: instance exceeds the exact-search limits (nodes <= " +
        std::to_string(limits.max_nodes) + ", stages <= " + std::to_string(limits.max_stages) +
        ", initial tasks <= " + std::to_string(limits.max_initial_tasks) + ", rpacks <= " +
        std::to_string(limits.max_rpacks) + ")");
  if (in.eval_stages != 0 && in.eval_stages != T)
    throw ValidationError("oracle guard: evaluation horizon must equal the planning horizon");

  detail::OracleContext ctx;
  ctx.in = &in;
  for (NodeId n = 0; n < in.topology->node_count(); ++n)
    if (in.topology->is_ap(n)) ctx.aps.push_back(n);

  auto line = workload_line(*in.topology, in.workload, in.growth, T, in.master_seed);
  for (const StageWorkload& w : line) {
    if (w.count() > limits.max_stage_tasks)
      throw ValidationError("oracle guard: a stage holds more than " +
                            std::to_string(limits.max_stage_tasks) + " tasks");
    detail::OracleStage st;
    st.tasks = w.tasks;
    st.share_bits.resize(w.count());
    for (int i = 0; i < w.count(); ++i) {
      const Task& t = w.tasks[i];
      NodeId cloud = in.topology->cloud();
      double full = fraction_delay_s(*in.paths, t.origin, cloud, t.size_bits, in.offload.zeta,
                                     in.offload.beta_cloud_bps);
      if (leq_within_slack(full, t.scaled_deadline_s())) {
        st.cloud_ok.push_back(i);
        st.share_bits[i] = t.size_bits;
      } else {
        st.rest.push_back(i);
        st.share_bits[i] = std::min(
            t.size_bits, max_cloud_fraction_bits(*in.paths, t, cloud, in.offload));
      }
    }
    ctx.stages.push_back(std::move(st));
  }
  ctx.memo.resize(T);

  detail::SearchState state;
  state.rpacks.assign(ctx.aps.size(), 0);
  for (auto [node, m] : in.initial_deployment) {
    for (size_t i = 0; i < ctx.aps.size(); ++i)
      if (ctx.aps[i] == node) state.rpacks[i] += m;
  }
  std::vector<int> initial_rpacks = state.rpacks;

  int best_gamma = -1;
  std::vector<std::map<NodeId, int>> best_installs;
  detail::search(ctx, 1, state, best_gamma, best_installs);

  ExactResult res;
  res.configs_explored = ctx.configs;
  res.gamma_bar_count = static_cast<double>(best_gamma) / T;

  // rebuild the winning run as a full trace
  PlanTrace& tr = res.witness;
  tr.algorithm = Algorithm::H;  // placeholder tag; the witness is oracle output
  tr.seed = in.master_seed;
  tr.planning_stages = tr.eval_stages = T;
  tr.horizon_h = 0;
  tr.budget_total = in.budget_total;
  tr.capacity_per_rpack_bits = in.capacity_per_rpack_bits;
  tr.max_rpacks = in.max_rpacks;
  res.stage_installs = best_installs;

  std::vector<int> rpacks = initial_rpacks;
  double carry = 0.0;
  NodeId cloud = in.topology->cloud();
  for (int t = 1; t <= T; ++t) {
    const detail::OracleStage& st = ctx.stages[t - 1];
    StageRecord rec;
    rec.stage = t;
    rec.planning = true;
    rec.budget_available = in.budget_total / T + carry;

    double spent = 0.0;
    for (auto [node, m] : best_installs[t - 1]) {
      size_t i = 0;
      while (ctx.aps[i] != node) ++i;
      bool fresh = rpacks[i] == 0;
      double cost = fresh ? in.cost.deploy_cost(t, m) : in.cost.upgrade_cost(t, m);
      rec.actions.push_back({fresh ? ActionKind::Deploy : ActionKind::Upgrade, node, m, cost});
      rpacks[i] += m;
      spent += cost;
    }
    rec.budget_spent = spent;
    rec.budget_carryover = rec.budget_available - spent;
    carry = rec.budget_carryover;

    auto [count, subset] = detail::best_subset(ctx, t - 1, rpacks);
    rec.gamma = static_cast<int>(st.cloud_ok.size()) + count;

    std::vector<FlowTask> chosen;
    for (int idx : subset)
      chosen.push_back({st.tasks[idx].origin, st.tasks[idx].size_bits - st.share_bits[idx],
                        st.tasks[idx].scaled_deadline_s()});
    auto servers = detail::active_servers(ctx, rpacks);
    auto flows = check_transport_feasible(*in.paths, in.offload, chosen, servers);

    std::map<NodeId, double> load;
    rec.assignment.stage = t;
    rec.assignment.satisfied_count = rec.gamma;
    std::map<int, int> subset_pos;
    for (size_t i = 0; i < subset.size(); ++i) subset_pos[subset[i]] = static_cast<int>(i);
    for (int i = 0; i < static_cast<int>(st.tasks.size()); ++i) {
      const Task& task = st.tasks[i];
      TaskOutcome o;
      o.task = task;
      auto add_cloud = [&](double bits) {
        if (bits < kMinFractionBits) return;
        o.fractions.push_back({task.id, cloud, bits,
                               fraction_delay_s(*in.paths, task.origin, cloud, bits,
                                                in.offload.zeta, in.offload.beta_cloud_bps)});
      };
      if (subset_pos.count(i)) {
        o.satisfied = true;
        add_cloud(st.share_bits[i]);
        int row = subset_pos[i];
        for (size_t j = 0; j < servers.size(); ++j) {
          double bits = flows.flows_bits[row][j];
          if (bits < kMinFractionBits) continue;
          o.fractions.push_back({task.id, servers[j].node, bits,
                                 fraction_delay_s(*in.paths, task.origin, servers[j].node, bits,
                                                  in.offload.zeta, in.offload.beta_edge_bps)});
          load[servers[j].node] += bits;
        }
      } else {
        // cloud-satisfiable tasks go wholly to the cloud; the remainder of an
        // unsatisfied task is drained there as well
        o.satisfied = std::find(st.cloud_ok.begin(), st.cloud_ok.end(), i) != st.cloud_ok.end();
        add_cloud(task.size_bits);
      }
      rec.assignment.outcomes.push_back(std::move(o));
    }
    for (size_t i = 0; i < ctx.aps.size(); ++i)
      if (rpacks[i] > 0)
        rec.servers.push_back({ctx.aps[i], rpacks[i],
                               load.count(ctx.aps[i]) ? load[ctx.aps[i]] : 0.0});
    res.stage_gamma.push_back(rec.gamma);
    tr.stages.push_back(std::move(rec));
  }
  double pct = 0.0;
  long long total_count = 0;
  for (int t = 0; t < T; ++t) {
    total_count += res.stage_gamma[t];
    int n = static_cast<int>(ctx.stages[t].tasks.size());
    pct += n == 0 ? 100.0 : 100.0 * res.stage_gamma[t] / n;
  }
  tr.gamma_bar_count = static_cast<double>(total_count) / T;
  tr.gamma_bar_pct = pct / T;
  return res;
}

}  // namespace mesu
