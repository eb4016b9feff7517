#pragma once

#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "mesu/common.hpp"

namespace mesu {

// Deployment / upgrade prices with per-stage depreciation.
struct CostModel {
  double infra_cost_base = 600.0;   // I^1
  double rpack_cost_base = 100.0;   // kappa_u^1
  double depreciation = 0.2;        // phi, in [0,1)

  void validate() const {
    if (infra_cost_base < 0.0 || rpack_cost_base <= 0.0)
      throw ValidationError("cost: base costs must be positive");
    if (depreciation < 0.0 || depreciation >= 1.0)
      throw ValidationError("cost: depreciation in [0,1)");
  }

  double stage_factor(int stage) const {
    double f = 1.0;
    for (int i = 1; i < stage; ++i) f *= (1.0 - depreciation);
    return f;
  }

  double infra_cost(int stage) const { return infra_cost_base * stage_factor(stage); }
  double rpack_cost(int stage) const { return rpack_cost_base * stage_factor(stage); }
  double deploy_cost(int stage, int rpacks) const {
    return infra_cost(stage) + rpacks * rpack_cost(stage);
  }
  double upgrade_cost(int stage, int rpacks) const { return rpacks * rpack_cost(stage); }
};

enum class ActionKind { Deploy, Upgrade };

inline const char* to_string(ActionKind k) {
  return k == ActionKind::Deploy ? "deploy" : "upgrade";
}

struct Action {
  ActionKind kind = ActionKind::Deploy;
  NodeId node = -1;
  int rpacks = 0;
};

// Price of an action at a stage; validates the rpack range against the
// server limits the action applies to.
inline double cost_of(const Action& a, int stage, const CostModel& model, int max_rpacks,
                      int installed_before) {
  if (a.kind == ActionKind::Deploy) {
    if (a.rpacks < 1 || a.rpacks > max_rpacks)
      throw ValidationError("deploy rpacks out of range 1.." + std::to_string(max_rpacks));
    return model.deploy_cost(stage, a.rpacks);
  }
  int headroom = max_rpacks - installed_before;
  if (a.rpacks < 1 || a.rpacks > headroom)
    throw ValidationError("upgrade rpacks out of range 1.." + std::to_string(headroom));
  return model.upgrade_cost(stage, a.rpacks);
}

// Budget needed to equip x% of the network's nodes with full-capacity
// servers at stage-1 prices. Multiplies by the full node count, matching the
// reference arithmetic for B(x%).
inline double budget_for_coverage(int node_count, double x_percent, const CostModel& model,
                                  int max_rpacks) {
  if (x_percent < 0.0 || x_percent > 100.0)
    throw ValidationError("coverage percent must be in [0,100]");
  return (x_percent / 100.0) * node_count * model.deploy_cost(1, max_rpacks);
}

struct ServerState {
  NodeId node = -1;
  int rpacks = 0;             // cumulative M^t_s
  double workload_bits = 0.0; // committed load this stage
  std::vector<std::pair<int, int>> install_history;  // (stage, rpacks added)

  bool deployed() const { return rpacks > 0; }
};

// Per-node server capacity state. The cloud is not part of the fleet; it is
// modelled as an uncapacitated pseudo-server by the offloading code.
class ServerFleet {
 public:
  ServerFleet(int node_count, NodeId cloud, double capacity_per_rpack_bits, int max_rpacks)
      : cloud_(cloud), capacity_per_rpack_(capacity_per_rpack_bits), max_rpacks_(max_rpacks) {
    if (capacity_per_rpack_ <= 0.0) throw ValidationError("capacity per rpack must be > 0");
    if (max_rpacks_ < 1) throw ValidationError("max rpacks must be >= 1");
    states_.resize(node_count);
    for (int n = 0; n < node_count; ++n) states_[n].node = n;
  }

  double capacity_per_rpack() const { return capacity_per_rpack_; }
  int max_rpacks() const { return max_rpacks_; }
  NodeId cloud() const { return cloud_; }
  int node_count() const { return static_cast<int>(states_.size()); }

  const ServerState& at(NodeId n) const { return states_[n]; }
  bool deployed(NodeId n) const { return states_[n].deployed(); }
  int rpacks(NodeId n) const { return states_[n].rpacks; }

  double capacity_bits(NodeId n) const { return states_[n].rpacks * capacity_per_rpack_; }
  double residual_bits(NodeId n) const { return capacity_bits(n) - states_[n].workload_bits; }
  double workload_bits(NodeId n) const { return states_[n].workload_bits; }

  void install(NodeId n, int rpacks, int stage) {
    if (n == cloud_) throw ValidationError("the cloud cannot host an edge server");
    ServerState& s = states_[n];
    if (rpacks < 1 || s.rpacks + rpacks > max_rpacks_)
      throw ValidationError("rpack install out of range on node " + std::to_string(n));
    s.rpacks += rpacks;
    s.install_history.push_back({stage, rpacks});
  }

  void add_load(NodeId n, double bits) {
    ServerState& s = states_[n];
    double load = s.workload_bits + bits;
    if (!leq_within_slack(load, capacity_bits(n)))
      throw std::logic_error("server " + std::to_string(n) + " capacity overflow");
    s.workload_bits = load;
  }

  // Stage boundary: each stage's demand is served afresh.
  void reset_workloads() {
    for (ServerState& s : states_) s.workload_bits = 0.0;
  }

  std::vector<NodeId> deployed_nodes() const {
    std::vector<NodeId> out;
    for (const ServerState& s : states_)
      if (s.deployed()) out.push_back(s.node);
    return out;
  }

  int total_rpacks() const {
    int sum = 0;
    for (const ServerState& s : states_) sum += s.rpacks;
    return sum;
  }

  double total_workload_bits() const {
    double sum = 0.0;
    for (const ServerState& s : states_) sum += s.workload_bits;
    return sum;
  }

 private:
  NodeId cloud_;
  double capacity_per_rpack_;
  int max_rpacks_;
  std::vector<ServerState> states_;
};

struct SpendRecord {
  int stage = 0;
  NodeId node = -1;
  ActionKind kind = ActionKind::Deploy;
  int rpacks = 0;
  double cost = 0.0;
  double remaining_after = 0.0;
};

// Per-stage budget with carryover: available(t) = B/T + leftover(t-1).
class BudgetLedger {
 public:
  BudgetLedger(double total, int stages) : total_(total), stages_(stages) {
    if (total < 0.0) throw ValidationError("budget must be >= 0");
    if (stages < 1) throw ValidationError("stage count must be >= 1");
    per_stage_ = total / stages;
  }

  double total() const { return total_; }
  double per_stage_allocation() const { return per_stage_; }

  void begin_stage(int stage) {
    if (stage != current_stage_ + 1) throw std::logic_error("stages must be opened in order");
    current_stage_ = stage;
    available_ = (stage <= stages_ ? per_stage_ : 0.0) + carryover_;
    spent_this_stage_ = 0.0;
  }

  double remaining() const { return available_ - spent_this_stage_; }
  double available_this_stage() const { return available_; }
  double spent_this_stage() const { return spent_this_stage_; }

  bool can_afford(double cost) const { return leq_within_slack(cost, remaining()); }

  void commit(const Action& a, double cost, const ServerFleet& fleet) {
    if (!can_afford(cost))
      throw ValidationError("insufficient budget at stage " + std::to_string(current_stage_));
    if (a.kind == ActionKind::Deploy && fleet.deployed(a.node))
      throw ValidationError("node " + std::to_string(a.node) + " already hosts a server");
    spent_this_stage_ += cost;
    log_.push_back({current_stage_, a.node, a.kind, a.rpacks, cost, remaining()});
  }

  // Closes the stage and returns the carryover Delta B^t.
  double close_stage() {
    carryover_ = remaining();
    return carryover_;
  }

  double carryover() const { return carryover_; }
  const std::vector<SpendRecord>& log() const { return log_; }

  double total_spent() const {
    double s = 0.0;
    for (const SpendRecord& r : log_) s += r.cost;
    return s;
  }

 private:
  double total_;
  int stages_;
  double per_stage_ = 0.0;
  int current_stage_ = 0;
  double available_ = 0.0;
  double spent_this_stage_ = 0.0;
  double carryover_ = 0.0;
  std::vector<SpendRecord> log_;
};

inline void dump_spend_csv(const BudgetLedger& ledger, std::ostream& out) {
  out << "stage,node,kind,rpacks,cost,remaining\n";
  out << std::setprecision(17);
  for (const SpendRecord& r : ledger.log())
    out << r.stage << "," << r.node << "," << to_string(r.kind) << "," << r.rpacks << ","
        << r.cost << "," << r.remaining_after << "\n";
}

}  // namespace mesu
