#pragma once

#include <algorithm>
#include <vector>

#include "mesu/common.hpp"
#include "mesu/infrastructure.hpp"
#include "mesu/topology.hpp"
#include "mesu/workload.hpp"

namespace mesu {

struct OffloadParams {
  double zeta = 0.1;             // result size multiplier
  double beta_edge_bps = 10e9;   // processing rate of every edge server
  double beta_cloud_bps = 10e9;  // processing rate of the cloud

  void validate() const {
    if (zeta < 0.0 || zeta > 1.0) throw ValidationError("zeta must be in [0,1]");
    if (beta_edge_bps <= 0.0 || beta_cloud_bps <= 0.0)
      throw ValidationError("processing rates must be > 0");
  }
};

struct FractionAssignment {
  int task_id = -1;
  NodeId server = -1;
  double size_bits = 0.0;
  double delay_s = 0.0;
};

struct TaskOutcome {
  Task task;
  std::vector<FractionAssignment> fractions;
  bool satisfied = false;
};

struct StageAssignment {
  int stage = 1;
  std::vector<TaskOutcome> outcomes;  // by task, in workload order
  int satisfied_count = 0;
};

// Largest fraction of `t` the cloud can take while meeting the scaled
// deadline: invert the affine round-trip delay and clamp to the task size.
inline double max_cloud_fraction_bits(const PathTable& paths, const Task& t, NodeId cloud,
                                      const OffloadParams& p) {
  DelayCoeffs c = delay_coeffs(paths, t.origin, cloud, p.zeta, p.beta_cloud_bps);
  double headroom = t.scaled_deadline_s() - c.intercept_s;
  if (headroom <= 0.0) return 0.0;
  return std::min(t.size_bits, headroom / c.slope_s_per_bit);
}

// Drives one stage's task-to-server assignment. Owns the per-task residuals,
// fractions and satisfaction flags; server load lives in the fleet.
class StageOffloader {
 public:
  StageOffloader(const PathTable& paths, ServerFleet& fleet, const OffloadParams& params,
                 std::vector<Task> tasks, int stage)
      : paths_(paths), fleet_(fleet), params_(params), stage_(stage), tasks_(std::move(tasks)) {
    size_t n = tasks_.size();
    residual_.resize(n);
    satisfied_.assign(n, false);
    completed_.assign(n, false);
    fractions_.assign(n, {});
    for (size_t i = 0; i < n; ++i) {
      residual_[i] = tasks_[i].size_bits;
      unsatisfied_.push_back(static_cast<int>(i));
    }
  }

  NodeId cloud() const { return fleet_.cloud(); }
  int gamma() const { return gamma_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  const std::vector<int>& unsatisfied() const { return unsatisfied_; }
  double residual_bits(int index) const { return residual_[index]; }
  bool is_satisfied(int index) const { return satisfied_[index]; }

  double beta_of(NodeId server) const {
    return server == cloud() ? params_.beta_cloud_bps : params_.beta_edge_bps;
  }

  double delay_of(NodeId origin, NodeId server, double bits) const {
    return fraction_delay_s(paths_, origin, server, bits, params_.zeta, beta_of(server));
  }

  DelayCoeffs coeffs(NodeId origin, NodeId server) const {
    return delay_coeffs(paths_, origin, server, params_.zeta, beta_of(server));
  }

  // Whole-task cloud offloading. With mark_satisfied the move happens only
  // when the full residual meets the scaled deadline; without it every
  // remaining task is drained to the cloud and stays unsatisfied.
  int offload_to_cloud(bool mark_satisfied) {
    int newly = 0;
    std::vector<int> keep;
    for (int i : unsatisfied_) {
      const Task& t = tasks_[i];
      if (mark_satisfied) {
        double delay = delay_of(t.origin, cloud(), residual_[i]);
        if (leq_within_slack(delay, t.scaled_deadline_s())) {
          assign_to_cloud(i, residual_[i]);
          residual_[i] = 0.0;
          satisfied_[i] = true;
          completed_[i] = true;
          ++gamma_;
          ++newly;
        } else {
          keep.push_back(i);
        }
      } else {
        assign_to_cloud(i, residual_[i]);
        residual_[i] = 0.0;
        completed_[i] = true;
      }
    }
    if (mark_satisfied)
      unsatisfied_ = std::move(keep);
    else
      unsatisfied_.clear();
    return newly;
  }

  // Sends each unsatisfied task's maximum deadline-compliant fraction to the
  // cloud, shrinking what the edge servers must absorb.
  void reduce_via_cloud() {
    for (int i : unsatisfied_) {
      const Task& t = tasks_[i];
      double share = std::min(residual_[i], max_cloud_fraction_bits(paths_, t, cloud(), params_));
      if (share >= kMinFractionBits) {
        assign_to_cloud(i, share);
        residual_[i] -= share;
      }
    }
  }

  // Fractional fill across servers with leftover capacity. Per task the
  // fractions are tentative and commit only when the whole residual is
  // placed; a partial split is rolled back so no capacity is wasted on a
  // task that stays unsatisfied.
  int offload_fractions() {
    std::vector<int> order = unsatisfied_;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (residual_[a] != residual_[b]) return residual_[a] < residual_[b];
      return tasks_[a].id < tasks_[b].id;
    });
    std::vector<NodeId> servers = fleet_.deployed_nodes();
    int newly = 0;
    for (int i : order) {
      const Task& t = tasks_[i];
      // nearest/fastest first: ascending delay slope, ties by node id
      std::vector<std::pair<double, NodeId>> ranked;
      for (NodeId s : servers)
        if (fleet_.residual_bits(s) >= kMinFractionBits)
          ranked.push_back({coeffs(t.origin, s).slope_s_per_bit, s});
      std::sort(ranked.begin(), ranked.end());

      double rem = residual_[i];
      std::vector<std::pair<NodeId, double>> tentative;
      for (auto& [slope, s] : ranked) {
        if (rem < kMinFractionBits) break;
        double take = std::min(rem, fleet_.residual_bits(s));
        if (take < kMinFractionBits) continue;
        double delay = delay_of(t.origin, s, take);
        if (leq_within_slack(delay, t.scaled_deadline_s())) {
          tentative.push_back({s, take});
          rem -= take;
        }
      }
      if (rem < kMinFractionBits && !tentative.empty()) {
        tentative.back().second += rem;  // fold sub-bit dust into the last piece
        for (auto& [s, bits] : tentative) {
          fleet_.add_load(s, bits);
          fractions_[i].push_back({t.id, s, bits, delay_of(t.origin, s, bits)});
        }
        residual_[i] = 0.0;
        satisfied_[i] = true;
        completed_[i] = true;
        ++gamma_;
        ++newly;
      }
    }
    if (newly > 0) {
      std::vector<int> keep;
      for (int i : unsatisfied_)
        if (!satisfied_[i]) keep.push_back(i);
      unsatisfied_ = std::move(keep);
    }
    return newly;
  }

  // Commits a pre-verified cluster wholly onto one server.
  // Capacity overflow here means the cluster generator is broken, so it
  // surfaces as a logic error rather than a validation error.
  int offload_cluster(const std::vector<int>& task_indices, NodeId server) {
    for (int i : task_indices) {
      const Task& t = tasks_[i];
      double bits = residual_[i];
      fleet_.add_load(server, bits);
      fractions_[i].push_back({t.id, server, bits, delay_of(t.origin, server, bits)});
      residual_[i] = 0.0;
      satisfied_[i] = true;
      completed_[i] = true;
      ++gamma_;
    }
    if (!task_indices.empty()) {
      std::vector<int> keep;
      for (int i : unsatisfied_)
        if (!satisfied_[i]) keep.push_back(i);
      unsatisfied_ = std::move(keep);
    }
    return static_cast<int>(task_indices.size());
  }

  StageAssignment assignment() const {
    StageAssignment out;
    out.stage = stage_;
    out.satisfied_count = gamma_;
    out.outcomes.reserve(tasks_.size());
    for (size_t i = 0; i < tasks_.size(); ++i) {
      TaskOutcome o;
      o.task = tasks_[i];
      o.fractions = fractions_[i];
      std::sort(o.fractions.begin(), o.fractions.end(),
                [](const FractionAssignment& a, const FractionAssignment& b) {
                  return a.server < b.server;
                });
      o.satisfied = satisfied_[i];
      out.outcomes.push_back(std::move(o));
    }
    return out;
  }

 private:
  void assign_to_cloud(int i, double bits) {
    if (bits < kMinFractionBits && !fractions_[i].empty()) return;
    for (FractionAssignment& f : fractions_[i]) {
      if (f.server == cloud()) {
        f.size_bits += bits;
        f.delay_s = delay_of(tasks_[i].origin, cloud(), f.size_bits);
        return;
      }
    }
    fractions_[i].push_back(
        {tasks_[i].id, cloud(), bits, delay_of(tasks_[i].origin, cloud(), bits)});
  }

  const PathTable& paths_;
  ServerFleet& fleet_;
  OffloadParams params_;
  int stage_;
  std::vector<Task> tasks_;
  std::vector<double> residual_;
  std::vector<char> satisfied_;
  std::vector<char> completed_;
  std::vector<std::vector<FractionAssignment>> fractions_;
  std::vector<int> unsatisfied_;
  int gamma_ = 0;
};

}  // namespace mesu
