#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "mesu/common.hpp"
#include "mesu/rng.hpp"
#include "mesu/topology.hpp"

namespace mesu {

// A task keeps its stage-1 base size/deadline; the per-stage values are the
// base values aged by the growth exponent, applied only to flagged tasks.
struct Task {
  int id = 0;
  NodeId origin = 0;
  double base_size_bits = 0.0;
  double base_deadline_s = 0.0;
  double size_bits = 0.0;    // value at this workload's stage
  double deadline_s = 0.0;   // value at this workload's stage
  double sigma = 1.0;        // delay tolerance multiplier, >= 1
  bool grows_size = false;
  bool tightens_deadline = false;

  double scaled_deadline_s() const { return sigma * deadline_s; }
};

struct GrowthParams {
  double mu = 0.5;           // task-count growth rate per stage
  double rho_size = 0.2;     // proportion of size-growing tasks
  double rho_deadline = 0.2; // proportion of deadline-tightening tasks
  double alpha_size = 0.5;   // size growth rate
  double alpha_deadline = 0.5;  // deadline tightening rate
  int horizon_h = 0;         // prediction horizon in stages, >= 0

  void validate() const {
    if (mu < 0.0) throw ValidationError("growth: mu must be >= 0");
    if (rho_size < 0.0 || rho_size > 1.0) throw ValidationError("growth: rho_size in [0,1]");
    if (rho_deadline < 0.0 || rho_deadline > 1.0)
      throw ValidationError("growth: rho_deadline in [0,1]");
    if (alpha_size < 0.0) throw ValidationError("growth: alpha_size must be >= 0");
    if (alpha_deadline < 0.0 || alpha_deadline > 1.0)
      throw ValidationError("growth: alpha_deadline in [0,1]");
    if (horizon_h < 0) throw ValidationError("growth: horizon must be >= 0");
  }
};

struct ToleranceSpec {
  double intolerant_prob = 0.5;
  double sigma_min = 1.5;
  double sigma_max = 3.0;

  void validate() const {
    if (intolerant_prob < 0.0 || intolerant_prob > 1.0)
      throw ValidationError("tolerance: probability in [0,1]");
    if (sigma_min < 1.0 || sigma_max < sigma_min)
      throw ValidationError("tolerance: need 1 <= sigma_min <= sigma_max");
  }
};

struct StageWorkload {
  int stage = 1;
  int initial_count = 0;  // |R^1|, anchor of the count law
  std::vector<Task> tasks;

  int count() const { return static_cast<int>(tasks.size()); }
};

namespace detail {

inline double growth_exponent_value(double rate, int exponent) {
  double v = 1.0;
  for (int i = 0; i < exponent; ++i) v *= (1.0 + rate);
  return v;
}

inline void age_task(Task& t, int exponent, const GrowthParams& g) {
  double size_factor = t.grows_size ? growth_exponent_value(g.alpha_size, exponent) : 1.0;
  double deadline_factor =
      t.tightens_deadline ? growth_exponent_value(-g.alpha_deadline, exponent) : 1.0;
  t.size_bits = t.base_size_bits * size_factor;
  t.deadline_s = t.base_deadline_s * deadline_factor;
}

// Each task consumes a fixed number of draws so that two evolutions from the
// same seed produce identical task prefixes regardless of how many tasks they
// generate in total.
inline Task draw_task(std::mt19937_64& rng, int id, const std::vector<NodeId>& aps,
                      const std::vector<double>& size_choices_bits,
                      const std::vector<double>& deadline_choices_s, const ToleranceSpec& tol) {
  Task t;
  t.id = id;
  t.origin = aps[std::uniform_int_distribution<size_t>(0, aps.size() - 1)(rng)];
  t.base_size_bits = size_choices_bits[std::uniform_int_distribution<size_t>(
      0, size_choices_bits.size() - 1)(rng)];
  t.base_deadline_s = deadline_choices_s[std::uniform_int_distribution<size_t>(
      0, deadline_choices_s.size() - 1)(rng)];
  double u_tol = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double u_sigma = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  t.sigma = (u_tol < tol.intolerant_prob)
                ? 1.0
                : tol.sigma_min + u_sigma * (tol.sigma_max - tol.sigma_min);
  t.size_bits = t.base_size_bits;
  t.deadline_s = t.base_deadline_s;
  return t;
}

// Flag `want` of the `candidates` ids, chosen by seeded partial shuffle.
inline void flag_some(std::vector<Task>& tasks, std::vector<int> candidate_indices, int want,
                      std::mt19937_64& rng, bool size_flag) {
  want = std::min<int>(want, static_cast<int>(candidate_indices.size()));
  for (int i = 0; i < want; ++i) {
    size_t j = std::uniform_int_distribution<size_t>(i, candidate_indices.size() - 1)(rng);
    std::swap(candidate_indices[i], candidate_indices[j]);
    Task& t = tasks[candidate_indices[i]];
    if (size_flag)
      t.grows_size = true;
    else
      t.tightens_deadline = true;
  }
}

}  // namespace detail

struct WorkloadSpec {
  int initial_count = 0;
  std::vector<double> size_choices_bits = {10e9, 20e9, 30e9};
  std::vector<double> deadline_choices_s = {3.0, 5.0, 10.0};
  ToleranceSpec tolerance;

  void validate() const {
    if (initial_count < 0) throw ValidationError("workload: count must be >= 0");
    if (size_choices_bits.empty() || deadline_choices_s.empty())
      throw ValidationError("workload: choice sets must be nonempty");
    for (double s : size_choices_bits)
      if (s <= 0.0) throw ValidationError("workload: sizes must be > 0");
    for (double d : deadline_choices_s)
      if (d <= 0.0) throw ValidationError("workload: deadlines must be > 0");
    tolerance.validate();
  }
};

inline StageWorkload generate_initial(const Topology& topo, const WorkloadSpec& spec,
                                      const GrowthParams& growth, std::uint64_t seed) {
  spec.validate();
  growth.validate();
  std::vector<NodeId> aps;
  for (NodeId n = 0; n < topo.node_count(); ++n)
    if (topo.is_ap(n)) aps.push_back(n);
  if (aps.empty()) throw ValidationError("workload: topology has no APs");

  StageWorkload w;
  w.stage = 1;
  w.initial_count = spec.initial_count;
  auto rng = make_rng(seed);
  for (int i = 0; i < spec.initial_count; ++i)
    w.tasks.push_back(detail::draw_task(rng, i, aps, spec.size_choices_bits,
                                        spec.deadline_choices_s, spec.tolerance));

  std::vector<int> all(w.tasks.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  detail::flag_some(w.tasks, all, static_cast<int>(std::floor(growth.rho_size * w.count())), rng,
                    true);
  detail::flag_some(w.tasks, all, static_cast<int>(std::floor(growth.rho_deadline * w.count())),
                    rng, false);
  return w;
}

// Advance a workload one stage. Existing tasks persist
// and flagged ones are re-aged; new tasks are appended to meet the count law
// and flagged to keep global proportions. When `final_planning_stage` is set
// the growth exponent t-1 is replaced by T-1+h, which is the demand
// prediction used by the planning policy at the last stage.
inline StageWorkload evolve(const StageWorkload& prev, const Topology& topo,
                            const WorkloadSpec& spec, const GrowthParams& growth,
                            bool final_planning_stage, int total_stages, std::uint64_t seed) {
  growth.validate();
  StageWorkload next;
  next.stage = prev.stage + 1;
  next.initial_count = prev.initial_count;

  int exponent = final_planning_stage ? (total_stages - 1 + growth.horizon_h) : (next.stage - 1);
  long long target =
      round_half_up(detail::growth_exponent_value(growth.mu, exponent) * prev.initial_count);
  target = std::max<long long>(target, prev.count());

  next.tasks = prev.tasks;
  for (Task& t : next.tasks) detail::age_task(t, exponent, growth);

  std::vector<NodeId> aps;
  for (NodeId n = 0; n < topo.node_count(); ++n)
    if (topo.is_ap(n)) aps.push_back(n);

  auto rng = make_rng(seed);
  std::vector<int> fresh_indices;
  int next_id = prev.tasks.empty() ? 0 : prev.tasks.back().id + 1;
  while (next.count() < target) {
    Task t = detail::draw_task(rng, next_id++, aps, spec.size_choices_bits,
                               spec.deadline_choices_s, spec.tolerance);
    fresh_indices.push_back(next.count());
    next.tasks.push_back(t);
  }

  auto flagged_count = [&](bool size_flag) {
    int c = 0;
    for (const Task& t : next.tasks)
      if (size_flag ? t.grows_size : t.tightens_deadline) ++c;
    return c;
  };
  int want_size = static_cast<int>(std::floor(growth.rho_size * next.count())) - flagged_count(true);
  detail::flag_some(next.tasks, fresh_indices, std::max(0, want_size), rng, true);
  int want_dl =
      static_cast<int>(std::floor(growth.rho_deadline * next.count())) - flagged_count(false);
  detail::flag_some(next.tasks, fresh_indices, std::max(0, want_dl), rng, false);

  for (int i : fresh_indices) detail::age_task(next.tasks[i], exponent, growth);
  return next;
}

// The actual demand line W^1..W^E for a scenario, without prediction.
inline std::vector<StageWorkload> workload_line(const Topology& topo, const WorkloadSpec& spec,
                                                const GrowthParams& growth, int stages,
                                                std::uint64_t master_seed) {
  std::vector<StageWorkload> line;
  line.push_back(generate_initial(topo, spec, growth,
                                  derive_seed(master_seed, SeedTag::InitialWorkload)));
  for (int t = 2; t <= stages; ++t)
    line.push_back(evolve(line.back(), topo, spec, growth, false, stages,
                          derive_seed(master_seed, SeedTag::StageEvolution, t)));
  return line;
}

// Predicted stage-T demand for the final planning stage: the same evolution
// step, from W^{T-1}, with the exponent lifted to T-1+h. Shares the stage-T
// RNG stream, so with h = 0 this is exactly the actual stage-T workload.
inline StageWorkload predicted_final_stage(const std::vector<StageWorkload>& line,
                                           const Topology& topo, const WorkloadSpec& spec,
                                           const GrowthParams& growth, int total_stages,
                                           std::uint64_t master_seed) {
  if (total_stages == 1) {
    // No prior stage to evolve from: lift the initial workload in place.
    StageWorkload base = line[0];
    base.stage = 0;
    StageWorkload p = evolve(base, topo, spec, growth, true, total_stages,
                             derive_seed(master_seed, SeedTag::StageEvolution, 1));
    p.stage = 1;
    return p;
  }
  return evolve(line[total_stages - 2], topo, spec, growth, true, total_stages,
                derive_seed(master_seed, SeedTag::StageEvolution, total_stages));
}

inline void dump_workload_csv(const std::vector<StageWorkload>& line, std::ostream& out) {
  out << "stage,task_id,origin,deadline_s,size_bits,sigma,flag_b,flag_tau\n";
  out << std::setprecision(17);
  for (const StageWorkload& w : line)
    for (const Task& t : w.tasks)
      out << w.stage << "," << t.id << "," << t.origin << "," << t.deadline_s << ","
          << t.size_bits << "," << t.sigma << "," << (t.grows_size ? 1 : 0) << ","
          << (t.tightens_deadline ? 1 : 0) << "\n";
}

// Reads a dump back for audits. The per-stage values become the base values;
// that is all a re-check of a finished run needs.
inline std::vector<StageWorkload> load_workload_csv(std::istream& in) {
  std::vector<StageWorkload> line;
  std::string row;
  if (!std::getline(in, row) || row.rfind("stage,task_id,origin", 0) != 0)
    throw ValidationError("workload csv: missing header");
  while (std::getline(in, row)) {
    if (row.empty()) continue;
    std::istringstream ls(row);
    std::string field;
    auto next = [&] {
      if (!std::getline(ls, field, ',')) throw ValidationError("workload csv: short row: " + row);
      return field;
    };
    int stage = std::stoi(next());
    Task t;
    t.id = std::stoi(next());
    t.origin = std::stoi(next());
    t.deadline_s = t.base_deadline_s = std::stod(next());
    t.size_bits = t.base_size_bits = std::stod(next());
    t.sigma = std::stod(next());
    t.grows_size = next() == "1";
    t.tightens_deadline = next() == "1";
    while (static_cast<int>(line.size()) < stage) {
      StageWorkload w;
      w.stage = static_cast<int>(line.size()) + 1;
      line.push_back(w);
    }
    line[stage - 1].tasks.push_back(t);
  }
  for (StageWorkload& w : line) w.initial_count = line.empty() ? 0 : line[0].count();
  return line;
}

}  // namespace mesu
