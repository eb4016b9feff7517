#pragma once

#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mesu/offload.hpp"
#include "mesu/planner.hpp"

namespace mesu {

// Mixed-integer model of the multi-stage upgrade problem, emitted in LP text
// format. The model works in Gb / seconds / currency so every coefficient
// stays O(1e4) and residual checks are meaningful at 1e-6 absolute.

struct MilpVariable {
  enum Kind { Binary, Integer, Continuous };
  std::string name;
  Kind kind = Continuous;
  double lo = 0.0;
  double hi = 0.0;
};

struct MilpTerm {
  int var = -1;
  double coeff = 0.0;
};

struct MilpRow {
  std::string name;       // e.g. c23_t1_s2
  std::string source;     // constraint family: "20".."30"
  char sense = 'L';       // 'L' <=, 'G' >=, 'E' ==
  double rhs = 0.0;
  std::vector<MilpTerm> terms;
};

struct MilpModel {
  std::vector<MilpVariable> vars;
  std::vector<MilpRow> rows;
  std::vector<MilpTerm> objective;  // maximized
  std::map<std::string, int> index;

  int add_var(const std::string& name, MilpVariable::Kind kind, double lo, double hi) {
    index[name] = static_cast<int>(vars.size());
    vars.push_back({name, kind, lo, hi});
    return static_cast<int>(vars.size()) - 1;
  }
  int var(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ValidationError("unknown variable " + name);
    return it->second;
  }
  size_t variable_count() const { return vars.size(); }
  size_t constraint_count() const { return rows.size(); }
};

// Shape parameters that fix the closed-form variable/constraint counts:
// node count |V|, and per stage the candidate-server count |S^t| (cloud
// included) and task count |R^t|.
struct MilpShape {
  int stages = 1;
  int nodes = 2;
  std::vector<int> servers_per_stage;  // |S^t|, cloud included
  std::vector<int> tasks_per_stage;    // |R^t|
};

inline long long closed_form_variable_count(const MilpShape& s) {
  long long total = static_cast<long long>(s.nodes) * s.stages;
  for (int t = 0; t < s.stages; ++t) {
    long long S = s.servers_per_stage[t], R = s.tasks_per_stage[t];
    total += S + 2 * (S * R + R);
  }
  return total;
}

inline long long closed_form_constraint_count(const MilpShape& s) {
  long long total = s.stages + static_cast<long long>(s.nodes) * s.stages;
  for (int t = 0; t < s.stages; ++t) {
    long long S = s.servers_per_stage[t], R = s.tasks_per_stage[t];
    total += 2 * R + 3 * S + 3 * S * R - 1;
  }
  return total;
}

struct MilpStageInput {
  std::vector<NodeId> edge_candidates;  // APs that may host/grow a server
  std::vector<Task> tasks;
};

struct MilpInput {
  const Topology* topology = nullptr;
  const PathTable* paths = nullptr;
  OffloadParams offload;
  CostModel cost;
  double capacity_per_rpack_bits = 10e9;
  int max_rpacks = 4;
  std::map<NodeId, int> initial_rpacks;
  std::vector<double> stage_allocations;  // budget added at each stage
  std::vector<MilpStageInput> stages;
  long long size_guard = 200000;  // refuse above |V| * max|R| * T

  MilpShape shape() const {
    MilpShape s;
    s.stages = static_cast<int>(stages.size());
    s.nodes = topology->node_count();
    for (const auto& st : stages) {
      s.servers_per_stage.push_back(static_cast<int>(st.edge_candidates.size()) + 1);
      s.tasks_per_stage.push_back(static_cast<int>(st.tasks.size()));
    }
    return s;
  }
};

namespace detail {

inline std::string nm(const char* base, int t) { return std::string(base) + "_" + std::to_string(t); }
inline std::string nm(const char* base, int t, int a) {
  return std::string(base) + "_" + std::to_string(t) + "_" + std::to_string(a);
}
inline std::string nm(const char* base, int t, int a, int b) {
  return std::string(base) + "_" + std::to_string(t) + "_" + std::to_string(a) + "_" +
         std::to_string(b);
}

}  // namespace detail

inline MilpModel build_milp(const MilpInput& in) {
  using detail::nm;
  if (!in.topology || !in.paths) throw ValidationError("milp: missing topology");
  const int T = static_cast<int>(in.stages.size());
  if (T < 1) throw ValidationError("milp: no stages");
  if (static_cast<int>(in.stage_allocations.size()) != T)
    throw ValidationError("milp: stage allocations must match the stage count");
  long long max_tasks = 0;
  for (const auto& st : in.stages)
    max_tasks = std::max<long long>(max_tasks, static_cast<long long>(st.tasks.size()));
  long long size = static_cast<long long>(in.topology->node_count()) * max_tasks * T;
  if (size > in.size_guard)
    throw ValidationError("milp: instance size " + std::to_string(size) +
                          " exceeds the guard threshold " + std::to_string(in.size_guard));

  const NodeId cloud = in.topology->cloud();
  const double cp_gb = in.capacity_per_rpack_bits / kBitsPerGb;
  auto initial = [&](NodeId s) {
    auto it = in.initial_rpacks.find(s);
    return it == in.initial_rpacks.end() ? 0 : it->second;
  };

  MilpModel m;

  // variables, stage-major, in a fixed kind order
  for (int t = 1; t <= T; ++t) {
    const MilpStageInput& st = in.stages[t - 1];
    for (NodeId s = 0; s < in.topology->node_count(); ++s)
      m.add_var(nm("d", t, s), MilpVariable::Binary, initial(s) > 0 ? 1.0 : 0.0, 1.0);
    auto add_m = [&](NodeId s) {
      double hi = s == cloud ? 0.0 : static_cast<double>(in.max_rpacks - initial(s));
      m.add_var(nm("m", t, s), MilpVariable::Integer, 0.0, std::max(0.0, hi));
    };
    for (NodeId s : st.edge_candidates) add_m(s);
    add_m(cloud);
    for (const Task& k : st.tasks) {
      double b_gb = k.size_bits / kBitsPerGb;
      for (NodeId s : st.edge_candidates)
        m.add_var(nm("b", t, k.id, s), MilpVariable::Continuous, 0.0, b_gb);
      m.add_var(nm("b", t, k.id, cloud), MilpVariable::Continuous, 0.0, b_gb);
      double bound31 =
          max_cloud_fraction_bits(*in.paths, k, cloud, in.offload) / kBitsPerGb;
      m.add_var(nm("bu", t, k.id), MilpVariable::Continuous, 0.0, bound31);
      m.add_var(nm("g", t, k.id), MilpVariable::Binary, 0.0, 1.0);
      for (NodeId s : st.edge_candidates)
        m.add_var(nm("g", t, k.id, s), MilpVariable::Binary, 0.0, 1.0);
      m.add_var(nm("g", t, k.id, cloud), MilpVariable::Binary, 0.0, 1.0);
    }
  }

  // objective (19): average satisfied tasks
  for (int t = 1; t <= T; ++t)
    for (const Task& k : in.stages[t - 1].tasks)
      m.objective.push_back({m.var(nm("g", t, k.id)), 1.0 / T});

  auto all_servers = [&](int t) {
    std::vector<NodeId> s = in.stages[t - 1].edge_candidates;
    s.push_back(cloud);
    return s;
  };

  // (20) cumulative budget, infrastructure charged on deployment increments
  for (int t = 1; t <= T; ++t) {
    MilpRow row;
    row.name = nm("c20", t);
    row.source = "20";
    row.sense = 'L';
    double rhs = 0.0;
    for (int k = 1; k <= t; ++k) rhs += in.stage_allocations[k - 1];
    std::map<int, double> coeff;
    for (int k = 1; k <= t; ++k) {
      double infra = in.cost.infra_cost(k);
      double rpack = in.cost.rpack_cost(k);
      for (NodeId s : in.stages[k - 1].edge_candidates) {
        coeff[m.var(nm("d", k, s))] += infra;
        if (k > 1)
          coeff[m.var(nm("d", k - 1, s))] -= infra;
        else if (initial(s) > 0)
          rhs += infra;  // d^0 = 1: already deployed, no charge
        coeff[m.var(nm("m", k, s))] += rpack;
      }
    }
    for (auto [v, c] : coeff)
      if (c != 0.0) row.terms.push_back({v, c});
    row.rhs = rhs;
    m.rows.push_back(std::move(row));
  }

  for (int t = 1; t <= T; ++t) {
    const MilpStageInput& st = in.stages[t - 1];
    auto servers = all_servers(t);

    // (21) every task fully assigned
    for (const Task& k : st.tasks) {
      MilpRow row{nm("c21", t, k.id), "21", 'E', k.size_bits / kBitsPerGb, {}};
      for (NodeId s : servers) row.terms.push_back({m.var(nm("b", t, k.id, s)), 1.0});
      m.rows.push_back(std::move(row));
    }
    // (22) cloud clamp, relaxed for unsatisfied tasks:
    //      b_cloud <= bu + (1 - g) * b_k
    for (const Task& k : st.tasks) {
      double b_gb = k.size_bits / kBitsPerGb;
      MilpRow row{nm("c22", t, k.id), "22", 'L', b_gb, {}};
      row.terms.push_back({m.var(nm("b", t, k.id, cloud)), 1.0});
      row.terms.push_back({m.var(nm("bu", t, k.id)), -1.0});
      row.terms.push_back({m.var(nm("g", t, k.id)), b_gb});
      m.rows.push_back(std::move(row));
    }
    // (23) edge server capacity from cumulative rpacks
    for (NodeId s : st.edge_candidates) {
      MilpRow row{nm("c23", t, s), "23", 'L', initial(s) * cp_gb, {}};
      for (const Task& k : st.tasks) row.terms.push_back({m.var(nm("b", t, k.id, s)), 1.0});
      for (int tau = 1; tau <= t; ++tau)
        if (m.index.count(nm("m", tau, s))) row.terms.push_back({m.var(nm("m", tau, s)), -cp_gb});
      m.rows.push_back(std::move(row));
    }
    // (24) no load before deployment (linearized with the M_max*C_p bound)
    for (const Task& k : st.tasks)
      for (NodeId s : servers) {
        MilpRow row{nm("c24", t, k.id, s), "24", 'L', 0.0, {}};
        row.terms.push_back({m.var(nm("b", t, k.id, s)), 1.0});
        double gate = s == cloud ? k.size_bits / kBitsPerGb : in.max_rpacks * cp_gb;
        row.terms.push_back({m.var(nm("d", t, s)), -gate});
        m.rows.push_back(std::move(row));
      }
    // (25) deployment is never reversed, over all nodes
    for (NodeId s = 0; s < in.topology->node_count(); ++s) {
      MilpRow row{nm("c25", t, s), "25", 'G', 0.0, {}};
      row.terms.push_back({m.var(nm("d", t, s)), 1.0});
      if (t > 1)
        row.terms.push_back({m.var(nm("d", t - 1, s)), -1.0});
      else
        row.rhs = (s != cloud && initial(s) > 0) ? 1.0 : 0.0;
      m.rows.push_back(std::move(row));
    }
    // (26) rpack cap, (27) non-decreasing installs
    for (NodeId s : servers) {
      MilpRow cap{nm("c26", t, s), "26", 'L',
                  static_cast<double>(in.max_rpacks - (s == cloud ? 0 : initial(s))), {}};
      for (int tau = 1; tau <= t; ++tau)
        if (m.index.count(nm("m", tau, s))) cap.terms.push_back({m.var(nm("m", tau, s)), 1.0});
      m.rows.push_back(std::move(cap));
      MilpRow mono{nm("c27", t, s), "27", 'G', 0.0, {}};
      mono.terms.push_back({m.var(nm("m", t, s)), 1.0});
      m.rows.push_back(std::move(mono));
    }
    // (29) per-fraction delay with a per-pair big-M; the affine delay
    //      A*b + B <= sigma*tau + (1-g_ks)*M  becomes
    //      A*b + M*g_ks <= sigma*tau - B + M
    for (const Task& k : st.tasks)
      for (NodeId s : servers) {
        double beta = s == cloud ? in.offload.beta_cloud_bps : in.offload.beta_edge_bps;
        DelayCoeffs c = delay_coeffs(*in.paths, k.origin, s, in.offload.zeta, beta);
        double slope_gb = c.slope_s_per_bit * kBitsPerGb;
        double big_m = slope_gb * (k.size_bits / kBitsPerGb) + c.intercept_s + 1.0;
        MilpRow row{nm("c29", t, k.id, s), "29",
                    'L', k.scaled_deadline_s() - c.intercept_s + big_m, {}};
        row.terms.push_back({m.var(nm("b", t, k.id, s)), slope_gb});
        row.terms.push_back({m.var(nm("g", t, k.id, s)), big_m});
        m.rows.push_back(std::move(row));
      }
    // (30) a task is satisfied only if every per-server flag is
    for (const Task& k : st.tasks)
      for (NodeId s : servers) {
        MilpRow row{nm("c30", t, k.id, s), "30", 'L', 0.0, {}};
        row.terms.push_back({m.var(nm("g", t, k.id)), 1.0});
        row.terms.push_back({m.var(nm("g", t, k.id, s)), -1.0});
        m.rows.push_back(std::move(row));
      }
  }
  return m;
}

namespace detail {

inline std::string fmt_coeff(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

inline void emit_lp(const MilpModel& m, std::ostream& out) {
  using detail::fmt_coeff;
  out << "\\ multi-stage edge upgrade model\n";
  out << "\\ budget rows charge infrastructure on deployment increments d_t_s - d_{t-1}_s\n";
  out << "\\ the capacity gate (24) is linearized against the M_max rpack bound\n";
  out << "Maximize\n obj:";
  bool first = true;
  for (const MilpTerm& term : m.objective) {
    double c = term.coeff;
    out << (first ? " " : (c < 0 ? " - " : " + "));
    if (!first && c < 0) c = -c;
    out << fmt_coeff(c) << " " << m.vars[term.var].name;
    first = false;
  }
  out << "\nSubject To\n";
  for (const MilpRow& row : m.rows) {
    out << " " << row.name << ":";
    bool f = true;
    for (const MilpTerm& term : row.terms) {
      double c = term.coeff;
      out << (f ? " " : (c < 0 ? " - " : " + "));
      if (!f && c < 0) c = -c;
      out << fmt_coeff(c) << " " << m.vars[term.var].name;
      f = false;
    }
    if (f) out << " 0";
    out << (row.sense == 'L' ? " <= " : row.sense == 'G' ? " >= " : " = ");
    out << fmt_coeff(row.rhs) << "\n";
  }
  out << "Bounds\n";
  for (const MilpVariable& v : m.vars) {
    if (v.lo == v.hi)
      out << " " << v.name << " = " << fmt_coeff(v.lo) << "\n";
    else
      out << " " << fmt_coeff(v.lo) << " <= " << v.name << " <= " << fmt_coeff(v.hi) << "\n";
  }
  out << "Generals\n";
  for (const MilpVariable& v : m.vars)
    if (v.kind == MilpVariable::Integer) out << " " << v.name << "\n";
  out << "Binaries\n";
  for (const MilpVariable& v : m.vars)
    if (v.kind == MilpVariable::Binary) out << " " << v.name << "\n";
  out << "End\n";
}

// Sidecar with the full row/variable data so a solution can be verified
// without re-deriving the scenario.
inline void emit_lp_meta(const MilpModel& m, std::ostream& out) {
  using detail::fmt_coeff;
  out << "{\"schema\":\"mesu-lp-meta/1\",\"vars\":[";
  for (size_t i = 0; i < m.vars.size(); ++i) {
    const MilpVariable& v = m.vars[i];
    if (i) out << ",";
    out << "{\"hi\":" << fmt_coeff(v.hi) << ",\"kind\":" << static_cast<int>(v.kind)
        << ",\"lo\":" << fmt_coeff(v.lo) << ",\"name\":\"" << v.name << "\"}";
  }
  out << "],\"rows\":[";
  for (size_t i = 0; i < m.rows.size(); ++i) {
    const MilpRow& r = m.rows[i];
    if (i) out << ",";
    out << "{\"name\":\"" << r.name << "\",\"rhs\":" << fmt_coeff(r.rhs) << ",\"sense\":\""
        << r.sense << "\",\"source\":\"" << r.source << "\",\"terms\":[";
    for (size_t j = 0; j < r.terms.size(); ++j) {
      if (j) out << ",";
      out << "[" << r.terms[j].var << "," << fmt_coeff(r.terms[j].coeff) << "]";
    }
    out << "]}";
  }
  out << "],\"objective\":[";
  for (size_t j = 0; j < m.objective.size(); ++j) {
    if (j) out << ",";
    out << "[" << m.objective[j].var << "," << fmt_coeff(m.objective[j].coeff) << "]";
  }
  out << "]}";
}

inline MilpModel load_lp_meta(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("schema", "") != "mesu-lp-meta/1")
    throw ValidationError("not a mesu-lp-meta/1 file");
  MilpModel m;
  for (const auto& v : j.at("vars"))
    m.add_var(v.at("name").get<std::string>(),
              static_cast<MilpVariable::Kind>(v.at("kind").get<int>()), v.at("lo").get<double>(),
              v.at("hi").get<double>());
  for (const auto& r : j.at("rows")) {
    MilpRow row;
    row.name = r.at("name").get<std::string>();
    row.source = r.at("source").get<std::string>();
    row.sense = r.at("sense").get<std::string>()[0];
    row.rhs = r.at("rhs").get<double>();
    for (const auto& t : r.at("terms")) row.terms.push_back({t[0].get<int>(), t[1].get<double>()});
    m.rows.push_back(std::move(row));
  }
  for (const auto& t : j.at("objective")) m.objective.push_back({t[0].get<int>(), t[1].get<double>()});
  return m;
}

struct ConstraintResidual {
  std::string row;
  double residual = 0.0;
  bool ok = true;
};

struct VerificationReport {
  bool pass = true;
  double objective = 0.0;
  std::vector<ConstraintResidual> entries;  // violations listed first-class

  static constexpr double kTolerance = 1e-6;
};

inline VerificationReport verify_solution(const MilpModel& m,
                                          const std::map<std::string, double>& values) {
  VerificationReport rep;
  std::vector<double> x(m.vars.size());
  for (size_t i = 0; i < m.vars.size(); ++i) {
    auto it = values.find(m.vars[i].name);
    if (it == values.end()) throw ValidationError("solution is missing variable " + m.vars[i].name);
    x[i] = it->second;
  }
  auto push = [&](const std::string& row, double residual) {
    bool ok = residual <= VerificationReport::kTolerance;
    rep.entries.push_back({row, residual, ok});
    rep.pass = rep.pass && ok;
  };
  for (size_t i = 0; i < m.vars.size(); ++i) {
    const MilpVariable& v = m.vars[i];
    double out_of_bounds = std::max(0.0, std::max(v.lo - x[i], x[i] - v.hi));
    double integrality = 0.0;
    if (v.kind != MilpVariable::Continuous) integrality = std::abs(x[i] - std::round(x[i]));
    push("bound " + v.name, std::max(out_of_bounds, integrality));
  }
  for (const MilpRow& row : m.rows) {
    double lhs = 0.0;
    for (const MilpTerm& t : row.terms) lhs += t.coeff * x[t.var];
    double residual = 0.0;
    if (row.sense == 'L') residual = std::max(0.0, lhs - row.rhs);
    if (row.sense == 'G') residual = std::max(0.0, row.rhs - lhs);
    if (row.sense == 'E') residual = std::abs(lhs - row.rhs);
    push(row.name, residual);
  }
  for (const MilpTerm& t : m.objective) rep.objective += t.coeff * x[t.var];
  return rep;
}

inline void write_verification_report(const VerificationReport& rep, std::ostream& out) {
  char buf[160];
  for (const ConstraintResidual& e : rep.entries) {
    std::snprintf(buf, sizeof(buf), "%s %.3e %s\n", e.row.c_str(), e.residual,
                  e.ok ? "ok" : "VIOLATED");
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "objective %.9g\n%s\n", rep.objective,
                rep.pass ? "PASS" : "FAIL");
  out << buf;
}

// Assemble the model input for a scenario the planner also runs on: all APs
// are candidate servers every stage, tasks follow the actual demand line,
// stages past the planning horizon receive no budget.
inline MilpInput make_milp_input(const PlannerInputs& in) {
  MilpInput mi;
  mi.topology = in.topology;
  mi.paths = in.paths;
  mi.offload = in.offload;
  mi.cost = in.cost;
  mi.capacity_per_rpack_bits = in.capacity_per_rpack_bits;
  mi.max_rpacks = in.max_rpacks;
  for (auto [node, m] : in.initial_deployment) mi.initial_rpacks[node] += m;
  const int total = in.planning_stages;
  const int eval = in.eval_stages == 0 ? total : in.eval_stages;
  auto line = workload_line(*in.topology, in.workload, in.growth, eval, in.master_seed);
  std::vector<NodeId> aps;
  for (NodeId n = 0; n < in.topology->node_count(); ++n)
    if (in.topology->is_ap(n)) aps.push_back(n);
  for (int t = 1; t <= eval; ++t) {
    mi.stage_allocations.push_back(t <= total ? in.budget_total / total : 0.0);
    mi.stages.push_back({aps, line[t - 1].tasks});
  }
  return mi;
}

// Express a finished trace in the model's variables.
inline std::map<std::string, double> trace_to_solution(const MilpInput& in,
                                                       const PlanTrace& trace) {
  using detail::nm;
  std::map<std::string, double> x;
  const NodeId cloud = in.topology->cloud();
  std::map<NodeId, int> rpacks = in.initial_rpacks;

  for (int t = 1; t <= static_cast<int>(trace.stages.size()); ++t) {
    const StageRecord& rec = trace.stages[t - 1];
    const MilpStageInput& st = in.stages[t - 1];
    std::map<NodeId, int> added;
    for (const ActionRecord& a : rec.actions) added[a.node] += a.rpacks;
    for (auto [node, m] : added) rpacks[node] += m;

    for (NodeId s = 0; s < in.topology->node_count(); ++s)
      x[nm("d", t, s)] = (s == cloud || (rpacks.count(s) && rpacks[s] > 0)) ? 1.0 : 0.0;
    auto servers = st.edge_candidates;
    servers.push_back(cloud);
    for (NodeId s : servers) x[nm("m", t, s)] = added.count(s) ? added[s] : 0.0;

    for (size_t i = 0; i < st.tasks.size(); ++i) {
      const Task& k = st.tasks[i];
      const TaskOutcome& o = rec.assignment.outcomes[i];
      if (o.task.id != k.id)
        throw ValidationError("trace and model were built from different workloads");
      for (NodeId s : servers) x[nm("b", t, k.id, s)] = 0.0;
      double limit = k.scaled_deadline_s();
      for (const FractionAssignment& f : o.fractions)
        x[nm("b", t, k.id, f.server)] = f.size_bits / kBitsPerGb;
      x[nm("bu", t, k.id)] = max_cloud_fraction_bits(*in.paths, k, cloud, in.offload) / kBitsPerGb;
      x[nm("g", t, k.id)] = o.satisfied ? 1.0 : 0.0;
      for (NodeId s : servers) {
        double beta = s == cloud ? in.offload.beta_cloud_bps : in.offload.beta_edge_bps;
        double bits = x[nm("b", t, k.id, s)] * kBitsPerGb;
        double delay = fraction_delay_s(*in.paths, k.origin, s, bits, in.offload.zeta, beta);
        x[nm("g", t, k.id, s)] = leq_within_slack(delay, limit) ? 1.0 : 0.0;
      }
    }
  }
  return x;
}

}  // namespace mesu
