#pragma once

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "mesu/planner.hpp"

namespace mesu {

// Deterministic trace serialization: keys in fixed (sorted) order, numbers
// at 9 significant digits. Identical traces serialize byte-identically.

namespace detail {

inline std::string fmt_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

inline std::string to_json(const PlanTrace& trace) {
  using detail::fmt_g9;
  std::ostringstream o;
  o << "{";
  o << "\"algorithm\":\"" << to_string(trace.algorithm) << "\",";
  o << "\"budget_total\":" << fmt_g9(trace.budget_total) << ",";
  o << "\"capacity_per_rpack_bits\":" << fmt_g9(trace.capacity_per_rpack_bits) << ",";
  o << "\"eval_stages\":" << trace.eval_stages << ",";
  o << "\"gamma_bar_count\":" << fmt_g9(trace.gamma_bar_count) << ",";
  o << "\"gamma_bar_pct\":" << fmt_g9(trace.gamma_bar_pct) << ",";
  o << "\"horizon_h\":" << trace.horizon_h << ",";
  o << "\"max_rpacks\":" << trace.max_rpacks << ",";
  o << "\"planning_stages\":" << trace.planning_stages << ",";
  o << "\"schema\":\"mesu-trace/1\",";
  o << "\"seed\":" << trace.seed << ",";
  o << "\"stages\":[";
  for (size_t si = 0; si < trace.stages.size(); ++si) {
    const StageRecord& r = trace.stages[si];
    if (si) o << ",";
    o << "{\"actions\":[";
    for (size_t i = 0; i < r.actions.size(); ++i) {
      const ActionRecord& a = r.actions[i];
      if (i) o << ",";
      o << "{\"cost\":" << fmt_g9(a.cost) << ",\"kind\":\"" << to_string(a.kind)
        << "\",\"node\":" << a.node << ",\"rpacks\":" << a.rpacks << "}";
    }
    o << "],";
    o << "\"budget_available\":" << fmt_g9(r.budget_available) << ",";
    o << "\"budget_carryover\":" << fmt_g9(r.budget_carryover) << ",";
    o << "\"budget_spent\":" << fmt_g9(r.budget_spent) << ",";
    o << "\"gamma\":" << r.gamma << ",";
    o << "\"planning\":" << (r.planning ? "true" : "false") << ",";
    o << "\"servers\":[";
    for (size_t i = 0; i < r.servers.size(); ++i) {
      const ServerSnapshot& s = r.servers[i];
      if (i) o << ",";
      o << "{\"node\":" << s.node << ",\"rpacks\":" << s.rpacks
        << ",\"workload_bits\":" << fmt_g9(s.workload_bits) << "}";
    }
    o << "],";
    o << "\"stage\":" << r.stage << ",";
    o << "\"tasks\":[";
    for (size_t i = 0; i < r.assignment.outcomes.size(); ++i) {
      const TaskOutcome& t = r.assignment.outcomes[i];
      if (i) o << ",";
      o << "{\"deadline_s\":" << fmt_g9(t.task.deadline_s) << ",\"fractions\":[";
      for (size_t f = 0; f < t.fractions.size(); ++f) {
        const FractionAssignment& fr = t.fractions[f];
        if (f) o << ",";
        o << "{\"delay_s\":" << fmt_g9(fr.delay_s) << ",\"server\":" << fr.server
          << ",\"size_bits\":" << fmt_g9(fr.size_bits) << "}";
      }
      o << "],\"id\":" << t.task.id << ",\"origin\":" << t.task.origin
        << ",\"satisfied\":" << (t.satisfied ? "true" : "false")
        << ",\"sigma\":" << fmt_g9(t.task.sigma) << ",\"size_bits\":" << fmt_g9(t.task.size_bits)
        << "}";
    }
    o << "]}";
  }
  o << "]}";
  return o.str();
}

inline void dump_assignments_csv(const PlanTrace& trace, std::ostream& out) {
  out << "stage,task,server,fraction_bits,delay_s,satisfied\n";
  char buf[128];
  for (const StageRecord& r : trace.stages)
    for (const TaskOutcome& t : r.assignment.outcomes)
      for (const FractionAssignment& f : t.fractions) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.9g,%.9g,%d\n", r.stage, f.task_id, f.server,
                      f.size_bits, f.delay_s, t.satisfied ? 1 : 0);
        out << buf;
      }
}

}  // namespace mesu
