// Command-line front end: topology generation, planning, algorithm
// comparison, sweeps, MILP export and solution verification, and the exact
// oracle for tiny instances.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mesu/harness.hpp"
#include "mesu/milp.hpp"
#include "mesu/oracle.hpp"
#include "mesu/trace.hpp"
#include "mesu/trace_check.hpp"

using namespace mesu;

namespace {

struct GlobalOpts {
  bool quiet = false;
  std::optional<std::uint64_t> seed_override;
};

void info(const GlobalOpts& g, const std::string& msg) {
  if (!g.quiet) std::cout << msg << "\n";
}

Scenario load_scenario_with_overrides(const std::string& path, const GlobalOpts& g) {
  Scenario s = load_scenario(path);
  if (g.seed_override) s.seed = *g.seed_override;
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

int cmd_gen_topology(const std::string& spec, std::uint64_t seed, const std::string& out_path,
                     const GlobalOpts& g) {
  auto [nodes, links] = parse_topology_spec(spec);
  Topology topo = generate_topology(nodes, links, derive_seed(seed, SeedTag::Topology));
  if (out_path.empty()) {
    topo.save(std::cout);
  } else {
    topo.save(out_path);
    info(g, "wrote " + out_path);
  }
  return 0;
}

int cmd_plan(const std::string& scenario_path, const std::string& algo_name,
             const std::string& trace_path, const std::string& assignments_path,
             const GlobalOpts& g) {
  Scenario s = load_scenario_with_overrides(scenario_path, g);
  Algorithm algo = parse_algorithm(algo_name);
  ScenarioBundle b = make_bundle(s);
  PlanTrace trace = plan(b.inputs, algo);
  MetricRecord m = metrics(trace, b.topology->node_count());
  if (!trace_path.empty()) write_file(trace_path, to_json(trace));
  if (!assignments_path.empty()) {
    std::ofstream out(assignments_path);
    if (!out) throw ValidationError("cannot write " + assignments_path);
    dump_assignments_csv(trace, out);
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "algo=%s gamma_bar=%.4f%% S_hat=%.2f%% M_hat=%.2f%% C=%.2f%% dB=%.2f%%",
                to_string(algo), m.gamma_bar_pct, m.deployed_pct, m.rpack_pct,
                m.utilization_pct, m.leftover_budget_pct);
  info(g, buf);
  return 0;
}

int cmd_compare(const std::string& scenario_path, std::string algos, const GlobalOpts& g) {
  Scenario s = load_scenario_with_overrides(scenario_path, g);
  ScenarioBundle b = make_bundle(s);
  std::vector<Algorithm> list;
  std::stringstream ss(algos);
  std::string tok;
  while (std::getline(ss, tok, ',')) list.push_back(parse_algorithm(tok));
  if (list.empty()) throw ValidationError("no algorithms given");
  std::cout << "algorithm,gamma_bar_pct,S_hat,M_hat,C_util,dB_hat\n";
  for (Algorithm a : list) {
    PlanTrace t = plan(b.inputs, a);
    MetricRecord m = metrics(t, b.topology->node_count());
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", to_string(a),
                  m.gamma_bar_pct, m.deployed_pct, m.rpack_pct, m.utilization_pct,
                  m.leftover_budget_pct);
    std::cout << buf;
  }
  return 0;
}

int cmd_sweep(const std::string& sweep_path, const std::string& csv_path, int jobs,
              const GlobalOpts& g) {
  SweepSpec spec = load_sweep(sweep_path);
  if (g.seed_override) spec.base.seed = *g.seed_override;
  if (jobs > 0) spec.jobs = jobs;
  auto rows = run_sweep(spec);
  if (csv_path.empty()) {
    write_sweep_csv(rows, std::cout);
  } else {
    std::ofstream out(csv_path);
    if (!out) throw ValidationError("cannot write " + csv_path);
    write_sweep_csv(rows, out);
    info(g, "wrote " + csv_path + " (" + std::to_string(rows.size()) + " rows)");
  }
  return 0;
}

int cmd_export_milp(const std::string& scenario_path, const std::string& lp_path,
                    const GlobalOpts& g) {
  Scenario s = load_scenario_with_overrides(scenario_path, g);
  ScenarioBundle b = make_bundle(s);
  MilpInput mi = make_milp_input(b.inputs);
  MilpModel model = build_milp(mi);
  {
    std::ofstream out(lp_path);
    if (!out) throw ValidationError("cannot write " + lp_path);
    emit_lp(model, out);
  }
  {
    std::ofstream out(lp_path + "-meta");
    if (!out) throw ValidationError("cannot write " + lp_path + "-meta");
    emit_lp_meta(model, out);
  }
  MilpShape shape = mi.shape();
  info(g, "wrote " + lp_path + " and " + lp_path + "-meta (" +
              std::to_string(model.variable_count()) + " variables / " +
              std::to_string(model.constraint_count()) + " constraints; closed-form " +
              std::to_string(closed_form_variable_count(shape)) + " / " +
              std::to_string(closed_form_constraint_count(shape)) + ")");
  return 0;
}

int cmd_oracle(const std::string& scenario_path, const GlobalOpts& g) {
  Scenario s = load_scenario_with_overrides(scenario_path, g);
  ScenarioBundle b = make_bundle(s);
  ExactResult r = exact_plan(b.inputs);
  CheckContext ctx{b.topology.get(), b.paths.get(), b.inputs.offload, b.inputs.cost,
                   b.inputs.initial_deployment};
  auto viol = check_trace(r.witness, ctx);
  char buf[192];
  std::snprintf(buf, sizeof(buf), "optimal gamma_bar=%.6f (%.4f%%), %lld configurations",
                r.gamma_bar_count, r.witness.gamma_bar_pct, r.configs_explored);
  std::cout << buf << "\n";
  for (size_t t = 0; t < r.stage_installs.size(); ++t)
    for (auto [node, m] : r.stage_installs[t])
      std::cout << "stage " << (t + 1) << ": node " << node << " +" << m << " rpacks\n";
  if (!viol.empty()) {
    for (const auto& v : viol) std::cerr << "witness check: " << v << "\n";
    return 2;
  }
  return 0;
}

int cmd_verify(const std::string& meta_path, const std::string& solution_path) {
  std::ifstream meta(meta_path);
  if (!meta) throw ValidationError("cannot open " + meta_path);
  MilpModel model = load_lp_meta(meta);

  std::ifstream sol(solution_path);
  if (!sol) throw ValidationError("cannot open " + solution_path);
  std::map<std::string, double> values;
  std::string line;
  while (std::getline(sol, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError("solution line is not 'name,value': " + line);
    std::string name = line.substr(0, comma);
    if (name == "name") continue;  // header
    values[name] = std::stod(line.substr(comma + 1));
  }
  VerificationReport rep = verify_solution(model, values);
  write_verification_report(rep, std::cout);
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-stage edge server upgrade planning toolkit"};
  app.require_subcommand(1);
  GlobalOpts g;
  std::uint64_t seed_raw = 0;
  auto* seed_opt = app.add_option("--seed", seed_raw, "override the scenario seed");
  app.add_flag("--quiet", g.quiet, "suppress informational output");

  std::string spec, out_path, scenario_path, algo = "H", trace_path, assignments_path;
  std::string algos = "H,HO,DF,UF,DO", sweep_path, csv_path, lp_path, meta_path, solution_path;
  std::uint64_t gen_seed = 1;
  int jobs = 0;

  auto* gen = app.add_subcommand("gen-topology", "generate a random xNyE network");
  gen->add_option("spec", spec, "topology spec, e.g. 25N50E")->required();
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", out_path, "output file (stdout if omitted)");

  auto* plan_cmd = app.add_subcommand("plan", "run one planning algorithm");
  plan_cmd->add_option("scenario", scenario_path, "scenario JSON")->required();
  plan_cmd->add_option("--algo", algo, "H|HO|DF|UF|DO");
  plan_cmd->add_option("--out-trace", trace_path, "write the full trace JSON here");
  plan_cmd->add_option("--out-assignments", assignments_path, "write the assignment CSV here");

  auto* cmp = app.add_subcommand("compare", "run several algorithms on one scenario");
  cmp->add_option("scenario", scenario_path, "scenario JSON")->required();
  cmp->add_option("--algos", algos, "comma-separated algorithm list");

  auto* sw = app.add_subcommand("sweep", "run an experiment sweep");
  sw->add_option("sweep", sweep_path, "sweep JSON")->required();
  sw->add_option("--out-csv", csv_path, "output CSV (stdout if omitted)");
  sw->add_option("--jobs", jobs, "concurrent runs");

  auto* exp = app.add_subcommand("export-milp", "emit the LP model for a scenario");
  exp->add_option("scenario", scenario_path, "scenario JSON")->required();
  exp->add_option("--out-lp", lp_path, "LP output path")->required();

  auto* orc = app.add_subcommand("oracle", "exact optimum for a tiny scenario");
  orc->add_option("scenario", scenario_path, "scenario JSON")->required();

  auto* ver = app.add_subcommand("verify", "check a solution against an exported model");
  ver->add_option("model", meta_path, "model .lp-meta file")->required();
  ver->add_option("solution", solution_path, "solution CSV (name,value)")->required();

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed_override = seed_raw;

  try {
    if (gen->parsed()) return cmd_gen_topology(spec, gen_seed, out_path, g);
    if (plan_cmd->parsed()) return cmd_plan(scenario_path, algo, trace_path, assignments_path, g);
    if (cmp->parsed()) return cmd_compare(scenario_path, algos, g);
    if (sw->parsed()) return cmd_sweep(sweep_path, csv_path, jobs, g);
    if (exp->parsed()) return cmd_export_milp(scenario_path, lp_path, g);
    if (orc->parsed()) return cmd_oracle(scenario_path, g);
    if (ver->parsed()) return cmd_verify(meta_path, solution_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
