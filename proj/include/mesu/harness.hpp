#pragma once

#include <chrono>
#include <fstream>
#include <memory>
#include <optional>
#include <thread>

#include <json.hpp>

#include "mesu/planner.hpp"
#include "mesu/rng.hpp"
#include "mesu/trace.hpp"

namespace mesu {

// ---------------------------------------------------------------------------
// topology generation, "xNyE" style: x nodes (one cloud), y AP-AP links,
// plus an uplink from every AP to the cloud.

struct TopologyGenConfig {
  std::vector<double> ap_ap_rates_bps = {20e9, 40e9};
  std::vector<double> ap_cloud_rates_bps = {2e9, 5e9};
  double min_length_m = 200.0;
  double max_length_m = 2000.0;
  PropagationConfig prop = default_prop();

  static PropagationConfig default_prop() {
    PropagationConfig p;
    p.ap_ap_override_s = 0.0;
    p.ap_cloud_override_s = 0.05;
    return p;
  }
};

inline Topology generate_topology(int nodes, int ap_links, std::uint64_t seed,
                                  const TopologyGenConfig& cfg = {}) {
  int aps = nodes - 1;
  if (nodes < 2) throw ValidationError("topology spec needs at least 2 nodes");
  long long max_links = static_cast<long long>(aps) * (aps - 1) / 2;
  if (ap_links < nodes - 1 || ap_links > max_links)
    throw ValidationError("infeasible topology spec: " + std::to_string(nodes) + " nodes with " +
                          std::to_string(ap_links) + " AP-AP links");
  auto rng = make_rng(seed);
  auto pick = [&](const std::vector<double>& v) {
    return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
  };
  auto length = [&] {
    return std::floor(
        std::uniform_real_distribution<double>(cfg.min_length_m, cfg.max_length_m)(rng));
  };
  NodeId cloud = aps;
  std::vector<Link> links;
  std::vector<std::vector<bool>> used(aps, std::vector<bool>(aps, false));
  for (int v = 1; v < aps; ++v) {
    int u = std::uniform_int_distribution<int>(0, v - 1)(rng);
    used[u][v] = used[v][u] = true;
    links.push_back({u, v, length(), pick(cfg.ap_ap_rates_bps)});
  }
  int extra = ap_links - (aps - 1);
  while (extra > 0) {
    int a = std::uniform_int_distribution<int>(0, aps - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, aps - 1)(rng);
    if (a == b || used[a][b]) continue;
    used[a][b] = used[b][a] = true;
    links.push_back({std::min(a, b), std::max(a, b), length(), pick(cfg.ap_ap_rates_bps)});
    --extra;
  }
  for (int a = 0; a < aps; ++a)
    links.push_back({a, cloud, length(), pick(cfg.ap_cloud_rates_bps)});
  return Topology(nodes, cloud, std::move(links), cfg.prop);
}

inline std::pair<int, int> parse_topology_spec(const std::string& spec) {
  size_t n = spec.find('N');
  size_t e = spec.find('E');
  if (n == std::string::npos || e == std::string::npos || e < n)
    throw ValidationError("bad topology spec '" + spec + "', expected e.g. 25N50E");
  try {
    int nodes = std::stoi(spec.substr(0, n));
    int links = std::stoi(spec.substr(n + 1, e - n - 1));
    return {nodes, links};
  } catch (const std::exception&) {
    throw ValidationError("bad topology spec '" + spec + "'");
  }
}

// ---------------------------------------------------------------------------
// scenario configuration

struct Scenario {
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> topology_seed;  // defaults to seed
  int stages = 3;
  int eval_stages = 0;          // 0: same as stages
  std::optional<int> horizon_h;  // default: eval_stages - stages

  std::string topology_file;  // one of file/spec must be set
  std::string topology_spec;

  std::optional<double> budget_total;
  std::optional<double> coverage_percent;  // B(x%)

  CostModel cost;
  OffloadParams offload;
  GrowthParams growth;
  WorkloadSpec workload;
  std::optional<int> tasks_per_node;  // initial_count = k * |V| when set

  double capacity_per_rpack_bits = 10e9;
  int max_rpacks = 4;
  double deploy_fraction = 0.5;  // share of APs with a pre-deployed server
  int deploy_rpacks = 2;

  TopologyGenConfig gen;

  int planning_stages() const { return stages; }
  int evaluation_stages() const { return eval_stages == 0 ? stages : eval_stages; }
  int horizon() const { return horizon_h ? *horizon_h : evaluation_stages() - stages; }

  void validate() const {
    if (stages < 1) throw ValidationError("scenario: stages must be >= 1");
    if (eval_stages != 0 && eval_stages < stages)
      throw ValidationError("scenario: eval_stages must be >= stages");
    if (topology_file.empty() == topology_spec.empty())
      throw ValidationError("scenario: exactly one of topology file/spec required");
    if (!budget_total && !coverage_percent)
      throw ValidationError("scenario: budget_total or coverage_percent required");
    if (budget_total && *budget_total <= 0.0)
      throw ValidationError("scenario: budget must be > 0");
    if (deploy_fraction < 0.0 || deploy_fraction > 1.0)
      throw ValidationError("scenario: deploy_fraction in [0,1]");
    if (deploy_rpacks < 0 || deploy_rpacks > max_rpacks)
      throw ValidationError("scenario: deploy_rpacks in 0..max_rpacks");
    cost.validate();
    offload.validate();
    growth.validate();
  }
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  if (j.value("schema", "") != "mesu-scenario/1")
    throw ValidationError("scenario: missing or unknown schema (want mesu-scenario/1)");
  s.seed = j.value("seed", 1ULL);
  if (j.contains("topology_seed")) s.topology_seed = j["topology_seed"].get<std::uint64_t>();
  s.stages = j.value("stages", 3);
  s.eval_stages = j.value("eval_stages", 0);
  if (j.contains("horizon_h")) s.horizon_h = j["horizon_h"].get<int>();
  if (j.contains("topology")) {
    const auto& t = j["topology"];
    if (t.contains("file")) s.topology_file = t["file"].get<std::string>();
    if (t.contains("generate")) s.topology_spec = t["generate"].get<std::string>();
  }
  if (j.contains("budget")) {
    const auto& b = j["budget"];
    if (b.contains("total")) s.budget_total = b["total"].get<double>();
    if (b.contains("coverage_percent")) s.coverage_percent = b["coverage_percent"].get<double>();
  }
  if (j.contains("cost")) {
    const auto& c = j["cost"];
    s.cost.infra_cost_base = c.value("infrastructure", s.cost.infra_cost_base);
    s.cost.rpack_cost_base = c.value("rpack", s.cost.rpack_cost_base);
    s.cost.depreciation = c.value("depreciation", s.cost.depreciation);
  }
  if (j.contains("servers")) {
    const auto& v = j["servers"];
    s.capacity_per_rpack_bits = v.value("capacity_per_rpack_gb", 10.0) * kBitsPerGb;
    s.max_rpacks = v.value("max_rpacks", 4);
    s.offload.beta_edge_bps = v.value("beta_edge_gbps", 10.0) * kBitsPerGb;
    s.offload.beta_cloud_bps = v.value("beta_cloud_gbps", 10.0) * kBitsPerGb;
  }
  s.offload.zeta = j.value("result_multiplier_zeta", s.offload.zeta);
  if (j.contains("workload")) {
    const auto& w = j["workload"];
    if (w.contains("initial_per_node")) s.tasks_per_node = w["initial_per_node"].get<int>();
    s.workload.initial_count = w.value("initial_count", 0);
    if (w.contains("sizes_gb")) {
      s.workload.size_choices_bits.clear();
      for (double g : w["sizes_gb"]) s.workload.size_choices_bits.push_back(g * kBitsPerGb);
    }
    if (w.contains("deadlines_s"))
      s.workload.deadline_choices_s = w["deadlines_s"].get<std::vector<double>>();
    if (w.contains("tolerance")) {
      const auto& t = w["tolerance"];
      s.workload.tolerance.intolerant_prob =
          t.value("intolerant_prob", s.workload.tolerance.intolerant_prob);
      if (t.contains("sigma_range")) {
        s.workload.tolerance.sigma_min = t["sigma_range"][0].get<double>();
        s.workload.tolerance.sigma_max = t["sigma_range"][1].get<double>();
      }
    }
  }
  if (j.contains("growth")) {
    const auto& g = j["growth"];
    s.growth.mu = g.value("mu", s.growth.mu);
    s.growth.rho_size = g.value("rho_size", s.growth.rho_size);
    s.growth.rho_deadline = g.value("rho_deadline", s.growth.rho_deadline);
    s.growth.alpha_size = g.value("alpha_size", s.growth.alpha_size);
    s.growth.alpha_deadline = g.value("alpha_deadline", s.growth.alpha_deadline);
  }
  if (j.contains("deployment")) {
    const auto& d = j["deployment"];
    s.deploy_fraction = d.value("fraction", s.deploy_fraction);
    s.deploy_rpacks = d.value("rpacks", s.deploy_rpacks);
  }
  if (j.contains("propagation")) {
    const auto& p = j["propagation"];
    s.gen.prop.speed_mps = p.value("speed_mps", s.gen.prop.speed_mps);
    if (p.contains("ap_ap_override_s"))
      s.gen.prop.ap_ap_override_s = p["ap_ap_override_s"].get<double>();
    if (p.contains("ap_cloud_override_s"))
      s.gen.prop.ap_cloud_override_s = p["ap_cloud_override_s"].get<double>();
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("scenario parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

// Everything plan() needs, with owned topology and path table.
struct ScenarioBundle {
  std::shared_ptr<const Topology> topology;
  std::shared_ptr<const PathTable> paths;
  PlannerInputs inputs;
};

inline std::vector<std::pair<NodeId, int>> sample_initial_deployment(const Topology& topo,
                                                                     double fraction, int rpacks,
                                                                     std::uint64_t seed) {
  std::vector<NodeId> aps;
  for (NodeId n = 0; n < topo.node_count(); ++n)
    if (topo.is_ap(n)) aps.push_back(n);
  int want = static_cast<int>(std::floor(fraction * aps.size()));
  auto rng = make_rng(seed);
  std::vector<std::pair<NodeId, int>> out;
  if (rpacks == 0) return out;
  for (int i = 0; i < want; ++i) {
    size_t j = std::uniform_int_distribution<size_t>(i, aps.size() - 1)(rng);
    std::swap(aps[i], aps[j]);
    out.push_back({aps[i], rpacks});
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline ScenarioBundle make_bundle(const Scenario& s) {
  s.validate();
  ScenarioBundle b;
  std::uint64_t topo_seed = s.topology_seed ? *s.topology_seed : s.seed;
  if (!s.topology_file.empty()) {
    b.topology = std::make_shared<Topology>(Topology::load(s.topology_file));
  } else {
    auto [nodes, links] = parse_topology_spec(s.topology_spec);
    b.topology = std::make_shared<Topology>(
        generate_topology(nodes, links, derive_seed(topo_seed, SeedTag::Topology), s.gen));
  }
  b.paths = std::make_shared<PathTable>(build_path_table(*b.topology));

  PlannerInputs& in = b.inputs;
  in.topology = b.topology.get();
  in.paths = b.paths.get();
  in.offload = s.offload;
  in.cost = s.cost;
  in.growth = s.growth;
  in.growth.horizon_h = s.horizon();
  in.workload = s.workload;
  if (s.tasks_per_node) in.workload.initial_count = *s.tasks_per_node * b.topology->node_count();
  in.budget_total = s.budget_total
                        ? *s.budget_total
                        : budget_for_coverage(b.topology->node_count(), *s.coverage_percent,
                                              s.cost, s.max_rpacks);
  in.planning_stages = s.stages;
  in.eval_stages = s.evaluation_stages();
  in.capacity_per_rpack_bits = s.capacity_per_rpack_bits;
  in.max_rpacks = s.max_rpacks;
  in.initial_deployment = sample_initial_deployment(
      *b.topology, s.deploy_fraction, s.deploy_rpacks,
      derive_seed(s.seed, SeedTag::InitialDeployment));
  in.master_seed = s.seed;
  in.validate();
  return b;
}

// ---------------------------------------------------------------------------
// sweeps

enum class SweepAxis { Budget, Tasks, CostRatio, Stages };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "budget") return SweepAxis::Budget;
  if (s == "tasks") return SweepAxis::Tasks;
  if (s == "cost_ratio") return SweepAxis::CostRatio;
  if (s == "stages") return SweepAxis::Stages;
  throw ValidationError("unknown sweep axis '" + s + "'");
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::Budget;
  std::vector<double> values;
  int repetitions = 10;
  std::vector<Algorithm> algorithms = {Algorithm::H, Algorithm::DF, Algorithm::UF, Algorithm::DO};
  Scenario base;
  int jobs = 1;

  void validate() const {
    if (values.empty()) throw ValidationError("sweep: values must be nonempty");
    if (repetitions < 1) throw ValidationError("sweep: repetitions must be >= 1");
    if (algorithms.empty()) throw ValidationError("sweep: no algorithms");
  }
};

inline SweepSpec load_sweep(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sweep file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("sweep parse error: ") + e.what());
  }
  if (j.value("schema", "") != "mesu-sweep/1")
    throw ValidationError("sweep: missing or unknown schema (want mesu-sweep/1)");
  SweepSpec s;
  s.axis = parse_axis(j.at("axis").get<std::string>());
  s.values = j.at("values").get<std::vector<double>>();
  s.repetitions = j.value("repetitions", 10);
  if (j.contains("algorithms")) {
    s.algorithms.clear();
    for (const auto& a : j["algorithms"]) s.algorithms.push_back(parse_algorithm(a));
  }
  s.jobs = j.value("jobs", 1);
  s.base = scenario_from_json(j.at("scenario"));
  return s;
}

// Applies one axis value to the base scenario. The stage axis pins the
// evaluation horizon to the sweep's largest stage count and gives /H the
// matching prediction horizon h = E - T.
inline Scenario scenario_for_cell(const SweepSpec& spec, double value) {
  Scenario s = spec.base;
  switch (spec.axis) {
    case SweepAxis::Budget:
      s.coverage_percent = value;
      s.budget_total.reset();
      break;
    case SweepAxis::Tasks:
      s.tasks_per_node = static_cast<int>(value);
      break;
    case SweepAxis::CostRatio:
      s.cost.infra_cost_base = (value - 1.0) * s.cost.rpack_cost_base;
      break;
    case SweepAxis::Stages: {
      s.stages = static_cast<int>(value);
      int horizon = static_cast<int>(*std::max_element(spec.values.begin(), spec.values.end()));
      s.eval_stages = horizon;
      s.horizon_h = horizon - s.stages;
      break;
    }
  }
  return s;
}

struct SweepRow {
  std::string kind;  // run | summary
  double axis_value = 0.0;
  std::uint64_t seed = 0;  // 0 on summary rows
  Algorithm algorithm = Algorithm::H;
  std::string status = "ok";
  MetricRecord metrics;  // per-run values; per-group means on summary rows
  double runtime_ms = 0.0;
  // gamma-band statistics, filled on summary rows only
  std::optional<double> gamma_min;
  std::optional<double> gamma_max;
  std::optional<double> gamma_stddev;
};

inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  spec.base.validate();

  struct Cell {
    double value;
    int rep;
    Algorithm algo;
  };
  std::vector<Cell> cells;
  for (double v : spec.values)
    for (int rep = 0; rep < spec.repetitions; ++rep)
      for (Algorithm a : spec.algorithms) cells.push_back({v, rep, a});

  std::vector<SweepRow> rows(cells.size());
  auto run_cell = [&](size_t idx) {
    const Cell& c = cells[idx];
    SweepRow row;
    row.kind = "run";
    row.axis_value = c.value;
    row.algorithm = c.algo;
    row.seed = derive_seed(spec.base.seed, SeedTag::SweepCell, c.rep);
    auto t0 = std::chrono::steady_clock::now();
    try {
      Scenario s = scenario_for_cell(spec, c.value);
      s.topology_seed = s.topology_seed ? s.topology_seed : s.seed;  // one net per sweep
      s.seed = row.seed;
      ScenarioBundle b = make_bundle(s);
      PlanTrace trace = plan(b.inputs, c.algo);
      row.metrics = metrics(trace, b.topology->node_count());
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    auto t1 = std::chrono::steady_clock::now();
    row.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rows[idx] = row;
  };

  int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (size_t i = w; i < cells.size(); i += static_cast<size_t>(jobs)) run_cell(i);
      });
    for (auto& th : pool) th.join();
  }

  // one summary row per (value, algorithm): metric means plus the gamma band
  std::vector<SweepRow> out = rows;
  for (double v : spec.values)
    for (Algorithm a : spec.algorithms) {
      std::vector<const SweepRow*> group;
      for (const SweepRow& r : rows)
        if (r.axis_value == v && r.algorithm == a && r.status == "ok") group.push_back(&r);
      if (group.empty()) continue;
      auto mean = [&](auto get) {
        double sum = 0.0;
        for (auto* r : group) sum += get(r);
        return sum / group.size();
      };
      SweepRow s;
      s.kind = "summary";
      s.axis_value = v;
      s.algorithm = a;
      s.metrics.gamma_bar_pct = mean([](const SweepRow* r) { return r->metrics.gamma_bar_pct; });
      s.metrics.deployed_pct = mean([](const SweepRow* r) { return r->metrics.deployed_pct; });
      s.metrics.rpack_pct = mean([](const SweepRow* r) { return r->metrics.rpack_pct; });
      s.metrics.utilization_pct =
          mean([](const SweepRow* r) { return r->metrics.utilization_pct; });
      s.metrics.leftover_budget_pct =
          mean([](const SweepRow* r) { return r->metrics.leftover_budget_pct; });
      s.runtime_ms = mean([](const SweepRow* r) { return r->runtime_ms; });
      double lo = group[0]->metrics.gamma_bar_pct, hi = lo, acc = 0.0;
      for (auto* r : group) {
        lo = std::min(lo, r->metrics.gamma_bar_pct);
        hi = std::max(hi, r->metrics.gamma_bar_pct);
      }
      for (auto* r : group) {
        double d = r->metrics.gamma_bar_pct - s.metrics.gamma_bar_pct;
        acc += d * d;
      }
      s.gamma_min = lo;
      s.gamma_max = hi;
      s.gamma_stddev = std::sqrt(acc / group.size());
      out.push_back(s);
    }

  std::sort(out.begin(), out.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if ((a.kind == "run") != (b.kind == "run")) return a.kind == "run";
    return a.seed < b.seed;
  });
  return out;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "kind,axis_value,seed,algorithm,gamma_bar_pct,S_hat,M_hat,C_util,dB_hat,runtime_ms,"
         "gamma_min,gamma_max,gamma_stddev,status\n";
  char buf[320];
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char b[32];
    std::snprintf(b, sizeof(b), "%.9g", *v);
    return std::string(b);
  };
  for (const SweepRow& r : rows) {
    std::string status = r.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    std::string seed = r.kind == "run" ? std::to_string(r.seed) : "";
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s,%s,%s,%s\n",
                  r.kind.c_str(), r.axis_value, seed.c_str(), to_string(r.algorithm),
                  r.metrics.gamma_bar_pct, r.metrics.deployed_pct, r.metrics.rpack_pct,
                  r.metrics.utilization_pct, r.metrics.leftover_budget_pct, r.runtime_ms,
                  opt(r.gamma_min).c_str(), opt(r.gamma_max).c_str(),
                  opt(r.gamma_stddev).c_str(), status.c_str());
    out << buf;
  }
}

}  // namespace mesu
