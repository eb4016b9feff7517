#pragma once

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mesu/common.hpp"

namespace mesu {

struct Link {
  NodeId a = -1;
  NodeId b = -1;
  double length_m = 0.0;
  double rate_bps = 0.0;
};

struct PropagationConfig {
  double speed_mps = 2.0e8;  // signal speed in the medium
  // When set, these replace the distance/speed propagation term for the
  // given pair class (both directions). Transmission delay is unaffected.
  std::optional<double> ap_ap_override_s;
  std::optional<double> ap_cloud_override_s;
};

// Immutable network graph: APs plus one distinguished cloud node.
// Field-level invariants are checked at construction; connectivity is
// checked when the path table is built.
class Topology {
 public:
  Topology(int node_count, NodeId cloud, std::vector<Link> links, PropagationConfig prop = {})
      : node_count_(node_count), cloud_(cloud), links_(std::move(links)), prop_(prop) {
    if (node_count_ < 2) throw ValidationError("topology needs at least one AP and the cloud");
    if (cloud_ < 0 || cloud_ >= node_count_) throw ValidationError("cloud id out of range");
    if (prop_.speed_mps <= 0.0) throw ValidationError("propagation speed must be > 0");
    adjacency_.assign(node_count_, {});
    std::vector<std::vector<bool>> seen(node_count_, std::vector<bool>(node_count_, false));
    for (int i = 0; i < static_cast<int>(links_.size()); ++i) {
      const Link& l = links_[i];
      if (l.a < 0 || l.a >= node_count_ || l.b < 0 || l.b >= node_count_)
        throw ValidationError("link endpoint out of range: (" + std::to_string(l.a) + "," +
                              std::to_string(l.b) + ")");
      if (l.a == l.b) throw ValidationError("self link at node " + std::to_string(l.a));
      if (seen[l.a][l.b])
        throw ValidationError("duplicate link (" + std::to_string(l.a) + "," +
                              std::to_string(l.b) + ")");
      seen[l.a][l.b] = seen[l.b][l.a] = true;
      if (l.rate_bps <= 0.0) throw ValidationError("link rate must be > 0");
      if (l.length_m < 0.0) throw ValidationError("link length must be >= 0");
      adjacency_[l.a].push_back({l.b, i});
      adjacency_[l.b].push_back({l.a, i});
    }
    for (auto& nbrs : adjacency_)
      std::sort(nbrs.begin(), nbrs.end());
  }

  int node_count() const { return node_count_; }
  NodeId cloud() const { return cloud_; }
  bool is_ap(NodeId n) const { return n != cloud_; }
  int ap_count() const { return node_count_ - 1; }
  const std::vector<Link>& links() const { return links_; }
  const PropagationConfig& propagation() const { return prop_; }
  // per node: (neighbor, link index), sorted by neighbor id
  const std::vector<std::vector<std::pair<NodeId, int>>>& adjacency() const { return adjacency_; }

  static Topology parse(std::istream& in, const std::string& name = "<topology>") {
    int node_count = -1;
    NodeId cloud = -1;
    std::vector<Link> links;
    PropagationConfig prop;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string kw;
      if (!(ls >> kw)) continue;
      auto fail = [&](const std::string& msg) {
        throw ValidationError(name + ":" + std::to_string(lineno) + ": " + msg);
      };
      if (kw == "nodes") {
        std::string ckw;
        if (!(ls >> node_count >> ckw >> cloud) || ckw != "cloud") fail("expected 'nodes N cloud <id>'");
      } else if (kw == "link") {
        Link l;
        if (!(ls >> l.a >> l.b >> l.length_m >> l.rate_bps)) fail("expected 'link i j length_m rate_bps'");
        links.push_back(l);
      } else if (kw == "prop_speed") {
        if (!(ls >> prop.speed_mps)) fail("expected 'prop_speed <m/s>'");
      } else if (kw == "prop_ap_ap") {
        double v;
        if (!(ls >> v)) fail("expected 'prop_ap_ap <sec>'");
        prop.ap_ap_override_s = v;
      } else if (kw == "prop_ap_cloud") {
        double v;
        if (!(ls >> v)) fail("expected 'prop_ap_cloud <sec>'");
        prop.ap_cloud_override_s = v;
      } else {
        fail("unknown keyword '" + kw + "'");
      }
    }
    if (node_count < 0) throw ValidationError(name + ": missing 'nodes' header");
    return Topology(node_count, cloud, std::move(links), prop);
  }

  static Topology load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open topology file: " + path);
    return parse(in, path);
  }

  void save(std::ostream& out) const {
    out << "nodes " << node_count_ << " cloud " << cloud_ << "\n";
    out << std::setprecision(17);
    out << "prop_speed " << prop_.speed_mps << "\n";
    if (prop_.ap_ap_override_s) out << "prop_ap_ap " << *prop_.ap_ap_override_s << "\n";
    if (prop_.ap_cloud_override_s) out << "prop_ap_cloud " << *prop_.ap_cloud_override_s << "\n";
    for (const Link& l : links_)
      out << "link " << l.a << " " << l.b << " " << l.length_m << " " << l.rate_bps << "\n";
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write topology file: " + path);
    save(out);
  }

 private:
  int node_count_;
  NodeId cloud_;
  std::vector<Link> links_;
  PropagationConfig prop_;
  std::vector<std::vector<std::pair<NodeId, int>>> adjacency_;
};

struct PathEntry {
  std::vector<std::pair<NodeId, NodeId>> hops;  // ordered (from, to) pairs
  double distance_m = 0.0;
  double inv_rate_sum = 0.0;  // sum of 1/rate over hops, s/bit
  double prop_delay_s = 0.0;  // override-aware propagation, one way
};

// All-pairs shortest paths under the delay-proportional edge weight
// (1 bit transmission time + propagation). Paths are symmetric: the v->u
// entry is the u->v entry reversed, with the lexicographic tie-break
// applied from the smaller endpoint.
class PathTable {
 public:
  explicit PathTable(const Topology& topo) : n_(topo.node_count()), cloud_(topo.cloud()) {
    build(topo);
  }

  int node_count() const { return n_; }

  const PathEntry& at(NodeId u, NodeId v) const { return entries_[idx(u, v)]; }

  double distance_m(NodeId u, NodeId v) const { return at(u, v).distance_m; }

  // Propagation term, honoring configured per-class overrides; zero for u == v.
  double prop_delay_s(NodeId u, NodeId v) const { return at(u, v).prop_delay_s; }

  // One-way routing delay of a payload along the stored path.
  double routing_delay_s(NodeId u, NodeId v, double payload_bits) const {
    const PathEntry& e = at(u, v);
    return e.prop_delay_s + payload_bits * e.inv_rate_sum;
  }

 private:
  int idx(NodeId u, NodeId v) const { return u * n_ + v; }

  void build(const Topology& topo) {
    const auto& adj = topo.adjacency();
    const auto& links = topo.links();
    std::vector<double> weight(links.size());
    for (size_t i = 0; i < links.size(); ++i)
      weight[i] = 1.0 / links[i].rate_bps + links[i].length_m / topo.propagation().speed_mps;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dist(n_, std::vector<double>(n_, inf));
    for (NodeId s = 0; s < n_; ++s) dijkstra(s, adj, weight, dist[s]);

    entries_.assign(static_cast<size_t>(n_) * n_, {});
    for (NodeId u = 0; u < n_; ++u) {
      entries_[idx(u, u)] = PathEntry{{}, 0.0, 0.0, 0.0};
      for (NodeId v = u + 1; v < n_; ++v) {
        if (dist[u][v] == inf)
          throw ValidationError("topology is disconnected: no path between " +
                                std::to_string(u) + " and " + std::to_string(v));
        PathEntry fwd = reconstruct(u, v, adj, links, weight, dist);
        PathEntry rev;
        rev.distance_m = fwd.distance_m;
        rev.inv_rate_sum = fwd.inv_rate_sum;
        for (auto it = fwd.hops.rbegin(); it != fwd.hops.rend(); ++it)
          rev.hops.push_back({it->second, it->first});
        fwd.prop_delay_s = prop_for(topo, u, v, fwd.distance_m);
        rev.prop_delay_s = fwd.prop_delay_s;
        entries_[idx(u, v)] = std::move(fwd);
        entries_[idx(v, u)] = std::move(rev);
      }
    }
  }

  static double prop_for(const Topology& topo, NodeId u, NodeId v, double distance_m) {
    const PropagationConfig& p = topo.propagation();
    bool touches_cloud = (u == topo.cloud() || v == topo.cloud());
    if (touches_cloud && p.ap_cloud_override_s) return *p.ap_cloud_override_s;
    if (!touches_cloud && p.ap_ap_override_s) return *p.ap_ap_override_s;
    return distance_m / p.speed_mps;
  }

  static void dijkstra(NodeId src, const std::vector<std::vector<std::pair<NodeId, int>>>& adj,
                       const std::vector<double>& weight, std::vector<double>& dist) {
    dist[src] = 0.0;
    // (distance, node) heap; node id breaks ties deterministically
    std::vector<std::pair<double, NodeId>> heap{{0.0, src}};
    auto cmp = [](const auto& a, const auto& b) { return a > b; };
    std::vector<bool> done(dist.size(), false);
    while (!heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      auto [d, x] = heap.back();
      heap.pop_back();
      if (done[x]) continue;
      done[x] = true;
      for (auto [y, li] : adj[x]) {
        double nd = d + weight[li];
        if (nd < dist[y]) {
          dist[y] = nd;
          heap.push_back({nd, y});
          std::push_heap(heap.begin(), heap.end(), cmp);
        }
      }
    }
  }

  // Forward-greedy walk from u: at every step take the smallest-id neighbor
  // that still lies on some shortest u->v path. Yields the lexicographically
  // smallest node sequence among minimum-weight paths.
  static PathEntry reconstruct(NodeId u, NodeId v,
                               const std::vector<std::vector<std::pair<NodeId, int>>>& adj,
                               const std::vector<Link>& links, const std::vector<double>& weight,
                               const std::vector<std::vector<double>>& dist) {
    PathEntry e;
    const double total = dist[u][v];
    const double tol = 1e-12 * std::max(1.0, total);
    NodeId x = u;
    double acc = 0.0;
    int hops = 0;
    while (x != v) {
      if (++hops > static_cast<int>(dist.size()))
        throw std::logic_error("path reconstruction did not terminate");
      NodeId best = -1;
      int best_link = -1;
      double best_err = inf_();
      for (auto [y, li] : adj[x]) {
        double err = acc + weight[li] + dist[v][y] - total;
        if (err <= tol) {
          best = y;
          best_link = li;
          break;  // neighbors are sorted by id; first hit is smallest
        }
        if (std::abs(err) < best_err) {
          best_err = std::abs(err);
          best = y;
          best_link = li;
        }
      }
      e.hops.push_back({x, best});
      e.distance_m += links[best_link].length_m;
      e.inv_rate_sum += 1.0 / links[best_link].rate_bps;
      acc += weight[best_link];
      x = best;
    }
    return e;
  }

  static double inf_() { return std::numeric_limits<double>::infinity(); }

  int n_;
  NodeId cloud_;
  std::vector<PathEntry> entries_;
};

inline PathTable build_path_table(const Topology& topo) { return PathTable(topo); }

// Round-trip completion delay of one task fraction: forward routing of the
// fraction, processing at the server, and routing the result (zeta * size)
// back to the origin. Co-located origin/server pays only the processing term.
inline double fraction_delay_s(const PathTable& paths, NodeId origin, NodeId server,
                               double fraction_bits, double zeta, double beta_server_bps) {
  double processing = fraction_bits / beta_server_bps;
  if (origin == server) return processing;
  return paths.routing_delay_s(origin, server, fraction_bits) + processing +
         paths.routing_delay_s(server, origin, zeta * fraction_bits);
}

struct DelayCoeffs {
  double slope_s_per_bit = 0.0;  // (1 + zeta) * sum(1/rate) + 1/beta
  double intercept_s = 0.0;      // round-trip propagation
};

// fraction_delay_s(b) == slope * b + intercept, exactly.
inline DelayCoeffs delay_coeffs(const PathTable& paths, NodeId origin, NodeId server, double zeta,
                                double beta_server_bps) {
  DelayCoeffs c;
  c.slope_s_per_bit = 1.0 / beta_server_bps;
  if (origin != server) {
    const PathEntry& fwd = paths.at(origin, server);
    const PathEntry& rev = paths.at(server, origin);
    c.slope_s_per_bit += fwd.inv_rate_sum + zeta * rev.inv_rate_sum;
    c.intercept_s = fwd.prop_delay_s + rev.prop_delay_s;
  }
  return c;
}

}  // namespace mesu
