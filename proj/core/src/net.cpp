#include "phaseopt/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace phaseopt::net {

const ControllerTiming* SignalPlan::find(const std::string& controller_id) const {
  for (const auto& t : timings) {
    if (t.controller == controller_id) return &t;
  }
  return nullptr;
}

const Link* NetworkSpec::find_link(const std::string& id) const {
  for (const auto& l : links) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

const SignalController* NetworkSpec::find_controller(const std::string& id) const {
  for (const auto& c : controllers) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

bool NetworkSpec::is_centroid(const std::string& node_id) const {
  return std::find(centroids.begin(), centroids.end(), node_id) != centroids.end();
}

double NetworkSpec::od_demand(const std::string& origin, const std::string& destination) const {
  auto it = demand.find({origin, destination});
  return it == demand.end() ? 0.0 : it->second;
}

double NetworkSpec::total_demand() const {
  double sum = 0.0;
  for (const auto& [od, d] : demand) sum += d;
  return sum;
}

double link_green_split(const SignalPlan& plan, const Link& link) {
  if (!link.controlled_by) return 1.0;
  const auto& ctl = *link.controlled_by;
  const ControllerTiming* timing = plan.find(ctl.controller);
  if (!timing) {
    throw std::invalid_argument("link " + link.id + " references controller " + ctl.controller +
                                " which is absent from the plan");
  }
  long long green = 0;
  for (int phase : ctl.phases) {
    if (phase < 0 || phase >= static_cast<int>(timing->durations.size())) {
      throw std::invalid_argument("link " + link.id + " references phase " +
                                  std::to_string(phase + 1) + " outside controller " +
                                  ctl.controller + "'s plan");
    }
    green += timing->durations[phase];
  }
  return static_cast<double>(green) / static_cast<double>(timing->cycle_length);
}

std::vector<std::string> validate_plan(const SignalPlan& plan, const NetworkSpec& network) {
  std::vector<std::string> violations;
  for (const auto& controller : network.controllers) {
    const ControllerTiming* timing = plan.find(controller.id);
    if (!timing) {
      violations.push_back("controller " + controller.id + ": missing from plan");
      continue;
    }
    if (timing->cycle_length != controller.cycle_length) {
      violations.push_back("controller " + controller.id + ": plan cycle " +
                           std::to_string(timing->cycle_length) + " != controller cycle " +
                           std::to_string(controller.cycle_length));
    }
    if (static_cast<int>(timing->durations.size()) != controller.num_phases()) {
      violations.push_back("controller " + controller.id + ": plan has " +
                           std::to_string(timing->durations.size()) + " phases, expected " +
                           std::to_string(controller.num_phases()));
      continue;
    }
    long long sum = 0;
    for (std::size_t k = 0; k < timing->durations.size(); ++k) {
      int d = timing->durations[k];
      if (d < 0) {
        violations.push_back("controller " + controller.id + ": phase " + std::to_string(k + 1) +
                             " duration " + std::to_string(d) + " is negative");
      }
      sum += d;
    }
    if (sum != controller.cycle_length) {
      violations.push_back("controller " + controller.id + ": durations sum to " +
                           std::to_string(sum) + ", expected " +
                           std::to_string(controller.cycle_length));
    }
  }
  return violations;
}

NetworkSpec apply_incident(const NetworkSpec& network, const Incident& incident) {
  if (incident.duration_s <= 0.0) {
    throw std::invalid_argument("incident duration must be positive");
  }
  NetworkSpec out = network;
  Link* target = nullptr;
  for (auto& l : out.links) {
    if (l.id == incident.link_id) {
      target = &l;
      break;
    }
  }
  if (!target) {
    throw std::invalid_argument("incident references unknown link " + incident.link_id);
  }
  if (incident.lanes_blocked < 0 || incident.lanes_blocked > target->lanes) {
    throw std::invalid_argument("incident blocks " + std::to_string(incident.lanes_blocked) +
                                " lanes on link " + incident.link_id + " which has " +
                                std::to_string(target->lanes));
  }
  const double keep =
      static_cast<double>(target->lanes - incident.lanes_blocked) / static_cast<double>(target->lanes);
  target->capacity *= keep;
  return out;
}

namespace {

struct Arc {
  int to;
  int link_index;
  double cost;
};

struct PathCandidate {
  double cost;
  std::vector<int> link_indices;

  bool operator<(const PathCandidate& other) const {
    if (cost != other.cost) return cost < other.cost;
    return link_indices < other.link_indices;
  }
};

// Dijkstra over node indices; centroid nodes other than the destination are
// never expanded. Visits are ordered by (cost, node index) so equal-cost
// outcomes do not depend on queue internals.
std::optional<PathCandidate> shortest_path(const std::vector<std::vector<Arc>>& adjacency,
                                           const std::vector<bool>& transit_forbidden, int source,
                                           int target, const std::vector<bool>& node_banned,
                                           const std::vector<bool>& link_banned) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> via_link(n, -1);
  std::vector<int> via_node(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (u == target) break;
    if (u != source && transit_forbidden[u]) continue;
    for (const Arc& arc : adjacency[u]) {
      if (link_banned[arc.link_index] || node_banned[arc.to]) continue;
      const double nd = d + arc.cost;
      if (nd < dist[arc.to]) {
        dist[arc.to] = nd;
        via_link[arc.to] = arc.link_index;
        via_node[arc.to] = u;
        queue.push({nd, arc.to});
      }
    }
  }
  if (!std::isfinite(dist[target])) return std::nullopt;
  PathCandidate path;
  path.cost = dist[target];
  for (int v = target; v != source; v = via_node[v]) {
    path.link_indices.push_back(via_link[v]);
  }
  std::reverse(path.link_indices.begin(), path.link_indices.end());
  return path;
}

}  // namespace

std::vector<Route> enumerate_routes(const NetworkSpec& network, const std::string& origin,
                                    const std::string& destination, int k) {
  if (origin == destination) {
    throw std::invalid_argument("route enumeration for identical origin and destination " + origin);
  }
  if (k < 1) throw std::invalid_argument("route count k must be at least 1");

  std::unordered_map<std::string, int> node_index;
  for (std::size_t i = 0; i < network.nodes.size(); ++i) {
    node_index.emplace(network.nodes[i], static_cast<int>(i));
  }
  auto source_it = node_index.find(origin);
  auto target_it = node_index.find(destination);
  if (source_it == node_index.end() || target_it == node_index.end()) {
    throw std::invalid_argument("route enumeration references unknown node for OD " + origin +
                                "->" + destination);
  }
  const int n = static_cast<int>(network.nodes.size());
  std::vector<std::vector<Arc>> adjacency(n);
  for (std::size_t li = 0; li < network.links.size(); ++li) {
    const Link& l = network.links[li];
    adjacency[node_index.at(l.from_node)].push_back(
        {node_index.at(l.to_node), static_cast<int>(li), l.free_flow_time});
  }
  std::vector<bool> transit_forbidden(n, false);
  for (const auto& c : network.centroids) transit_forbidden[node_index.at(c)] = true;
  transit_forbidden[target_it->second] = false;

  const int source = source_it->second;
  const int target = target_it->second;
  std::vector<bool> no_nodes(n, false);
  std::vector<bool> no_links(network.links.size(), false);

  std::vector<PathCandidate> found;
  auto first = shortest_path(adjacency, transit_forbidden, source, target, no_nodes, no_links);
  if (!first) {
    throw std::runtime_error("no route exists for OD " + origin + "->" + destination);
  }
  found.push_back(std::move(*first));

  // Yen's algorithm: ban one link of each known path at its spur node, plus
  // the nodes of the shared root, and stitch root + spur.
  std::set<PathCandidate> candidates;
  while (static_cast<int>(found.size()) < k) {
    const PathCandidate& last = found.back();
    std::vector<int> root_nodes{source};
    std::vector<int> root_links;
    double root_cost = 0.0;
    for (std::size_t spur = 0; spur < last.link_indices.size(); ++spur) {
      const int spur_node = root_nodes.back();
      std::vector<bool> node_banned(n, false);
      std::vector<bool> link_banned(network.links.size(), false);
      for (std::size_t i = 0; i + 1 < root_nodes.size(); ++i) node_banned[root_nodes[i]] = true;
      for (const PathCandidate& p : found) {
        if (p.link_indices.size() > spur &&
            std::equal(root_links.begin(), root_links.end(), p.link_indices.begin())) {
          link_banned[p.link_indices[spur]] = true;
        }
      }
      auto spur_path =
          shortest_path(adjacency, transit_forbidden, spur_node, target, node_banned, link_banned);
      if (spur_path) {
        PathCandidate full;
        full.cost = root_cost + spur_path->cost;
        full.link_indices = root_links;
        full.link_indices.insert(full.link_indices.end(), spur_path->link_indices.begin(),
                                 spur_path->link_indices.end());
        bool known = std::any_of(found.begin(), found.end(), [&](const PathCandidate& p) {
          return p.link_indices == full.link_indices;
        });
        if (!known) candidates.insert(std::move(full));
      }
      const int link_idx = last.link_indices[spur];
      root_cost += network.links[link_idx].free_flow_time;
      root_links.push_back(link_idx);
      root_nodes.push_back(node_index.at(network.links[link_idx].to_node));
    }
    if (candidates.empty()) break;
    found.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }

  std::sort(found.begin(), found.end(), [&](const PathCandidate& a, const PathCandidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    std::vector<std::string> ids_a, ids_b;
    for (int li : a.link_indices) ids_a.push_back(network.links[li].id);
    for (int li : b.link_indices) ids_b.push_back(network.links[li].id);
    return ids_a < ids_b;
  });

  std::vector<Route> routes;
  for (const PathCandidate& p : found) {
    Route r;
    for (int li : p.link_indices) r.links.push_back(network.links[li].id);
    routes.push_back(std::move(r));
  }
  return routes;
}

void attach_routes(NetworkSpec& network, int k) {
  network.routes.clear();
  for (const auto& [od, d] : network.demand) {
    if (d <= 0.0) continue;
    network.routes[od] = enumerate_routes(network, od.first, od.second, k);
  }
}

namespace {

Link make_link(std::string id, std::string from, std::string to, double free_flow_s,
               double capacity, int lanes) {
  Link l;
  l.id = std::move(id);
  l.from_node = std::move(from);
  l.to_node = std::move(to);
  l.free_flow_time = free_flow_s / 3600.0;
  l.capacity = capacity;
  l.lanes = lanes;
  return l;
}

// One phase per inbound approach, declared in compass order N, E, S, W.
void add_split_phase_controller(NetworkSpec& net, const std::string& node,
                                const std::vector<std::string>& approach_links, int cycle) {
  SignalController c;
  c.id = node;
  c.cycle_length = cycle;
  for (const auto& link_id : approach_links) {
    c.phase_movements.push_back({link_id});
  }
  net.controllers.push_back(std::move(c));
  for (std::size_t phase = 0; phase < approach_links.size(); ++phase) {
    for (auto& l : net.links) {
      if (l.id == approach_links[phase]) {
        l.controlled_by = LinkControl{node, {static_cast<int>(phase)}};
      }
    }
  }
}

}  // namespace

NetworkSpec build_fixture() {
  NetworkSpec net;
  net.centroids = {"c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"};
  net.nodes = {"i1", "i2", "i3", "i4"};
  net.nodes.insert(net.nodes.end(), net.centroids.begin(), net.centroids.end());

  const double conn_s = 6.0, ring_s = 10.0, cap = 3600.0;
  const int lanes = 3;

  // centroid connectors, paired in/out
  const std::pair<std::string, std::string> taps[] = {
      {"c1", "i1"}, {"c2", "i2"}, {"c3", "i2"}, {"c4", "i3"},
      {"c5", "i3"}, {"c6", "i4"}, {"c7", "i4"}, {"c8", "i1"},
  };
  for (const auto& [c, i] : taps) {
    net.links.push_back(make_link(c + "_" + i, c, i, conn_s, cap, lanes));
    net.links.push_back(make_link(i + "_" + c, i, c, conn_s, cap, lanes));
  }
  // the intersection ring
  const std::pair<std::string, std::string> ring[] = {
      {"i1", "i2"}, {"i2", "i3"}, {"i3", "i4"}, {"i4", "i1"},
  };
  for (const auto& [a, b] : ring) {
    net.links.push_back(make_link(a + "_" + b, a, b, ring_s, cap, lanes));
    net.links.push_back(make_link(b + "_" + a, b, a, ring_s, cap, lanes));
  }

  add_split_phase_controller(net, "i1", {"c1_i1", "i2_i1", "i4_i1", "c8_i1"}, 90);
  add_split_phase_controller(net, "i2", {"c2_i2", "c3_i2", "i3_i2", "i1_i2"}, 90);
  add_split_phase_controller(net, "i3", {"i2_i3", "c4_i3", "c5_i3", "i4_i3"}, 90);
  add_split_phase_controller(net, "i4", {"i1_i4", "i3_i4", "c6_i4", "c7_i4"}, 90);

  // veh/h between centroids, row = origin 1..8, column = destination 1..8
  static const double od[8][8] = {
      {0, 150, 150, 150, 150, 100, 100, 150},
      {150, 0, 100, 100, 100, 150, 150, 100},
      {150, 100, 0, 150, 100, 100, 100, 150},
      {100, 150, 100, 0, 150, 100, 150, 150},
      {150, 100, 100, 150, 0, 150, 150, 100},
      {100, 100, 100, 100, 0, 0, 150, 100},
      {100, 150, 750, 150, 150, 100, 0, 150},
      {100, 150, 150, 100, 150, 100, 100, 0},
  };
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      if (od[a][b] > 0.0) {
        net.demand[{"c" + std::to_string(a + 1), "c" + std::to_string(b + 1)}] = od[a][b];
      }
    }
  }

  attach_routes(net, 4);
  return net;
}

NetworkSpec build_single_junction_fixture() {
  NetworkSpec net;
  net.centroids = {"c1", "c2", "c3", "c4"};
  net.nodes = {"j1", "c1", "c2", "c3", "c4"};

  const double conn_s = 6.0, cap = 1800.0;
  const int lanes = 2;
  for (const auto& c : net.centroids) {
    net.links.push_back(make_link(c + "_j1", c, "j1", conn_s, cap, lanes));
    net.links.push_back(make_link("j1_" + c, "j1", c, conn_s, cap, lanes));
  }
  add_split_phase_controller(net, "j1", {"c1_j1", "c2_j1", "c3_j1", "c4_j1"}, 90);

  static const double od[4][4] = {
      {0, 50, 400, 50},
      {50, 0, 50, 250},
      {300, 50, 0, 50},
      {50, 150, 50, 0},
  };
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      if (od[a][b] > 0.0) {
        net.demand[{"c" + std::to_string(a + 1), "c" + std::to_string(b + 1)}] = od[a][b];
      }
    }
  }

  attach_routes(net, 4);
  return net;
}

SignalPlan uniform_plan(const NetworkSpec& network) {
  SignalPlan plan;
  for (const auto& c : network.controllers) {
    ControllerTiming t;
    t.controller = c.id;
    t.cycle_length = c.cycle_length;
    const int k = c.num_phases();
    const int base = c.cycle_length / k;
    const int extra = c.cycle_length % k;
    for (int p = 0; p < k; ++p) t.durations.push_back(base + (p < extra ? 1 : 0));
    plan.timings.push_back(std::move(t));
  }
  return plan;
}

std::string plan_fingerprint(const SignalPlan& plan) {
  std::string out;
  for (const auto& t : plan.timings) {
    for (int d : t.durations) {
      if (!out.empty()) out.push_back(';');
      out += std::to_string(d);
    }
  }
  return out;
}

}  // namespace phaseopt::net
