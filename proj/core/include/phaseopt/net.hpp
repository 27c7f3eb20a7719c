#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Road network model: directed links between nodes, signalised nodes with
// fixed-cycle phase timings, OD demand between centroids, and precomputed
// route sets. Times are in hours, flows and capacities in vehicles/hour.

namespace phaseopt::net {

struct LinkControl {
  std::string controller;
  std::vector<int> phases;  // 0-based phase indices that give this link green
};

struct Link {
  std::string id;
  std::string from_node;
  std::string to_node;
  double free_flow_time = 0.0;
  double capacity = 0.0;  // all lanes combined
  int lanes = 1;
  std::optional<LinkControl> controlled_by;
};

struct SignalController {
  std::string id;  // equals the node id it controls
  int cycle_length = 90;
  // phase_movements[k] lists the inbound link ids with green in phase k
  std::vector<std::vector<std::string>> phase_movements;

  int num_phases() const { return static_cast<int>(phase_movements.size()); }
};

struct ControllerTiming {
  std::string controller;
  int cycle_length = 90;
  std::vector<int> durations;  // seconds, one per phase, sums to cycle_length
};

struct SignalPlan {
  std::vector<ControllerTiming> timings;

  const ControllerTiming* find(const std::string& controller_id) const;
};

struct Incident {
  std::string link_id;
  int lanes_blocked = 1;
  double start_s = 0.0;
  double duration_s = 3600.0;
};

struct Route {
  std::vector<std::string> links;
};

using OdPair = std::pair<std::string, std::string>;  // origin, destination

struct NetworkSpec {
  std::vector<std::string> nodes;
  std::vector<std::string> centroids;
  std::vector<Link> links;
  std::vector<SignalController> controllers;
  std::map<OdPair, double> demand;  // veh/h; only positive entries stored
  std::map<OdPair, std::vector<Route>> routes;

  const Link* find_link(const std::string& id) const;
  const SignalController* find_controller(const std::string& id) const;
  bool is_centroid(const std::string& node_id) const;
  double od_demand(const std::string& origin, const std::string& destination) const;
  double total_demand() const;
};

// Fraction of the cycle during which the link has green. Uncontrolled links
// are always 1. Throws when the link references a controller or phase the
// plan does not cover.
double link_green_split(const SignalPlan& plan, const Link& link);

// Empty result means valid: every controller present with the right phase
// count, durations nonnegative, per-controller sum equal to the cycle.
std::vector<std::string> validate_plan(const SignalPlan& plan, const NetworkSpec& network);

// Copy of the network with the incident link's capacity scaled by
// (lanes - lanes_blocked) / lanes. The caller applies this network to the
// intervals that overlap the incident window and the original elsewhere.
NetworkSpec apply_incident(const NetworkSpec& network, const Incident& incident);

// Up to k cheapest loopless routes by free-flow time, never passing through
// a centroid except at the endpoints. Ordered by cost, then by link-id
// sequence. Throws when origin equals destination or no route exists.
std::vector<Route> enumerate_routes(const NetworkSpec& network, const std::string& origin,
                                    const std::string& destination, int k = 4);

// Fills network.routes for every positive-demand OD pair.
void attach_routes(NetworkSpec& network, int k = 4);

// Four signalised intersections in a ring, eight centroids, 90 s cycles with
// one phase per approach. The heavy c7->c3 movement has two competing routes
// of equal length; the ring link i4_i3 sits on the second of them.
NetworkSpec build_fixture();

// One intersection fed by four centroids, one route per OD pair. Small
// enough that a few hundred sampled plans cover the interesting part of the
// plan space.
NetworkSpec build_single_junction_fixture();

// Uniform split of each controller's cycle across its phases; leftover
// seconds go to the lowest phase indices.
SignalPlan uniform_plan(const NetworkSpec& network);

// "18;22;12;38;..." over controllers in plan order, phase-major.
std::string plan_fingerprint(const SignalPlan& plan);

}  // namespace phaseopt::net
