#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phaseopt/common.hpp"
#include "phaseopt/net.hpp"

// Static user-equilibrium assignment over the precomputed route sets, solved
// per 10-minute interval by the method of successive averages and polished
// so every used route costs within tolerance of its OD minimum.

namespace phaseopt::assign {

inline constexpr double kBprAlpha = 0.15;
inline constexpr int kBprBeta = 4;

struct SolveOptions {
  double relative_gap_tol = 1e-3;
  int max_iterations = 500;
  int num_intervals = 6;
  double horizon_hours = 1.0;
  double wardrop_tolerance = 0.01;  // used-route cost slack relative to the OD minimum
};

struct LinkState {
  std::string link_id;
  int interval = 0;
  double capacity = 0.0;     // incident-adjusted, before the green split
  double flow = 0.0;         // veh/h
  double speed = 1.0;        // free_flow_time / travel_time, in (0, 1]
  double travel_time = 0.0;  // hours
};

struct RouteFlow {
  std::string origin;
  std::string destination;
  int route_index = 0;
  double flow = 0.0;        // veh/h
  double cost_hours = 0.0;
};

struct AssignmentResult {
  std::vector<std::vector<LinkState>> interval_states;       // [interval][link]
  std::vector<std::vector<RouteFlow>> interval_route_flows;  // [interval][route]
  double total_travel_time = 0.0;  // vehicle-hours over the whole horizon
  double relative_gap = 0.0;       // worst interval
  int iterations = 0;              // worst interval
  bool converged = false;
  bool infeasible = false;  // some loaded OD had every route blocked by a zero green split
};

// Volume-delay curve t0 * (1 + 0.15 * (v / (g*S))^4) against the green-scaled
// capacity. Zero flow rides at free flow for any split; positive flow with a
// zero split is the infeasible-plan signal (+inf).
double link_travel_time(const net::Link& link, double flow, double green_split);

double total_travel_time(const AssignmentResult& result);

// Reusable solver: compiles the network once, then evaluates many plans.
class Evaluator {
 public:
  Evaluator(const net::NetworkSpec& network, std::optional<net::Incident> incident = {},
            SolveOptions options = {}, double penalty = kDefaultPenalty);
  ~Evaluator();
  Evaluator(Evaluator&&) noexcept;
  Evaluator& operator=(Evaluator&&) noexcept;

  AssignmentResult solve(const net::SignalPlan& plan) const;
  AssignmentResult solve_genes(std::span<const int> genes) const;

  // -TTT, or -penalty for an infeasible plan
  double fitness(const net::SignalPlan& plan) const;
  double fitness_genes(std::span<const int> genes) const;

  const net::NetworkSpec& network() const;
  double penalty() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

AssignmentResult solve_ue(const net::NetworkSpec& network, const net::SignalPlan& plan,
                          const std::optional<net::Incident>& incident = {},
                          const SolveOptions& options = {});

double fitness(const net::NetworkSpec& network, const net::SignalPlan& plan,
               const std::optional<net::Incident>& incident = {}, const SolveOptions& options = {},
               double penalty = kDefaultPenalty);

// interval,link_id,capacity,flow,speed,travel_time rows plus a trailing
// summary row with the horizon totals.
void write_assignment_csv(const AssignmentResult& result, const std::string& path);

}  // namespace phaseopt::assign
