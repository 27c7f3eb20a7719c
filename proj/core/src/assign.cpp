#include "phaseopt/assign.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace phaseopt::assign {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double link_travel_time(const net::Link& link, double flow, double green_split) {
  if (flow < 0.0) throw std::invalid_argument("negative flow on link " + link.id);
  if (flow == 0.0) return link.free_flow_time;
  const double effective = green_split * link.capacity;
  if (effective <= 0.0) return kInf;  // positive flow against a closed approach
  const double ratio = flow / effective;
  const double r2 = ratio * ratio;
  return link.free_flow_time * (1.0 + kBprAlpha * r2 * r2);
}

double total_travel_time(const AssignmentResult& result) { return result.total_travel_time; }

struct Evaluator::Impl {
  net::NetworkSpec net_spec;
  std::optional<net::Incident> incident;
  SolveOptions options;
  double penalty = kDefaultPenalty;

  int num_links = 0;
  std::vector<double> t0;
  std::vector<double> cap_normal;
  std::vector<double> cap_dropped;
  std::vector<bool> interval_uses_drop;

  // chromosome layout: one gene per controller phase, controllers in order
  std::vector<int> slot_offset;
  std::vector<int> slot_phases;
  std::vector<int> slot_cycle;
  int total_genes = 0;

  // per link: absolute gene indices granting green, empty when uncontrolled
  std::vector<std::vector<int>> link_genes;
  std::vector<int> link_cycle;

  struct Od {
    std::string origin, destination;
    double demand = 0.0;
    int route_first = 0;
    int route_count = 0;
  };
  std::vector<Od> ods;
  std::vector<std::vector<int>> route_links;

  void compile();
  AssignmentResult run(std::span<const int> genes) const;
};

void Evaluator::Impl::compile() {
  num_links = static_cast<int>(net_spec.links.size());
  t0.resize(num_links);
  cap_normal.resize(num_links);
  for (int l = 0; l < num_links; ++l) {
    t0[l] = net_spec.links[l].free_flow_time;
    cap_normal[l] = net_spec.links[l].capacity;
  }
  cap_dropped = cap_normal;
  if (incident) {
    const net::NetworkSpec dropped = net::apply_incident(net_spec, *incident);
    for (int l = 0; l < num_links; ++l) cap_dropped[l] = dropped.links[l].capacity;
  }
  const double interval_s = options.horizon_hours * 3600.0 / options.num_intervals;
  interval_uses_drop.assign(options.num_intervals, false);
  if (incident) {
    for (int tau = 0; tau < options.num_intervals; ++tau) {
      const double lo = tau * interval_s, hi = (tau + 1) * interval_s;
      interval_uses_drop[tau] =
          incident->start_s < hi && incident->start_s + incident->duration_s > lo;
    }
  }

  total_genes = 0;
  for (const auto& c : net_spec.controllers) {
    slot_offset.push_back(total_genes);
    slot_phases.push_back(c.num_phases());
    slot_cycle.push_back(c.cycle_length);
    total_genes += c.num_phases();
  }
  link_genes.assign(num_links, {});
  link_cycle.assign(num_links, 0);
  for (int l = 0; l < num_links; ++l) {
    const auto& ctl = net_spec.links[l].controlled_by;
    if (!ctl) continue;
    int slot = -1;
    for (std::size_t c = 0; c < net_spec.controllers.size(); ++c) {
      if (net_spec.controllers[c].id == ctl->controller) slot = static_cast<int>(c);
    }
    if (slot < 0) {
      throw std::runtime_error("link " + net_spec.links[l].id + " controlled by unknown controller " +
                               ctl->controller);
    }
    for (int phase : ctl->phases) {
      if (phase < 0 || phase >= slot_phases[slot]) {
        throw std::runtime_error("link " + net_spec.links[l].id + " references phase out of range");
      }
      link_genes[l].push_back(slot_offset[slot] + phase);
    }
    link_cycle[l] = slot_cycle[slot];
  }

  std::vector<int> link_index_by_id(num_links);
  auto find_link_index = [&](const std::string& id) {
    for (int l = 0; l < num_links; ++l) {
      if (net_spec.links[l].id == id) return l;
    }
    throw std::runtime_error("route references unknown link " + id);
  };
  for (const auto& [od, d] : net_spec.demand) {
    if (d <= 0.0) continue;
    auto routes_it = net_spec.routes.find(od);
    if (routes_it == net_spec.routes.end() || routes_it->second.empty()) {
      throw std::runtime_error("no routes attached for OD " + od.first + "->" + od.second);
    }
    Od compiled;
    compiled.origin = od.first;
    compiled.destination = od.second;
    compiled.demand = d;
    compiled.route_first = static_cast<int>(route_links.size());
    compiled.route_count = static_cast<int>(routes_it->second.size());
    for (const auto& r : routes_it->second) {
      std::vector<int> indices;
      for (const auto& id : r.links) indices.push_back(find_link_index(id));
      route_links.push_back(std::move(indices));
    }
    ods.push_back(std::move(compiled));
  }
}

namespace {

struct IntervalSolution {
  std::vector<double> route_flow;
  std::vector<double> route_cost;
  std::vector<double> link_flow;
  std::vector<double> link_time;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

}  // namespace

AssignmentResult Evaluator::Impl::run(std::span<const int> genes) const {
  if (static_cast<int>(genes.size()) != total_genes) {
    throw std::invalid_argument("plan has " + std::to_string(genes.size()) + " phase durations, network needs " +
                                std::to_string(total_genes));
  }
  for (std::size_t s = 0; s < slot_offset.size(); ++s) {
    long long sum = 0;
    for (int p = 0; p < slot_phases[s]; ++p) {
      const int d = genes[slot_offset[s] + p];
      if (d < 0) {
        throw std::invalid_argument("controller " + net_spec.controllers[s].id +
                                    " has a negative phase duration");
      }
      sum += d;
    }
    if (sum != slot_cycle[s]) {
      throw std::invalid_argument("controller " + net_spec.controllers[s].id + " durations sum to " +
                                  std::to_string(sum) + ", expected " + std::to_string(slot_cycle[s]));
    }
  }

  // green splits; integer sums keep the whole-cycle identity exact
  std::vector<double> split(num_links, 1.0);
  for (int l = 0; l < num_links; ++l) {
    if (link_genes[l].empty()) continue;
    long long green = 0;
    for (int g : link_genes[l]) green += genes[g];
    split[l] = static_cast<double>(green) / static_cast<double>(link_cycle[l]);
  }

  AssignmentResult result;
  const int total_routes = static_cast<int>(route_links.size());
  std::vector<bool> route_blocked(total_routes, false);
  for (int r = 0; r < total_routes; ++r) {
    for (int l : route_links[r]) {
      if (split[l] <= 0.0) {
        route_blocked[r] = true;
        break;
      }
    }
  }
  for (const auto& od : ods) {
    bool any_open = false;
    for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
      if (!route_blocked[r]) any_open = true;
    }
    if (!any_open) {
      result.infeasible = true;
      result.total_travel_time = kInf;
      return result;
    }
  }

  const double interval_hours = options.horizon_hours / options.num_intervals;

  auto solve_interval = [&](const std::vector<double>& cap) {
    IntervalSolution sol;
    sol.route_flow.assign(total_routes, 0.0);
    sol.route_cost.assign(total_routes, 0.0);
    sol.link_flow.assign(num_links, 0.0);
    sol.link_time.assign(num_links, 0.0);
    std::vector<double>& f = sol.route_flow;
    std::vector<double>& c = sol.route_cost;
    std::vector<double>& v = sol.link_flow;
    std::vector<double>& t = sol.link_time;

    auto update_times = [&]() {
      for (int l = 0; l < num_links; ++l) {
        if (v[l] <= 0.0) {
          t[l] = t0[l];
          continue;
        }
        const double effective = split[l] * cap[l];
        if (effective <= 0.0) {
          t[l] = kInf;
          continue;
        }
        const double ratio = v[l] / effective;
        const double r2 = ratio * ratio;
        t[l] = t0[l] * (1.0 + kBprAlpha * r2 * r2);
      }
    };
    auto update_costs = [&]() {
      for (int r = 0; r < total_routes; ++r) {
        if (route_blocked[r]) {
          c[r] = kInf;
          continue;
        }
        double sum = 0.0;
        for (int l : route_links[r]) sum += t[l];
        c[r] = sum;
      }
    };
    auto relative_gap = [&]() {
      double tc = 0.0, spc = 0.0;
      for (int l = 0; l < num_links; ++l) {
        if (v[l] > 0.0) tc += v[l] * t[l];
      }
      for (const auto& od : ods) {
        double cmin = kInf;
        for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
          cmin = std::min(cmin, c[r]);
        }
        spc += od.demand * cmin;
      }
      if (tc <= 0.0) return 0.0;
      return (tc - spc) / tc;
    };
    auto rebuild_link_flows = [&]() {
      std::fill(v.begin(), v.end(), 0.0);
      for (int r = 0; r < total_routes; ++r) {
        if (f[r] <= 0.0) continue;
        for (int l : route_links[r]) v[l] += f[r];
      }
    };

    int n = 0;
    for (;;) {
      update_times();
      update_costs();
      if (n >= 1) {
        sol.gap = relative_gap();
        if (sol.gap < options.relative_gap_tol) {
          sol.converged = true;
          break;
        }
      }
      if (n >= options.max_iterations) break;
      ++n;
      const double step = 1.0 / n;
      for (const auto& od : ods) {
        int best = -1;
        double best_cost = kInf;
        for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
          if (c[r] < best_cost) {
            best_cost = c[r];
            best = r;
          }
        }
        for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
          f[r] *= 1.0 - step;
        }
        f[best] += step * od.demand;
      }
      rebuild_link_flows();
    }
    sol.iterations = n;

    // MSA leaves residue on routes it abandoned mid-run. Rebalance each
    // violating route against the OD's cheapest by bisecting the transfer
    // amount until the pair equalises; shared links drop out of the cost
    // difference, so only the links unique to either route are involved.
    const double drain_trigger = 1.0 + 0.5 * options.wardrop_tolerance;
    std::vector<int> stamp(num_links, -1);
    std::vector<int> only_r, only_b;
    auto bpr_at = [&](int l, double flow) {
      if (flow <= 0.0) return t0[l];
      const double effective = split[l] * cap[l];
      if (effective <= 0.0) return kInf;
      const double ratio = flow / effective;
      const double r2 = ratio * ratio;
      return t0[l] * (1.0 + kBprAlpha * r2 * r2);
    };
    int mark = 0;
    for (int pass = 0; pass < 200; ++pass) {
      bool moved = false;
      for (const auto& od : ods) {
        for (int round = 0; round < od.route_count; ++round) {
          int best = -1;
          double best_cost = kInf;
          for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
            if (c[r] < best_cost) {
              best_cost = c[r];
              best = r;
            }
          }
          int worst = -1;
          double worst_cost = best_cost * drain_trigger;
          for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
            if (r != best && f[r] > 0.0 && c[r] > worst_cost) {
              worst_cost = c[r];
              worst = r;
            }
          }
          if (worst < 0) break;

          ++mark;
          for (int l : route_links[best]) stamp[l] = mark;
          only_r.clear();
          only_b.clear();
          for (int l : route_links[worst]) {
            if (stamp[l] == mark) {
              stamp[l] = -1;
            } else {
              only_r.push_back(l);
            }
          }
          for (int l : route_links[best]) {
            if (stamp[l] == mark) only_b.push_back(l);
          }
          auto diff_at = [&](double delta) {
            double d = 0.0;
            for (int l : only_r) d += bpr_at(l, v[l] - delta);
            for (int l : only_b) d -= bpr_at(l, v[l] + delta);
            return d;
          };
          double amount = f[worst];
          if (diff_at(amount) < 0.0) {
            double lo = 0.0, hi = amount;
            for (int it = 0; it < 60; ++it) {
              const double mid = 0.5 * (lo + hi);
              if (diff_at(mid) > 0.0) {
                lo = mid;
              } else {
                hi = mid;
              }
            }
            amount = 0.5 * (lo + hi);
          }
          if (amount <= 0.0) break;
          for (int l : only_r) v[l] -= amount;
          for (int l : only_b) v[l] += amount;
          f[worst] -= amount;
          f[best] += amount;
          for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
            if (route_blocked[r]) continue;
            double sum = 0.0;
            for (int l : route_links[r]) sum += bpr_at(l, v[l]);
            c[r] = sum;
          }
          moved = true;
        }
      }
      if (!moved) break;
      update_times();
      update_costs();
    }
    sol.gap = relative_gap();
    sol.converged = sol.gap < options.relative_gap_tol;
    return sol;
  };

  IntervalSolution normal, dropped;
  bool have_normal = false, have_dropped = false;
  result.interval_states.resize(options.num_intervals);
  result.interval_route_flows.resize(options.num_intervals);
  result.relative_gap = 0.0;
  result.iterations = 0;
  result.converged = true;
  for (int tau = 0; tau < options.num_intervals; ++tau) {
    const bool drop = interval_uses_drop[tau];
    IntervalSolution* sol;
    if (drop) {
      if (!have_dropped) {
        dropped = solve_interval(cap_dropped);
        have_dropped = true;
      }
      sol = &dropped;
    } else {
      if (!have_normal) {
        normal = solve_interval(cap_normal);
        have_normal = true;
      }
      sol = &normal;
    }
    const std::vector<double>& cap = drop ? cap_dropped : cap_normal;
    auto& states = result.interval_states[tau];
    states.reserve(num_links);
    double interval_cost = 0.0;
    for (int l = 0; l < num_links; ++l) {
      LinkState s;
      s.link_id = net_spec.links[l].id;
      s.interval = tau;
      s.capacity = cap[l];
      s.flow = sol->link_flow[l];
      s.travel_time = sol->link_time[l];
      s.speed = t0[l] / sol->link_time[l];
      states.push_back(std::move(s));
      if (sol->link_flow[l] > 0.0) interval_cost += sol->link_flow[l] * sol->link_time[l];
    }
    auto& flows = result.interval_route_flows[tau];
    for (const auto& od : ods) {
      for (int r = od.route_first; r < od.route_first + od.route_count; ++r) {
        RouteFlow rf;
        rf.origin = od.origin;
        rf.destination = od.destination;
        rf.route_index = r - od.route_first;
        rf.flow = sol->route_flow[r];
        rf.cost_hours = sol->route_cost[r];
        flows.push_back(std::move(rf));
      }
    }
    result.total_travel_time += interval_cost * interval_hours;
    result.relative_gap = std::max(result.relative_gap, sol->gap);
    result.iterations = std::max(result.iterations, sol->iterations);
    result.converged = result.converged && sol->converged;
  }
  return result;
}

Evaluator::Evaluator(const net::NetworkSpec& network, std::optional<net::Incident> incident,
                     SolveOptions options, double penalty)
    : impl_(std::make_unique<Impl>()) {
  if (options.num_intervals < 1) throw std::invalid_argument("num_intervals must be at least 1");
  if (options.max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  impl_->net_spec = network;
  impl_->incident = std::move(incident);
  impl_->options = options;
  impl_->penalty = penalty;
  impl_->compile();
}

Evaluator::~Evaluator() = default;
Evaluator::Evaluator(Evaluator&&) noexcept = default;
Evaluator& Evaluator::operator=(Evaluator&&) noexcept = default;

AssignmentResult Evaluator::solve(const net::SignalPlan& plan) const {
  const auto violations = net::validate_plan(plan, impl_->net_spec);
  if (!violations.empty()) throw std::invalid_argument("invalid plan: " + violations.front());
  std::vector<int> genes;
  genes.reserve(impl_->total_genes);
  for (const auto& c : impl_->net_spec.controllers) {
    const auto* timing = plan.find(c.id);
    genes.insert(genes.end(), timing->durations.begin(), timing->durations.end());
  }
  return impl_->run(genes);
}

AssignmentResult Evaluator::solve_genes(std::span<const int> genes) const { return impl_->run(genes); }

double Evaluator::fitness(const net::SignalPlan& plan) const {
  const AssignmentResult result = solve(plan);
  return result.infeasible ? -impl_->penalty : -result.total_travel_time;
}

double Evaluator::fitness_genes(std::span<const int> genes) const {
  const AssignmentResult result = impl_->run(genes);
  return result.infeasible ? -impl_->penalty : -result.total_travel_time;
}

const net::NetworkSpec& Evaluator::network() const { return impl_->net_spec; }
double Evaluator::penalty() const { return impl_->penalty; }

AssignmentResult solve_ue(const net::NetworkSpec& network, const net::SignalPlan& plan,
                          const std::optional<net::Incident>& incident, const SolveOptions& options) {
  return Evaluator(network, incident, options).solve(plan);
}

double fitness(const net::NetworkSpec& network, const net::SignalPlan& plan,
               const std::optional<net::Incident>& incident, const SolveOptions& options,
               double penalty) {
  return Evaluator(network, incident, options, penalty).fitness(plan);
}

void write_assignment_csv(const AssignmentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "interval,link_id,capacity,flow,speed,travel_time\n";
  for (const auto& interval : result.interval_states) {
    for (const auto& s : interval) {
      out << s.interval << ',' << s.link_id << ',' << fmt_double(s.capacity) << ','
          << fmt_double(s.flow) << ',' << fmt_double(s.speed) << ',' << fmt_double(s.travel_time)
          << '\n';
    }
  }
  out << "# total_travel_time_veh_h=" << fmt_double(result.total_travel_time)
      << " relative_gap=" << fmt_double(result.relative_gap) << " iterations=" << result.iterations
      << " converged=" << (result.converged ? 1 : 0) << " infeasible=" << (result.infeasible ? 1 : 0)
      << "\n";
}

}  // namespace phaseopt::assign
