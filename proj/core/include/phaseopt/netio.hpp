#pragma once

#include <string>

#include "phaseopt/net.hpp"

// Structured-text interchange for networks and signal plans. A network
// document carries the top-level keys nodes, links, centroids, demand,
// routes (optional) and controllers; phase indices are 1-based on disk.
// Plans are flat integer arrays in controller order, phase-major.

namespace phaseopt::net {

NetworkSpec load_network(const std::string& path);
void save_network(const NetworkSpec& network, const std::string& path);

// Checks structural consistency: node references, unique ids, demand between
// distinct centroids, controller/link control agreement, route link chains.
// Throws on the first violation.
void validate_network(const NetworkSpec& network);

SignalPlan load_plan(const std::string& path, const NetworkSpec& network);
void save_plan(const SignalPlan& plan, const std::string& path);

// The flat-array form used on disk and by the optimiser.
std::vector<int> plan_to_array(const SignalPlan& plan);
SignalPlan plan_from_array(const NetworkSpec& network, const std::vector<int>& durations);

}  // namespace phaseopt::net
