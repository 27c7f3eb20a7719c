#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phaseopt/assign.hpp"
#include "phaseopt/net.hpp"
#include "phaseopt/rng.hpp"

namespace phaseopt::surrogate {

struct TrainingDataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::string> fingerprints;
  int dropped_failed = 0;
  int dropped_duplicate = 0;

  std::size_t size() const { return rows.size(); }
};

struct DatasetConfig {
  int n_runs = 3500;
  // intervals whose link snapshots become features; empty means the single
  // interval containing the incident start (interval 0 without an incident)
  std::vector<int> feature_intervals;
  std::uint64_t seed = 0;
  assign::SolveOptions solve;
};

std::vector<int> snapshot_intervals(const std::optional<net::Incident>& incident,
                                    const assign::SolveOptions& options);

// Column order: one p_<controller>_<phase> per gene, then per link in network
// order a cap/flow/speed triple per selected interval.
std::vector<std::string> feature_names(const net::NetworkSpec& network,
                                       const std::vector<int>& intervals);

std::vector<double> extract_features(const net::NetworkSpec& network, std::span<const int> genes,
                                     const assign::AssignmentResult& state,
                                     const std::vector<int>& intervals);

// Samples random plans, scores each against the assignment oracle, and keeps
// feasible unique rows. Duplicated plans and failed solves are counted, not
// kept.
TrainingDataset generate_dataset(const net::NetworkSpec& network,
                                 const std::optional<net::Incident>& incident,
                                 const DatasetConfig& config);

void write_dataset_csv(const TrainingDataset& dataset, const std::string& path);
TrainingDataset load_dataset_csv(const std::string& path);

// Throws with the offending column named when the dataset header does not
// match what the network would produce.
void check_dataset_schema(const TrainingDataset& dataset, const net::NetworkSpec& network,
                          const std::vector<int>& intervals);

// Shuffles rows then splits off the trailing fraction for holdout.
std::pair<TrainingDataset, TrainingDataset> split_dataset(const TrainingDataset& dataset,
                                                          double holdout_fraction, Rng& rng);

}  // namespace phaseopt::surrogate
