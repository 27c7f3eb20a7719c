#include "phaseopt/surrogate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "phaseopt/common.hpp"
#include "phaseopt/ga.hpp"

namespace phaseopt::surrogate {

std::vector<int> snapshot_intervals(const std::optional<net::Incident>& incident,
                                    const assign::SolveOptions& options) {
  if (!incident) return {0};
  const double interval_s = options.horizon_hours * 3600.0 / options.num_intervals;
  int tau = static_cast<int>(std::floor(incident->start_s / interval_s));
  tau = std::clamp(tau, 0, options.num_intervals - 1);
  return {tau};
}

std::vector<std::string> feature_names(const net::NetworkSpec& network,
                                       const std::vector<int>& intervals) {
  std::vector<std::string> names;
  for (const auto& c : network.controllers) {
    for (int p = 0; p < c.num_phases(); ++p) {
      names.push_back("p_" + c.id + "_" + std::to_string(p + 1));
    }
  }
  for (const auto& link : network.links) {
    for (int tau : intervals) {
      const std::string stem = "l_" + link.id + "_t" + std::to_string(tau) + "_";
      names.push_back(stem + "cap");
      names.push_back(stem + "flow");
      names.push_back(stem + "speed");
    }
  }
  return names;
}

std::vector<double> extract_features(const net::NetworkSpec& network, std::span<const int> genes,
                                     const assign::AssignmentResult& state,
                                     const std::vector<int>& intervals) {
  std::vector<double> features;
  features.reserve(genes.size() + network.links.size() * intervals.size() * 3);
  for (int g : genes) features.push_back(static_cast<double>(g));
  for (std::size_t l = 0; l < network.links.size(); ++l) {
    for (int tau : intervals) {
      if (tau < 0 || tau >= static_cast<int>(state.interval_states.size())) {
        throw std::out_of_range("feature interval " + std::to_string(tau) +
                                " outside solved horizon");
      }
      const assign::LinkState& s = state.interval_states[tau][l];
      features.push_back(s.capacity);
      features.push_back(s.flow);
      features.push_back(s.speed);
    }
  }
  return features;
}

TrainingDataset generate_dataset(const net::NetworkSpec& network,
                                 const std::optional<net::Incident>& incident,
                                 const DatasetConfig& config) {
  if (config.n_runs < 1) throw std::invalid_argument("n_runs must be at least 1");
  const std::vector<int> intervals = config.feature_intervals.empty()
                                         ? snapshot_intervals(incident, config.solve)
                                         : config.feature_intervals;
  TrainingDataset dataset;
  dataset.feature_names = feature_names(network, intervals);

  const assign::Evaluator oracle(network, incident, config.solve);
  const ga::Layout layout = ga::layout_from(network);
  Rng rng = make_rng(config.seed, "dataset");
  std::unordered_set<std::string> seen;

  for (int run = 0; run < config.n_runs; ++run) {
    const ga::Chromosome chromosome = ga::sample_chromosome(layout, rng);
    std::string fingerprint = join_ints(chromosome);
    if (!seen.insert(fingerprint).second) {
      ++dataset.dropped_duplicate;
      continue;
    }
    const assign::AssignmentResult result = oracle.solve_genes(chromosome);
    if (result.infeasible || !std::isfinite(result.total_travel_time) ||
        result.total_travel_time <= 0.0) {
      ++dataset.dropped_failed;
      continue;
    }
    dataset.rows.push_back(extract_features(network, chromosome, result, intervals));
    dataset.targets.push_back(result.total_travel_time);
    dataset.fingerprints.push_back(std::move(fingerprint));
  }
  return dataset;
}

void write_dataset_csv(const TrainingDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < dataset.feature_names.size(); ++i) {
    if (i) out << ',';
    out << dataset.feature_names[i];
  }
  out << ",ttt_hours\n";
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    for (double v : dataset.rows[r]) out << fmt_double_exact(v) << ',';
    out << fmt_double_exact(dataset.targets[r]) << '\n';
  }
}

TrainingDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  TrainingDataset dataset;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header.back() != "ttt_hours") {
    throw std::runtime_error(path + " last column must be ttt_hours");
  }
  header.pop_back();
  dataset.feature_names = std::move(header);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(dataset.feature_names.size());
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + " has non-numeric cell '" +
                                 cell + "'");
      }
    }
    if (row.size() != dataset.feature_names.size() + 1) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + " has " +
                               std::to_string(row.size()) + " cells, expected " +
                               std::to_string(dataset.feature_names.size() + 1));
    }
    dataset.targets.push_back(row.back());
    row.pop_back();
    dataset.rows.push_back(std::move(row));
  }
  return dataset;
}

void check_dataset_schema(const TrainingDataset& dataset, const net::NetworkSpec& network,
                          const std::vector<int>& intervals) {
  const std::vector<std::string> expected = feature_names(network, intervals);
  if (dataset.feature_names.size() != expected.size()) {
    throw std::runtime_error("dataset has " + std::to_string(dataset.feature_names.size()) +
                             " feature columns, network expects " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (dataset.feature_names[i] != expected[i]) {
      throw std::runtime_error("dataset column " + std::to_string(i + 1) + " is '" +
                               dataset.feature_names[i] + "', expected '" + expected[i] + "'");
    }
  }
}

std::pair<TrainingDataset, TrainingDataset> split_dataset(const TrainingDataset& dataset,
                                                          double holdout_fraction, Rng& rng) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw std::invalid_argument("holdout_fraction must be in [0, 1)");
  }
  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i >= 1; --i) {
    const int j = static_cast<int>(uniform_int(rng, 0, i));
    std::swap(order[i], order[j]);
  }
  const int holdout = static_cast<int>(std::llround(holdout_fraction * n));
  auto take = [&](int first, int count) {
    TrainingDataset part;
    part.feature_names = dataset.feature_names;
    for (int k = first; k < first + count; ++k) {
      part.rows.push_back(dataset.rows[order[k]]);
      part.targets.push_back(dataset.targets[order[k]]);
      if (!dataset.fingerprints.empty()) part.fingerprints.push_back(dataset.fingerprints[order[k]]);
    }
    return part;
  };
  return {take(0, n - holdout), take(n - holdout, holdout)};
}

}  // namespace phaseopt::surrogate
