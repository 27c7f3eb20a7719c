#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phaseopt/assign.hpp"
#include "phaseopt/ga.hpp"
#include "phaseopt/surrogate/dataset.hpp"
#include "phaseopt/surrogate/model.hpp"

namespace phaseopt::bga {

struct BgaConfig {
  ga::GaConfig ga;
  double penalty = kDefaultPenalty;
  std::vector<int> feature_intervals;  // empty means the dataset snapshot rule
  assign::SolveOptions solve;
};

// Builds [plan genes..., baseline link state...] and asks the model. A
// predicted total travel time at or below zero is nonsense, so it scores
// -penalty instead of a bogus reward.
double surrogate_fitness(const surrogate::Model& model, std::span<const double> state_block,
                         std::span<const int> genes, double penalty);

// Gene-wise mean of the final population, repaired back to whole seconds per
// controller.
ga::Chromosome extract_final_plan(const std::vector<ga::Chromosome>& population,
                                  const ga::Layout& layout);

struct PhaseStat {
  std::string phase_id;  // matches the plan feature name, e.g. p_i1_2
  double mean = 0.0;
  double stddev = 0.0;
};

std::vector<PhaseStat> phase_statistics(const std::vector<ga::Chromosome>& population,
                                        const ga::Layout& layout);

struct BgaResult {
  ga::Chromosome baseline;
  ga::Chromosome final_plan;
  std::vector<ga::Chromosome> final_population;
  double final_predicted_fitness = 0.0;
  double final_plan_oracle_ttt = 0.0;  // vehicle-hours from the assignment model
  std::vector<PhaseStat> phase_stats;
  double wall_ms_total = 0.0;
  ga::GenerationLog log;
};

// GA driven by the surrogate: the baseline plan (uniform when omitted) is
// solved once by the assignment model to freeze the link-state features, then
// every candidate is scored by the model alone. The returned plan is also
// scored once by the assignment model for reporting.
BgaResult run_bga_ml(const BgaConfig& config, const net::NetworkSpec& network,
                     const std::optional<net::Incident>& incident, const surrogate::Model& model,
                     const std::optional<ga::Chromosome>& baseline = std::nullopt);

// First generation whose best-so-far fitness is within rel_tol of the final
// best-so-far value.
int convergence_generation(const ga::GenerationLog& log, double rel_tol = 0.01);

struct ComparisonReport {
  double ga_best_fitness = 0.0;
  double bga_predicted_fitness = 0.0;
  double bga_oracle_ttt = 0.0;
  int ga_convergence_generation = 0;
  int bga_convergence_generation = 0;
  double ga_wall_ms = 0.0;
  double bga_wall_ms = 0.0;
};

ComparisonReport compare_runs(const ga::GenerationLog& ga_log, double ga_best_fitness,
                              double ga_wall_ms, const BgaResult& bga);

// One row per individual per generation for both engines.
void write_comparison_csv(const ga::GenerationLog& ga_log, const ga::GenerationLog& bga_log,
                          const std::string& path);

void write_phase_stats_csv(const std::vector<PhaseStat>& stats, const std::string& path);

}  // namespace phaseopt::bga
