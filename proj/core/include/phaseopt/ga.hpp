#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phaseopt/common.hpp"
#include "phaseopt/net.hpp"
#include "phaseopt/rng.hpp"

namespace phaseopt::ga {

// A chromosome is one flat vector of phase durations, controllers laid out
// back to back in network order. Every slot's genes are non-negative and sum
// to that controller's cycle length; the variation operators preserve this.
using Chromosome = std::vector<int>;

struct Layout {
  struct Slot {
    std::string controller_id;
    int phase_count = 0;
    int cycle_length = 0;
    int offset = 0;
  };
  std::vector<Slot> slots;

  int total_genes() const {
    int n = 0;
    for (const auto& s : slots) n += s.phase_count;
    return n;
  }
};

Layout layout_from(const net::NetworkSpec& network);

net::SignalPlan plan_from_chromosome(const Layout& layout, const Chromosome& chromosome);
Chromosome chromosome_from_plan(const Layout& layout, const net::SignalPlan& plan);

// Uniform-remainder sampler: each phase except the last draws from whatever
// budget is left, the last takes the remainder.
Chromosome sample_chromosome(const Layout& layout, Rng& rng);
std::vector<Chromosome> init_population(const Layout& layout, int population_size, Rng& rng);

// Binary tournament with replacement. Returns the index of the fitter of two
// uniform draws; on a tie the first draw wins.
int tournament(std::span<const double> fitnesses, Rng& rng);

// Whole-arithmetic crossover. One rate draw decides whether the pair mixes;
// if it does, each child blends the parents with its own uniform weight and
// is repaired back to integer durations. Otherwise the children are copies.
std::pair<Chromosome, Chromosome> crossover(const Chromosome& mother, const Chromosome& father,
                                            const Layout& layout, double crossover_rate, Rng& rng);

// Duration-transfer mutation: pick a controller, move a random number of
// seconds from one of its non-empty phases to another phase.
void mutate(Chromosome& chromosome, const Layout& layout, double mutation_rate, Rng& rng);

namespace detail {
// Rounds raw durations down and hands the leftover seconds to the phases with
// the largest fractional parts, lowest phase index first on ties.
std::vector<int> repair_durations(std::span<const double> raw, int cycle_length);
}  // namespace detail

struct GaConfig {
  int population_size = 75;
  int generations = 20;
  double crossover_rate = 0.8;
  double mutation_rate = 0.1;
  std::uint64_t seed = 0;
};

struct GenerationEntry {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double wall_ms = 0.0;
  Chromosome best_chromosome;
  std::vector<double> fitnesses;
};

using GenerationLog = std::vector<GenerationEntry>;

struct GaResult {
  Chromosome best;
  double best_fitness = 0.0;
  std::vector<Chromosome> final_population;
  std::vector<double> final_fitnesses;
  GenerationLog log;
};

using FitnessFn = std::function<double(std::span<const int>)>;

// Generational GA, no elitism; the returned best is tracked across all
// generations. Fitness calls that throw or return a non-finite value score
// -penalty.
GaResult run_ga(const GaConfig& config, const Layout& layout, const FitnessFn& fitness,
                double penalty = kDefaultPenalty);

void write_generation_log_csv(const GenerationLog& log, const std::string& path);

}  // namespace phaseopt::ga
