#include "phaseopt/ga.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace phaseopt::ga {

Layout layout_from(const net::NetworkSpec& network) {
  Layout layout;
  int offset = 0;
  for (const auto& c : network.controllers) {
    Layout::Slot slot;
    slot.controller_id = c.id;
    slot.phase_count = c.num_phases();
    slot.cycle_length = c.cycle_length;
    slot.offset = offset;
    offset += slot.phase_count;
    layout.slots.push_back(std::move(slot));
  }
  return layout;
}

net::SignalPlan plan_from_chromosome(const Layout& layout, const Chromosome& chromosome) {
  if (static_cast<int>(chromosome.size()) != layout.total_genes()) {
    throw std::invalid_argument("chromosome length does not match layout");
  }
  net::SignalPlan plan;
  for (const auto& slot : layout.slots) {
    net::ControllerTiming timing;
    timing.controller = slot.controller_id;
    timing.cycle_length = slot.cycle_length;
    timing.durations.assign(chromosome.begin() + slot.offset,
                            chromosome.begin() + slot.offset + slot.phase_count);
    plan.timings.push_back(std::move(timing));
  }
  return plan;
}

Chromosome chromosome_from_plan(const Layout& layout, const net::SignalPlan& plan) {
  Chromosome chromosome;
  chromosome.reserve(layout.total_genes());
  for (const auto& slot : layout.slots) {
    const auto* timing = plan.find(slot.controller_id);
    if (!timing) throw std::invalid_argument("plan is missing controller " + slot.controller_id);
    if (static_cast<int>(timing->durations.size()) != slot.phase_count) {
      throw std::invalid_argument("plan has wrong phase count for controller " + slot.controller_id);
    }
    chromosome.insert(chromosome.end(), timing->durations.begin(), timing->durations.end());
  }
  return chromosome;
}

Chromosome sample_chromosome(const Layout& layout, Rng& rng) {
  Chromosome chromosome;
  chromosome.reserve(layout.total_genes());
  for (const auto& slot : layout.slots) {
    int remaining = slot.cycle_length;
    for (int k = 0; k + 1 < slot.phase_count; ++k) {
      const int d = static_cast<int>(uniform_int(rng, 0, remaining));
      chromosome.push_back(d);
      remaining -= d;
    }
    chromosome.push_back(remaining);
  }
  return chromosome;
}

std::vector<Chromosome> init_population(const Layout& layout, int population_size, Rng& rng) {
  std::vector<Chromosome> population;
  population.reserve(population_size);
  for (int i = 0; i < population_size; ++i) population.push_back(sample_chromosome(layout, rng));
  return population;
}

int tournament(std::span<const double> fitnesses, Rng& rng) {
  const int n = static_cast<int>(fitnesses.size());
  const int a = static_cast<int>(uniform_int(rng, 0, n - 1));
  const int b = static_cast<int>(uniform_int(rng, 0, n - 1));
  return fitnesses[b] > fitnesses[a] ? b : a;
}

namespace detail {

std::vector<int> repair_durations(std::span<const double> raw, int cycle_length) {
  const int n = static_cast<int>(raw.size());
  std::vector<int> durations(n);
  std::vector<double> fraction(n);
  int sum = 0;
  for (int i = 0; i < n; ++i) {
    const double fl = std::floor(raw[i]);
    durations[i] = static_cast<int>(fl);
    fraction[i] = raw[i] - fl;
    sum += durations[i];
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (fraction[a] != fraction[b]) return fraction[a] > fraction[b];
    return a < b;
  });
  int leftover = cycle_length - sum;
  for (int i = 0; leftover > 0; ++i, --leftover) durations[order[i % n]] += 1;
  for (int i = 0; leftover < 0; ++i) {
    const int idx = order[n - 1 - (i % n)];
    if (durations[idx] > 0) {
      durations[idx] -= 1;
      ++leftover;
    }
  }
  return durations;
}

}  // namespace detail

std::pair<Chromosome, Chromosome> crossover(const Chromosome& mother, const Chromosome& father,
                                            const Layout& layout, double crossover_rate, Rng& rng) {
  if (uniform_real01(rng) >= crossover_rate) return {mother, father};
  const double x1 = uniform_real01(rng);
  const double x2 = uniform_real01(rng);
  auto blend = [&](double x) {
    Chromosome child;
    child.reserve(mother.size());
    std::vector<double> raw;
    for (const auto& slot : layout.slots) {
      raw.clear();
      for (int k = 0; k < slot.phase_count; ++k) {
        const int g = slot.offset + k;
        raw.push_back(x * father[g] + (1.0 - x) * mother[g]);
      }
      const auto repaired = detail::repair_durations(raw, slot.cycle_length);
      child.insert(child.end(), repaired.begin(), repaired.end());
    }
    return child;
  };
  return {blend(x1), blend(x2)};
}

void mutate(Chromosome& chromosome, const Layout& layout, double mutation_rate, Rng& rng) {
  if (uniform_real01(rng) >= mutation_rate) return;
  const int s = static_cast<int>(uniform_int(rng, 0, static_cast<int>(layout.slots.size()) - 1));
  const auto& slot = layout.slots[s];
  if (slot.phase_count < 2) return;
  std::vector<int> donors;
  for (int k = 0; k < slot.phase_count; ++k) {
    if (chromosome[slot.offset + k] >= 1) donors.push_back(k);
  }
  if (donors.empty()) return;
  const int donor = donors[uniform_int(rng, 0, static_cast<int>(donors.size()) - 1)];
  const int pick = static_cast<int>(uniform_int(rng, 0, slot.phase_count - 2));
  const int receiver = pick >= donor ? pick + 1 : pick;
  const int amount =
      static_cast<int>(uniform_int(rng, 1, chromosome[slot.offset + donor]));
  chromosome[slot.offset + donor] -= amount;
  chromosome[slot.offset + receiver] += amount;
}

GaResult run_ga(const GaConfig& config, const Layout& layout, const FitnessFn& fitness,
                double penalty) {
  if (config.population_size < 2) throw std::invalid_argument("population_size must be at least 2");
  if (config.generations < 0) throw std::invalid_argument("generations must be non-negative");

  auto safe_fitness = [&](const Chromosome& c) {
    double value;
    try {
      value = fitness(c);
    } catch (...) {
      return -penalty;
    }
    return std::isfinite(value) ? value : -penalty;
  };

  using clock = std::chrono::steady_clock;
  GaResult result;
  result.best_fitness = -std::numeric_limits<double>::infinity();

  auto record = [&](int generation, const std::vector<Chromosome>& population,
                    const std::vector<double>& fitnesses, clock::time_point started) {
    GenerationEntry entry;
    entry.generation = generation;
    int best = 0;
    double sum = 0.0;
    for (int i = 0; i < static_cast<int>(fitnesses.size()); ++i) {
      sum += fitnesses[i];
      if (fitnesses[i] > fitnesses[best]) best = i;
    }
    entry.best_fitness = fitnesses[best];
    entry.mean_fitness = sum / fitnesses.size();
    entry.best_chromosome = population[best];
    entry.fitnesses = fitnesses;
    entry.wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - started).count();
    if (fitnesses[best] > result.best_fitness) {
      result.best_fitness = fitnesses[best];
      result.best = population[best];
    }
    result.log.push_back(std::move(entry));
  };

  Rng init_rng = make_rng(config.seed, "ga.init");
  Rng var_rng = make_rng(config.seed, "ga.variation");

  auto started = clock::now();
  std::vector<Chromosome> population = init_population(layout, config.population_size, init_rng);
  std::vector<double> fitnesses(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) fitnesses[i] = safe_fitness(population[i]);
  record(0, population, fitnesses, started);

  for (int g = 1; g <= config.generations; ++g) {
    started = clock::now();
    std::vector<Chromosome> next;
    next.reserve(population.size());
    while (static_cast<int>(next.size()) < config.population_size) {
      const int ia = tournament(fitnesses, var_rng);
      const int ib = tournament(fitnesses, var_rng);
      auto [c1, c2] = crossover(population[ia], population[ib], layout, config.crossover_rate, var_rng);
      mutate(c1, layout, config.mutation_rate, var_rng);
      mutate(c2, layout, config.mutation_rate, var_rng);
      next.push_back(std::move(c1));
      if (static_cast<int>(next.size()) < config.population_size) next.push_back(std::move(c2));
    }
    population = std::move(next);
    for (std::size_t i = 0; i < population.size(); ++i) fitnesses[i] = safe_fitness(population[i]);
    record(g, population, fitnesses, started);
  }

  result.final_population = std::move(population);
  result.final_fitnesses = std::move(fitnesses);
  return result;
}

void write_generation_log_csv(const GenerationLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "generation,best_fitness,mean_fitness,wall_ms,best_chromosome\n";
  for (const auto& e : log) {
    out << e.generation << ',' << fmt_double(e.best_fitness) << ',' << fmt_double(e.mean_fitness)
        << ',' << fmt_double(e.wall_ms) << ',' << join_ints(e.best_chromosome) << '\n';
  }
}

}  // namespace phaseopt::ga
