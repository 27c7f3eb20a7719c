#include "phaseopt/bga.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace phaseopt::bga {

double surrogate_fitness(const surrogate::Model& model, std::span<const double> state_block,
                         std::span<const int> genes, double penalty) {
  std::vector<double> features;
  features.reserve(genes.size() + state_block.size());
  for (int g : genes) features.push_back(static_cast<double>(g));
  features.insert(features.end(), state_block.begin(), state_block.end());
  const double predicted = model.predict(features);
  if (!std::isfinite(predicted) || predicted <= 0.0) return -penalty;
  return -predicted;
}

ga::Chromosome extract_final_plan(const std::vector<ga::Chromosome>& population,
                                  const ga::Layout& layout) {
  if (population.empty()) throw std::invalid_argument("empty population");
  const int genes = layout.total_genes();
  std::vector<double> mean(genes, 0.0);
  for (const auto& c : population) {
    for (int g = 0; g < genes; ++g) mean[g] += c[g];
  }
  for (double& m : mean) m /= population.size();
  ga::Chromosome plan;
  plan.reserve(genes);
  for (const auto& slot : layout.slots) {
    const std::span<const double> raw(mean.data() + slot.offset, slot.phase_count);
    const auto repaired = ga::detail::repair_durations(raw, slot.cycle_length);
    plan.insert(plan.end(), repaired.begin(), repaired.end());
  }
  return plan;
}

std::vector<PhaseStat> phase_statistics(const std::vector<ga::Chromosome>& population,
                                        const ga::Layout& layout) {
  if (population.empty()) throw std::invalid_argument("empty population");
  std::vector<PhaseStat> stats;
  const double n = static_cast<double>(population.size());
  for (const auto& slot : layout.slots) {
    for (int k = 0; k < slot.phase_count; ++k) {
      const int g = slot.offset + k;
      double mean = 0.0;
      for (const auto& c : population) mean += c[g];
      mean /= n;
      double var = 0.0;
      for (const auto& c : population) {
        const double d = c[g] - mean;
        var += d * d;
      }
      PhaseStat stat;
      stat.phase_id = "p_" + slot.controller_id + "_" + std::to_string(k + 1);
      stat.mean = mean;
      stat.stddev = std::sqrt(var / n);
      stats.push_back(std::move(stat));
    }
  }
  return stats;
}

BgaResult run_bga_ml(const BgaConfig& config, const net::NetworkSpec& network,
                     const std::optional<net::Incident>& incident, const surrogate::Model& model,
                     const std::optional<ga::Chromosome>& baseline) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();

  const ga::Layout layout = ga::layout_from(network);
  BgaResult result;
  if (baseline) {
    if (static_cast<int>(baseline->size()) != layout.total_genes()) {
      throw std::invalid_argument("baseline plan length does not match the network");
    }
    result.baseline = *baseline;
  } else {
    result.baseline = ga::chromosome_from_plan(layout, net::uniform_plan(network));
  }

  const assign::Evaluator oracle(network, incident, config.solve, config.penalty);
  const assign::AssignmentResult baseline_state = oracle.solve_genes(result.baseline);
  if (baseline_state.infeasible) {
    throw std::runtime_error("baseline plan is infeasible under the assignment model");
  }

  const std::vector<int> intervals = config.feature_intervals.empty()
                                         ? surrogate::snapshot_intervals(incident, config.solve)
                                         : config.feature_intervals;
  const std::vector<std::string> expected = surrogate::feature_names(network, intervals);
  if (model.feature_names.size() != expected.size()) {
    throw std::runtime_error("model has " + std::to_string(model.feature_names.size()) +
                             " features, network produces " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (model.feature_names[i] != expected[i]) {
      throw std::runtime_error("model feature " + std::to_string(i + 1) + " is '" +
                               model.feature_names[i] + "', network produces '" + expected[i] + "'");
    }
  }

  const std::vector<double> state_block =
      surrogate::extract_features(network, {}, baseline_state, intervals);

  const auto fitness = [&](std::span<const int> genes) {
    return surrogate_fitness(model, state_block, genes, config.penalty);
  };
  ga::GaResult ga_result = ga::run_ga(config.ga, layout, fitness, config.penalty);

  result.final_population = std::move(ga_result.final_population);
  result.log = std::move(ga_result.log);
  result.final_plan = extract_final_plan(result.final_population, layout);
  result.phase_stats = phase_statistics(result.final_population, layout);
  result.final_predicted_fitness =
      surrogate_fitness(model, state_block, result.final_plan, config.penalty);
  result.final_plan_oracle_ttt = oracle.solve_genes(result.final_plan).total_travel_time;
  result.wall_ms_total = std::chrono::duration<double, std::milli>(clock::now() - started).count();
  return result;
}

int convergence_generation(const ga::GenerationLog& log, double rel_tol) {
  if (log.empty()) throw std::invalid_argument("empty generation log");
  std::vector<double> best_so_far;
  best_so_far.reserve(log.size());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : log) {
    best = std::max(best, e.best_fitness);
    best_so_far.push_back(best);
  }
  const double final_best = best_so_far.back();
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (std::abs(best_so_far[i] - final_best) <= rel_tol * std::abs(final_best)) {
      return log[i].generation;
    }
  }
  return log.back().generation;
}

ComparisonReport compare_runs(const ga::GenerationLog& ga_log, double ga_best_fitness,
                              double ga_wall_ms, const BgaResult& bga) {
  ComparisonReport report;
  report.ga_best_fitness = ga_best_fitness;
  report.bga_predicted_fitness = bga.final_predicted_fitness;
  report.bga_oracle_ttt = bga.final_plan_oracle_ttt;
  report.ga_convergence_generation = convergence_generation(ga_log);
  report.bga_convergence_generation = convergence_generation(bga.log);
  report.ga_wall_ms = ga_wall_ms;
  report.bga_wall_ms = bga.wall_ms_total;
  return report;
}

void write_comparison_csv(const ga::GenerationLog& ga_log, const ga::GenerationLog& bga_log,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "generation,engine,fitness\n";
  auto dump = [&](const ga::GenerationLog& log, const char* engine) {
    for (const auto& e : log) {
      for (double f : e.fitnesses) {
        out << e.generation << ',' << engine << ',' << fmt_double(f) << '\n';
      }
    }
  };
  dump(ga_log, "ga");
  dump(bga_log, "bga");
}

void write_phase_stats_csv(const std::vector<PhaseStat>& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "phase,mean,stddev\n";
  for (const auto& s : stats) {
    out << s.phase_id << ',' << fmt_double(s.mean) << ',' << fmt_double(s.stddev) << '\n';
  }
}

}  // namespace phaseopt::bga
