// Microbenchmarks for the hot paths: the equilibrium solver that dominates
// dataset generation and oracle-driven search, the tree ensemble on both
// sides (fit and predict), and one whole generation of the search loop.

#include <benchmark/benchmark.h>

#include "phaseopt/bga.hpp"
#include "phaseopt/surrogate/dataset.hpp"

using namespace phaseopt;

namespace {

net::Incident ring_incident() {
  net::Incident incident;
  incident.link_id = "c7_i4";
  incident.lanes_blocked = 2;
  incident.start_s = 0.0;
  incident.duration_s = 3600.0;
  return incident;
}

const surrogate::TrainingDataset& fixture_dataset() {
  static const surrogate::TrainingDataset dataset = [] {
    surrogate::DatasetConfig config;
    config.n_runs = 1200;
    config.seed = 404;
    return surrogate::generate_dataset(net::build_fixture(), ring_incident(), config);
  }();
  return dataset;
}

void solve_fixture(benchmark::State& state, std::optional<net::Incident> incident) {
  const auto network = net::build_fixture();
  const assign::Evaluator oracle(network, incident);
  const auto plan = net::uniform_plan(network);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.solve(plan).total_travel_time);
  }
}

void bm_solve_ue_fixture(benchmark::State& state) { solve_fixture(state, std::nullopt); }
void bm_solve_ue_fixture_incident(benchmark::State& state) {
  solve_fixture(state, ring_incident());
}

void bm_solve_ue_single_junction(benchmark::State& state) {
  const auto network = net::build_single_junction_fixture();
  const assign::Evaluator oracle(network);
  const auto plan = net::uniform_plan(network);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.solve(plan).total_travel_time);
  }
}

void bm_surrogate_fit(benchmark::State& state) {
  const auto& data = fixture_dataset();
  surrogate::RegressorSpec spec;
  spec.n_estimators = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(surrogate::fit(spec, data, 7).base_score);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}

void bm_surrogate_predict(benchmark::State& state) {
  const auto& data = fixture_dataset();
  const auto model = surrogate::fit(surrogate::RegressorSpec{}, data, 7);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(data.rows[i]));
    i = (i + 1) % data.rows.size();
  }
  state.SetItemsProcessed(state.iterations());
}

// one generation of the search, population 75, against each fitness backend
void bm_generation_oracle(benchmark::State& state) {
  const auto network = net::build_fixture();
  const auto layout = ga::layout_from(network);
  const assign::Evaluator oracle(network, ring_incident());
  ga::GaConfig config;
  config.population_size = 75;
  config.generations = 1;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    config.seed = seed++;
    benchmark::DoNotOptimize(
        ga::run_ga(config, layout, [&](std::span<const int> g) { return oracle.fitness_genes(g); })
            .best_fitness);
  }
}

void bm_generation_surrogate(benchmark::State& state) {
  const auto network = net::build_fixture();
  const auto model = surrogate::fit(surrogate::RegressorSpec{}, fixture_dataset(), 7);
  bga::BgaConfig config;
  config.ga.population_size = 75;
  config.ga.generations = 1;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    config.ga.seed = seed++;
    benchmark::DoNotOptimize(
        bga::run_bga_ml(config, network, ring_incident(), model).final_predicted_fitness);
  }
}

}  // namespace

BENCHMARK(bm_solve_ue_fixture)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_solve_ue_fixture_incident)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_solve_ue_single_junction)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_surrogate_fit)->Arg(50)->Arg(190)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_surrogate_predict)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_generation_oracle)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_generation_surrogate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
