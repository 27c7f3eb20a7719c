#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "phaseopt/bga.hpp"

using namespace phaseopt;

namespace {

namespace fs = std::filesystem;

surrogate::Model constant_model(double value) {
  surrogate::Model model;
  model.spec.kind = surrogate::RegressorKind::linear;
  model.feature_names = {"p_x_1", "s1"};
  model.coefficients = {0.0, 0.0};
  model.intercept = value;
  return model;
}

ga::GenerationLog log_from_bests(const std::vector<double>& bests) {
  ga::GenerationLog log;
  for (std::size_t i = 0; i < bests.size(); ++i) {
    ga::GenerationEntry e;
    e.generation = static_cast<int>(i);
    e.best_fitness = bests[i];
    e.mean_fitness = bests[i];
    e.fitnesses = {bests[i], bests[i] - 1.0};
    log.push_back(std::move(e));
  }
  return log;
}

}  // namespace

TEST_SUITE_BEGIN("bga");

TEST_CASE("nonsense predictions score the penalty, sane ones their negation") {
  const std::vector<double> state{7.5};
  const std::vector<int> genes{5};

  CHECK(bga::surrogate_fitness(constant_model(-3.0), state, genes, 1e6) == -1e6);
  CHECK(bga::surrogate_fitness(constant_model(0.0), state, genes, 1e6) == -1e6);
  CHECK(bga::surrogate_fitness(constant_model(16.06), state, genes, 1e6) == -16.06);

  // the gene block is part of the feature row
  auto slope = constant_model(1.0);
  slope.coefficients = {2.0, 1.0};
  // 1 + 2*5 + 1*7.5 = 18.5
  CHECK(bga::surrogate_fitness(slope, state, genes, 1e6) == -18.5);
}

TEST_CASE("the final plan is the repaired population mean") {
  const auto layout = ga::layout_from(net::build_single_junction_fixture());
  std::vector<ga::Chromosome> population(8, ga::Chromosome{34, 13, 7, 36});
  population.push_back({33, 15, 6, 36});
  population.push_back({33, 15, 7, 35});
  // gene means are 33.8, 13.4, 6.9, 35.9
  CHECK(bga::extract_final_plan(population, layout) == ga::Chromosome{34, 13, 7, 36});

  // the mean does not care about population order
  std::reverse(population.begin(), population.end());
  CHECK(bga::extract_final_plan(population, layout) == ga::Chromosome{34, 13, 7, 36});

  CHECK_THROWS_AS(bga::extract_final_plan({}, layout), std::invalid_argument);
}

TEST_CASE("phase statistics are population moments") {
  const auto layout = ga::layout_from(net::build_single_junction_fixture());
  const std::vector<ga::Chromosome> population{
      {10, 20, 30, 30}, {10, 20, 30, 30}, {20, 20, 20, 30}, {20, 20, 20, 30}};
  const auto stats = bga::phase_statistics(population, layout);
  REQUIRE(stats.size() == 4);
  CHECK(stats[0].phase_id == "p_j1_1");
  CHECK(stats[3].phase_id == "p_j1_4");
  CHECK(stats[0].mean == doctest::Approx(15.0));
  CHECK(stats[0].stddev == doctest::Approx(5.0));
  CHECK(stats[1].mean == doctest::Approx(20.0));
  CHECK(stats[1].stddev == doctest::Approx(0.0));
  CHECK(stats[2].stddev == doctest::Approx(5.0));
  CHECK(stats[3].mean == doctest::Approx(30.0));
  CHECK(stats[3].stddev == doctest::Approx(0.0));
}

TEST_CASE("convergence generation finds the first near-final plateau") {
  CHECK(bga::convergence_generation(log_from_bests({-100.0, -10.0, -10.5, -10.0})) == 1);
  CHECK(bga::convergence_generation(log_from_bests({-5.0, -5.0, -5.0})) == 0);
  CHECK(bga::convergence_generation(log_from_bests({-5.0, -4.0, -3.0, -2.0})) == 3);
  // a wider tolerance accepts earlier generations: 0.6 * |-2| = 1.2 admits -3
  CHECK(bga::convergence_generation(log_from_bests({-5.0, -4.0, -3.0, -2.0}), 0.6) == 2);
  CHECK_THROWS_AS(bga::convergence_generation({}), std::invalid_argument);
}

TEST_CASE("a surrogate-driven run produces a valid plan and honest reporting") {
  const auto network = net::build_single_junction_fixture();

  surrogate::DatasetConfig data_config;
  data_config.n_runs = 150;
  data_config.seed = 51;
  const auto dataset = surrogate::generate_dataset(network, std::nullopt, data_config);
  REQUIRE(dataset.size() > 40);

  surrogate::RegressorSpec spec;
  spec.kind = surrogate::RegressorKind::xgbt;
  spec.max_depth = 4;
  spec.n_estimators = 40;
  spec.learning_rate = 0.1;
  spec.subsample = 1.0;
  const auto model = surrogate::fit(spec, dataset, 52);

  bga::BgaConfig config;
  config.ga.population_size = 20;
  config.ga.generations = 5;
  config.ga.seed = 53;
  const auto result = bga::run_bga_ml(config, network, std::nullopt, model);

  REQUIRE(result.final_plan.size() == 4);
  int sum = 0;
  for (int g : result.final_plan) {
    CHECK(g >= 0);
    sum += g;
  }
  CHECK(sum == 90);
  CHECK(result.baseline == ga::Chromosome{23, 23, 22, 22});
  CHECK(result.log.size() == 6);
  CHECK(result.final_population.size() == 20);
  CHECK(result.phase_stats.size() == 4);
  CHECK(std::isfinite(result.final_plan_oracle_ttt));
  CHECK(result.final_plan_oracle_ttt > 0.0);
  CHECK(result.final_predicted_fitness < 0.0);
  CHECK(result.wall_ms_total > 0.0);

  // seeded end to end, so a rerun reproduces the run exactly
  const auto again = bga::run_bga_ml(config, network, std::nullopt, model);
  CHECK(again.final_plan == result.final_plan);
  CHECK(again.final_predicted_fitness == result.final_predicted_fitness);
  CHECK(again.final_plan_oracle_ttt == result.final_plan_oracle_ttt);

  // reporting plumbing on top of the same run
  const auto report = bga::compare_runs(result.log, -123.0, 77.0, result);
  CHECK(report.ga_best_fitness == -123.0);
  CHECK(report.ga_wall_ms == 77.0);
  CHECK(report.bga_oracle_ttt == result.final_plan_oracle_ttt);
  CHECK(report.bga_convergence_generation >= 0);
  CHECK(report.bga_convergence_generation <= 5);
}

TEST_CASE("a model trained on the wrong schema is rejected by name") {
  const auto network = net::build_single_junction_fixture();
  surrogate::DatasetConfig data_config;
  data_config.n_runs = 30;
  data_config.seed = 54;
  const auto dataset = surrogate::generate_dataset(network, std::nullopt, data_config);
  surrogate::RegressorSpec spec;
  spec.max_depth = 2;
  spec.n_estimators = 3;
  spec.subsample = 1.0;
  auto model = surrogate::fit(spec, dataset, 55);
  model.feature_names[1] = "p_elsewhere_2";

  bga::BgaConfig config;
  config.ga.population_size = 4;
  config.ga.generations = 1;
  try {
    bga::run_bga_ml(config, network, std::nullopt, model);
    FAIL("schema mismatch went unnoticed");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("feature 2") != std::string::npos);
    CHECK(what.find("p_elsewhere_2") != std::string::npos);
  }
}

TEST_CASE("an infeasible baseline is reported, not scored") {
  const auto network = net::build_single_junction_fixture();
  const auto model = constant_model(10.0);  // wrong schema never reached
  bga::BgaConfig config;
  // starving one approach blocks its only route
  const ga::Chromosome starved{90, 0, 0, 0};
  CHECK_THROWS_AS(
      bga::run_bga_ml(config, network, std::nullopt, model, starved),
      std::runtime_error);
}

TEST_CASE("comparison and phase stat files carry one row per datum") {
  const auto dir = fs::temp_directory_path() / "phaseopt_bga_csv";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const auto ga_log = log_from_bests({-5.0, -4.0});
  const auto bga_log = log_from_bests({-6.0, -5.5, -5.2});
  const auto cmp_path = (dir / "comparison.csv").string();
  bga::write_comparison_csv(ga_log, bga_log, cmp_path);
  std::ifstream in(cmp_path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "generation,engine,fitness");
  int ga_rows = 0, bga_rows = 0;
  while (std::getline(in, line)) {
    if (line.find(",ga,") != std::string::npos) ++ga_rows;
    if (line.find(",bga,") != std::string::npos) ++bga_rows;
  }
  CHECK(ga_rows == 4);   // two generations of two fitnesses
  CHECK(bga_rows == 6);  // three generations of two

  std::vector<bga::PhaseStat> stats{{"p_j1_1", 15.0, 5.0}, {"p_j1_2", 20.0, 0.0}};
  const auto stats_path = (dir / "phase_stats.csv").string();
  bga::write_phase_stats_csv(stats, stats_path);
  std::ifstream sin(stats_path);
  REQUIRE(std::getline(sin, line));
  CHECK(line == "phase,mean,stddev");
  REQUIRE(std::getline(sin, line));
  CHECK(line == "p_j1_1,15,5");
  REQUIRE(std::getline(sin, line));
  CHECK(line == "p_j1_2,20,0");

  fs::remove_all(dir);
}

TEST_SUITE_END();
