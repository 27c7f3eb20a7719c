#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "phaseopt/ga.hpp"

using namespace phaseopt;

namespace {

bool chromosome_valid(const ga::Chromosome& c, const ga::Layout& layout) {
  if (static_cast<int>(c.size()) != layout.total_genes()) return false;
  for (const auto& slot : layout.slots) {
    int sum = 0;
    for (int k = 0; k < slot.phase_count; ++k) {
      const int g = c[slot.offset + k];
      if (g < 0) return false;
      sum += g;
    }
    if (sum != slot.cycle_length) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("ga");

TEST_CASE("layout mirrors the controllers") {
  const auto network = net::build_fixture();
  const auto layout = ga::layout_from(network);
  REQUIRE(layout.slots.size() == 4);
  CHECK(layout.total_genes() == 16);
  CHECK(layout.slots[0].offset == 0);
  CHECK(layout.slots[3].offset == 12);
  for (const auto& slot : layout.slots) CHECK(slot.cycle_length == 90);
}

TEST_CASE("chromosome and plan conversions invert each other") {
  const auto network = net::build_fixture();
  const auto layout = ga::layout_from(network);
  ga::Chromosome c(16);
  std::iota(c.begin(), c.end(), 10);  // not a valid plan, conversion doesn't care
  const auto plan = ga::plan_from_chromosome(layout, c);
  CHECK(ga::chromosome_from_plan(layout, plan) == c);
  CHECK(plan.timings[1].durations == std::vector<int>{14, 15, 16, 17});
}

TEST_CASE("sampled chromosomes are valid plans") {
  const auto layout = ga::layout_from(net::build_fixture());
  Rng rng = make_rng(3, "test.sample");
  for (int i = 0; i < 200; ++i) {
    CHECK(chromosome_valid(ga::sample_chromosome(layout, rng), layout));
  }
}

TEST_CASE("the first phase draw spans the whole cycle") {
  const auto layout = ga::layout_from(net::build_single_junction_fixture());
  Rng rng = make_rng(11, "test.spread");
  double mean = 0.0;
  int saw_small = 0, saw_large = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const auto c = ga::sample_chromosome(layout, rng);
    mean += c[0];
    if (c[0] <= 10) ++saw_small;
    if (c[0] >= 80) ++saw_large;
  }
  mean /= n;
  CHECK(mean == doctest::Approx(45.0).epsilon(0.05));
  CHECK(saw_small > 0);
  CHECK(saw_large > 0);
}

TEST_CASE("leftover seconds go to the largest fractions, earliest first") {
  const std::vector<double> even{22.5, 22.5, 22.5, 22.5};
  CHECK(ga::detail::repair_durations(even, 90) == std::vector<int>{23, 23, 22, 22});

  const std::vector<double> mixed{10.2, 39.7, 20.05, 20.05};
  CHECK(ga::detail::repair_durations(mixed, 90) == std::vector<int>{10, 40, 20, 20});

  const std::vector<double> exact{30.0, 40.0, 20.0};
  CHECK(ga::detail::repair_durations(exact, 90) == std::vector<int>{30, 40, 20});
}

TEST_CASE("tournament prefers the fitter draw") {
  const std::vector<double> fitnesses{-10.0, -1.0, -5.0};
  Rng rng = make_rng(5, "test.tournament");
  int wins = 0;
  const int n = 3000;
  for (int i = 0; i < n; ++i) {
    const int pick = ga::tournament(fitnesses, rng);
    REQUIRE(pick >= 0);
    REQUIRE(pick < 3);
    if (pick == 1) ++wins;
  }
  // index 1 is drawn in either slot with probability 5/9
  CHECK(wins > n * 0.45);
  CHECK(wins < n * 0.65);
}

TEST_CASE("crossover without a rate event copies the parents") {
  const auto layout = ga::layout_from(net::build_fixture());
  Rng init = make_rng(9, "test.xover");
  const auto mother = ga::sample_chromosome(layout, init);
  const auto father = ga::sample_chromosome(layout, init);
  Rng rng = make_rng(9, "test.xover2");
  const auto [c1, c2] = ga::crossover(mother, father, layout, 0.0, rng);
  CHECK(c1 == mother);
  CHECK(c2 == father);
}

TEST_CASE("crossover children are valid blends") {
  const auto layout = ga::layout_from(net::build_fixture());
  Rng init = make_rng(10, "test.blend");
  for (int i = 0; i < 100; ++i) {
    const auto mother = ga::sample_chromosome(layout, init);
    const auto father = ga::sample_chromosome(layout, init);
    const auto [c1, c2] = ga::crossover(mother, father, layout, 1.0, init);
    CHECK(chromosome_valid(c1, layout));
    CHECK(chromosome_valid(c2, layout));
    for (std::size_t g = 0; g < c1.size(); ++g) {
      const int lo = std::min(mother[g], father[g]);
      const int hi = std::max(mother[g], father[g]);
      CHECK(c1[g] >= lo - 1);
      CHECK(c1[g] <= hi + 1);
    }
  }
}

TEST_CASE("mutation moves whole seconds inside one controller") {
  const auto layout = ga::layout_from(net::build_fixture());
  Rng init = make_rng(12, "test.mut");
  for (int i = 0; i < 200; ++i) {
    const auto before = ga::sample_chromosome(layout, init);
    auto after = before;
    ga::mutate(after, layout, 1.0, init);
    CHECK(chromosome_valid(after, layout));
    int changed = 0;
    int slot_of_change = -1;
    for (std::size_t g = 0; g < before.size(); ++g) {
      if (before[g] != after[g]) {
        ++changed;
        for (std::size_t s = 0; s < layout.slots.size(); ++s) {
          const auto& slot = layout.slots[s];
          if (static_cast<int>(g) >= slot.offset &&
              static_cast<int>(g) < slot.offset + slot.phase_count) {
            if (slot_of_change < 0) slot_of_change = static_cast<int>(s);
            CHECK(slot_of_change == static_cast<int>(s));
          }
        }
      }
    }
    CHECK(changed == 2);  // cycle 90 always has a donor with at least one second
  }
}

TEST_CASE("mutation with zero rate is a no-op") {
  const auto layout = ga::layout_from(net::build_fixture());
  Rng init = make_rng(13, "test.mut0");
  auto c = ga::sample_chromosome(layout, init);
  const auto before = c;
  ga::mutate(c, layout, 0.0, init);
  CHECK(c == before);
}

TEST_CASE("the search improves a smooth objective and logs every generation") {
  const auto layout = ga::layout_from(net::build_fixture());
  // reward plans close to an arbitrary target
  const ga::Chromosome target{40, 20, 20, 10, 10, 40, 20, 20, 20, 20, 40, 10, 10, 20, 20, 40};
  const auto fitness = [&](std::span<const int> genes) {
    double sum = 0.0;
    for (std::size_t i = 0; i < genes.size(); ++i) {
      const double d = genes[i] - target[i];
      sum += d * d;
    }
    return -sum;
  };
  ga::GaConfig config;
  config.population_size = 40;
  config.generations = 15;
  config.seed = 21;
  const auto result = ga::run_ga(config, layout, fitness);

  REQUIRE(result.log.size() == 16);
  CHECK(result.log.front().generation == 0);
  CHECK(result.log.back().generation == 15);
  for (const auto& entry : result.log) {
    CHECK(entry.fitnesses.size() == 40);
    CHECK(entry.best_fitness >= entry.mean_fitness);
    CHECK(chromosome_valid(entry.best_chromosome, layout));
  }
  CHECK(result.final_population.size() == 40);
  CHECK(chromosome_valid(result.best, layout));
  // best-ever must equal the running maximum of the per-generation bests
  double running = -std::numeric_limits<double>::infinity();
  for (const auto& entry : result.log) running = std::max(running, entry.best_fitness);
  CHECK(result.best_fitness == running);
  CHECK(result.best_fitness > result.log.front().best_fitness);
  CHECK(result.best_fitness == fitness(result.best));
}

TEST_CASE("same seed same run, different seed different run") {
  const auto layout = ga::layout_from(net::build_fixture());
  const auto fitness = [](std::span<const int> genes) {
    return -static_cast<double>(genes[0] * genes[0]);
  };
  ga::GaConfig config;
  config.population_size = 12;
  config.generations = 4;
  config.seed = 100;
  const auto a = ga::run_ga(config, layout, fitness);
  const auto b = ga::run_ga(config, layout, fitness);
  CHECK(a.best == b.best);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].best_fitness == b.log[i].best_fitness);
    CHECK(a.log[i].fitnesses == b.log[i].fitnesses);
  }
  config.seed = 101;
  const auto c = ga::run_ga(config, layout, fitness);
  bool differs = c.best != a.best;
  for (std::size_t i = 0; !differs && i < a.log.size(); ++i) {
    differs = a.log[i].fitnesses != c.log[i].fitnesses;
  }
  CHECK(differs);
}

TEST_CASE("a throwing objective scores the penalty instead of crashing") {
  const auto layout = ga::layout_from(net::build_single_junction_fixture());
  ga::GaConfig config;
  config.population_size = 8;
  config.generations = 2;
  config.seed = 3;
  const auto result = ga::run_ga(
      config, layout, [](std::span<const int>) -> double { throw std::runtime_error("boom"); },
      1e6);
  CHECK(result.best_fitness == -1e6);
  for (const auto& entry : result.log) {
    for (double f : entry.fitnesses) CHECK(f == -1e6);
  }
}

TEST_CASE("non-finite fitness values are clamped to the penalty") {
  const auto layout = ga::layout_from(net::build_single_junction_fixture());
  ga::GaConfig config;
  config.population_size = 8;
  config.generations = 1;
  config.seed = 4;
  const auto result = ga::run_ga(
      config, layout,
      [](std::span<const int>) { return std::numeric_limits<double>::quiet_NaN(); }, 123.0);
  CHECK(result.best_fitness == -123.0);
}

TEST_CASE("generation log lands on disk with chromosome fingerprints") {
  namespace fs = std::filesystem;
  const auto layout = ga::layout_from(net::build_single_junction_fixture());
  ga::GaConfig config;
  config.population_size = 6;
  config.generations = 3;
  config.seed = 8;
  const auto result = ga::run_ga(config, layout, [](std::span<const int> g) {
    return -static_cast<double>(g[0]);
  });
  const auto path = fs::temp_directory_path() / "ga_log_test.csv";
  ga::write_generation_log_csv(result.log, path.string());
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "generation,best_fitness,mean_fitness,wall_ms,best_chromosome");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    CHECK(std::count(line.begin(), line.end(), ';') == 3);  // four genes
  }
  CHECK(rows == 4);
  fs::remove(path);
}

TEST_SUITE_END();
