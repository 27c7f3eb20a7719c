#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaseopt/bga.hpp"
#include "phaseopt/netio.hpp"
#include "phaseopt/surrogate/tuning.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace phaseopt;

namespace {

struct AppConfig {
  net::NetworkSpec network;
  std::optional<net::Incident> incident;
  assign::SolveOptions solve;
  ga::GaConfig ga;
  double penalty = kDefaultPenalty;
  int dataset_runs = 3500;
  std::vector<int> feature_intervals;
  surrogate::RegressorSpec regressor;
  surrogate::SearchSpace search;
  double holdout_fraction = 0.2;
};

net::NetworkSpec network_from_value(const json& v) {
  if (v.is_string()) {
    const std::string name = v.get<std::string>();
    if (name == "fixture") return net::build_fixture();
    if (name == "single_junction") return net::build_single_junction_fixture();
    net::NetworkSpec network = net::load_network(name);
    net::validate_network(network);
    return network;
  }
  throw std::runtime_error("config key 'network' must be \"fixture\", \"single_junction\" or a file path");
}

AppConfig load_config(const std::string& path) {
  AppConfig config;
  config.network = net::build_fixture();
  if (path.empty()) return config;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + " is not valid JSON: " + e.what());
  }
  if (j.contains("network")) config.network = network_from_value(j["network"]);
  if (j.contains("incident")) {
    const json& inc = j["incident"];
    net::Incident incident;
    incident.link_id = inc.at("link").get<std::string>();
    if (inc.contains("lanes_blocked")) incident.lanes_blocked = inc["lanes_blocked"].get<int>();
    if (inc.contains("start_s")) incident.start_s = inc["start_s"].get<double>();
    if (inc.contains("duration_s")) incident.duration_s = inc["duration_s"].get<double>();
    config.incident = incident;
  }
  if (j.contains("solve")) {
    const json& s = j["solve"];
    if (s.contains("relative_gap_tol")) config.solve.relative_gap_tol = s["relative_gap_tol"].get<double>();
    if (s.contains("max_iterations")) config.solve.max_iterations = s["max_iterations"].get<int>();
    if (s.contains("num_intervals")) config.solve.num_intervals = s["num_intervals"].get<int>();
    if (s.contains("horizon_hours")) config.solve.horizon_hours = s["horizon_hours"].get<double>();
    if (s.contains("wardrop_tolerance")) config.solve.wardrop_tolerance = s["wardrop_tolerance"].get<double>();
  }
  if (j.contains("ga")) {
    const json& g = j["ga"];
    if (g.contains("population_size")) config.ga.population_size = g["population_size"].get<int>();
    if (g.contains("generations")) config.ga.generations = g["generations"].get<int>();
    if (g.contains("crossover_rate")) config.ga.crossover_rate = g["crossover_rate"].get<double>();
    if (g.contains("mutation_rate")) config.ga.mutation_rate = g["mutation_rate"].get<double>();
  }
  if (j.contains("penalty")) config.penalty = j["penalty"].get<double>();
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    if (d.contains("n_runs")) config.dataset_runs = d["n_runs"].get<int>();
    if (d.contains("feature_intervals")) {
      config.feature_intervals = d["feature_intervals"].get<std::vector<int>>();
    }
  }
  if (j.contains("regressor")) {
    const json& r = j["regressor"];
    if (r.contains("kind")) {
      config.regressor.kind = surrogate::regressor_kind_from_string(r["kind"].get<std::string>());
    }
    if (r.contains("max_depth")) config.regressor.max_depth = r["max_depth"].get<int>();
    if (r.contains("learning_rate")) config.regressor.learning_rate = r["learning_rate"].get<double>();
    if (r.contains("n_estimators")) config.regressor.n_estimators = r["n_estimators"].get<int>();
    if (r.contains("subsample")) config.regressor.subsample = r["subsample"].get<double>();
    if (r.contains("reg_lambda")) config.regressor.reg_lambda = r["reg_lambda"].get<double>();
  }
  if (j.contains("search")) {
    const json& s = j["search"];
    if (s.contains("max_depth")) config.search.max_depth = s["max_depth"].get<std::vector<int>>();
    if (s.contains("learning_rate")) {
      config.search.learning_rate = s["learning_rate"].get<std::vector<double>>();
    }
    if (s.contains("n_estimators")) {
      const auto range = s["n_estimators"].get<std::vector<int>>();
      if (range.size() != 2) throw std::runtime_error("search.n_estimators must be [min, max]");
      config.search.n_estimators_min = range[0];
      config.search.n_estimators_max = range[1];
    }
    if (s.contains("subsample")) config.search.subsample = s["subsample"].get<std::vector<double>>();
    if (s.contains("reg_lambda")) config.search.reg_lambda = s["reg_lambda"].get<double>();
  }
  if (j.contains("holdout_fraction")) config.holdout_fraction = j["holdout_fraction"].get<double>();
  return config;
}

std::vector<int> resolved_intervals(const AppConfig& config) {
  return config.feature_intervals.empty()
             ? surrogate::snapshot_intervals(config.incident, config.solve)
             : config.feature_intervals;
}

void write_summary(const fs::path& out_dir, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(out_dir / "summary.txt");
  if (!out) throw std::runtime_error("cannot write summary.txt");
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

struct GaRun {
  ga::GaResult result;
  assign::AssignmentResult best_solved;
};

GaRun run_oracle_ga(const AppConfig& config, const std::optional<net::Incident>& incident,
                    std::uint64_t seed) {
  const assign::Evaluator oracle(config.network, incident, config.solve, config.penalty);
  const ga::Layout layout = ga::layout_from(config.network);
  ga::GaConfig ga_config = config.ga;
  ga_config.seed = seed;
  GaRun run;
  run.result = ga::run_ga(
      ga_config, layout, [&](std::span<const int> genes) { return oracle.fitness_genes(genes); },
      config.penalty);
  run.best_solved = oracle.solve_genes(run.result.best);
  return run;
}

void emit_plan_outputs(const AppConfig& config, const GaRun& run, const fs::path& out_dir,
                       const std::string& log_name) {
  net::save_plan(net::plan_from_array(config.network, run.result.best),
                 (out_dir / "plan.json").string());
  ga::write_generation_log_csv(run.result.log, (out_dir / log_name).string());
  assign::write_assignment_csv(run.best_solved, (out_dir / "assignment.csv").string());
}

int cmd_scenario(int scenario, const AppConfig& config, std::uint64_t seed,
                 const fs::path& out_dir, const std::string& model_path) {
  if (scenario >= 2 && !config.incident) {
    throw std::runtime_error("scenario " + std::to_string(scenario) +
                             " needs an incident in the config");
  }
  switch (scenario) {
    case 1: {
      const GaRun run = run_oracle_ga(config, std::nullopt, seed);
      emit_plan_outputs(config, run, out_dir, "ga_log.csv");
      write_summary(out_dir,
                    {{"scenario", "1"},
                     {"seed", std::to_string(seed)},
                     {"best_fitness", fmt_double(run.result.best_fitness)},
                     {"best_plan", join_ints(run.result.best)},
                     {"total_travel_time", fmt_double(run.best_solved.total_travel_time)},
                     {"relative_gap", fmt_double(run.best_solved.relative_gap)},
                     {"converged", run.best_solved.converged ? "1" : "0"}});
      return 0;
    }
    case 2: {
      // the plan tuned for normal operations, caught in the incident
      const GaRun normal = run_oracle_ga(config, std::nullopt, seed);
      const assign::Evaluator incident_oracle(config.network, config.incident, config.solve,
                                              config.penalty);
      const assign::AssignmentResult disrupted = incident_oracle.solve_genes(normal.result.best);
      net::save_plan(net::plan_from_array(config.network, normal.result.best),
                     (out_dir / "plan.json").string());
      ga::write_generation_log_csv(normal.result.log, (out_dir / "ga_log.csv").string());
      assign::write_assignment_csv(disrupted, (out_dir / "assignment.csv").string());
      write_summary(out_dir,
                    {{"scenario", "2"},
                     {"seed", std::to_string(seed)},
                     {"best_plan", join_ints(normal.result.best)},
                     {"ttt_normal", fmt_double(normal.best_solved.total_travel_time)},
                     {"ttt_incident", fmt_double(disrupted.total_travel_time)},
                     {"infeasible_under_incident", disrupted.infeasible ? "1" : "0"}});
      return 0;
    }
    case 3: {
      const GaRun run = run_oracle_ga(config, config.incident, seed);
      emit_plan_outputs(config, run, out_dir, "ga_log.csv");
      write_summary(out_dir,
                    {{"scenario", "3"},
                     {"seed", std::to_string(seed)},
                     {"best_fitness", fmt_double(run.result.best_fitness)},
                     {"best_plan", join_ints(run.result.best)},
                     {"total_travel_time", fmt_double(run.best_solved.total_travel_time)},
                     {"relative_gap", fmt_double(run.best_solved.relative_gap)},
                     {"converged", run.best_solved.converged ? "1" : "0"}});
      return 0;
    }
    case 4: {
      if (model_path.empty()) throw std::runtime_error("scenario 4 needs --model");
      const surrogate::Model model = surrogate::load_model(model_path);
      const GaRun ga_run = run_oracle_ga(config, config.incident, seed);
      bga::BgaConfig bga_config;
      bga_config.ga = config.ga;
      bga_config.ga.seed = seed;
      bga_config.penalty = config.penalty;
      bga_config.feature_intervals = config.feature_intervals;
      bga_config.solve = config.solve;
      const bga::BgaResult bga_run =
          bga::run_bga_ml(bga_config, config.network, config.incident, model);

      net::save_plan(net::plan_from_array(config.network, ga_run.result.best),
                     (out_dir / "ga_plan.json").string());
      net::save_plan(net::plan_from_array(config.network, bga_run.final_plan),
                     (out_dir / "bga_plan.json").string());
      ga::write_generation_log_csv(ga_run.result.log, (out_dir / "ga_log.csv").string());
      ga::write_generation_log_csv(bga_run.log, (out_dir / "bga_log.csv").string());
      bga::write_comparison_csv(ga_run.result.log, bga_run.log,
                                (out_dir / "comparison.csv").string());
      bga::write_phase_stats_csv(bga_run.phase_stats, (out_dir / "phase_stats.csv").string());
      const bga::ComparisonReport report = bga::compare_runs(
          ga_run.result.log, ga_run.result.best_fitness, 0.0, bga_run);
      write_summary(
          out_dir,
          {{"scenario", "4"},
           {"seed", std::to_string(seed)},
           {"ga_best_fitness", fmt_double(report.ga_best_fitness)},
           {"ga_best_plan", join_ints(ga_run.result.best)},
           {"ga_oracle_ttt", fmt_double(ga_run.best_solved.total_travel_time)},
           {"ga_convergence_generation", std::to_string(report.ga_convergence_generation)},
           {"bga_final_plan", join_ints(bga_run.final_plan)},
           {"bga_predicted_fitness", fmt_double(report.bga_predicted_fitness)},
           {"bga_oracle_ttt", fmt_double(report.bga_oracle_ttt)},
           {"bga_convergence_generation", std::to_string(report.bga_convergence_generation)}});
      return 0;
    }
    default:
      throw std::runtime_error("scenario must be 1, 2, 3 or 4");
  }
}

int cmd_gen_dataset(const AppConfig& config, std::uint64_t seed, const fs::path& out_dir,
                    int n_runs_override) {
  surrogate::DatasetConfig dataset_config;
  dataset_config.n_runs = n_runs_override > 0 ? n_runs_override : config.dataset_runs;
  dataset_config.feature_intervals = config.feature_intervals;
  dataset_config.seed = seed;
  dataset_config.solve = config.solve;
  const surrogate::TrainingDataset dataset =
      surrogate::generate_dataset(config.network, config.incident, dataset_config);
  surrogate::write_dataset_csv(dataset, (out_dir / "dataset.csv").string());
  write_summary(out_dir, {{"rows", std::to_string(dataset.size())},
                          {"dropped_failed", std::to_string(dataset.dropped_failed)},
                          {"dropped_duplicate", std::to_string(dataset.dropped_duplicate)},
                          {"features", std::to_string(dataset.feature_names.size())},
                          {"seed", std::to_string(seed)}});
  return 0;
}

int cmd_train(const AppConfig& config, const std::string& dataset_path, std::uint64_t seed,
              const fs::path& out_dir) {
  const surrogate::TrainingDataset dataset = surrogate::load_dataset_csv(dataset_path);
  surrogate::check_dataset_schema(dataset, config.network, resolved_intervals(config));
  Rng split_rng = make_rng(seed, "train.split");
  const auto [train_part, holdout] =
      surrogate::split_dataset(dataset, config.holdout_fraction, split_rng);
  if (holdout.size() == 0) throw std::runtime_error("holdout split is empty, raise holdout_fraction");
  const surrogate::Model model = surrogate::fit(config.regressor, train_part, seed);
  surrogate::save_model(model, (out_dir / "model.json").string());
  const surrogate::Metrics metrics =
      surrogate::evaluate_metrics(holdout.targets, model.predict_rows(holdout.rows));
  {
    std::ofstream out(out_dir / "holdout_metrics.csv");
    if (!out) throw std::runtime_error("cannot write holdout_metrics.csv");
    out << "kind,mae,rmse,mape,r2\n";
    out << surrogate::to_string(config.regressor.kind) << ',' << fmt_double(metrics.mae) << ','
        << fmt_double(metrics.rmse) << ',' << fmt_double(metrics.mape) << ','
        << fmt_double(metrics.r2) << '\n';
  }
  write_summary(out_dir, {{"kind", surrogate::to_string(config.regressor.kind)},
                          {"train_rows", std::to_string(train_part.size())},
                          {"holdout_rows", std::to_string(holdout.size())},
                          {"holdout_mae", fmt_double(metrics.mae)},
                          {"holdout_rmse", fmt_double(metrics.rmse)},
                          {"holdout_mape", fmt_double(metrics.mape)},
                          {"holdout_r2", fmt_double(metrics.r2)},
                          {"seed", std::to_string(seed)}});
  return 0;
}

int cmd_tune(const AppConfig& config, const std::string& dataset_path, const std::string& kind_name,
             const std::string& scoring_name, int n_iter, int folds, std::uint64_t seed,
             const fs::path& out_dir) {
  const surrogate::TrainingDataset dataset = surrogate::load_dataset_csv(dataset_path);
  surrogate::check_dataset_schema(dataset, config.network, resolved_intervals(config));
  const surrogate::RegressorKind kind = surrogate::regressor_kind_from_string(kind_name);
  const surrogate::Scoring scoring = surrogate::scoring_from_string(scoring_name);
  const surrogate::CvReport report =
      surrogate::random_search(kind, config.search, n_iter, scoring, dataset, seed, folds);
  surrogate::write_cv_report_csv(report, out_dir.string());
  const surrogate::CvCandidate& best = report.best();
  write_summary(out_dir, {{"kind", kind_name},
                          {"scoring", scoring_name},
                          {"candidates", std::to_string(report.candidates.size())},
                          {"best_candidate", std::to_string(report.best_index)},
                          {"best_max_depth", std::to_string(best.spec.max_depth)},
                          {"best_learning_rate", fmt_double(best.spec.learning_rate)},
                          {"best_n_estimators", std::to_string(best.spec.n_estimators)},
                          {"best_subsample", fmt_double(best.spec.subsample)},
                          {"best_score", fmt_double(best.score)},
                          {"seed", std::to_string(seed)}});
  return 0;
}

int cmd_optimize(const AppConfig& config, const std::string& engine, std::uint64_t seed,
                 const fs::path& out_dir, const std::string& model_path) {
  if (engine == "ga") {
    const GaRun run = run_oracle_ga(config, config.incident, seed);
    emit_plan_outputs(config, run, out_dir, "ga_log.csv");
    write_summary(out_dir,
                  {{"engine", "ga"},
                   {"seed", std::to_string(seed)},
                   {"best_fitness", fmt_double(run.result.best_fitness)},
                   {"best_plan", join_ints(run.result.best)},
                   {"total_travel_time", fmt_double(run.best_solved.total_travel_time)}});
    return 0;
  }
  if (engine == "bga") {
    if (model_path.empty()) throw std::runtime_error("--engine bga needs --model");
    const surrogate::Model model = surrogate::load_model(model_path);
    bga::BgaConfig bga_config;
    bga_config.ga = config.ga;
    bga_config.ga.seed = seed;
    bga_config.penalty = config.penalty;
    bga_config.feature_intervals = config.feature_intervals;
    bga_config.solve = config.solve;
    const bga::BgaResult run = bga::run_bga_ml(bga_config, config.network, config.incident, model);
    net::save_plan(net::plan_from_array(config.network, run.final_plan),
                   (out_dir / "plan.json").string());
    ga::write_generation_log_csv(run.log, (out_dir / "bga_log.csv").string());
    bga::write_phase_stats_csv(run.phase_stats, (out_dir / "phase_stats.csv").string());
    const assign::Evaluator oracle(config.network, config.incident, config.solve, config.penalty);
    assign::write_assignment_csv(oracle.solve_genes(run.final_plan),
                                 (out_dir / "assignment.csv").string());
    write_summary(out_dir, {{"engine", "bga"},
                            {"seed", std::to_string(seed)},
                            {"final_plan", join_ints(run.final_plan)},
                            {"predicted_fitness", fmt_double(run.final_predicted_fitness)},
                            {"oracle_ttt", fmt_double(run.final_plan_oracle_ttt)}});
    return 0;
  }
  throw std::runtime_error("--engine must be ga or bga");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal plan optimisation over a static assignment model"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path = ".";
  std::string model_path;
  std::string dataset_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master random seed");
    sub->add_option("--out", out_path, "output directory");
  };

  int scenario_number = 0;
  CLI::App* scenario = app.add_subcommand("scenario", "run one of the four study scenarios");
  add_common(scenario);
  scenario->add_option("--scenario", scenario_number, "scenario number 1-4")->required();
  scenario->add_option("--model", model_path, "surrogate model JSON (scenario 4)");

  int n_runs_override = 0;
  CLI::App* gen = app.add_subcommand("gen-dataset", "sample plans and score them with the oracle");
  add_common(gen);
  gen->add_option("--n-runs", n_runs_override, "override the configured sample count");

  CLI::App* train = app.add_subcommand("train", "fit a surrogate on a dataset CSV");
  add_common(train);
  train->add_option("--dataset", dataset_path, "dataset CSV")->required();

  std::string kind_name = "xgbt";
  std::string scoring_name = "rmse";
  int n_iter = 20;
  int folds = 5;
  CLI::App* tune = app.add_subcommand("tune", "random-search hyperparameters with k-fold CV");
  add_common(tune);
  tune->add_option("--dataset", dataset_path, "dataset CSV")->required();
  tune->add_option("--kind", kind_name, "regressor kind");
  tune->add_option("--scoring", scoring_name, "mae, rmse, mape or r2");
  tune->add_option("--n-iter", n_iter, "candidates to draw");
  tune->add_option("--folds", folds, "cross-validation folds");

  std::string engine = "ga";
  CLI::App* optimize = app.add_subcommand("optimize", "optimise the signal plan");
  add_common(optimize);
  optimize->add_option("--engine", engine, "ga or bga");
  optimize->add_option("--model", model_path, "surrogate model JSON (bga engine)");

  CLI11_PARSE(app, argc, argv);

  try {
    const AppConfig config = load_config(config_path);
    const fs::path out_dir(out_path);
    fs::create_directories(out_dir);
    if (app.got_subcommand(scenario)) {
      return cmd_scenario(scenario_number, config, seed, out_dir, model_path);
    }
    if (app.got_subcommand(gen)) return cmd_gen_dataset(config, seed, out_dir, n_runs_override);
    if (app.got_subcommand(train)) return cmd_train(config, dataset_path, seed, out_dir);
    if (app.got_subcommand(tune)) {
      return cmd_tune(config, dataset_path, kind_name, scoring_name, n_iter, folds, seed, out_dir);
    }
    if (app.got_subcommand(optimize)) {
      return cmd_optimize(config, engine, seed, out_dir, model_path);
    }
    throw std::runtime_error("no subcommand");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
