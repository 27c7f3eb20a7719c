#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "phaseopt/netio.hpp"
#include "phaseopt/surrogate/dataset.hpp"

using namespace phaseopt;

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CliRun run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_log = scratch / "stdout.log";
  const fs::path err_log = scratch / "stderr.log";
  const std::string command = std::string("\"") + CLI_PATH + "\" " + args + " >\"" +
                              out_log.string() + "\" 2>\"" + err_log.string() + "\"";
  const int status = std::system(command.c_str());
  CliRun run;
  run.exit_code = status == -1 ? -1 : WEXITSTATUS(status);
  run.out = read_file(out_log);
  run.err = read_file(err_log);
  return run;
}

std::map<std::string, std::string> read_summary(const fs::path& dir) {
  std::map<std::string, std::string> kv;
  std::ifstream in(dir / "summary.txt");
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int line_count(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

// generation logs carry wall-clock timings; everything else must reproduce
std::string without_wall_column(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == 3) continue;
      out << cells[i] << (i + 1 < cells.size() ? "," : "");
    }
    out << '\n';
  }
  return out.str();
}

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& tag) {
    root = fs::temp_directory_path() / ("phaseopt_cli_" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }

  fs::path write_config(const std::string& name, const std::string& body) const {
    const fs::path path = root / name;
    std::ofstream out(path);
    out << body;
    return path;
  }
};

const char* kTinyConfig = R"({
  "network": "single_junction",
  "ga": {"population_size": 10, "generations": 3},
  "regressor": {"kind": "xgbt", "max_depth": 3, "n_estimators": 15, "subsample": 1.0},
  "holdout_fraction": 0.25
})";

const char* kIncidentConfig = R"({
  "network": "single_junction",
  "incident": {"link": "c1_j1", "lanes_blocked": 1, "start_s": 0, "duration_s": 3600},
  "ga": {"population_size": 10, "generations": 3}
})";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("no subcommand is an error") {
  Workspace ws("noargs");
  const auto run = run_cli("", ws.root);
  CHECK(run.exit_code != 0);
}

TEST_CASE("an unknown config file is reported") {
  Workspace ws("badconfig");
  const auto run =
      run_cli("scenario --scenario 1 --config /nonexistent/nope.json --out \"" +
                  (ws.root / "out").string() + "\"",
              ws.root);
  CHECK(run.exit_code == 1);
  CHECK(run.err.find("error:") != std::string::npos);
}

TEST_CASE("normal-operations scenario emits a plan, a log and a summary") {
  Workspace ws("scenario1");
  const auto config = ws.write_config("config.json", kTinyConfig);
  const fs::path out = ws.root / "out";
  const auto run = run_cli(
      "scenario --scenario 1 --config \"" + config.string() + "\" --seed 5 --out \"" +
          out.string() + "\"",
      ws.root);
  REQUIRE(run.exit_code == 0);

  const auto network = net::build_single_junction_fixture();
  const auto plan = net::load_plan((out / "plan.json").string(), network);
  CHECK(net::validate_plan(plan, network).empty());

  CHECK(line_count(out / "ga_log.csv") == 5);  // header plus generations 0..3
  CHECK(fs::exists(out / "assignment.csv"));

  const auto summary = read_summary(out);
  CHECK(summary.count("best_fitness") == 1);
  CHECK(summary.count("total_travel_time") == 1);
  CHECK(summary.at("scenario") == "1");
  CHECK(summary.at("seed") == "5");
  CHECK(std::stod(summary.at("total_travel_time")) > 0.0);
}

TEST_CASE("identical seeds reproduce every artifact byte for byte") {
  Workspace ws("repro");
  const auto config = ws.write_config("config.json", kTinyConfig);
  const fs::path a = ws.root / "a";
  const fs::path b = ws.root / "b";
  for (const auto& out : {a, b}) {
    const auto run = run_cli(
        "scenario --scenario 1 --config \"" + config.string() + "\" --seed 9 --out \"" +
            out.string() + "\"",
        ws.root);
    REQUIRE(run.exit_code == 0);
  }
  CHECK(read_file(a / "plan.json") == read_file(b / "plan.json"));
  CHECK(read_file(a / "assignment.csv") == read_file(b / "assignment.csv"));
  CHECK(read_file(a / "summary.txt") == read_file(b / "summary.txt"));
  CHECK(without_wall_column(a / "ga_log.csv") == without_wall_column(b / "ga_log.csv"));
  CHECK(read_file(a / "ga_log.csv").find("wall_ms") != std::string::npos);
}

TEST_CASE("incident scenarios refuse to run without an incident") {
  Workspace ws("noincident");
  const auto config = ws.write_config("config.json", kTinyConfig);
  for (const int scenario : {2, 3}) {
    const auto run = run_cli(
        "scenario --scenario " + std::to_string(scenario) + " --config \"" + config.string() +
            "\" --out \"" + (ws.root / "out").string() + "\"",
        ws.root);
    CHECK(run.exit_code == 1);
    CHECK(run.err.find("incident") != std::string::npos);
  }
}

TEST_CASE("the incident stress scenario reports both travel times") {
  Workspace ws("scenario2");
  const auto config = ws.write_config("config.json", kIncidentConfig);
  const fs::path out = ws.root / "out";
  const auto run = run_cli(
      "scenario --scenario 2 --config \"" + config.string() + "\" --seed 2 --out \"" +
          out.string() + "\"",
      ws.root);
  REQUIRE(run.exit_code == 0);
  const auto summary = read_summary(out);
  REQUIRE(summary.count("ttt_normal") == 1);
  REQUIRE(summary.count("ttt_incident") == 1);
  CHECK(std::stod(summary.at("ttt_incident")) >= std::stod(summary.at("ttt_normal")));
}

TEST_CASE("dataset, training and surrogate optimisation chain together") {
  Workspace ws("pipeline");
  const auto config = ws.write_config("config.json", kTinyConfig);
  const fs::path data_dir = ws.root / "data";
  const fs::path train_dir = ws.root / "train";
  const fs::path opt_dir = ws.root / "opt";

  auto gen = run_cli(
      "gen-dataset --config \"" + config.string() + "\" --seed 41 --n-runs 150 --out \"" +
          data_dir.string() + "\"",
      ws.root);
  REQUIRE(gen.exit_code == 0);
  const auto gen_summary = read_summary(data_dir);
  const int rows = std::stoi(gen_summary.at("rows"));
  CHECK(rows > 40);
  CHECK(rows + std::stoi(gen_summary.at("dropped_failed")) +
            std::stoi(gen_summary.at("dropped_duplicate")) ==
        150);
  // the dataset is a valid table of its own accord
  const auto dataset = surrogate::load_dataset_csv((data_dir / "dataset.csv").string());
  CHECK(static_cast<int>(dataset.size()) == rows);

  auto train = run_cli(
      "train --config \"" + config.string() + "\" --dataset \"" +
          (data_dir / "dataset.csv").string() + "\" --seed 42 --out \"" + train_dir.string() +
          "\"",
      ws.root);
  REQUIRE(train.exit_code == 0);
  CHECK(fs::exists(train_dir / "model.json"));
  CHECK(line_count(train_dir / "holdout_metrics.csv") == 2);
  const auto train_summary = read_summary(train_dir);
  CHECK(train_summary.at("kind") == "xgbt");
  CHECK(std::stod(train_summary.at("holdout_r2")) > -1.0);

  auto opt = run_cli(
      "optimize --engine bga --config \"" + config.string() + "\" --model \"" +
          (train_dir / "model.json").string() + "\" --seed 43 --out \"" + opt_dir.string() + "\"",
      ws.root);
  REQUIRE(opt.exit_code == 0);
  const auto network = net::build_single_junction_fixture();
  const auto plan = net::load_plan((opt_dir / "plan.json").string(), network);
  CHECK(net::validate_plan(plan, network).empty());
  CHECK(fs::exists(opt_dir / "bga_log.csv"));
  CHECK(fs::exists(opt_dir / "phase_stats.csv"));
  CHECK(fs::exists(opt_dir / "assignment.csv"));
  const auto opt_summary = read_summary(opt_dir);
  CHECK(std::stod(opt_summary.at("oracle_ttt")) > 0.0);

  // the oracle-driven engine works from the same config
  const fs::path ga_dir = ws.root / "ga";
  auto ga = run_cli(
      "optimize --engine ga --config \"" + config.string() + "\" --seed 44 --out \"" +
          ga_dir.string() + "\"",
      ws.root);
  REQUIRE(ga.exit_code == 0);
  CHECK(std::stod(read_summary(ga_dir).at("total_travel_time")) > 0.0);

  // datasets regenerate byte for byte under the same seed
  const fs::path data_dir2 = ws.root / "data2";
  auto gen2 = run_cli(
      "gen-dataset --config \"" + config.string() + "\" --seed 41 --n-runs 150 --out \"" +
          data_dir2.string() + "\"",
      ws.root);
  REQUIRE(gen2.exit_code == 0);
  CHECK(read_file(data_dir / "dataset.csv") == read_file(data_dir2 / "dataset.csv"));
}

TEST_CASE("training refuses a dataset whose columns do not match the network") {
  Workspace ws("badschema");
  const auto config = ws.write_config("config.json", kTinyConfig);
  const fs::path data_dir = ws.root / "data";
  auto gen = run_cli(
      "gen-dataset --config \"" + config.string() + "\" --seed 7 --n-runs 40 --out \"" +
          data_dir.string() + "\"",
      ws.root);
  REQUIRE(gen.exit_code == 0);

  // rename one header column and keep everything else
  std::string csv = read_file(data_dir / "dataset.csv");
  const auto pos = csv.find("p_j1_2");
  REQUIRE(pos != std::string::npos);
  csv.replace(pos, 6, "p_oops");
  const fs::path mangled = ws.root / "mangled.csv";
  {
    std::ofstream out(mangled, std::ios::binary);
    out << csv;
  }

  auto train = run_cli(
      "train --config \"" + config.string() + "\" --dataset \"" + mangled.string() +
          "\" --out \"" + (ws.root / "train").string() + "\"",
      ws.root);
  CHECK(train.exit_code == 1);
  CHECK(train.err.find("column 2") != std::string::npos);
  CHECK(train.err.find("p_oops") != std::string::npos);
}

TEST_CASE("hyperparameter search writes its candidate table") {
  Workspace ws("tune");
  const auto config = ws.write_config("config.json", R"({
    "network": "single_junction",
    "search": {"max_depth": [2, 3], "learning_rate": [0.1], "n_estimators": [5, 20], "subsample": [1.0]}
  })");
  const fs::path data_dir = ws.root / "data";
  auto gen = run_cli(
      "gen-dataset --config \"" + config.string() + "\" --seed 11 --n-runs 120 --out \"" +
          data_dir.string() + "\"",
      ws.root);
  REQUIRE(gen.exit_code == 0);

  const fs::path tune_dir = ws.root / "tune";
  auto tune = run_cli(
      "tune --config \"" + config.string() + "\" --dataset \"" +
          (data_dir / "dataset.csv").string() +
          "\" --kind gbdt --scoring rmse --n-iter 2 --folds 3 --seed 12 --out \"" +
          tune_dir.string() + "\"",
      ws.root);
  REQUIRE(tune.exit_code == 0);
  CHECK(line_count(tune_dir / "cv_candidates.csv") == 3);  // header plus two candidates
  for (const auto* name : {"top10_mae.csv", "top10_rmse.csv", "top10_mape.csv", "top10_r2.csv"}) {
    CHECK(line_count(tune_dir / name) == 3);
  }
  const auto summary = read_summary(tune_dir);
  CHECK(summary.at("kind") == "gbdt");
  CHECK(summary.at("candidates") == "2");
  CHECK(summary.count("best_score") == 1);
}

TEST_SUITE_END();
