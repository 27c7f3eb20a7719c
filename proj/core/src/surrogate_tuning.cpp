#include "phaseopt/surrogate/tuning.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "phaseopt/common.hpp"

namespace phaseopt::surrogate {

std::string to_string(Scoring scoring) {
  switch (scoring) {
    case Scoring::mae: return "mae";
    case Scoring::rmse: return "rmse";
    case Scoring::mape: return "mape";
    case Scoring::r2: return "r2";
  }
  throw std::logic_error("unknown scoring");
}

Scoring scoring_from_string(const std::string& name) {
  if (name == "mae") return Scoring::mae;
  if (name == "rmse") return Scoring::rmse;
  if (name == "mape") return Scoring::mape;
  if (name == "r2") return Scoring::r2;
  throw std::invalid_argument("unknown scoring '" + name + "'");
}

double metric_score(const Metrics& metrics, Scoring scoring) {
  switch (scoring) {
    case Scoring::mae: return -metrics.mae;
    case Scoring::rmse: return -metrics.rmse;
    case Scoring::mape: return -metrics.mape;
    case Scoring::r2: return metrics.r2;
  }
  throw std::logic_error("unknown scoring");
}

CvReport random_search(RegressorKind kind, const SearchSpace& space, int n_iter, Scoring scoring,
                       const TrainingDataset& dataset, std::uint64_t seed, int folds) {
  if (n_iter < 1) throw std::invalid_argument("n_iter must be at least 1");
  if (space.max_depth.empty() || space.learning_rate.empty() || space.subsample.empty()) {
    throw std::invalid_argument("search space has an empty dimension");
  }
  if (space.n_estimators_min < 1 || space.n_estimators_max < space.n_estimators_min) {
    throw std::invalid_argument("bad n_estimators range");
  }
  const int n = static_cast<int>(dataset.size());

  Rng fold_rng = make_rng(seed, "folds");
  const std::vector<std::vector<int>> fold_rows = kfold_split(n, folds, fold_rng);

  std::vector<TrainingDataset> train_parts(folds);
  std::vector<std::vector<std::vector<double>>> eval_rows(folds);
  std::vector<std::vector<double>> eval_targets(folds);
  {
    std::vector<int> fold_of_row(n, -1);
    for (int f = 0; f < folds; ++f) {
      for (int i : fold_rows[f]) fold_of_row[i] = f;
    }
    for (int f = 0; f < folds; ++f) {
      train_parts[f].feature_names = dataset.feature_names;
      for (int i = 0; i < n; ++i) {
        if (fold_of_row[i] == f) {
          eval_rows[f].push_back(dataset.rows[i]);
          eval_targets[f].push_back(dataset.targets[i]);
        } else {
          train_parts[f].rows.push_back(dataset.rows[i]);
          train_parts[f].targets.push_back(dataset.targets[i]);
        }
      }
    }
  }

  Rng tune_rng = make_rng(seed, "tune");
  const std::uint64_t fit_base = derive_seed(seed, "tune.fit");

  CvReport report;
  report.kind = kind;
  report.scoring = scoring;
  report.folds = folds;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int cand = 0; cand < n_iter; ++cand) {
    CvCandidate candidate;
    candidate.spec.kind = kind;
    candidate.spec.max_depth =
        space.max_depth[uniform_int(tune_rng, 0, static_cast<int>(space.max_depth.size()) - 1)];
    candidate.spec.learning_rate =
        space.learning_rate[uniform_int(tune_rng, 0,
                                        static_cast<int>(space.learning_rate.size()) - 1)];
    candidate.spec.n_estimators =
        static_cast<int>(uniform_int(tune_rng, space.n_estimators_min, space.n_estimators_max));
    candidate.spec.subsample =
        space.subsample[uniform_int(tune_rng, 0, static_cast<int>(space.subsample.size()) - 1)];
    candidate.spec.reg_lambda = space.reg_lambda;

    Metrics sums;
    for (int f = 0; f < folds; ++f) {
      const std::uint64_t fit_seed =
          mix64(fit_base ^ static_cast<std::uint64_t>(cand * folds + f));
      const Model model = fit(candidate.spec, train_parts[f], fit_seed);
      const std::vector<double> pred = model.predict_rows(eval_rows[f]);
      const Metrics m = evaluate_metrics(eval_targets[f], pred);
      sums.mae += m.mae;
      sums.rmse += m.rmse;
      sums.mape += m.mape;
      sums.r2 += m.r2;
      candidate.fold_metrics.push_back(m);
    }
    candidate.mean_metrics.mae = sums.mae / folds;
    candidate.mean_metrics.rmse = sums.rmse / folds;
    candidate.mean_metrics.mape = sums.mape / folds;
    candidate.mean_metrics.r2 = sums.r2 / folds;
    candidate.score = metric_score(candidate.mean_metrics, scoring);
    if (candidate.score > best_score) {
      best_score = candidate.score;
      report.best_index = cand;
    }
    report.candidates.push_back(std::move(candidate));
  }
  return report;
}

std::vector<int> rank_candidates(const CvReport& report, Scoring metric) {
  std::vector<int> order(report.candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = metric_score(report.candidates[a].mean_metrics, metric);
    const double sb = metric_score(report.candidates[b].mean_metrics, metric);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

namespace {

void write_candidate_row(std::ofstream& out, const CvReport& report, int index) {
  const CvCandidate& c = report.candidates[index];
  out << index << ',' << to_string(c.spec.kind) << ',' << c.spec.max_depth << ','
      << fmt_double(c.spec.learning_rate) << ',' << c.spec.n_estimators << ','
      << fmt_double(c.spec.subsample) << ',' << fmt_double(c.spec.reg_lambda) << ','
      << fmt_double(c.mean_metrics.mae) << ',' << fmt_double(c.mean_metrics.rmse) << ','
      << fmt_double(c.mean_metrics.mape) << ',' << fmt_double(c.mean_metrics.r2) << ','
      << fmt_double(c.score) << '\n';
}

constexpr const char* kCandidateHeader =
    "candidate,kind,max_depth,learning_rate,n_estimators,subsample,reg_lambda,"
    "mae,rmse,mape,r2,score";

}  // namespace

void write_cv_report_csv(const CvReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  {
    std::ofstream out(fs::path(directory) / "cv_candidates.csv");
    if (!out) throw std::runtime_error("cannot write cv_candidates.csv in " + directory);
    out << kCandidateHeader << '\n';
    for (std::size_t i = 0; i < report.candidates.size(); ++i) {
      write_candidate_row(out, report, static_cast<int>(i));
    }
  }
  for (Scoring metric : {Scoring::mae, Scoring::rmse, Scoring::mape, Scoring::r2}) {
    const std::vector<int> order = rank_candidates(report, metric);
    std::ofstream out(fs::path(directory) / ("top10_" + to_string(metric) + ".csv"));
    if (!out) throw std::runtime_error("cannot write top10 csv in " + directory);
    out << "rank," << kCandidateHeader << '\n';
    const int limit = std::min<int>(10, static_cast<int>(order.size()));
    for (int rank = 0; rank < limit; ++rank) {
      out << rank + 1 << ',';
      write_candidate_row(out, report, order[rank]);
    }
  }
}

}  // namespace phaseopt::surrogate
