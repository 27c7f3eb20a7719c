#pragma once

#include <string>
#include <vector>

#include "phaseopt/surrogate/metrics.hpp"
#include "phaseopt/surrogate/model.hpp"

namespace phaseopt::surrogate {

enum class Scoring { mae, rmse, mape, r2 };

std::string to_string(Scoring scoring);
Scoring scoring_from_string(const std::string& name);

// Higher is better: errors are negated, coefficient of determination is raw.
double metric_score(const Metrics& metrics, Scoring scoring);

struct SearchSpace {
  std::vector<int> max_depth{3, 5, 7, 9, 11, 13, 15};
  std::vector<double> learning_rate{0.0001, 0.001, 0.1};
  int n_estimators_min = 20;
  int n_estimators_max = 200;
  std::vector<double> subsample{0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0};
  double reg_lambda = 1.0;
};

struct CvCandidate {
  RegressorSpec spec;
  std::vector<Metrics> fold_metrics;
  Metrics mean_metrics;
  double score = 0.0;
};

struct CvReport {
  RegressorKind kind = RegressorKind::xgbt;
  Scoring scoring = Scoring::rmse;
  int folds = 5;
  std::vector<CvCandidate> candidates;
  int best_index = 0;

  const CvCandidate& best() const { return candidates.at(best_index); }
};

// Uniform random search over the space, scored by k-fold cross validation.
// The fold assignment is drawn once and shared by every candidate.
CvReport random_search(RegressorKind kind, const SearchSpace& space, int n_iter, Scoring scoring,
                       const TrainingDataset& dataset, std::uint64_t seed, int folds = 5);

// Candidate indices ordered best first under the given metric, candidate
// order breaking ties.
std::vector<int> rank_candidates(const CvReport& report, Scoring metric);

// Writes cv_candidates.csv plus a top10_<metric>.csv per metric into the
// directory.
void write_cv_report_csv(const CvReport& report, const std::string& directory);

}  // namespace phaseopt::surrogate
