#pragma once

#include <span>
#include <string>
#include <vector>

#include "phaseopt/surrogate/dataset.hpp"

namespace phaseopt::surrogate {

enum class RegressorKind { linear, random_forest, gbdt, xgbt };

std::string to_string(RegressorKind kind);
RegressorKind regressor_kind_from_string(const std::string& name);

struct RegressorSpec {
  RegressorKind kind = RegressorKind::xgbt;
  int max_depth = 7;
  double learning_rate = 0.1;
  int n_estimators = 190;
  double subsample = 0.6;
  double reg_lambda = 1.0;
};

// Binary regression tree in parallel arrays; feature -1 marks a leaf and the
// left branch takes x[feature] <= threshold.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  double predict_row(std::span<const double> x) const {
    int node = 0;
    while (feature[node] >= 0) {
      node = x[feature[node]] <= threshold[node] ? left[node] : right[node];
    }
    return value[node];
  }
};

struct Model {
  RegressorSpec spec;
  std::vector<std::string> feature_names;
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::vector<double> coefficients;  // linear only
  double intercept = 0.0;            // linear only

  double predict(std::span<const double> x) const;
  std::vector<double> predict_rows(const std::vector<std::vector<double>>& rows) const;
};

Model fit(const RegressorSpec& spec, const TrainingDataset& dataset, std::uint64_t seed);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace phaseopt::surrogate
