#include "phaseopt/surrogate/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace phaseopt::surrogate {

namespace {
using json = nlohmann::ordered_json;
constexpr double kMinGain = 1e-12;
}  // namespace

std::string to_string(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::linear: return "linear";
    case RegressorKind::random_forest: return "random_forest";
    case RegressorKind::gbdt: return "gbdt";
    case RegressorKind::xgbt: return "xgbt";
  }
  throw std::logic_error("unknown regressor kind");
}

RegressorKind regressor_kind_from_string(const std::string& name) {
  if (name == "linear") return RegressorKind::linear;
  if (name == "random_forest") return RegressorKind::random_forest;
  if (name == "gbdt") return RegressorKind::gbdt;
  if (name == "xgbt") return RegressorKind::xgbt;
  throw std::invalid_argument("unknown regressor kind '" + name + "'");
}

double Model::predict(std::span<const double> x) const {
  if (x.size() != feature_names.size()) {
    throw std::invalid_argument("feature vector has " + std::to_string(x.size()) +
                                " values, model expects " + std::to_string(feature_names.size()));
  }
  if (spec.kind == RegressorKind::linear) {
    double y = intercept;
    for (std::size_t i = 0; i < coefficients.size(); ++i) y += coefficients[i] * x[i];
    return y;
  }
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict_row(x);
  if (spec.kind == RegressorKind::random_forest) {
    return trees.empty() ? base_score : base_score + sum / trees.size();
  }
  return base_score + spec.learning_rate * sum;
}

std::vector<double> Model::predict_rows(const std::vector<std::vector<double>>& rows) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(predict(row));
  return out;
}

namespace {

Model fit_linear(const RegressorSpec& spec, const TrainingDataset& data) {
  const int n = static_cast<int>(data.size());
  const int d = static_cast<int>(data.feature_names.size());
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = data.rows[i][j];
    y(i) = data.targets[i];
  }
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  x.rowwise() -= x_mean;
  y.array() -= y_mean;
  // minimum-norm least squares keeps constant columns and collinear features harmless
  const Eigen::VectorXd w = x.completeOrthogonalDecomposition().solve(y);
  Model model;
  model.spec = spec;
  model.feature_names = data.feature_names;
  model.coefficients.assign(w.data(), w.data() + d);
  model.intercept = y_mean - x_mean.dot(w);
  return model;
}

// Shared (gradient, hessian) tree grower. Rows with zero hessian are outside
// the tree's sample and never influence split candidates.
class TreeGrower {
 public:
  TreeGrower(const std::vector<std::vector<double>>& rows,
             const std::vector<std::vector<int>>& sorted_by_feature)
      : rows_(rows), sorted_(sorted_by_feature), n_(static_cast<int>(rows.size())),
        d_(static_cast<int>(sorted_by_feature.size())) {}

  // feature_subset_size: 0 uses every feature, otherwise each node draws that
  // many distinct features when it is opened.
  Tree grow(const std::vector<double>& g, const std::vector<double>& h, double lambda,
            int max_depth, int feature_subset_size, Rng& rng) {
    Tree tree;
    node_of_row_.assign(n_, -1);
    double g0 = 0.0, h0 = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (h[i] > 0.0) {
        node_of_row_[i] = 0;
        g0 += g[i];
        h0 += h[i];
      }
    }
    auto add_node = [&](double gn, double hn, int cnt) {
      tree.feature.push_back(-1);
      tree.threshold.push_back(0.0);
      tree.left.push_back(-1);
      tree.right.push_back(-1);
      tree.value.push_back(0.0);
      node_g_.push_back(gn);
      node_h_.push_back(hn);
      node_cnt_.push_back(cnt);
      return static_cast<int>(tree.feature.size()) - 1;
    };
    node_g_.clear();
    node_h_.clear();
    node_cnt_.clear();
    int root_cnt = 0;
    for (int i = 0; i < n_; ++i) {
      if (h[i] > 0.0) ++root_cnt;
    }
    add_node(g0, h0, root_cnt);
    std::vector<int> active{0};

    for (int level = 0; level < max_depth && !active.empty(); ++level) {
      const int m = static_cast<int>(active.size());
      std::vector<int> slot_of_node(tree.feature.size(), -1);
      for (int s = 0; s < m; ++s) slot_of_node[active[s]] = s;

      std::vector<std::vector<char>> use_feature;
      if (feature_subset_size > 0 && feature_subset_size < d_) {
        use_feature.assign(m, std::vector<char>(d_, 0));
        std::vector<int> pool(d_);
        for (int s = 0; s < m; ++s) {
          for (int f = 0; f < d_; ++f) pool[f] = f;
          for (int k = 0; k < feature_subset_size; ++k) {
            const int j = static_cast<int>(uniform_int(rng, k, d_ - 1));
            std::swap(pool[k], pool[j]);
            use_feature[s][pool[k]] = 1;
          }
        }
      }

      std::vector<double> best_gain(m, kMinGain);
      std::vector<int> best_feature(m, -1);
      std::vector<double> best_threshold(m, 0.0);
      std::vector<double> gl(m), hl(m), last_value(m);
      std::vector<int> left_cnt(m);
      std::vector<char> seen(m);

      for (int f = 0; f < d_; ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(left_cnt.begin(), left_cnt.end(), 0);
        std::fill(seen.begin(), seen.end(), 0);
        for (int i : sorted_[f]) {
          const int node = node_of_row_[i];
          if (node < 0) continue;
          const int s = slot_of_node[node];
          if (s < 0) continue;
          if (!use_feature.empty() && !use_feature[s][f]) continue;
          const double v = rows_[i][f];
          if (seen[s] && v != last_value[s] && left_cnt[s] > 0 && left_cnt[s] < node_cnt_[node]) {
            const double gr = node_g_[node] - gl[s];
            const double hr = node_h_[node] - hl[s];
            const double gain = gl[s] * gl[s] / (hl[s] + lambda) + gr * gr / (hr + lambda) -
                                node_g_[node] * node_g_[node] / (node_h_[node] + lambda);
            if (gain > best_gain[s]) {
              best_gain[s] = gain;
              best_feature[s] = f;
              best_threshold[s] = 0.5 * (last_value[s] + v);
            }
          }
          gl[s] += g[i];
          hl[s] += h[i];
          left_cnt[s] += 1;
          last_value[s] = v;
          seen[s] = 1;
        }
      }

      std::vector<int> next;
      std::vector<int> child_left(m, -1), child_right(m, -1);
      for (int s = 0; s < m; ++s) {
        const int node = active[s];
        if (best_feature[s] < 0) continue;
        tree.feature[node] = best_feature[s];
        tree.threshold[node] = best_threshold[s];
        child_left[s] = add_node(0.0, 0.0, 0);
        child_right[s] = add_node(0.0, 0.0, 0);
        tree.left[node] = child_left[s];
        tree.right[node] = child_right[s];
        next.push_back(child_left[s]);
        next.push_back(child_right[s]);
      }
      slot_of_node.resize(tree.feature.size(), -1);
      for (int i = 0; i < n_; ++i) {
        const int node = node_of_row_[i];
        if (node < 0) continue;
        const int s = node >= static_cast<int>(slot_of_node.size()) ? -1 : slot_of_node[node];
        if (s < 0 || child_left[s] < 0) {
          if (s >= 0) node_of_row_[i] = -1;  // node stayed a leaf
          continue;
        }
        const int child = rows_[i][tree.feature[node]] <= tree.threshold[node] ? child_left[s]
                                                                               : child_right[s];
        node_of_row_[i] = child;
        node_g_[child] += g[i];
        node_h_[child] += h[i];
        node_cnt_[child] += 1;
      }
      active = std::move(next);
    }

    for (std::size_t node = 0; node < tree.feature.size(); ++node) {
      if (tree.feature[node] < 0) {
        tree.value[node] = node_h_[node] + lambda > 0.0
                               ? -node_g_[node] / (node_h_[node] + lambda)
                               : 0.0;
      }
    }
    node_g_.clear();
    node_h_.clear();
    node_cnt_.clear();
    return tree;
  }

 private:
  const std::vector<std::vector<double>>& rows_;
  const std::vector<std::vector<int>>& sorted_;
  int n_ = 0;
  int d_ = 0;
  std::vector<int> node_of_row_;
  std::vector<double> node_g_, node_h_;
  std::vector<int> node_cnt_;
};

Model fit_forest(const RegressorSpec& spec, const TrainingDataset& data, std::uint64_t seed) {
  const int n = static_cast<int>(data.size());
  const int d = static_cast<int>(data.feature_names.size());
  std::vector<std::vector<int>> sorted(d);
  for (int f = 0; f < d; ++f) {
    sorted[f].resize(n);
    for (int i = 0; i < n; ++i) sorted[f][i] = i;
    std::sort(sorted[f].begin(), sorted[f].end(), [&](int a, int b) {
      if (data.rows[a][f] != data.rows[b][f]) return data.rows[a][f] < data.rows[b][f];
      return a < b;
    });
  }

  Model model;
  model.spec = spec;
  model.feature_names = data.feature_names;

  const bool is_rf = spec.kind == RegressorKind::random_forest;
  const double lambda = spec.kind == RegressorKind::xgbt ? spec.reg_lambda : 0.0;
  if (!is_rf) {
    double mean = 0.0;
    for (double t : data.targets) mean += t;
    model.base_score = mean / n;
  }

  TreeGrower grower(data.rows, sorted);
  Rng rng = make_rng(seed, "surrogate.fit");
  std::vector<double> g(n), h(n);
  std::vector<double> pred(n, model.base_score);
  std::vector<int> cnt(n);
  std::vector<int> pool(n);
  const int subset = is_rf ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d)))) : 0;

  for (int t = 0; t < spec.n_estimators; ++t) {
    if (is_rf) {
      std::fill(cnt.begin(), cnt.end(), 0);
      for (int i = 0; i < n; ++i) cnt[uniform_int(rng, 0, n - 1)] += 1;
      for (int i = 0; i < n; ++i) {
        g[i] = -data.targets[i] * cnt[i];
        h[i] = cnt[i];
      }
    } else if (spec.subsample >= 1.0) {
      for (int i = 0; i < n; ++i) {
        g[i] = pred[i] - data.targets[i];
        h[i] = 1.0;
      }
    } else {
      const int m = std::max(1, static_cast<int>(std::llround(spec.subsample * n)));
      for (int i = 0; i < n; ++i) pool[i] = i;
      std::fill(g.begin(), g.end(), 0.0);
      std::fill(h.begin(), h.end(), 0.0);
      for (int k = 0; k < m; ++k) {
        const int j = static_cast<int>(uniform_int(rng, k, n - 1));
        std::swap(pool[k], pool[j]);
        const int i = pool[k];
        g[i] = pred[i] - data.targets[i];
        h[i] = 1.0;
      }
    }
    Tree tree = grower.grow(g, h, lambda, spec.max_depth, subset, rng);
    if (!is_rf) {
      for (int i = 0; i < n; ++i) pred[i] += spec.learning_rate * tree.predict_row(data.rows[i]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace

Model fit(const RegressorSpec& spec, const TrainingDataset& dataset, std::uint64_t seed) {
  if (dataset.size() == 0) throw std::invalid_argument("cannot fit on an empty dataset");
  for (const auto& row : dataset.rows) {
    if (row.size() != dataset.feature_names.size()) {
      throw std::invalid_argument("dataset row width does not match feature names");
    }
  }
  if (spec.kind == RegressorKind::linear) return fit_linear(spec, dataset);
  if (spec.max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
  if (spec.n_estimators < 1) throw std::invalid_argument("n_estimators must be at least 1");
  if (spec.subsample <= 0.0 || spec.subsample > 1.0) {
    throw std::invalid_argument("subsample must be in (0, 1]");
  }
  return fit_forest(spec, dataset, seed);
}

void save_model(const Model& model, const std::string& path) {
  json j;
  j["kind"] = to_string(model.spec.kind);
  j["max_depth"] = model.spec.max_depth;
  j["learning_rate"] = model.spec.learning_rate;
  j["n_estimators"] = model.spec.n_estimators;
  j["subsample"] = model.spec.subsample;
  j["reg_lambda"] = model.spec.reg_lambda;
  j["feature_names"] = model.feature_names;
  j["base_score"] = model.base_score;
  j["intercept"] = model.intercept;
  j["coefficients"] = model.coefficients;
  json trees = json::array();
  for (const auto& t : model.trees) {
    json node;
    node["feature"] = t.feature;
    node["threshold"] = t.threshold;
    node["left"] = t.left;
    node["right"] = t.right;
    node["value"] = t.value;
    trees.push_back(std::move(node));
  }
  j["trees"] = std::move(trees);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(1) << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + " is not valid JSON: " + e.what());
  }
  Model model;
  try {
    model.spec.kind = regressor_kind_from_string(j.at("kind").get<std::string>());
    model.spec.max_depth = j.at("max_depth").get<int>();
    model.spec.learning_rate = j.at("learning_rate").get<double>();
    model.spec.n_estimators = j.at("n_estimators").get<int>();
    model.spec.subsample = j.at("subsample").get<double>();
    model.spec.reg_lambda = j.at("reg_lambda").get<double>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.base_score = j.at("base_score").get<double>();
    model.intercept = j.at("intercept").get<double>();
    model.coefficients = j.at("coefficients").get<std::vector<double>>();
    for (const auto& node : j.at("trees")) {
      Tree t;
      t.feature = node.at("feature").get<std::vector<int>>();
      t.threshold = node.at("threshold").get<std::vector<double>>();
      t.left = node.at("left").get<std::vector<int>>();
      t.right = node.at("right").get<std::vector<int>>();
      t.value = node.at("value").get<std::vector<double>>();
      model.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path + " is missing model fields: " + e.what());
  }
  return model;
}

}  // namespace phaseopt::surrogate
