#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "phaseopt/rng.hpp"

namespace phaseopt::surrogate {

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent
  double r2 = 0.0;
};

inline Metrics evaluate_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("prediction count mismatch");
  if (y_true.empty()) throw std::invalid_argument("cannot score an empty sample");
  const std::size_t n = y_true.size();
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y_pred[i] - y_true[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (y_true[i] == 0.0) throw std::invalid_argument("percentage error undefined for zero truth");
    pct_sum += std::abs(e / y_true[i]);
    mean += y_true[i];
  }
  mean /= n;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = y_true[i] - mean;
    ss_tot += d * d;
  }
  Metrics m;
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = 100.0 * pct_sum / n;
  if (ss_tot == 0.0) {
    m.r2 = sq_sum == 0.0 ? 1.0 : 0.0;
  } else {
    m.r2 = 1.0 - sq_sum / ss_tot;
  }
  return m;
}

// Shuffled contiguous folds; the first n % k folds carry the extra row.
inline std::vector<std::vector<int>> kfold_split(int n, int k, Rng& rng) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  if (n < k) throw std::invalid_argument("fewer rows than folds");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i >= 1; --i) {
    const int j = static_cast<int>(uniform_int(rng, 0, i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<int>> folds(k);
  const int base = n / k, extra = n % k;
  int at = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + at, order.begin() + at + size);
    at += size;
  }
  return folds;
}

}  // namespace phaseopt::surrogate
