#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace phaseopt {

// Fitness assigned to plans the evaluator rejects (blocked approach with
// demand on it) and to surrogate predictions clamped at zero.
inline constexpr double kDefaultPenalty = 1e6;

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Full round-trip precision, for persisted model parameters and the like.
inline std::string fmt_double_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string join_ints(const std::vector<int>& values, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(sep);
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace phaseopt
