#pragma once

// O(n^2) reference values over all ordered pairs (i, j), i == j included.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

struct PairwiseMoments {
  double mean = 0.0;
  double pair_max = 0.0;
  double half_abs_diff = 0.0;
  double gini = 0.0;
};

inline PairwiseMoments pairwise(const std::vector<double>& b) {
  const double n = static_cast<double>(b.size());
  // Long double accumulation keeps the reference below the 1e-12 bar.
  long double sum = 0.0L, max_sum = 0.0L, abs_sum = 0.0L;
  for (double x : b) sum += x;
  for (double x : b) {
    for (double y : b) {
      max_sum += std::max(x, y);
      abs_sum += std::fabs(x - y);
    }
  }
  PairwiseMoments m;
  m.mean = static_cast<double>(sum / n);
  m.pair_max = static_cast<double>(max_sum / (n * n));
  m.half_abs_diff = static_cast<double>(abs_sum / (2.0L * n * n));
  m.gini = m.mean == 0.0 ? INFINITY : static_cast<double>(abs_sum / (n * n) / (2.0L * m.mean));
  return m;
}

// Pair maximum over distinct pairs only.
inline double pair_max_distinct(const std::vector<double>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (i != j) s += std::max(b[i], b[j]);
    }
  }
  const double n = static_cast<double>(b.size());
  return static_cast<double>(s / (n * (n - 1.0)));
}

}  // namespace oracle
