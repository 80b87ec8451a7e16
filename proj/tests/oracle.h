/* Copyright 2026 The ConceptLens Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive: explicit loops, no shared code with src/.

#ifndef CONCEPTLENS_TESTS_ORACLE_H_
#define CONCEPTLENS_TESTS_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace conceptlens::oracle {

using Grid = std::vector<std::vector<std::vector<double>>>;  // [H][W][D]

// Pooled cosine score of one concept against an [H][W][D] grid.
// mode: 0 avg, 1 max, 2 mean of the two.
inline double concept_score(const Grid& grid, const std::vector<double>& t,
                            int mode) {
  double t_norm = 0.0;
  for (double x : t) t_norm += x * x;
  t_norm = std::sqrt(t_norm);
  double sum = 0.0;
  double best = -1e300;
  std::size_t cells = 0;
  for (const auto& row : grid) {
    for (const auto& cell : row) {
      double dot = 0.0;
      double norm = 0.0;
      for (std::size_t d = 0; d < t.size(); ++d) {
        dot += cell[d] * t[d];
        norm += cell[d] * cell[d];
      }
      const double cos = norm == 0.0 ? 0.0 : dot / (std::sqrt(norm) * t_norm);
      sum += cos;
      best = std::max(best, cos);
      ++cells;
    }
  }
  const double avg = sum / static_cast<double>(cells);
  if (mode == 0) return avg;
  if (mode == 1) return best;
  return 0.5 * (avg + best);
}

using Weights = std::vector<std::vector<double>>;  // [M_c][N]

struct Example {
  std::vector<double> e;
  std::size_t y = 0;
};

// Mean cross-entropy by direct exponentiation after max-shifting.
inline double cross_entropy(const Weights& w, const std::vector<Example>& batch) {
  double total = 0.0;
  for (const Example& ex : batch) {
    std::vector<double> z(w.size(), 0.0);
    for (std::size_t c = 0; c < w.size(); ++c) {
      for (std::size_t j = 0; j < ex.e.size(); ++j) z[c] += w[c][j] * ex.e[j];
    }
    const double m = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - m);
    total += -(z[ex.y] - m - std::log(denom));
  }
  return total / static_cast<double>(batch.size());
}

// Central differences of cross_entropy with respect to every weight.
inline Weights finite_difference_grad(Weights w, const std::vector<Example>& batch,
                                      double step = 1e-4) {
  Weights g(w.size(), std::vector<double>(w[0].size(), 0.0));
  for (std::size_t c = 0; c < w.size(); ++c) {
    for (std::size_t j = 0; j < w[c].size(); ++j) {
      const double saved = w[c][j];
      w[c][j] = saved + step;
      const double up = cross_entropy(w, batch);
      w[c][j] = saved - step;
      const double down = cross_entropy(w, batch);
      w[c][j] = saved;
      g[c][j] = (up - down) / (2.0 * step);
    }
  }
  return g;
}

// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const Weights& a, const Weights& b,
                             double floor = 1e-8) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    for (std::size_t j = 0; j < a[c].size(); ++j) {
      diff += (a[c][j] - b[c][j]) * (a[c][j] - b[c][j]);
      na += a[c][j] * a[c][j];
      nb += b[c][j] * b[c][j];
    }
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace conceptlens::oracle

#endif  // CONCEPTLENS_TESTS_ORACLE_H_
