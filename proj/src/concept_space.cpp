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

#include "conceptlens/concept_space.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "conceptlens/error.h"

namespace conceptlens {

std::string_view to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::kAvg:
      return "avg";
    case PoolingMode::kMax:
      return "max";
    case PoolingMode::kAvgPlusMax:
      return "avg_plus_max";
  }
  return "avg";
}

PoolingMode parse_pooling_mode(std::string_view text) {
  if (text == "avg") return PoolingMode::kAvg;
  if (text == "max") return PoolingMode::kMax;
  if (text == "avg_plus_max") return PoolingMode::kAvgPlusMax;
  throw_invalid("unknown pooling mode '" + std::string(text) + "'");
}

Heatmap::Heatmap(std::size_t height, std::size_t width,
                 std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0) throw_invalid("heatmap must be non-empty");
  if (values_.size() != height_ * width_) {
    throw_invalid("heatmap value count does not match H*W");
  }
}

Heatmap heatmap(const TensorF32& feature_map,
                std::span<const float> concept_embedding) {
  if (feature_map.rank() != 3) {
    throw_invalid("feature map must have shape [H, W, D]");
  }
  const std::size_t height = feature_map.dim(0);
  const std::size_t width = feature_map.dim(1);
  const std::size_t depth = feature_map.dim(2);
  if (concept_embedding.size() != depth) {
    throw_invalid("dimension mismatch: feature map D=" + std::to_string(depth) +
                  ", concept embedding D=" +
                  std::to_string(concept_embedding.size()));
  }

  double concept_norm_sq = 0.0;
  for (float v : concept_embedding) concept_norm_sq += double{v} * v;
  if (!(concept_norm_sq > 0.0)) throw_invalid("zero-norm concept embedding");
  const double concept_norm = std::sqrt(concept_norm_sq);

  const std::span<const float> cells = feature_map.data();
  std::vector<double> values(height * width);
  for (std::size_t cell = 0; cell < height * width; ++cell) {
    const std::span<const float> feature = cells.subspan(cell * depth, depth);
    double dot = 0.0;
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < depth; ++d) {
      dot += double{concept_embedding[d]} * feature[d];
      norm_sq += double{feature[d]} * feature[d];
    }
    values[cell] =
        norm_sq > 0.0 ? dot / (concept_norm * std::sqrt(norm_sq)) : 0.0;
  }
  return Heatmap(height, width, std::move(values));
}

double pool_avg(const Heatmap& map) {
  const auto values = map.values();
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  return sum / static_cast<double>(values.size());
}

double pool_max(const Heatmap& map) {
  const auto values = map.values();
  return *std::max_element(values.begin(), values.end());
}

double pool(const Heatmap& map, PoolingMode mode) {
  switch (mode) {
    case PoolingMode::kAvg:
      return pool_avg(map);
    case PoolingMode::kMax:
      return pool_max(map);
    case PoolingMode::kAvgPlusMax:
      return 0.5 * (pool_avg(map) + pool_max(map));
  }
  return pool_avg(map);
}

ConceptVector concept_vector(const TensorF32& feature_map,
                             const ConceptSet& concepts, PoolingMode mode) {
  ConceptVector out;
  out.pooling = mode;
  out.scores.reserve(concepts.size());
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    out.scores.push_back(pool(heatmap(feature_map, concepts.embedding(i)), mode));
  }
  return out;
}

std::string_view to_string(NormalizerMode mode) {
  switch (mode) {
    case NormalizerMode::kPerConceptMinMax:
      return "per_concept_minmax";
    case NormalizerMode::kGlobalAffine:
      return "global_affine";
  }
  return "per_concept_minmax";
}

NormalizerMode parse_normalizer_mode(std::string_view text) {
  if (text == "per_concept_minmax") return NormalizerMode::kPerConceptMinMax;
  if (text == "global_affine") return NormalizerMode::kGlobalAffine;
  throw_invalid("unknown normalizer mode '" + std::string(text) + "'");
}

Normalizer fit_normalizer(std::span<const ConceptVector> train_vectors,
                          NormalizerMode mode) {
  if (train_vectors.empty()) {
    throw_invalid("cannot fit a normalizer on an empty training split");
  }
  const std::size_t n = train_vectors.front().size();
  for (const ConceptVector& v : train_vectors) {
    if (v.size() != n) throw_invalid("concept vectors differ in length");
  }
  Normalizer normalizer;
  normalizer.mode = mode;
  if (mode == NormalizerMode::kGlobalAffine) return normalizer;

  normalizer.min = train_vectors.front().scores;
  normalizer.max = train_vectors.front().scores;
  for (const ConceptVector& v : train_vectors) {
    for (std::size_t i = 0; i < n; ++i) {
      normalizer.min[i] = std::min(normalizer.min[i], v.scores[i]);
      normalizer.max[i] = std::max(normalizer.max[i], v.scores[i]);
    }
  }
  return normalizer;
}

ConceptVector apply_normalizer(const Normalizer& normalizer,
                               const ConceptVector& vector) {
  ConceptVector out;
  out.pooling = vector.pooling;
  out.scores.resize(vector.size());
  if (normalizer.mode == NormalizerMode::kGlobalAffine) {
    for (std::size_t i = 0; i < vector.size(); ++i) {
      out.scores[i] = std::clamp((vector.scores[i] + 1.0) / 2.0, 0.0, 1.0);
    }
    return out;
  }
  if (normalizer.min.size() != vector.size() ||
      normalizer.max.size() != vector.size()) {
    throw_invalid("normalizer length " + std::to_string(normalizer.min.size()) +
                  " does not match concept vector length " +
                  std::to_string(vector.size()));
  }
  for (std::size_t i = 0; i < vector.size(); ++i) {
    const double lo = normalizer.min[i];
    const double hi = normalizer.max[i];
    // A constant concept carries no signal; 0.5 keeps it sign-neutral.
    out.scores[i] = hi > lo ? std::clamp((vector.scores[i] - lo) / (hi - lo),
                                         0.0, 1.0)
                            : 0.5;
  }
  return out;
}

std::vector<std::size_t> subset_indices(std::size_t n, std::size_t k,
                                        std::uint64_t seed) {
  if (k < 1 || k > n) {
    throw_invalid("subset size K=" + std::to_string(k) + " out of range [1, " +
                  std::to_string(n) + "]");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  std::mt19937_64 rng(seed);
  // Selection sampling over a forward range keeps the original order.
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), k, rng);
  return chosen;
}

ConceptSet subset_concepts(const ConceptSet& concepts, std::size_t k,
                           std::uint64_t seed) {
  const auto indices = subset_indices(concepts.size(), k, seed);
  return concepts.select(indices);
}

}  // namespace conceptlens
