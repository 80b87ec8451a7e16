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

#ifndef CONCEPTLENS_CONCEPT_SPACE_H_
#define CONCEPTLENS_CONCEPT_SPACE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "conceptlens/tensor.h"
#include "conceptlens/tensor_io.h"

namespace conceptlens {

enum class PoolingMode { kAvg, kMax, kAvgPlusMax };

std::string_view to_string(PoolingMode mode);
PoolingMode parse_pooling_mode(std::string_view text);

// H x W grid of cosine similarities between one concept embedding and each
// feature-map cell.
class Heatmap {
 public:
  Heatmap(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double at(std::size_t row, std::size_t col) const {
    return values_[row * width_ + col];
  }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> values_;
};

// Cosine similarity of `concept_embedding` against every cell of an
// [H, W, D] feature map. A zero-norm cell scores 0.
Heatmap heatmap(const TensorF32& feature_map,
                std::span<const float> concept_embedding);

double pool_avg(const Heatmap& map);
double pool_max(const Heatmap& map);
double pool(const Heatmap& map, PoolingMode mode);

struct ConceptVector {
  std::vector<double> scores;
  PoolingMode pooling = PoolingMode::kAvg;

  std::size_t size() const { return scores.size(); }
};

// One pooled heatmap score per concept, in concept-set order.
ConceptVector concept_vector(const TensorF32& feature_map,
                             const ConceptSet& concepts, PoolingMode mode);

enum class NormalizerMode { kPerConceptMinMax, kGlobalAffine };

std::string_view to_string(NormalizerMode mode);
NormalizerMode parse_normalizer_mode(std::string_view text);

// Maps raw pooled similarities into [0, 1]. Per-concept min/max are only
// populated for kPerConceptMinMax.
struct Normalizer {
  NormalizerMode mode = NormalizerMode::kPerConceptMinMax;
  std::vector<double> min;
  std::vector<double> max;
};

Normalizer fit_normalizer(std::span<const ConceptVector> train_vectors,
                          NormalizerMode mode);

ConceptVector apply_normalizer(const Normalizer& normalizer,
                               const ConceptVector& vector);

// Deterministic, order-preserving K-subset of [0, n).
std::vector<std::size_t> subset_indices(std::size_t n, std::size_t k,
                                        std::uint64_t seed);

ConceptSet subset_concepts(const ConceptSet& concepts, std::size_t k,
                           std::uint64_t seed);

}  // namespace conceptlens

#endif  // CONCEPTLENS_CONCEPT_SPACE_H_
