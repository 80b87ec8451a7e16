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

#ifndef CONCEPTLENS_SYNTH_H_
#define CONCEPTLENS_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlens/concept_space.h"
#include "conceptlens/linear_head.h"
#include "conceptlens/tensor_io.h"

namespace conceptlens {

// Synthetic confounded dataset. Every feature-map cell of an item with
// label y and confound sign g is
//   signal_strength * u_y + confound_strength * g * v + noise * eps
// where u_c, v and the distractor directions w_k are mutually orthonormal
// and eps is i.i.d. standard normal per cell. The confound v is never a
// concept, so only the raw-feature probe can latch onto it.
struct SynthConfig {
  std::size_t dim = 64;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t num_classes = 2;
  double signal_strength = 1.0;
  double confound_strength = 2.0;
  double noise = 0.1;
  // Probability that g takes the label-aligned sign. The val split follows
  // rho_train; the test split follows rho_test.
  double rho_train = 1.0;
  double rho_test = 0.0;
  std::size_t n_train = 500;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  std::size_t distractors_per_class = 3;
  // Fraction of test items that receive a spurious spike along a wrong
  // class's signal direction.
  double score_noise = 0.0;
  std::uint64_t seed = 7;

  std::size_t num_distractors() const {
    return distractors_per_class * num_classes;
  }
  std::size_t num_concepts() const { return num_classes + num_distractors(); }
  std::size_t num_directions() const { return num_concepts() + 1; }

  void validate() const;
};

// Spike amplitude, in units of signal_strength, for score_noise items.
inline constexpr double kSpikeScale = 2.0;

std::string synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(std::string_view json_text);

// Sign of the confound when it agrees with label y: odd labels +1, even -1.
int aligned_confound_sign(std::size_t label);

struct SynthItemTruth {
  int confound_sign = 1;
  bool aligned = true;
  std::optional<std::size_t> spiked_concept;
};

struct SynthDataset {
  SynthConfig config;
  DatasetManifest manifest;
  std::vector<TensorF32> feature_maps;  // parallel to manifest.items
  std::vector<SynthItemTruth> truth;    // parallel to manifest.items
  ConceptSet concepts;
  // Orthonormal rows: u_0..u_{M-1}, then v, then the distractors.
  Matrix directions;

  std::size_t confound_row() const { return config.num_classes; }
};

SynthDataset generate(const SynthConfig& config);

// Writes manifest.json, tensors/<id>.cltensr, concepts.json and
// concept_embeddings.cltensr under `directory`.
void write_synth_dataset(const SynthDataset& dataset,
                         const std::filesystem::path& directory);

struct SplitFeatures {
  std::vector<LabeledFeatures> train;
  std::vector<LabeledFeatures> val;
  std::vector<LabeledFeatures> test;
};

// Raw (unnormalized) concept scores for every item, in manifest order.
std::vector<ConceptVector> raw_concept_scores(const SynthDataset& dataset,
                                              PoolingMode mode);

struct ConceptPathResult {
  TrainedHead trained;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Keeps the given concept columns, fits a per-concept min-max normalizer on
// the train split, trains a head and scores it on val and test.
ConceptPathResult run_concept_path(const SynthDataset& dataset,
                                   std::span<const ConceptVector> raw_scores,
                                   std::span<const std::size_t> concept_indices,
                                   const TrainConfig& train_config);

// Average-pools each feature map to a D-vector per split.
SplitFeatures pooled_raw_features(const SynthDataset& dataset);

struct RobustnessReport {
  double concept_test_acc = 0.0;
  double raw_probe_test_acc = 0.0;
  double concept_val_acc = 0.0;
  double raw_probe_val_acc = 0.0;
  TrainReport concept_curve;
  TrainReport raw_probe_curve;
  SynthConfig config;
  TrainConfig train_config;
  std::uint64_t seed = 0;
};

RobustnessReport run_robustness_experiment(const SynthConfig& config,
                                           const TrainConfig& train_config);
RobustnessReport run_robustness_experiment(const SynthDataset& dataset,
                                           const TrainConfig& train_config);

std::string to_json(const RobustnessReport& report);

struct AblationRow {
  std::size_t k = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation, 0 for one repeat
  std::vector<double> accuracies;
  std::vector<std::vector<std::size_t>> subsets;
};

// For each K, test accuracy of the concept path averaged over `repeats`
// random K-subsets drawn with seeds derived from `seed`.
std::vector<AblationRow> concept_count_ablation(
    const SynthConfig& config, const TrainConfig& train_config,
    std::span<const std::size_t> k_values, std::size_t repeats,
    std::uint64_t seed);

std::vector<AblationRow> concept_count_ablation(
    const SynthDataset& dataset, std::span<const ConceptVector> raw_scores,
    const TrainConfig& train_config, std::span<const std::size_t> k_values,
    std::size_t repeats, std::uint64_t seed);

std::string to_json(std::span<const AblationRow> rows);

}  // namespace conceptlens

#endif  // CONCEPTLENS_SYNTH_H_
