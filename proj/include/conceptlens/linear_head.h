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

#ifndef CONCEPTLENS_LINEAR_HEAD_H_
#define CONCEPTLENS_LINEAR_HEAD_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlens/concept_space.h"

namespace conceptlens {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct LabeledFeatures {
  std::vector<double> features;
  std::size_t label = 0;
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;
  std::size_t predicted_class = 0;
};

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

double log_sum_exp(std::span<const double> values);

// logits = weights * features; probabilities via max-shifted softmax.
Prediction predict(const Matrix& weights, std::span<const double> features);

// Mean categorical cross-entropy, evaluated from the stored logits through
// log-softmax.
double ce_loss(std::span<const Prediction> predictions,
               std::span<const std::size_t> labels);
double ce_loss(const Matrix& weights, std::span<const LabeledFeatures> batch);

// Analytic gradient of ce_loss w.r.t. the weights:
//   (1/K) * sum_i (p_i - y_i) e_i^T
Matrix grad(const Matrix& weights, std::span<const LabeledFeatures> batch);

double accuracy(const Matrix& weights, std::span<const LabeledFeatures> data);

inline constexpr std::size_t kBatchSizeGrid[] = {8, 16, 32, 64, 128};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 5000;
  std::size_t patience = 200;
  double l1_lambda = 0.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(std::string_view json_text);

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // zero-based index into epochs
  bool stopped_early = false;
};

std::string train_report_to_json(const TrainReport& report);

struct TrainedWeights {
  Matrix weights;
  TrainReport report;
};

// Mini-batch Adam from a zero initialization. Each epoch reshuffles the
// training set with a generator seeded from config.seed. When l1_lambda > 0
// every Adam step is followed by the proximal step of l1_lambda * |W|_1 in
// Adam's diagonal metric: a soft-threshold of lr * l1_lambda / (sqrt(v_hat)
// + eps) per weight. A weight therefore stays at exactly zero while its
// averaged gradient magnitude is at most l1_lambda. The returned weights are those of the earliest epoch with the best validation
// accuracy. `test` may be empty.
TrainedWeights train_weights(std::size_t num_classes,
                             std::span<const LabeledFeatures> train,
                             std::span<const LabeledFeatures> val,
                             std::span<const LabeledFeatures> test,
                             const TrainConfig& config);

// Bias-free linear classifier over normalized concept scores.
struct LinearHead {
  Matrix weights;  // [num_classes, num_concepts]
  std::vector<std::string> class_names;
  std::vector<std::string> concept_texts;
  Normalizer normalizer;
  PoolingMode pooling = PoolingMode::kAvg;

  std::size_t num_classes() const { return weights.rows(); }
  std::size_t num_concepts() const { return weights.cols(); }

  void validate() const;
};

// `normalized` must already be in the head's [0, 1] score space.
Prediction forward(const LinearHead& head, const ConceptVector& normalized);

// Raw concept vector -> normalized -> prediction.
Prediction predict_raw(const LinearHead& head, const ConceptVector& raw);

double evaluate(const LinearHead& head,
                std::span<const LabeledFeatures> normalized_vectors);

struct TrainedHead {
  LinearHead head;
  TrainReport report;
};

// Trains `head.weights` from scratch, keeping every other field. Final
// weights are rounded to binary32 so that save_model/load_model is exact.
TrainedHead train(LinearHead head, std::span<const LabeledFeatures> train,
                  std::span<const LabeledFeatures> val,
                  std::span<const LabeledFeatures> test,
                  const TrainConfig& config);

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kDefaultWeightsFile = "weights.cltensr";

// Writes model.json at `model_json` and the weight tensor next to it.
void save_model(const LinearHead& head, const std::filesystem::path& model_json);
LinearHead load_model(const std::filesystem::path& model_json);

}  // namespace conceptlens

#endif  // CONCEPTLENS_LINEAR_HEAD_H_
