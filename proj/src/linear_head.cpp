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

#include "conceptlens/linear_head.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "conceptlens/error.h"
#include "conceptlens/tensor_io.h"
#include "json_codec.h"

namespace conceptlens {
namespace {

using codec::json;
using codec::ordered_json;

void check_batch(const Matrix& weights, std::span<const LabeledFeatures> batch) {
  if (batch.empty()) throw_invalid("batch must be nonempty");
  for (const LabeledFeatures& item : batch) {
    if (item.features.size() != weights.cols()) {
      throw_invalid("feature length " + std::to_string(item.features.size()) +
                    " does not match weight columns " +
                    std::to_string(weights.cols()));
    }
    if (item.label >= weights.rows()) throw_invalid("label out of range");
  }
}

void compute_logits(const Matrix& weights, std::span<const double> features,
                    std::span<double> logits) {
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    const auto w = weights.row(c);
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * features[j];
    logits[c] = z;
  }
}

// Adds (p - y) e^T / scale for one item into `out`, returning that item's
// cross-entropy.
double accumulate_item(const Matrix& weights, const LabeledFeatures& item,
                       double scale, std::vector<double>& logits, Matrix& out) {
  compute_logits(weights, item.features, logits);
  const double lse = log_sum_exp(logits);
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    const double residual =
        std::exp(logits[c] - lse) - (c == item.label ? 1.0 : 0.0);
    if (residual == 0.0) continue;
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      out(c, j) += residual * item.features[j] / scale;
    }
  }
  return lse - logits[item.label];
}

double mean_loss(const Matrix& weights, std::span<const LabeledFeatures> data) {
  std::vector<double> logits(weights.rows());
  double total = 0.0;
  for (const LabeledFeatures& item : data) {
    compute_logits(weights, item.features, logits);
    total += log_sum_exp(logits) - logits[item.label];
  }
  return total / static_cast<double>(data.size());
}

double soft_threshold(double value, double shrink) {
  if (value > shrink) return value - shrink;
  if (value < -shrink) return value + shrink;
  return 0.0;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw_invalid("matrix value count does not match rows * cols");
  }
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double log_sum_exp(std::span<const double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

Prediction predict(const Matrix& weights, std::span<const double> features) {
  if (features.size() != weights.cols()) {
    throw_invalid("concept vector length " + std::to_string(features.size()) +
                  " does not match head width " +
                  std::to_string(weights.cols()));
  }
  Prediction out;
  out.logits.resize(weights.rows());
  compute_logits(weights, features, out.logits);
  const double peak = *std::max_element(out.logits.begin(), out.logits.end());
  out.probabilities.resize(out.logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < out.logits.size(); ++c) {
    out.probabilities[c] = std::exp(out.logits[c] - peak);
    sum += out.probabilities[c];
  }
  for (double& p : out.probabilities) p /= sum;
  out.predicted_class = argmax(out.logits);
  return out;
}

double ce_loss(std::span<const Prediction> predictions,
               std::span<const std::size_t> labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw_invalid("ce_loss needs one label per prediction and K >= 1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& logits = predictions[i].logits;
    if (labels[i] >= logits.size()) throw_invalid("label out of range");
    total += log_sum_exp(logits) - logits[labels[i]];
  }
  return total / static_cast<double>(predictions.size());
}

double ce_loss(const Matrix& weights, std::span<const LabeledFeatures> batch) {
  check_batch(weights, batch);
  return mean_loss(weights, batch);
}

Matrix grad(const Matrix& weights, std::span<const LabeledFeatures> batch) {
  check_batch(weights, batch);
  Matrix out(weights.rows(), weights.cols());
  std::vector<double> logits(weights.rows());
  const auto scale = static_cast<double>(batch.size());
  for (const LabeledFeatures& item : batch) {
    accumulate_item(weights, item, scale, logits, out);
  }
  return out;
}

double accuracy(const Matrix& weights, std::span<const LabeledFeatures> data) {
  if (data.empty()) throw_invalid("cannot evaluate an empty set");
  std::vector<double> logits(weights.rows());
  std::size_t correct = 0;
  for (const LabeledFeatures& item : data) {
    if (item.features.size() != weights.cols()) {
      throw_invalid("feature length does not match weight columns");
    }
    compute_logits(weights, item.features, logits);
    if (argmax(logits) == item.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw_invalid("learning_rate must be > 0");
  }
  if (std::find(std::begin(kBatchSizeGrid), std::end(kBatchSizeGrid),
                batch_size) == std::end(kBatchSizeGrid)) {
    throw_invalid("batch_size must be one of 8, 16, 32, 64, 128");
  }
  if (max_epochs < 1) throw_invalid("max_epochs must be >= 1");
  if (patience > max_epochs) throw_invalid("patience must be <= max_epochs");
  if (!(l1_lambda >= 0.0) || !std::isfinite(l1_lambda)) {
    throw_invalid("l1_lambda must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw_invalid("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw_invalid("adam_eps must be > 0");
}

TrainedWeights train_weights(std::size_t num_classes,
                             std::span<const LabeledFeatures> train,
                             std::span<const LabeledFeatures> val,
                             std::span<const LabeledFeatures> test,
                             const TrainConfig& config) {
  config.validate();
  if (num_classes < 2) throw_invalid("need at least 2 classes");
  if (train.empty()) throw_invalid("empty train split");
  if (val.empty()) throw_invalid("empty val split");
  const std::size_t width = train.front().features.size();

  Matrix weights(num_classes, width);
  check_batch(weights, train);
  check_batch(weights, val);
  if (!test.empty()) check_batch(weights, test);

  Matrix first_moment(num_classes, width);
  Matrix second_moment(num_classes, width);
  Matrix gradient(num_classes, width);
  std::vector<double> logits(num_classes);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);

  const double shrink = config.learning_rate * config.l1_lambda;
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  TrainedWeights result;
  result.weights = weights;
  double best_val_accuracy = -1.0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const auto scale = static_cast<double>(stop - start);
      std::fill(gradient.mutable_values().begin(),
                gradient.mutable_values().end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        accumulate_item(weights, train[order[k]], scale, logits, gradient);
      }

      beta1_power *= config.adam_beta1;
      beta2_power *= config.adam_beta2;
      auto w = weights.mutable_values();
      auto m = first_moment.mutable_values();
      auto v = second_moment.mutable_values();
      const auto g = gradient.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g[i];
        v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
        const double m_hat = m[i] / (1.0 - beta1_power);
        const double v_hat = v[i] / (1.0 - beta2_power);
        w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        if (shrink > 0.0) {
          w[i] = soft_threshold(w[i], shrink / (std::sqrt(v_hat) + config.adam_eps));
        }
      }
    }

    EpochRecord record;
    record.train_loss = mean_loss(weights, train);
    record.val_loss = mean_loss(weights, val);
    record.val_accuracy = accuracy(weights, val);
    if (!test.empty()) record.test_accuracy = accuracy(weights, test);
    if (!std::isfinite(record.train_loss) || !std::isfinite(record.val_loss)) {
      throw Error(ErrorKind::kNumeric,
                  "non-finite loss at epoch " + std::to_string(epoch) +
                      " (train " + std::to_string(record.train_loss) +
                      ", val " + std::to_string(record.val_loss) +
                      "); lower the learning rate or check the inputs");
    }
    result.report.epochs.push_back(record);

    if (record.val_accuracy > best_val_accuracy) {
      best_val_accuracy = record.val_accuracy;
      result.report.best_epoch = epoch;
      result.weights = weights;
    }
    if (epoch - result.report.best_epoch >= config.patience &&
        epoch + 1 < config.max_epochs) {
      result.report.stopped_early = true;
      break;
    }
  }
  return result;
}

void LinearHead::validate() const {
  if (weights.rows() < 2) throw_invalid("head needs at least 2 classes");
  if (weights.cols() < 1) throw_invalid("head needs at least 1 concept");
  if (class_names.size() != weights.rows()) {
    throw_invalid("class name count does not match weight rows");
  }
  if (concept_texts.size() != weights.cols()) {
    throw_invalid("concept count does not match weight columns");
  }
  for (double w : weights.values()) {
    if (!std::isfinite(w)) throw_invalid("non-finite weight");
  }
  if (normalizer.mode == NormalizerMode::kPerConceptMinMax) {
    if (normalizer.min.size() != weights.cols() ||
        normalizer.max.size() != weights.cols()) {
      throw_invalid("normalizer length does not match concept count");
    }
    for (std::size_t i = 0; i < normalizer.min.size(); ++i) {
      if (!(normalizer.min[i] <= normalizer.max[i])) {
        throw_invalid("normalizer has min > max");
      }
    }
  }
}

Prediction forward(const LinearHead& head, const ConceptVector& normalized) {
  return predict(head.weights, normalized.scores);
}

Prediction predict_raw(const LinearHead& head, const ConceptVector& raw) {
  return forward(head, apply_normalizer(head.normalizer, raw));
}

double evaluate(const LinearHead& head,
                std::span<const LabeledFeatures> normalized_vectors) {
  return accuracy(head.weights, normalized_vectors);
}

TrainedHead train(LinearHead head, std::span<const LabeledFeatures> train,
                  std::span<const LabeledFeatures> val,
                  std::span<const LabeledFeatures> test,
                  const TrainConfig& config) {
  if (head.class_names.size() < 2) throw_invalid("head needs class names");
  if (!train.empty() && train.front().features.size() != head.concept_texts.size()) {
    throw_invalid("concept vectors do not match the head's concept count");
  }
  TrainedWeights fitted =
      train_weights(head.class_names.size(), train, val, test, config);
  for (double& w : fitted.weights.mutable_values()) {
    w = static_cast<double>(static_cast<float>(w));
  }
  head.weights = std::move(fitted.weights);
  head.validate();
  return TrainedHead{std::move(head), std::move(fitted.report)};
}

void save_model(const LinearHead& head, const std::filesystem::path& model_json) {
  head.validate();
  std::vector<float> values(head.weights.values().begin(),
                            head.weights.values().end());
  TensorF32 tensor({head.num_classes(), head.num_concepts()}, std::move(values));

  ordered_json root;
  root["format"] = "conceptlens.linear_head";
  root["version"] = kModelFormatVersion;
  root["class_names"] = head.class_names;
  root["concept_texts"] = head.concept_texts;
  root["pooling_mode"] = to_string(head.pooling);
  ordered_json normalizer;
  normalizer["mode"] = to_string(head.normalizer.mode);
  if (head.normalizer.mode == NormalizerMode::kPerConceptMinMax) {
    normalizer["min"] = head.normalizer.min;
    normalizer["max"] = head.normalizer.max;
  }
  root["normalizer"] = std::move(normalizer);
  root["weights_path"] = kDefaultWeightsFile;

  write_tensor(tensor, model_json.parent_path() / kDefaultWeightsFile);
  write_text_file(model_json, root.dump(2) + "\n");
}

LinearHead load_model(const std::filesystem::path& model_json) {
  const json root = codec::parse(read_text_file(model_json), "model file");
  if (!root.is_object()) throw_format("model file must be a JSON object");
  if (!root.contains("version") || !root["version"].is_number_integer()) {
    throw_format("incomplete model: missing version");
  }
  if (root["version"].get<int>() != kModelFormatVersion) {
    throw_format("model version mismatch: expected " +
                 std::to_string(kModelFormatVersion) + ", found " +
                 std::to_string(root["version"].get<int>()));
  }
  for (const char* key : {"class_names", "concept_texts", "pooling_mode",
                          "normalizer", "weights_path"}) {
    if (!root.contains(key)) {
      throw_format(std::string("incomplete model: missing ") + key);
    }
  }
  LinearHead head;
  try {
    head.class_names = root["class_names"].get<std::vector<std::string>>();
    head.concept_texts = root["concept_texts"].get<std::vector<std::string>>();
    head.pooling = parse_pooling_mode(root["pooling_mode"].get<std::string>());
    const json& normalizer = root["normalizer"];
    if (!normalizer.is_object() || !normalizer.contains("mode")) {
      throw_format("incomplete model: normalizer has no mode");
    }
    head.normalizer.mode =
        parse_normalizer_mode(normalizer["mode"].get<std::string>());
    if (head.normalizer.mode == NormalizerMode::kPerConceptMinMax) {
      if (!normalizer.contains("min") || !normalizer.contains("max")) {
        throw_format("incomplete model: normalizer is missing min/max");
      }
      head.normalizer.min = normalizer["min"].get<std::vector<double>>();
      head.normalizer.max = normalizer["max"].get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw_format(std::string("malformed model file: ") + e.what());
  }

  const TensorF32 tensor = read_tensor(
      model_json.parent_path() / root["weights_path"].get<std::string>());
  if (tensor.rank() != 2 || tensor.dim(0) != head.class_names.size() ||
      tensor.dim(1) != head.concept_texts.size()) {
    throw_format("weight tensor shape does not match class/concept counts");
  }
  head.weights = Matrix(tensor.dim(0), tensor.dim(1),
                        std::vector<double>(tensor.data().begin(),
                                            tensor.data().end()));
  try {
    head.validate();
  } catch (const Error& e) {
    throw_format(std::string("invalid model: ") + e.what());
  }
  return head;
}

std::string train_config_to_json(const TrainConfig& config) {
  return codec::to_json(config).dump(2) + "\n";
}

std::string train_report_to_json(const TrainReport& report) {
  return codec::to_json(report).dump(2) + "\n";
}

TrainConfig train_config_from_json(std::string_view json_text) {
  return codec::train_config_from(codec::parse(json_text, "train config"));
}

namespace codec {

json parse(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw_format(std::string(what) + " is not valid JSON: " + e.what());
  }
}

ordered_json to_json(const TrainConfig& config) {
  ordered_json j;
  j["learning_rate"] = config.learning_rate;
  j["batch_size"] = config.batch_size;
  j["max_epochs"] = config.max_epochs;
  j["patience"] = config.patience;
  j["l1_lambda"] = config.l1_lambda;
  j["seed"] = config.seed;
  j["adam_beta1"] = config.adam_beta1;
  j["adam_beta2"] = config.adam_beta2;
  j["adam_eps"] = config.adam_eps;
  return j;
}

TrainConfig train_config_from(const json& j) {
  if (!j.is_object()) throw_format("train config must be a JSON object");
  TrainConfig config;
  try {
    config.learning_rate = j.value("learning_rate", config.learning_rate);
    config.batch_size = j.value("batch_size", config.batch_size);
    config.max_epochs = j.value("max_epochs", config.max_epochs);
    config.patience = j.value("patience", config.patience);
    config.l1_lambda = j.value("l1_lambda", config.l1_lambda);
    config.seed = j.value("seed", config.seed);
    config.adam_beta1 = j.value("adam_beta1", config.adam_beta1);
    config.adam_beta2 = j.value("adam_beta2", config.adam_beta2);
    config.adam_eps = j.value("adam_eps", config.adam_eps);
  } catch (const json::exception& e) {
    throw_format(std::string("malformed train config: ") + e.what());
  }
  config.validate();
  return config;
}

ordered_json to_json(const TrainReport& report) {
  ordered_json train_loss = ordered_json::array();
  ordered_json val_loss = ordered_json::array();
  ordered_json val_accuracy = ordered_json::array();
  ordered_json test_accuracy = ordered_json::array();
  for (const EpochRecord& epoch : report.epochs) {
    train_loss.push_back(epoch.train_loss);
    val_loss.push_back(epoch.val_loss);
    val_accuracy.push_back(epoch.val_accuracy);
    if (epoch.test_accuracy) test_accuracy.push_back(*epoch.test_accuracy);
  }
  ordered_json j;
  j["epochs"] = report.epochs.size();
  j["best_epoch"] = report.best_epoch;
  j["stopped_early"] = report.stopped_early;
  j["train_loss"] = std::move(train_loss);
  j["val_loss"] = std::move(val_loss);
  j["val_accuracy"] = std::move(val_accuracy);
  j["test_accuracy"] = std::move(test_accuracy);
  return j;
}

ordered_json to_json(const Prediction& prediction) {
  ordered_json j;
  j["logits"] = prediction.logits;
  j["probabilities"] = prediction.probabilities;
  j["predicted_class"] = prediction.predicted_class;
  return j;
}

}  // namespace codec
}  // namespace conceptlens
