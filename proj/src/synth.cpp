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

#include "conceptlens/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "conceptlens/error.h"
#include "json_codec.h"

namespace conceptlens {
namespace {

using codec::json;
using codec::ordered_json;

// Modified Gram-Schmidt with a second re-orthogonalization pass. Rows whose
// residual collapses are redrawn.
Matrix orthonormal_directions(std::size_t count, std::size_t dim,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> gaussian(0.0, 1.0);
  Matrix out(count, dim);
  std::vector<double> candidate(dim);
  for (std::size_t r = 0; r < count; ++r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 16) throw_invalid("failed to draw independent directions");
      for (double& x : candidate) x = gaussian(rng);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t prev = 0; prev < r; ++prev) {
          double dot = 0.0;
          for (std::size_t d = 0; d < dim; ++d) dot += candidate[d] * out(prev, d);
          for (std::size_t d = 0; d < dim; ++d) candidate[d] -= dot * out(prev, d);
        }
      }
      double norm_sq = 0.0;
      for (double x : candidate) norm_sq += x * x;
      if (norm_sq < 1e-6) continue;
      const double norm = std::sqrt(norm_sq);
      for (std::size_t d = 0; d < dim; ++d) out(r, d) = candidate[d] / norm;
      break;
    }
  }
  return out;
}

// Concept embeddings are stored as binary32, so v must also be orthogonal to
// the rounded rows, not just the exact ones. The basis spans both; rounding
// residuals are tiny but still well conditioned after normalization.
void exclude_rounded_concepts(Matrix& directions, std::size_t confound_row) {
  const std::size_t dim = directions.cols();
  std::vector<std::vector<double>> basis;
  auto try_add = [&](std::vector<double> candidate, double reference) {
    if (basis.size() + 1 >= dim) return;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += candidate[d] * b[d];
        for (std::size_t d = 0; d < dim; ++d) candidate[d] -= dot * b[d];
      }
    }
    double norm_sq = 0.0;
    for (double x : candidate) norm_sq += x * x;
    if (norm_sq <= 1e-28 * reference) return;
    const double norm = std::sqrt(norm_sq);
    for (double& x : candidate) x /= norm;
    basis.push_back(std::move(candidate));
  };
  std::vector<double> row(dim);
  for (int rounded = 0; rounded < 2; ++rounded) {
    for (std::size_t r = 0; r < directions.rows(); ++r) {
      if (r == confound_row) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        row[d] = rounded ? static_cast<double>(static_cast<float>(directions(r, d)))
                         : directions(r, d);
      }
      try_add(row, 1.0);
    }
  }
  std::vector<double> v(dim);
  for (std::size_t d = 0; d < dim; ++d) v[d] = directions(confound_row, d);
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += v[d] * b[d];
      for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * b[d];
    }
  }
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  for (std::size_t d = 0; d < dim; ++d) directions(confound_row, d) = v[d] / norm;
}

std::string item_id(Split split, std::size_t index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%s_%04zu",
                std::string(to_string(split)).c_str(), index);
  return buffer;
}

LabeledFeatures pooled_features(const TensorF32& feature_map,
                                std::size_t label) {
  const std::size_t depth = feature_map.dim(2);
  const std::size_t cells = feature_map.dim(0) * feature_map.dim(1);
  LabeledFeatures out;
  out.label = label;
  out.features.assign(depth, 0.0);
  const auto data = feature_map.data();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    for (std::size_t d = 0; d < depth; ++d) {
      out.features[d] += data[cell * depth + d];
    }
  }
  for (double& x : out.features) x /= static_cast<double>(cells);
  return out;
}

std::vector<LabeledFeatures>& split_bucket(SplitFeatures& features,
                                           Split split) {
  switch (split) {
    case Split::kTrain:
      return features.train;
    case Split::kVal:
      return features.val;
    case Split::kTest:
      return features.test;
  }
  return features.train;
}

ordered_json to_json(const SynthConfig& config) {
  ordered_json j;
  j["dim"] = config.dim;
  j["height"] = config.height;
  j["width"] = config.width;
  j["num_classes"] = config.num_classes;
  j["signal_strength"] = config.signal_strength;
  j["confound_strength"] = config.confound_strength;
  j["noise"] = config.noise;
  j["rho_train"] = config.rho_train;
  j["rho_test"] = config.rho_test;
  j["n_train"] = config.n_train;
  j["n_val"] = config.n_val;
  j["n_test"] = config.n_test;
  j["distractors_per_class"] = config.distractors_per_class;
  j["score_noise"] = config.score_noise;
  j["seed"] = config.seed;
  return j;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw_invalid("num_classes must be >= 2");
  if (height < 1 || width < 1) throw_invalid("height and width must be >= 1");
  if (!(signal_strength >= 0.0) || !(confound_strength >= 0.0) ||
      !(noise >= 0.0)) {
    throw_invalid("signal_strength, confound_strength and noise must be >= 0");
  }
  for (double rho : {rho_train, rho_test, score_noise}) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
      throw_invalid("rho_train, rho_test and score_noise must lie in [0, 1]");
    }
  }
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw_invalid("every split needs at least one item");
  }
  if (dim < num_directions()) {
    throw_invalid("dimension too small: D=" + std::to_string(dim) + " but " +
                  std::to_string(num_directions()) +
                  " orthogonal directions are required");
  }
}

std::string synth_config_to_json(const SynthConfig& config) {
  return to_json(config).dump(2) + "\n";
}

SynthConfig synth_config_from_json(std::string_view json_text) {
  const json j = codec::parse(json_text, "synth config");
  if (!j.is_object()) throw_format("synth config must be a JSON object");
  SynthConfig c;
  try {
    c.dim = j.value("dim", c.dim);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    c.confound_strength = j.value("confound_strength", c.confound_strength);
    c.noise = j.value("noise", c.noise);
    c.rho_train = j.value("rho_train", c.rho_train);
    c.rho_test = j.value("rho_test", c.rho_test);
    c.n_train = j.value("n_train", c.n_train);
    c.n_val = j.value("n_val", c.n_val);
    c.n_test = j.value("n_test", c.n_test);
    c.distractors_per_class =
        j.value("distractors_per_class", c.distractors_per_class);
    c.score_noise = j.value("score_noise", c.score_noise);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw_format(std::string("malformed synth config: ") + e.what());
  }
  c.validate();
  return c;
}

int aligned_confound_sign(std::size_t label) { return label % 2 == 1 ? 1 : -1; }

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  Matrix directions =
      orthonormal_directions(config.num_directions(), config.dim, rng);
  const std::size_t confound_row = config.num_classes;
  exclude_rounded_concepts(directions, confound_row);

  std::normal_distribution<double> gaussian(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  DatasetManifest manifest;
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    manifest.class_names.push_back("class_" + std::to_string(c));
  }
  manifest.embedding_dim = config.dim;

  std::vector<TensorF32> feature_maps;
  std::vector<SynthItemTruth> truth;
  const std::size_t cells = config.height * config.width;
  std::vector<double> base(config.dim);

  const struct {
    Split split;
    std::size_t count;
    double rho;
  } plan[] = {{Split::kTrain, config.n_train, config.rho_train},
              {Split::kVal, config.n_val, config.rho_train},
              {Split::kTest, config.n_test, config.rho_test}};

  for (const auto& part : plan) {
    for (std::size_t i = 0; i < part.count; ++i) {
      const std::size_t label = i % config.num_classes;
      SynthItemTruth item_truth;
      item_truth.aligned = uniform(rng) < part.rho;
      item_truth.confound_sign = item_truth.aligned
                                     ? aligned_confound_sign(label)
                                     : -aligned_confound_sign(label);
      if (part.split == Split::kTest && config.score_noise > 0.0 &&
          uniform(rng) < config.score_noise) {
        std::uniform_int_distribution<std::size_t> pick(
            0, config.num_classes - 2);
        std::size_t wrong = pick(rng);
        if (wrong >= label) ++wrong;
        item_truth.spiked_concept = wrong;
      }

      for (std::size_t d = 0; d < config.dim; ++d) {
        base[d] = config.signal_strength * directions(label, d) +
                  config.confound_strength * item_truth.confound_sign *
                      directions(confound_row, d);
        if (item_truth.spiked_concept) {
          base[d] += kSpikeScale * config.signal_strength *
                     directions(*item_truth.spiked_concept, d);
        }
      }
      std::vector<float> data(cells * config.dim);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t d = 0; d < config.dim; ++d) {
          data[cell * config.dim + d] =
              static_cast<float>(base[d] + config.noise * gaussian(rng));
        }
      }

      ItemRecord record;
      record.id = item_id(part.split, i);
      record.label = label;
      record.split = part.split;
      record.tensor_path = "tensors/" + record.id + ".cltensr";
      record.shape = {config.height, config.width, config.dim};
      manifest.items.push_back(std::move(record));
      feature_maps.emplace_back(
          std::vector<std::size_t>{config.height, config.width, config.dim},
          std::move(data));
      truth.push_back(item_truth);
    }
  }

  std::vector<Concept> concepts;
  std::vector<float> embeddings;
  auto add_concept = [&](std::string text, std::size_t hint, std::size_t row) {
    concepts.push_back({std::move(text), hint});
    for (std::size_t d = 0; d < config.dim; ++d) {
      embeddings.push_back(static_cast<float>(directions(row, d)));
    }
  };
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    add_concept("signal concept for class " + std::to_string(c), c, c);
  }
  for (std::size_t k = 0; k < config.num_distractors(); ++k) {
    add_concept("distractor concept " + std::to_string(k),
                k / config.distractors_per_class, confound_row + 1 + k);
  }
  const std::size_t n = concepts.size();
  ConceptSet concept_set(std::move(concepts),
                         TensorF32({n, config.dim}, std::move(embeddings)));

  validate_manifest(manifest);
  return SynthDataset{config,           std::move(manifest),
                      std::move(feature_maps), std::move(truth),
                      std::move(concept_set),  std::move(directions)};
}

void write_synth_dataset(const SynthDataset& dataset,
                         const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory / "tensors");
  for (std::size_t i = 0; i < dataset.manifest.items.size(); ++i) {
    write_tensor(dataset.feature_maps[i],
                 directory / dataset.manifest.items[i].tensor_path);
  }
  write_manifest(dataset.manifest, directory / "manifest.json");
  save_concept_set(dataset.concepts, directory / "concepts.json");
}

std::vector<ConceptVector> raw_concept_scores(const SynthDataset& dataset,
                                              PoolingMode mode) {
  std::vector<ConceptVector> out;
  out.reserve(dataset.feature_maps.size());
  for (const TensorF32& map : dataset.feature_maps) {
    out.push_back(concept_vector(map, dataset.concepts, mode));
  }
  return out;
}

ConceptPathResult run_concept_path(const SynthDataset& dataset,
                                   std::span<const ConceptVector> raw_scores,
                                   std::span<const std::size_t> concept_indices,
                                   const TrainConfig& train_config) {
  const auto& items = dataset.manifest.items;
  if (raw_scores.size() != items.size()) {
    throw_invalid("raw score count does not match the dataset");
  }
  std::vector<ConceptVector> selected(raw_scores.size());
  for (std::size_t i = 0; i < raw_scores.size(); ++i) {
    selected[i].pooling = raw_scores[i].pooling;
    for (std::size_t index : concept_indices) {
      if (index >= raw_scores[i].size()) {
        throw_invalid("concept index out of range");
      }
      selected[i].scores.push_back(raw_scores[i].scores[index]);
    }
  }

  std::vector<ConceptVector> train_raw;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == Split::kTrain) train_raw.push_back(selected[i]);
  }
  LinearHead head;
  head.class_names = dataset.manifest.class_names;
  for (std::size_t index : concept_indices) {
    head.concept_texts.push_back(dataset.concepts.concepts()[index].text);
  }
  head.pooling = raw_scores.empty() ? PoolingMode::kAvg : raw_scores[0].pooling;
  head.normalizer = fit_normalizer(train_raw, NormalizerMode::kPerConceptMinMax);

  SplitFeatures features;
  for (std::size_t i = 0; i < items.size(); ++i) {
    split_bucket(features, items[i].split)
        .push_back({apply_normalizer(head.normalizer, selected[i]).scores,
                    items[i].label});
  }

  ConceptPathResult result{
      train(std::move(head), features.train, features.val, features.test,
            train_config),
      0.0, 0.0};
  result.val_accuracy = evaluate(result.trained.head, features.val);
  result.test_accuracy = evaluate(result.trained.head, features.test);
  return result;
}

SplitFeatures pooled_raw_features(const SynthDataset& dataset) {
  SplitFeatures features;
  const auto& items = dataset.manifest.items;
  for (std::size_t i = 0; i < items.size(); ++i) {
    split_bucket(features, items[i].split)
        .push_back(pooled_features(dataset.feature_maps[i], items[i].label));
  }
  return features;
}

RobustnessReport run_robustness_experiment(const SynthConfig& config,
                                           const TrainConfig& train_config) {
  return run_robustness_experiment(generate(config), train_config);
}

RobustnessReport run_robustness_experiment(const SynthDataset& dataset,
                                           const TrainConfig& train_config) {
  train_config.validate();
  RobustnessReport report;
  report.config = dataset.config;
  report.train_config = train_config;
  report.seed = dataset.config.seed;

  const auto raw_scores = raw_concept_scores(dataset, PoolingMode::kAvg);
  std::vector<std::size_t> all(dataset.concepts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  ConceptPathResult concept_path =
      run_concept_path(dataset, raw_scores, all, train_config);
  report.concept_val_acc = concept_path.val_accuracy;
  report.concept_test_acc = concept_path.test_accuracy;
  report.concept_curve = std::move(concept_path.trained.report);

  const SplitFeatures pooled = pooled_raw_features(dataset);
  TrainedWeights probe =
      train_weights(dataset.manifest.num_classes(), pooled.train, pooled.val,
                    pooled.test, train_config);
  report.raw_probe_val_acc = accuracy(probe.weights, pooled.val);
  report.raw_probe_test_acc = accuracy(probe.weights, pooled.test);
  report.raw_probe_curve = std::move(probe.report);
  return report;
}

std::string to_json(const RobustnessReport& report) {
  ordered_json root;
  root["concept_test_acc"] = report.concept_test_acc;
  root["raw_probe_test_acc"] = report.raw_probe_test_acc;
  root["concept_val_acc"] = report.concept_val_acc;
  root["raw_probe_val_acc"] = report.raw_probe_val_acc;
  root["concept_curve"] = codec::to_json(report.concept_curve);
  root["raw_probe_curve"] = codec::to_json(report.raw_probe_curve);
  root["config"] = to_json(report.config);
  root["train_config"] = codec::to_json(report.train_config);
  root["seed"] = report.seed;
  return root.dump(2) + "\n";
}

std::vector<AblationRow> concept_count_ablation(
    const SynthConfig& config, const TrainConfig& train_config,
    std::span<const std::size_t> k_values, std::size_t repeats,
    std::uint64_t seed) {
  const SynthDataset dataset = generate(config);
  const auto raw_scores = raw_concept_scores(dataset, PoolingMode::kAvg);
  return concept_count_ablation(dataset, raw_scores, train_config, k_values,
                                repeats, seed);
}

std::vector<AblationRow> concept_count_ablation(
    const SynthDataset& dataset, std::span<const ConceptVector> raw_scores,
    const TrainConfig& train_config, std::span<const std::size_t> k_values,
    std::size_t repeats, std::uint64_t seed) {
  if (repeats < 1) throw_invalid("repeats must be >= 1");
  const std::size_t n = dataset.concepts.size();
  for (std::size_t k : k_values) {
    if (k < 1 || k > n) {
      throw_invalid("K=" + std::to_string(k) + " out of range [1, " +
                    std::to_string(n) + "]");
    }
  }
  std::mt19937_64 seeds(seed);
  std::vector<AblationRow> rows;
  for (std::size_t k : k_values) {
    AblationRow row;
    row.k = k;
    for (std::size_t r = 0; r < repeats; ++r) {
      auto indices = subset_indices(n, k, seeds());
      row.accuracies.push_back(
          run_concept_path(dataset, raw_scores, indices, train_config)
              .test_accuracy);
      row.subsets.push_back(std::move(indices));
    }
    const double count = static_cast<double>(repeats);
    row.mean_accuracy =
        std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) /
        count;
    if (repeats > 1) {
      double sq = 0.0;
      for (double a : row.accuracies) {
        sq += (a - row.mean_accuracy) * (a - row.mean_accuracy);
      }
      row.std_accuracy = std::sqrt(sq / (count - 1.0));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_json(std::span<const AblationRow> rows) {
  ordered_json out = ordered_json::array();
  for (const AblationRow& row : rows) {
    ordered_json j;
    j["k"] = row.k;
    j["mean_accuracy"] = row.mean_accuracy;
    j["std_accuracy"] = row.std_accuracy;
    j["accuracies"] = row.accuracies;
    j["subsets"] = row.subsets;
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

}  // namespace conceptlens
