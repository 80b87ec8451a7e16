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
#include <numeric>

#include <gtest/gtest.h>

#include "conceptlens/error.h"
#include "test_util.h"

namespace conceptlens {
namespace {

SynthConfig small_config() {
  SynthConfig config;
  config.dim = 24;
  config.height = 3;
  config.width = 3;
  config.n_train = 120;
  config.n_val = 60;
  config.n_test = 60;
  return config;
}

TrainConfig short_training() {
  TrainConfig config;
  config.max_epochs = 150;
  config.patience = 150;
  return config;
}

double dot(const Matrix& m, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t d = 0; d < m.cols(); ++d) s += m(a, d) * m(b, d);
  return s;
}

// Pearson correlation between g and the label-aligned sign over one split.
double confound_label_correlation(const SynthDataset& ds, Split split) {
  std::vector<double> g, s;
  for (std::size_t i = 0; i < ds.manifest.items.size(); ++i) {
    if (ds.manifest.items[i].split != split) continue;
    g.push_back(ds.truth[i].confound_sign);
    s.push_back(aligned_confound_sign(ds.manifest.items[i].label));
  }
  const double n = static_cast<double>(g.size());
  const double mg = std::accumulate(g.begin(), g.end(), 0.0) / n;
  const double ms = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double cov = 0.0, vg = 0.0, vs = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    cov += (g[i] - mg) * (s[i] - ms);
    vg += (g[i] - mg) * (g[i] - mg);
    vs += (s[i] - ms) * (s[i] - ms);
  }
  if (vg == 0.0 || vs == 0.0) return std::nan("");
  return cov / std::sqrt(vg * vs);
}

TEST(SynthConfigTest, Validation) {
  SynthConfig config;
  EXPECT_NO_THROW(config.validate());
  config.dim = config.num_directions() - 1;
  EXPECT_ERROR_CONTAINS(generate(config), "dimension");
  config = SynthConfig{};
  config.noise = -0.1;
  EXPECT_THROW(config.validate(), Error);
  config = SynthConfig{};
  config.rho_test = 1.5;
  EXPECT_THROW(config.validate(), Error);
  config = SynthConfig{};
  config.num_classes = 1;
  EXPECT_THROW(config.validate(), Error);
}

TEST(SynthConfigTest, SmallestDimensionStillWorks) {
  SynthConfig config = small_config();
  config.dim = config.num_directions();
  const SynthDataset ds = generate(config);
  EXPECT_EQ(ds.directions.rows(), config.num_directions());
}

TEST(SynthConfigTest, JsonRoundTrip) {
  SynthConfig config = small_config();
  config.rho_train = 0.9;
  config.score_noise = 0.2;
  config.seed = 99;
  const SynthConfig back = synth_config_from_json(synth_config_to_json(config));
  EXPECT_EQ(synth_config_to_json(back), synth_config_to_json(config));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.rho_train, 0.9);
  EXPECT_THROW(synth_config_from_json(R"({"dim": "wide"})"), Error);
}

TEST(GenerateTest, DirectionsAreOrthonormal) {
  for (std::uint64_t seed : {1u, 7u, 11u}) {
    SynthConfig config;
    config.seed = seed;
    config.n_train = config.n_val = config.n_test = 2;
    const SynthDataset ds = generate(config);
    ASSERT_EQ(ds.directions.rows(), 9u);
    for (std::size_t a = 0; a < ds.directions.rows(); ++a) {
      EXPECT_NEAR(dot(ds.directions, a, a), 1.0, 1e-12);
      for (std::size_t b = a + 1; b < ds.directions.rows(); ++b) {
        EXPECT_LE(std::abs(dot(ds.directions, a, b)), 1e-10) << a << "," << b;
      }
    }
  }
}

TEST(GenerateTest, ConceptEmbeddingsExcludeConfound) {
  for (SynthConfig config : {SynthConfig{}, small_config()}) {
    config.n_train = config.n_val = config.n_test = 2;
    const SynthDataset ds = generate(config);
    const std::size_t v = ds.confound_row();
    ASSERT_EQ(ds.concepts.size(), config.num_concepts());
    for (std::size_t j = 0; j < ds.concepts.size(); ++j) {
      const auto e = ds.concepts.embedding(j);
      double s = 0.0;
      for (std::size_t d = 0; d < config.dim; ++d) s += e[d] * ds.directions(v, d);
      EXPECT_LE(std::abs(s), 1e-10) << j;
    }
  }
}

TEST(GenerateTest, ConceptLayout) {
  const SynthDataset ds = generate(small_config());
  const auto& concepts = ds.concepts.concepts();
  ASSERT_EQ(concepts.size(), 8u);
  EXPECT_EQ(concepts[0].text, "signal concept for class 0");
  EXPECT_EQ(concepts[1].text, "signal concept for class 1");
  EXPECT_EQ(concepts[1].class_hint, 1u);
  EXPECT_EQ(concepts[2].text, "distractor concept 0");
  for (std::size_t d = 0; d < ds.config.dim; ++d) {
    EXPECT_EQ(ds.concepts.embedding(1)[d], static_cast<float>(ds.directions(1, d)));
    EXPECT_EQ(ds.concepts.embedding(2)[d], static_cast<float>(ds.directions(3, d)));
  }
  EXPECT_EQ(ds.manifest.items.size(), 240u);
  EXPECT_EQ(ds.manifest.items.front().id, "train_0000");
  EXPECT_EQ(ds.manifest.items.back().id, "test_0059");
}

TEST(GenerateTest, NoiselessSignalConceptWins) {
  SynthConfig config = small_config();
  config.noise = 0.0;
  config.confound_strength = 0.0;
  config.num_classes = 3;
  const SynthDataset ds = generate(config);
  const auto raw = raw_concept_scores(ds, PoolingMode::kAvg);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& s = raw[i].scores;
    const std::size_t best =
        static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    EXPECT_EQ(best, ds.manifest.items[i].label);
    EXPECT_NEAR(s[best], 1.0, 1e-6);
  }
}

TEST(GenerateTest, ConfoundOnlyAffectsRawFeatures) {
  SynthConfig config = small_config();
  config.noise = 0.0;
  const SynthDataset ds = generate(config);
  const auto raw = raw_concept_scores(ds, PoolingMode::kAvg);
  // |alpha u + beta g v| = sqrt(5), so the signal cosine is 1/sqrt(5) for
  // either confound sign.
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(raw[i].scores[ds.manifest.items[i].label], 1.0 / std::sqrt(5.0), 1e-6);
  }
}

TEST(GenerateTest, FullReversalCorrelations) {
  const SynthDataset ds = generate(small_config());
  EXPECT_DOUBLE_EQ(confound_label_correlation(ds, Split::kTrain), 1.0);
  EXPECT_DOUBLE_EQ(confound_label_correlation(ds, Split::kVal), 1.0);
  EXPECT_DOUBLE_EQ(confound_label_correlation(ds, Split::kTest), -1.0);
  for (std::size_t i = 0; i < ds.truth.size(); ++i) {
    const int aligned = aligned_confound_sign(ds.manifest.items[i].label);
    if (ds.manifest.items[i].split == Split::kTest) {
      EXPECT_EQ(ds.truth[i].confound_sign, -aligned);
    } else {
      EXPECT_EQ(ds.truth[i].confound_sign, aligned);
    }
  }
}

TEST(GenerateTest, PartialCorrelationWithinBinomialInterval) {
  for (double rho : {0.5, 0.7, 0.9}) {
    SynthConfig config = small_config();
    config.dim = 12;
    config.height = config.width = 1;
    config.distractors_per_class = 1;
    config.n_train = config.n_test = 400;
    config.n_val = 10;
    config.rho_train = rho;
    config.rho_test = 1.0 - rho;
    const SynthDataset ds = generate(config);
    const double half_width = 3.0 * 2.0 * std::sqrt(rho * (1.0 - rho) / 400.0);
    EXPECT_NEAR(confound_label_correlation(ds, Split::kTrain), 2.0 * rho - 1.0, half_width);
    EXPECT_NEAR(confound_label_correlation(ds, Split::kTest), 1.0 - 2.0 * rho, half_width);
  }
}

TEST(GenerateTest, Deterministic) {
  const SynthDataset a = generate(small_config());
  const SynthDataset b = generate(small_config());
  EXPECT_TRUE(std::ranges::equal(a.directions.values(), b.directions.values()));
  ASSERT_EQ(a.feature_maps.size(), b.feature_maps.size());
  for (std::size_t i = 0; i < a.feature_maps.size(); ++i) {
    ASSERT_TRUE(bit_equal(a.feature_maps[i], b.feature_maps[i]));
  }
  SynthConfig other = small_config();
  other.seed = 8;
  const SynthDataset c = generate(other);
  EXPECT_FALSE(std::ranges::equal(c.directions.values(), a.directions.values()));
}

TEST(GenerateTest, ScoreNoiseSpikesTestItemsOnly) {
  SynthConfig config = small_config();
  config.score_noise = 0.5;
  const SynthDataset ds = generate(config);
  std::size_t spiked = 0;
  for (std::size_t i = 0; i < ds.truth.size(); ++i) {
    const auto& s = ds.truth[i].spiked_concept;
    if (!s) continue;
    ++spiked;
    EXPECT_EQ(ds.manifest.items[i].split, Split::kTest);
    EXPECT_NE(*s, ds.manifest.items[i].label);
    EXPECT_LT(*s, config.num_classes);
  }
  EXPECT_GT(spiked, 15u);
  EXPECT_LT(spiked, 45u);
}

TEST(GenerateTest, DefaultDatasetLoadsThroughTensorIo) {
  testing::TempDir dir;
  const SynthDataset ds = generate(SynthConfig{});
  write_synth_dataset(ds, dir.path());
  const Dataset loaded = load_dataset(dir / "manifest.json");
  EXPECT_EQ(loaded.size(), 900u);
  EXPECT_EQ(loaded.manifest().embedding_dim, 64u);
  const ConceptSet concepts = load_concept_set(dir / "concepts.json");
  EXPECT_NO_THROW(check_pairing(loaded.manifest(), concepts));
  EXPECT_EQ(concepts.texts(), ds.concepts.texts());
  EXPECT_TRUE(bit_equal(concepts.embeddings(), ds.concepts.embeddings()));
  EXPECT_TRUE(bit_equal(loaded.load_tensor("train_0000"), ds.feature_maps[0]));
  EXPECT_TRUE(bit_equal(loaded.load_tensor("test_0199"), ds.feature_maps.back()));
}

TEST(RawFeaturesTest, AveragePoolsEachMap) {
  SynthConfig config = small_config();
  config.noise = 0.0;
  const SynthDataset ds = generate(config);
  const SplitFeatures pooled = pooled_raw_features(ds);
  ASSERT_EQ(pooled.train.size(), 120u);
  ASSERT_EQ(pooled.val.size(), 60u);
  ASSERT_EQ(pooled.test.size(), 60u);
  const auto& first = pooled.train[0];
  EXPECT_EQ(first.label, 0u);
  ASSERT_EQ(first.features.size(), config.dim);
  for (std::size_t d = 0; d < config.dim; ++d) {
    EXPECT_NEAR(first.features[d], ds.feature_maps[0].data()[d], 1e-7);
  }
}

TEST(RobustnessTest, DefaultConfigSeparatesThePipelines) {
  const RobustnessReport report = run_robustness_experiment(SynthConfig{}, TrainConfig{});
  EXPECT_DOUBLE_EQ(report.concept_test_acc, 1.0);
  EXPECT_DOUBLE_EQ(report.raw_probe_test_acc, 0.0);
  EXPECT_DOUBLE_EQ(report.concept_val_acc, 1.0);
  EXPECT_DOUBLE_EQ(report.raw_probe_val_acc, 1.0);
  EXPECT_EQ(report.seed, 7u);
  EXPECT_FALSE(report.concept_curve.epochs.empty());
  EXPECT_FALSE(report.raw_probe_curve.epochs.empty());
  for (const EpochRecord& e : report.raw_probe_curve.epochs) {
    ASSERT_TRUE(e.test_accuracy.has_value());
    EXPECT_GE(e.val_accuracy, 0.0);
    EXPECT_LE(e.val_accuracy, 1.0);
  }
}

TEST(RobustnessTest, OtherSeedsAgree) {
  for (std::uint64_t seed : {11u, 13u}) {
    SynthConfig config;
    config.seed = seed;
    const RobustnessReport report = run_robustness_experiment(config, TrainConfig{});
    EXPECT_GE(report.concept_test_acc, 0.95);
    EXPECT_LE(report.raw_probe_test_acc, 0.4);
  }
}

TEST(RobustnessTest, NoConfoundClosesTheGap) {
  SynthConfig config;
  config.confound_strength = 0.0;
  const RobustnessReport report = run_robustness_experiment(config, TrainConfig{});
  EXPECT_LE(std::abs(report.concept_test_acc - report.raw_probe_test_acc), 0.05);
}

TEST(RobustnessTest, NoShiftKeepsRawProbe) {
  SynthConfig config;
  config.rho_train = 0.5;
  config.rho_test = 0.5;
  const RobustnessReport report = run_robustness_experiment(config, TrainConfig{});
  EXPECT_GE(report.raw_probe_test_acc, 0.8);
}

TEST(RobustnessTest, DeterministicReport) {
  const std::string a = to_json(run_robustness_experiment(small_config(), short_training()));
  const std::string b = to_json(run_robustness_experiment(small_config(), short_training()));
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("\"concept_curve\""), std::string::npos);
  EXPECT_NE(a.find("\"raw_probe_curve\""), std::string::npos);
  EXPECT_NE(a.find("\"seed\": 7"), std::string::npos);
}

TEST(AblationTest, FullSubsetMatchesUnablatedAccuracy) {
  const SynthDataset ds = generate(small_config());
  const auto raw = raw_concept_scores(ds, PoolingMode::kAvg);
  std::vector<std::size_t> all(ds.concepts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double unablated = run_concept_path(ds, raw, all, short_training()).test_accuracy;
  const std::size_t k[] = {ds.concepts.size()};
  const auto rows = concept_count_ablation(ds, raw, short_training(), k, 1, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].mean_accuracy, unablated);
  EXPECT_EQ(rows[0].std_accuracy, 0.0);
}

TEST(AblationTest, SingleDistractorIsNearChance) {
  SynthConfig config;
  config.n_test = 400;
  const SynthDataset ds = generate(config);
  const auto raw = raw_concept_scores(ds, PoolingMode::kAvg);
  for (std::size_t distractor = 2; distractor < ds.concepts.size(); ++distractor) {
    const std::size_t subset[] = {distractor};
    const double acc = run_concept_path(ds, raw, subset, short_training()).test_accuracy;
    EXPECT_NEAR(acc, 0.5, 0.1) << distractor;
  }
}

TEST(AblationTest, MoreConceptsHelp) {
  const std::size_t k[] = {1, 2, 4, 8};
  const auto rows = concept_count_ablation(SynthConfig{}, TrainConfig{}, k, 10, 0);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_GE(rows[3].mean_accuracy, rows[0].mean_accuracy);
  EXPECT_DOUBLE_EQ(rows[3].mean_accuracy, 1.0);
  for (const AblationRow& row : rows) {
    EXPECT_EQ(row.accuracies.size(), 10u);
    for (const auto& subset : row.subsets) EXPECT_EQ(subset.size(), row.k);
  }
}

TEST(AblationTest, RejectsBadArguments) {
  const SynthDataset ds = generate(small_config());
  const auto raw = raw_concept_scores(ds, PoolingMode::kAvg);
  const std::size_t too_big[] = {9};
  EXPECT_ERROR_CONTAINS(concept_count_ablation(ds, raw, short_training(), too_big, 1, 0),
                        "out of range");
  const std::size_t zero[] = {0};
  EXPECT_THROW(concept_count_ablation(ds, raw, short_training(), zero, 1, 0), Error);
  const std::size_t ok[] = {2};
  EXPECT_THROW(concept_count_ablation(ds, raw, short_training(), ok, 0, 0), Error);
}

}  // namespace
}  // namespace conceptlens
