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

#include "conceptlens/serve.h"

#include <future>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "conceptlens/error.h"
#include "conceptlens/interpret.h"
#include "conceptlens/intervene.h"
#include "conceptlens/synth.h"
#include "json.hpp"
#include "local_server.h"
#include "test_util.h"

namespace conceptlens {
namespace {

using nlohmann::json;

LinearHead toy_head() {
  LinearHead head;
  head.weights = Matrix(2, 3, {2.0, -1.0, 0.5, -2.0, 1.0, 0.25});
  head.class_names = {"normal", "atelectasis"};
  head.concept_texts = {"clear lungs", "increased opacity", "rib crowding"};
  head.normalizer.mode = NormalizerMode::kGlobalAffine;
  return head;
}

std::vector<ServiceItem> toy_items() {
  return {{"a", 0, Split::kTrain, ConceptVector{{0.9, 0.1, 0.2}}},
          {"b", 1, Split::kVal, ConceptVector{{0.1, 0.8, 0.6}}},
          {"c", 1, Split::kTest, ConceptVector{{0.6, 0.3, 0.9}}}};
}

ConceptService toy_service() { return ConceptService(toy_head(), toy_items()); }

TEST(ServiceTest, ConstructorValidatesItems) {
  std::vector<ServiceItem> bad = {{"x", 0, Split::kTrain, ConceptVector{{0.1, 0.2}}}};
  EXPECT_THROW(ConceptService(toy_head(), bad), Error);
}

TEST(ServiceTest, EmptyDatasetListsNothing) {
  const ConceptService service(toy_head(), {});
  const ServiceResponse r = service.list_items();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body, "[]");
}

TEST(ServiceTest, ListingMatchesEvaluate) {
  const ConceptService service = toy_service();
  const json items = json::parse(service.list_items().body);
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0]["id"], "a");
  EXPECT_EQ(items[1]["split"], "val");
  std::vector<LabeledFeatures> labeled;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const ServiceItem& item = service.items()[i];
    labeled.push_back({item.normalized.scores, item.label});
    EXPECT_EQ(items[i]["predicted_class"], forward(service.head(), item.normalized).predicted_class);
    if (items[i]["predicted_class"] == items[i]["label"]) ++correct;
  }
  EXPECT_DOUBLE_EQ(evaluate(service.head(), labeled), correct / 3.0);
}

TEST(ServiceTest, InterpretationDefaultsToPredictedClass) {
  const ConceptService service = toy_service();
  const ServiceResponse r = service.interpretation("b", std::nullopt, std::nullopt);
  ASSERT_EQ(r.status, 200);
  const ServiceItem& b = service.items()[1];
  const Prediction p = forward(service.head(), b.normalized);
  EXPECT_EQ(r.body, to_json(instance_contributions(service.head(), b.normalized,
                                                   p.predicted_class, std::nullopt, "b")));
  const json parsed = json::parse(r.body);
  EXPECT_EQ(parsed["target_class"], p.predicted_class);
  double sum = 0.0;
  for (const json& c : parsed["contributions"]) sum += c["contribution"].get<double>();
  EXPECT_NEAR(sum, p.logits[p.predicted_class], 1e-12);
}

TEST(ServiceTest, InterpretationParameters) {
  const ConceptService service = toy_service();
  const json top2 = json::parse(service.interpretation("a", "1", "2").body);
  EXPECT_EQ(top2["target_class"], 1);
  EXPECT_EQ(top2["contributions"].size(), 2u);
  EXPECT_EQ(service.interpretation("a", "99", std::nullopt).status, 400);
  EXPECT_EQ(service.interpretation("a", "one", std::nullopt).status, 400);
  EXPECT_EQ(service.interpretation("a", std::nullopt, "-1").status, 400);
  const ServiceResponse missing = service.interpretation("zzz", std::nullopt, std::nullopt);
  EXPECT_EQ(missing.status, 404);
  EXPECT_NE(missing.body.find("unknown item"), std::string::npos);
}

TEST(ServiceTest, InterveneEmptyOverrides) {
  const ConceptService service = toy_service();
  const ServiceResponse r = service.intervene(R"({"item_id": "a", "overrides": {}})");
  ASSERT_EQ(r.status, 200);
  const json parsed = json::parse(r.body);
  EXPECT_EQ(parsed["before"], parsed["after"]);
  EXPECT_FALSE(parsed["changed_class"].get<bool>());
  EXPECT_EQ(service.intervene(R"({"item_id": "a"})").body, r.body);
}

TEST(ServiceTest, InterveneZeroingMatchesWhatIf) {
  const ConceptService service = toy_service();
  const ServiceResponse r = service.intervene(R"({"item_id": "c", "overrides": {"2": 0}})");
  ASSERT_EQ(r.status, 200);
  InterventionRequest request;
  request.overrides[2] = 0.0;
  const ServiceItem& c = service.items()[2];
  EXPECT_EQ(r.body, to_json(what_if(service.head(), c.normalized, request)));
  const json deltas = json::parse(r.body)["logit_deltas"];
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(deltas[k].get<double>(), -service.head().weights(k, 2) * c.normalized.scores[2],
                1e-12);
  }
}

TEST(ServiceTest, InterveneErrors) {
  const ConceptService service = toy_service();
  const ServiceResponse range = service.intervene(R"({"item_id": "a", "overrides": {"0": 2.0}})");
  EXPECT_EQ(range.status, 400);
  EXPECT_NE(range.body.find("score out of range"), std::string::npos);
  EXPECT_EQ(service.intervene(R"({"item_id": "nope", "overrides": {}})").status, 404);
  EXPECT_EQ(service.intervene("not json").status, 400);
  EXPECT_EQ(service.intervene(R"({"overrides": {}})").status, 400);
  EXPECT_EQ(service.intervene(R"({"item_id": "a", "overrides": {"7": 0.5}})").status, 400);
  EXPECT_EQ(service.intervene(R"({"item_id": "a", "overrides": {"x": 0.5}})").status, 400);
}

TEST(ServiceTest, WeightsMatchExport) {
  const ConceptService service = toy_service();
  EXPECT_EQ(service.weights(std::nullopt).body, to_json(export_sankey(service.head())));
  SankeyOptions options;
  options.magnitude_threshold = 0.6;
  const ServiceResponse r = service.weights("0.6");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body, to_json(export_sankey(service.head(), options)));
  EXPECT_EQ(json::parse(r.body)["links"].size(), 4u);
  EXPECT_EQ(service.weights("-0.1").status, 400);
  EXPECT_EQ(service.weights("lots").status, 400);
}

TEST(BindAddressTest, Parses) {
  const BindAddress b = parse_bind_address("127.0.0.1:8080");
  EXPECT_EQ(b.host, "127.0.0.1");
  EXPECT_EQ(b.port, 8080);
  EXPECT_EQ(parse_bind_address("localhost:1").port, 1);
  EXPECT_THROW(parse_bind_address("127.0.0.1"), Error);
  EXPECT_THROW(parse_bind_address(":80"), Error);
  EXPECT_THROW(parse_bind_address("host:0"), Error);
  EXPECT_THROW(parse_bind_address("host:65536"), Error);
  EXPECT_THROW(parse_bind_address("host:http"), Error);
}

class HttpServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_.mount(local_.server(), options_);
    local_.start();
  }

  ConceptService service_ = toy_service();
  ServeOptions options_;
  testing::LocalServer local_;
};

TEST_F(HttpServiceTest, EndpointsServeLibraryPayloads) {
  auto client = local_.client();
  auto items = client.Get("/items");
  ASSERT_TRUE(items);
  EXPECT_EQ(items->status, 200);
  EXPECT_EQ(items->body, service_.list_items().body);
  EXPECT_EQ(items->get_header_value("Content-Type"), "application/json");

  auto interp = client.Get("/items/b/interpretation?class=0&top_k=2");
  ASSERT_TRUE(interp);
  EXPECT_EQ(interp->body, service_.interpretation("b", "0", "2").body);

  const std::string body = R"({"item_id": "b", "overrides": {"1": 0.0}})";
  auto intervene = client.Post("/intervene", body, "application/json");
  ASSERT_TRUE(intervene);
  EXPECT_EQ(intervene->status, 200);
  EXPECT_EQ(intervene->body, service_.intervene(body).body);

  auto weights = client.Get("/model/weights?threshold=0.3");
  ASSERT_TRUE(weights);
  EXPECT_EQ(weights->body, service_.weights("0.3").body);
  EXPECT_FALSE(weights->has_header("Access-Control-Allow-Origin"));
}

TEST_F(HttpServiceTest, ErrorStatuses) {
  auto client = local_.client();
  auto unknown_route = client.Get("/nothing/here");
  ASSERT_TRUE(unknown_route);
  EXPECT_EQ(unknown_route->status, 404);
  EXPECT_EQ(json::parse(unknown_route->body)["error"], "Not Found");

  auto unknown_item = client.Get("/items/zzz/interpretation");
  ASSERT_TRUE(unknown_item);
  EXPECT_EQ(unknown_item->status, 404);
  EXPECT_NE(unknown_item->body.find("unknown item"), std::string::npos);

  auto bad_class = client.Get("/items/a/interpretation?class=99");
  ASSERT_TRUE(bad_class);
  EXPECT_EQ(bad_class->status, 400);

  auto out_of_range =
      client.Post("/intervene", R"({"item_id": "a", "overrides": {"0": 2.0}})", "application/json");
  ASSERT_TRUE(out_of_range);
  EXPECT_EQ(out_of_range->status, 400);
  EXPECT_NE(json::parse(out_of_range->body)["error"].get<std::string>().find("score out of range"),
            std::string::npos);

  auto negative = client.Get("/model/weights?threshold=-1");
  ASSERT_TRUE(negative);
  EXPECT_EQ(negative->status, 400);
}

TEST_F(HttpServiceTest, ConcurrentRequestsMatchSequential) {
  const std::string expected = service_.interpretation("c", std::nullopt, std::nullopt).body;
  const std::string body = R"({"item_id": "c", "overrides": {"0": 0.5}})";
  const std::string expected_intervene = service_.intervene(body).body;
  std::vector<std::future<bool>> futures;
  for (int t = 0; t < 8; ++t) {
    futures.push_back(std::async(std::launch::async, [&] {
      auto client = local_.client();
      for (int i = 0; i < 10; ++i) {
        auto a = client.Get("/items/c/interpretation");
        auto b = client.Post("/intervene", body, "application/json");
        if (!a || !b || a->body != expected || b->body != expected_intervene) return false;
      }
      return true;
    }));
  }
  for (auto& f : futures) EXPECT_TRUE(f.get());
}

class CorsServiceTest : public HttpServiceTest {
 protected:
  void SetUp() override {
    options_.cors_origin = "http://localhost:5173";
    HttpServiceTest::SetUp();
  }
};

TEST_F(CorsServiceTest, AddsOriginHeaderAndAnswersPreflight) {
  auto client = local_.client();
  auto items = client.Get("/items");
  ASSERT_TRUE(items);
  EXPECT_EQ(items->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  auto preflight = client.Options("/intervene");
  ASSERT_TRUE(preflight);
  EXPECT_EQ(preflight->status, 204);
  EXPECT_EQ(preflight->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
}

TEST(ServiceLoadTest, LoadsSavedModelAndSyntheticDataset) {
  testing::TempDir dir;
  SynthConfig config;
  config.dim = 16;
  config.height = config.width = 2;
  config.n_train = 40;
  config.n_val = 20;
  config.n_test = 20;
  const SynthDataset ds = generate(config);
  write_synth_dataset(ds, dir.path());
  const auto raw = raw_concept_scores(ds, PoolingMode::kAvg);
  std::vector<std::size_t> all(ds.concepts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  TrainConfig train_config;
  train_config.max_epochs = 50;
  train_config.patience = 50;
  const LinearHead head = run_concept_path(ds, raw, all, train_config).trained.head;
  save_model(head, dir / "model.json");

  const ConceptService service = ConceptService::load(
      dir / "model.json", dir / "manifest.json", dir / "concepts.json");
  ASSERT_EQ(service.items().size(), 80u);
  for (std::size_t i = 0; i < 80; ++i) {
    const ConceptVector expected = apply_normalizer(head.normalizer, raw[i]);
    ASSERT_EQ(service.items()[i].id, ds.manifest.items[i].id);
    for (std::size_t j = 0; j < expected.size(); ++j) {
      EXPECT_NEAR(service.items()[i].normalized.scores[j], expected.scores[j], 1e-12);
    }
  }

  LinearHead renamed = head;
  renamed.concept_texts[0] = "something else";
  save_model(renamed, dir / "renamed.json");
  EXPECT_ERROR_CONTAINS(
      ConceptService::load(dir / "renamed.json", dir / "manifest.json", dir / "concepts.json"),
      "concept set does not match");
}

}  // namespace
}  // namespace conceptlens
