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

#include <charconv>
#include <cmath>

#include <spdlog/spdlog.h>

#include "conceptlens/error.h"
#include "httplib.h"
#include "json_codec.h"

namespace conceptlens {
namespace {

using codec::json;
using codec::ordered_json;

ServiceResponse error_response(int status, std::string_view message) {
  return {status, ordered_json{{"error", message}}.dump()};
}

std::optional<std::size_t> parse_index(std::string_view text) {
  std::size_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    return std::nullopt;
  }
  return value;
}

std::optional<double> parse_number(std::string_view text) {
  try {
    std::size_t consumed = 0;
    const std::string owned(text);
    const double value = std::stod(owned, &consumed);
    if (consumed != owned.size() || !std::isfinite(value)) return std::nullopt;
    return value;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::string_view> param(const httplib::Request& req,
                                      const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  // The string lives in req.params for the duration of the handler.
  const auto range = req.params.equal_range(key);
  return std::string_view(range.first->second);
}

void reply(httplib::Response& res, const ServiceResponse& response) {
  res.status = response.status;
  res.set_content(response.body, "application/json");
}

}  // namespace

ConceptService::ConceptService(LinearHead head, std::vector<ServiceItem> items)
    : head_(std::move(head)), items_(std::move(items)) {
  head_.validate();
  for (const ServiceItem& item : items_) {
    if (item.normalized.size() != head_.num_concepts()) {
      throw_invalid("item '" + item.id + "' has the wrong concept count");
    }
  }
}

ConceptService ConceptService::load(const std::filesystem::path& model_json,
                                    const std::filesystem::path& manifest_json,
                                    const std::filesystem::path& concepts_json) {
  LinearHead head = load_model(model_json);
  const Dataset dataset = load_dataset(manifest_json);
  const ConceptSet concepts = load_concept_set(concepts_json);
  check_pairing(dataset.manifest(), concepts);
  if (concepts.texts() != head.concept_texts) {
    throw_invalid("concept set does not match the concepts the model was "
                  "trained on");
  }
  if (dataset.manifest().class_names != head.class_names) {
    throw_invalid("dataset class names do not match the model");
  }
  std::vector<ServiceItem> items;
  items.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ItemRecord& record = dataset.manifest().items[i];
    const ConceptVector raw =
        concept_vector(dataset.load_tensor(i), concepts, head.pooling);
    items.push_back({record.id, record.label, record.split,
                     apply_normalizer(head.normalizer, raw)});
  }
  spdlog::info("precomputed concept vectors for {} items", items.size());
  return ConceptService(std::move(head), std::move(items));
}

const ServiceItem* ConceptService::find(std::string_view id) const {
  for (const ServiceItem& item : items_) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

ServiceResponse ConceptService::list_items() const {
  ordered_json out = ordered_json::array();
  for (const ServiceItem& item : items_) {
    out.push_back({{"id", item.id},
                   {"label", item.label},
                   {"split", to_string(item.split)},
                   {"predicted_class",
                    forward(head_, item.normalized).predicted_class}});
  }
  return {200, out.dump()};
}

ServiceResponse ConceptService::interpretation(
    std::string_view id, std::optional<std::string_view> class_param,
    std::optional<std::string_view> top_k_param) const {
  const ServiceItem* item = find(id);
  if (item == nullptr) {
    return error_response(404, "unknown item '" + std::string(id) + "'");
  }
  std::size_t target = forward(head_, item->normalized).predicted_class;
  if (class_param) {
    const auto parsed = parse_index(*class_param);
    if (!parsed || *parsed >= head_.num_classes()) {
      return error_response(400, "class out of range");
    }
    target = *parsed;
  }
  std::optional<std::size_t> top_k;
  if (top_k_param) {
    top_k = parse_index(*top_k_param);
    if (!top_k) return error_response(400, "top_k must be a non-negative integer");
  }
  return {200, to_json(instance_contributions(head_, item->normalized, target,
                                              top_k, item->id))};
}

ServiceResponse ConceptService::intervene(std::string_view request_body) const {
  json body;
  try {
    body = json::parse(request_body);
  } catch (const json::parse_error&) {
    return error_response(400, "request body is not valid JSON");
  }
  if (!body.is_object() || !body.contains("item_id") ||
      !body["item_id"].is_string()) {
    return error_response(400, "request needs a string item_id");
  }
  const std::string id = body["item_id"].get<std::string>();
  const ServiceItem* item = find(id);
  if (item == nullptr) return error_response(404, "unknown item '" + id + "'");

  try {
    const InterventionRequest request = request_from_overrides_json(
        body.contains("overrides") ? body["overrides"].dump() : "{}");
    return {200, to_json(what_if(head_, item->normalized, request))};
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
}

ServiceResponse ConceptService::weights(
    std::optional<std::string_view> threshold_param) const {
  SankeyOptions options;
  if (threshold_param) {
    const auto threshold = parse_number(*threshold_param);
    if (!threshold) return error_response(400, "threshold must be a number");
    if (*threshold < 0.0) {
      return error_response(400, "threshold must be non-negative");
    }
    options.magnitude_threshold = threshold;
  }
  return {200, to_json(export_sankey(head_, options))};
}

void ConceptService::mount(httplib::Server& server,
                           const ServeOptions& options) const {
  if (options.cors_origin) {
    server.set_default_headers(
        {{"Access-Control-Allow-Origin", *options.cors_origin},
         {"Access-Control-Allow-Headers", "Content-Type"},
         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
  }
  server.Get("/items", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, list_items());
  });
  server.Get(R"(/items/([^/]+)/interpretation)",
             [this](const httplib::Request& req, httplib::Response& res) {
               reply(res, interpretation(req.matches[1].str(),
                                         param(req, "class"),
                                         param(req, "top_k")));
             });
  server.Post("/intervene",
              [this](const httplib::Request& req, httplib::Response& res) {
                reply(res, intervene(req.body));
              });
  server.Get("/model/weights",
             [this](const httplib::Request& req, httplib::Response& res) {
               reply(res, weights(param(req, "threshold")));
             });
  server.set_error_handler(
      [](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        res.set_content(
            ordered_json{{"error", httplib::status_message(res.status)}}.dump(),
            "application/json");
        return httplib::Server::HandlerResponse::Handled;
      });
}

BindAddress parse_bind_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw_invalid("bind address must look like host:port");
  }
  const auto port = parse_index(text.substr(colon + 1));
  if (!port || *port == 0 || *port > 65535) {
    throw_invalid("bind port must be in [1, 65535]");
  }
  return {std::string(text.substr(0, colon)), static_cast<int>(*port)};
}

void run_service(const ConceptService& service, const BindAddress& bind,
                 const ServeOptions& options) {
  httplib::Server server;
  service.mount(server, options);
  spdlog::info("serving {} items on {}:{}", service.items().size(), bind.host,
               bind.port);
  if (!server.listen(bind.host, bind.port)) {
    throw Error(ErrorKind::kIo, "cannot listen on " + bind.host + ":" +
                                    std::to_string(bind.port));
  }
}

}  // namespace conceptlens
