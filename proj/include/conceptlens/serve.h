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

#ifndef CONCEPTLENS_SERVE_H_
#define CONCEPTLENS_SERVE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlens/intervene.h"
#include "conceptlens/interpret.h"
#include "conceptlens/linear_head.h"
#include "conceptlens/tensor_io.h"

namespace httplib {
class Server;
}

namespace conceptlens {

struct ServiceItem {
  std::string id;
  std::size_t label = 0;
  Split split = Split::kTrain;
  ConceptVector normalized;
};

struct ServiceResponse {
  int status = 200;
  std::string body;
};

struct ServeOptions {
  // When set, responses carry Access-Control-Allow-Origin for this origin.
  std::optional<std::string> cors_origin;
};

// Read-only view of one trained head and a dataset whose concept vectors
// were computed once at construction. Every handler is const and safe to
// call concurrently.
class ConceptService {
 public:
  ConceptService(LinearHead head, std::vector<ServiceItem> items);

  // Loads the head, checks the concept set matches it, and precomputes
  // normalized concept vectors for every manifest item.
  static ConceptService load(const std::filesystem::path& model_json,
                             const std::filesystem::path& manifest_json,
                             const std::filesystem::path& concepts_json);

  const LinearHead& head() const { return head_; }
  const std::vector<ServiceItem>& items() const { return items_; }

  // GET /items
  ServiceResponse list_items() const;
  // GET /items/{id}/interpretation?class=c&top_k=k
  ServiceResponse interpretation(std::string_view id,
                                 std::optional<std::string_view> class_param,
                                 std::optional<std::string_view> top_k_param) const;
  // POST /intervene
  ServiceResponse intervene(std::string_view request_body) const;
  // GET /model/weights?threshold=t
  ServiceResponse weights(std::optional<std::string_view> threshold_param) const;

  void mount(httplib::Server& server, const ServeOptions& options = {}) const;

 private:
  const ServiceItem* find(std::string_view id) const;

  LinearHead head_;
  std::vector<ServiceItem> items_;
};

struct BindAddress {
  std::string host;
  int port = 8080;
};

BindAddress parse_bind_address(std::string_view text);

// Blocks until the server stops.
void run_service(const ConceptService& service, const BindAddress& bind,
                 const ServeOptions& options = {});

}  // namespace conceptlens

#endif  // CONCEPTLENS_SERVE_H_
