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

#include "conceptlens/intervene.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "conceptlens/error.h"
#include "json_codec.h"

namespace conceptlens {

void validate_request(const InterventionRequest& request,
                      std::size_t num_concepts) {
  for (const auto& [index, value] : request.overrides) {
    if (index >= num_concepts) {
      throw_invalid("concept index " + std::to_string(index) +
                    " out of range (N=" + std::to_string(num_concepts) + ")");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      throw_invalid("score out of range: concept " + std::to_string(index) +
                    " override must lie in [0, 1]");
    }
  }
}

ConceptVector apply_intervention(const ConceptVector& normalized,
                                 const InterventionRequest& request) {
  validate_request(request, normalized.size());
  ConceptVector out = normalized;
  for (const auto& [index, value] : request.overrides) out.scores[index] = value;
  return out;
}

InterventionResult what_if(const LinearHead& head,
                           const ConceptVector& normalized,
                           const InterventionRequest& request) {
  if (normalized.size() != head.num_concepts()) {
    throw_invalid("concept vector length does not match the head");
  }
  const ConceptVector edited = apply_intervention(normalized, request);
  InterventionResult result;
  result.before = forward(head, normalized);
  result.after = forward(head, edited);
  result.changed_class =
      result.before.predicted_class != result.after.predicted_class;
  result.logit_deltas.assign(head.num_classes(), 0.0);
  for (std::size_t c = 0; c < head.num_classes(); ++c) {
    for (const auto& [index, value] : request.overrides) {
      result.logit_deltas[c] +=
          head.weights(c, index) * (value - normalized.scores[index]);
    }
  }

  std::ostringstream overrides;
  for (const auto& [index, value] : request.overrides) {
    overrides << ' ' << index << "->" << value;
  }
  spdlog::info("what_if overrides:{} predicted {} -> {}",
               overrides.str().empty() ? " none" : overrides.str(),
               result.before.predicted_class, result.after.predicted_class);
  return result;
}

std::string to_json(const InterventionResult& result) {
  codec::ordered_json root;
  root["before"] = codec::to_json(result.before);
  root["after"] = codec::to_json(result.after);
  root["changed_class"] = result.changed_class;
  root["logit_deltas"] = result.logit_deltas;
  return root.dump();
}

InterventionRequest request_from_overrides_json(std::string_view json_text) {
  const codec::json root = codec::parse(json_text, "overrides");
  if (!root.is_object()) throw_invalid("overrides must be a JSON object");
  InterventionRequest request;
  for (const auto& [key, value] : root.items()) {
    std::size_t index = 0;
    const auto [ptr, ec] =
        std::from_chars(key.data(), key.data() + key.size(), index);
    if (ec != std::errc() || ptr != key.data() + key.size()) {
      throw_invalid("override key '" + key + "' is not a concept index");
    }
    if (!value.is_number()) {
      throw_invalid("override for concept " + key + " must be a number");
    }
    request.overrides[index] = value.get<double>();
  }
  return request;
}

}  // namespace conceptlens
