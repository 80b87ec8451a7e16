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

#ifndef CONCEPTLENS_INTERVENE_H_
#define CONCEPTLENS_INTERVENE_H_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlens/linear_head.h"

namespace conceptlens {

// Sparse overrides of normalized concept scores, keyed by concept index.
struct InterventionRequest {
  std::map<std::size_t, double> overrides;
};

// Throws if an index is >= num_concepts or a value lies outside [0, 1].
void validate_request(const InterventionRequest& request,
                      std::size_t num_concepts);

ConceptVector apply_intervention(const ConceptVector& normalized,
                                 const InterventionRequest& request);

struct InterventionResult {
  Prediction before;
  Prediction after;
  bool changed_class = false;
  // delta[c] = sum over overridden j of W[c, j] * (new_j - old_j)
  std::vector<double> logit_deltas;
};

// Re-predicts with the overrides applied. Nothing is persisted; one audit
// line per call goes to the log.
InterventionResult what_if(const LinearHead& head,
                           const ConceptVector& normalized,
                           const InterventionRequest& request);

std::string to_json(const InterventionResult& result);

// Parses {"0": 0.25, "3": 1.0}; keys must be non-negative integers.
InterventionRequest request_from_overrides_json(std::string_view json_text);

}  // namespace conceptlens

#endif  // CONCEPTLENS_INTERVENE_H_
