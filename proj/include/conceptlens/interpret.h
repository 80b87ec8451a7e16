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

#ifndef CONCEPTLENS_INTERPRET_H_
#define CONCEPTLENS_INTERPRET_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "conceptlens/linear_head.h"

namespace conceptlens {

struct RankedWeight {
  std::size_t concept_index = 0;
  std::string text;
  double weight = 0.0;  // negative weights read as "absence of the concept"
};

struct ClassWeights {
  std::size_t class_index = 0;
  std::string class_name;
  std::vector<RankedWeight> ranking;  // |weight| descending, index ascending on ties
};

struct GlobalInterpretation {
  std::vector<ClassWeights> classes;
};

GlobalInterpretation global_weights(const LinearHead& head,
                                    std::optional<std::size_t> top_k = {});

struct Contribution {
  std::size_t concept_index = 0;
  std::string text;
  double score = 0.0;
  double weight = 0.0;
  double contribution = 0.0;  // weight * score, sign kept
};

struct InstanceInterpretation {
  std::string item_id;
  std::size_t target_class = 0;
  // Sum of every contribution in concept order; equals forward().logits.
  double logit = 0.0;
  std::vector<Contribution> contributions;  // |contribution| descending
};

InstanceInterpretation instance_contributions(
    const LinearHead& head, const ConceptVector& normalized,
    std::size_t target_class, std::optional<std::size_t> top_k = {},
    std::string item_id = {});

struct SankeyNode {
  std::string id;
  std::string kind;  // "concept" or "class"
  std::string label;
};

struct SankeyLink {
  std::string source;
  std::string target;
  double magnitude = 0.0;
  char sign = '+';
};

struct SankeyExport {
  std::vector<SankeyNode> nodes;
  std::vector<SankeyLink> links;
};

inline constexpr double kDefaultSankeyRelativeThreshold = 0.01;

struct SankeyOptions {
  // Links with |W| below this are omitted. Unset means 1% of max |W|.
  std::optional<double> magnitude_threshold;
  // Post-hoc sparsification: zero |W| < hard_threshold before export.
  std::optional<double> hard_threshold;
};

SankeyExport export_sankey(const LinearHead& head,
                           const SankeyOptions& options = {});

std::string to_json(const GlobalInterpretation& interpretation);
std::string to_json(const InstanceInterpretation& interpretation);
std::string to_json(const SankeyExport& sankey);

}  // namespace conceptlens

#endif  // CONCEPTLENS_INTERPRET_H_
