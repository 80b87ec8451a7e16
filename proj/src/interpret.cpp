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

#include "conceptlens/interpret.h"

#include <algorithm>
#include <cmath>

#include "conceptlens/error.h"
#include "json_codec.h"

namespace conceptlens {
namespace {

using codec::ordered_json;

template <typename T, typename Key>
void rank_by_magnitude(std::vector<T>& entries, Key key) {
  std::stable_sort(entries.begin(), entries.end(),
                   [&](const T& a, const T& b) {
                     return std::abs(key(a)) > std::abs(key(b));
                   });
}

std::string concept_node_id(std::size_t index) {
  return "concept_" + std::to_string(index);
}

std::string class_node_id(std::size_t index) {
  return "class_" + std::to_string(index);
}

}  // namespace

GlobalInterpretation global_weights(const LinearHead& head,
                                    std::optional<std::size_t> top_k) {
  head.validate();
  GlobalInterpretation out;
  for (std::size_t c = 0; c < head.num_classes(); ++c) {
    ClassWeights entry;
    entry.class_index = c;
    entry.class_name = head.class_names[c];
    for (std::size_t j = 0; j < head.num_concepts(); ++j) {
      entry.ranking.push_back({j, head.concept_texts[j], head.weights(c, j)});
    }
    rank_by_magnitude(entry.ranking,
                      [](const RankedWeight& r) { return r.weight; });
    if (top_k && *top_k < entry.ranking.size()) entry.ranking.resize(*top_k);
    out.classes.push_back(std::move(entry));
  }
  return out;
}

InstanceInterpretation instance_contributions(const LinearHead& head,
                                              const ConceptVector& normalized,
                                              std::size_t target_class,
                                              std::optional<std::size_t> top_k,
                                              std::string item_id) {
  if (target_class >= head.num_classes()) {
    throw_invalid("class " + std::to_string(target_class) + " out of range");
  }
  if (normalized.size() != head.num_concepts()) {
    throw_invalid("concept vector length does not match the head");
  }
  InstanceInterpretation out;
  out.item_id = std::move(item_id);
  out.target_class = target_class;
  const auto w = head.weights.row(target_class);
  // Accumulate in concept order, the same order predict() uses, so the sum
  // reproduces the logit bit for bit.
  for (std::size_t j = 0; j < head.num_concepts(); ++j) {
    const double contribution = w[j] * normalized.scores[j];
    out.logit += contribution;
    out.contributions.push_back({j, head.concept_texts[j],
                                 normalized.scores[j], w[j], contribution});
  }
  rank_by_magnitude(out.contributions,
                    [](const Contribution& c) { return c.contribution; });
  if (top_k && *top_k < out.contributions.size()) {
    out.contributions.resize(*top_k);
  }
  return out;
}

SankeyExport export_sankey(const LinearHead& head,
                           const SankeyOptions& options) {
  head.validate();
  Matrix weights = head.weights;
  if (options.hard_threshold) {
    for (double& w : weights.mutable_values()) {
      if (std::abs(w) < *options.hard_threshold) w = 0.0;
    }
  }
  double threshold = 0.0;
  if (options.magnitude_threshold) {
    threshold = *options.magnitude_threshold;
  } else {
    double peak = 0.0;
    for (double w : weights.values()) peak = std::max(peak, std::abs(w));
    threshold = kDefaultSankeyRelativeThreshold * peak;
  }
  if (threshold < 0.0) throw_invalid("threshold must be non-negative");

  SankeyExport out;
  for (std::size_t j = 0; j < head.num_concepts(); ++j) {
    out.nodes.push_back({concept_node_id(j), "concept", head.concept_texts[j]});
  }
  for (std::size_t c = 0; c < head.num_classes(); ++c) {
    out.nodes.push_back({class_node_id(c), "class", head.class_names[c]});
  }
  for (std::size_t j = 0; j < head.num_concepts(); ++j) {
    for (std::size_t c = 0; c < head.num_classes(); ++c) {
      const double w = weights(c, j);
      const double magnitude = std::abs(w);
      // Exact zeros carry no flow, whatever the threshold.
      if (magnitude == 0.0 || magnitude < threshold) continue;
      out.links.push_back({concept_node_id(j), class_node_id(c), magnitude,
                           w > 0.0 ? '+' : '-'});
    }
  }
  return out;
}

std::string to_json(const GlobalInterpretation& interpretation) {
  ordered_json classes = ordered_json::array();
  for (const ClassWeights& entry : interpretation.classes) {
    ordered_json ranking = ordered_json::array();
    for (const RankedWeight& r : entry.ranking) {
      ranking.push_back({{"concept_index", r.concept_index},
                         {"text", r.text},
                         {"weight", r.weight}});
    }
    classes.push_back({{"class_index", entry.class_index},
                       {"class_name", entry.class_name},
                       {"ranking", std::move(ranking)}});
  }
  ordered_json root;
  root["classes"] = std::move(classes);
  return root.dump();
}

std::string to_json(const InstanceInterpretation& interpretation) {
  ordered_json contributions = ordered_json::array();
  for (const Contribution& c : interpretation.contributions) {
    contributions.push_back({{"concept_index", c.concept_index},
                             {"text", c.text},
                             {"score", c.score},
                             {"weight", c.weight},
                             {"contribution", c.contribution}});
  }
  ordered_json root;
  root["item_id"] = interpretation.item_id;
  root["target_class"] = interpretation.target_class;
  root["logit"] = interpretation.logit;
  root["contributions"] = std::move(contributions);
  return root.dump();
}

std::string to_json(const SankeyExport& sankey) {
  ordered_json nodes = ordered_json::array();
  for (const SankeyNode& node : sankey.nodes) {
    nodes.push_back(
        {{"id", node.id}, {"kind", node.kind}, {"label", node.label}});
  }
  ordered_json links = ordered_json::array();
  for (const SankeyLink& link : sankey.links) {
    links.push_back({{"source", link.source},
                     {"target", link.target},
                     {"magnitude", link.magnitude},
                     {"sign", std::string(1, link.sign)}});
  }
  ordered_json root;
  root["nodes"] = std::move(nodes);
  root["links"] = std::move(links);
  return root.dump();
}

}  // namespace conceptlens
