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

#ifndef CONCEPTLENS_CONCEPT_CLIENT_H_
#define CONCEPTLENS_CONCEPT_CLIENT_H_

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conceptlens/error.h"
#include "conceptlens/tensor_io.h"

namespace conceptlens {

enum class TemplateKind { kPerClass, kDiscriminative, kSelectN, kMisleadingProbe };

std::string_view to_string(TemplateKind kind);
TemplateKind parse_template_kind(std::string_view text);

inline constexpr std::string_view kClassNamesPlaceholder = "{class_names}";
inline constexpr std::string_view kCountPlaceholder = "{n}";

struct PromptTemplate {
  std::string text;
  TemplateKind kind = TemplateKind::kPerClass;

  // per_class / discriminative need exactly one {class_names}; select_n
  // needs exactly one {n}.
  void validate() const;
};

PromptTemplate per_class_template();
PromptTemplate discriminative_template();
PromptTemplate select_n_template();

// Alternative phrasings for prompt-robustness sweeps, grouped as
// instructive or misleading.
struct NamedTemplate {
  std::string name;
  bool misleading = false;
  PromptTemplate prompt;
};
std::vector<NamedTemplate> robustness_templates();

// per_class takes exactly one class name; discriminative joins all names
// with ", "; misleading probes substitute the joined names when a
// placeholder is present.
std::string build_prompt(const PromptTemplate& prompt,
                         std::span<const std::string> class_names);

// With an empty `concepts` list this is just the selection question;
// otherwise the candidates follow as a bullet list.
std::string build_select_prompt(std::size_t n,
                                std::span<const std::string> concepts,
                                const PromptTemplate& prompt = select_n_template());

struct LlmConfig {
  std::string endpoint;  // e.g. https://api.openai.com/v1/chat/completions
  std::string model = "gpt-4";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{60};
  std::optional<std::filesystem::path> fixture_dir;
};

class LlmError : public Error {
 public:
  LlmError(ErrorKind kind, const std::string& message, int status,
           bool retryable, std::string prompt_hash)
      : Error(kind, message),
        status_(status),
        retryable_(retryable),
        prompt_hash_(std::move(prompt_hash)) {}

  int status() const noexcept { return status_; }  // 0 when no response
  bool retryable() const noexcept { return retryable_; }
  const std::string& prompt_hash() const noexcept { return prompt_hash_; }

 private:
  int status_;
  bool retryable_;
  std::string prompt_hash_;
};

std::string sha256_hex(std::string_view data);

std::filesystem::path fixture_path(const std::filesystem::path& fixture_dir,
                                   std::string_view prompt);

// Chat-completion request body for a single user turn.
std::string chat_request_body(std::string_view model, std::string_view prompt);

// Assistant text of the first choice in a chat-completion response.
std::string parse_chat_response(std::string_view body);

// Fixture mode (config.fixture_dir set) returns fixtures/<sha256>.txt
// verbatim and never opens a socket. Otherwise POSTs to config.endpoint.
std::string query_llm(std::string_view prompt, const LlmConfig& config);

// Extracts "-", "*", "•" and "N." bullet lines, strips the marker and
// surrounding whitespace, and drops case-insensitive duplicates.
std::vector<std::string> parse_bullets(std::string_view raw);

inline constexpr std::size_t kMaxDescriptorLength = 120;

struct CandidateGroup {
  std::optional<std::size_t> class_index;
  std::string prompt;
  std::string response_sha256;
  std::vector<std::string> descriptors;
};

struct ConceptCandidates {
  std::vector<std::string> class_names;
  std::vector<CandidateGroup> groups;

  std::size_t descriptor_count() const;
};

// Runs one elicitation round: one prompt per class for per_class, a single
// prompt otherwise. Descriptors longer than kMaxDescriptorLength are
// dropped.
ConceptCandidates generate_candidates(std::span<const std::string> class_names,
                                      const PromptTemplate& prompt,
                                      const LlmConfig& config);

// One select-N round over every current descriptor. Selected descriptors
// that match an earlier one keep its class hint.
ConceptCandidates select_candidates(const ConceptCandidates& candidates,
                                    std::size_t n, const LlmConfig& config);

std::string candidates_to_json(const ConceptCandidates& candidates);
ConceptCandidates candidates_from_json(std::string_view json_text);

struct AssembledConcepts {
  ConceptSet concepts;
  std::vector<std::string> warnings;
};

// `embeddings` has one row per descriptor across all groups, in order.
// Cross-group duplicates keep the first occurrence (and its class hint).
AssembledConcepts assemble_concept_set(const ConceptCandidates& candidates,
                                       const TensorF32& embeddings);

}  // namespace conceptlens

#endif  // CONCEPTLENS_CONCEPT_CLIENT_H_
