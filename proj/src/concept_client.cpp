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

#include "conceptlens/concept_client.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json_codec.h"

namespace conceptlens {
namespace {

using codec::json;
using codec::ordered_json;

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string replace_once(std::string text, std::string_view needle,
                         std::string_view replacement) {
  const auto pos = text.find(needle);
  if (pos != std::string::npos) text.replace(pos, needle.size(), replacement);
  return text;
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string_view trim(std::string_view text) {
  auto is_space = [](char ch) {
    return std::isspace(static_cast<unsigned char>(ch)) != 0;
  };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

// Returns the text after a bullet marker, or nullopt for non-bullet lines.
std::optional<std::string_view> strip_marker(std::string_view line) {
  static constexpr std::string_view kBullet = "\xE2\x80\xA2";  // U+2022
  if (line.starts_with('-') || line.starts_with('*')) return line.substr(1);
  if (line.starts_with(kBullet)) return line.substr(kBullet.size());
  std::size_t digits = 0;
  while (digits < line.size() &&
         std::isdigit(static_cast<unsigned char>(line[digits]))) {
    ++digits;
  }
  if (digits > 0 && digits < line.size() && line[digits] == '.') {
    return line.substr(digits + 1);
  }
  return std::nullopt;
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/?#]+)(/[^#]*)?$)");
  std::smatch match;
  if (!std::regex_match(url, match, kUrl)) {
    throw_invalid("endpoint '" + url + "' is not an http(s) URL");
  }
  return {match[1].str(), match[2].matched ? match[2].str() : "/"};
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kPerClass:
      return "per_class";
    case TemplateKind::kDiscriminative:
      return "discriminative";
    case TemplateKind::kSelectN:
      return "select_n";
    case TemplateKind::kMisleadingProbe:
      return "misleading_probe";
  }
  return "per_class";
}

TemplateKind parse_template_kind(std::string_view text) {
  if (text == "per_class") return TemplateKind::kPerClass;
  if (text == "discriminative") return TemplateKind::kDiscriminative;
  if (text == "select_n") return TemplateKind::kSelectN;
  if (text == "misleading_probe") return TemplateKind::kMisleadingProbe;
  throw_invalid("unknown template kind '" + std::string(text) + "'");
}

void PromptTemplate::validate() const {
  switch (kind) {
    case TemplateKind::kPerClass:
    case TemplateKind::kDiscriminative:
      if (count_occurrences(text, kClassNamesPlaceholder) != 1) {
        throw_invalid("missing placeholder: template must contain " +
                      std::string(kClassNamesPlaceholder) + " exactly once");
      }
      break;
    case TemplateKind::kSelectN:
      if (count_occurrences(text, kCountPlaceholder) != 1) {
        throw_invalid("missing placeholder: select_n template must contain " +
                      std::string(kCountPlaceholder) + " exactly once");
      }
      break;
    case TemplateKind::kMisleadingProbe:
      break;
  }
}

PromptTemplate per_class_template() {
  return {"Can you provide concise radiology descriptors for {class_names}? "
          "List in bullet points with no extra context.",
          TemplateKind::kPerClass};
}

PromptTemplate discriminative_template() {
  return {"What are the useful visual attributes to distinguish {class_names} "
          "in a chest X-ray?",
          TemplateKind::kDiscriminative};
}

PromptTemplate select_n_template() {
  return {"Here is a list of concepts. Can you select the most distinctive {n} "
          "concepts from them?",
          TemplateKind::kSelectN};
}

std::vector<NamedTemplate> robustness_templates() {
  auto discriminative = [](std::string text) {
    return PromptTemplate{std::move(text), TemplateKind::kDiscriminative};
  };
  auto misleading = [](std::string text) {
    return PromptTemplate{std::move(text), TemplateKind::kMisleadingProbe};
  };
  return {
      {"instructive_useful", false,
       discriminative("What are the useful radiology descriptors to "
                      "distinguish {class_names}?")},
      {"instructive_helpful", false,
       discriminative("What are the helpful radiology descriptors to "
                      "distinguish {class_names}?")},
      {"instructive_concise", false,
       discriminative("What are the concise radiology descriptors to "
                      "distinguish {class_names}?")},
      {"misleading_irrelevant", true,
       misleading("What are the irrelevant radiology descriptors to "
                  "distinguish {class_names}?")},
      {"misleading_random", true,
       misleading("Give me some random visual features in a photo")},
  };
}

std::string build_prompt(const PromptTemplate& prompt,
                         std::span<const std::string> class_names) {
  prompt.validate();
  switch (prompt.kind) {
    case TemplateKind::kPerClass:
      if (class_names.size() != 1) {
        throw_invalid("per_class prompts take exactly one class name");
      }
      return replace_once(prompt.text, kClassNamesPlaceholder, class_names[0]);
    case TemplateKind::kDiscriminative:
      if (class_names.empty()) throw_invalid("no class names given");
      return replace_once(prompt.text, kClassNamesPlaceholder,
                          join(class_names, ", "));
    case TemplateKind::kMisleadingProbe:
      return replace_once(prompt.text, kClassNamesPlaceholder,
                          join(class_names, ", "));
    case TemplateKind::kSelectN:
      throw_invalid("use build_select_prompt for select_n templates");
  }
  return prompt.text;
}

std::string build_select_prompt(std::size_t n,
                                std::span<const std::string> concepts,
                                const PromptTemplate& prompt) {
  if (prompt.kind != TemplateKind::kSelectN) {
    throw_invalid("build_select_prompt needs a select_n template");
  }
  prompt.validate();
  if (n < 1) throw_invalid("select_n needs N >= 1");
  std::string out =
      replace_once(prompt.text, kCountPlaceholder, std::to_string(n));
  for (const std::string& c : concepts) out += "\n- " + c;
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0F]);
  }
  return out;
}

std::filesystem::path fixture_path(const std::filesystem::path& fixture_dir,
                                   std::string_view prompt) {
  return fixture_dir / (sha256_hex(prompt) + ".txt");
}

std::string chat_request_body(std::string_view model, std::string_view prompt) {
  ordered_json body;
  body["model"] = model;
  body["messages"] = ordered_json::array(
      {ordered_json{{"role", "user"}, {"content", prompt}}});
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  json root;
  try {
    root = json::parse(body);
  } catch (const json::parse_error& e) {
    throw_format(std::string("chat response is not JSON: ") + e.what());
  }
  try {
    return root.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw_format("chat response has no choices[0].message.content");
  }
}

std::string query_llm(std::string_view prompt, const LlmConfig& config) {
  const std::string hash = sha256_hex(prompt);
  if (config.fixture_dir) {
    const auto path = *config.fixture_dir / (hash + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw LlmError(ErrorKind::kNotFound,
                     "fixture miss for prompt " + hash + " in " +
                         config.fixture_dir->string(),
                     0, false, hash);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  const Endpoint endpoint = split_endpoint(config.endpoint);
  httplib::Client client(endpoint.scheme_host_port);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);

  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_env.c_str());
      key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  } else {
    spdlog::warn("environment variable {} is unset; sending no credentials",
                 config.api_key_env);
  }

  auto response = client.Post(endpoint.path, headers,
                              chat_request_body(config.model, prompt),
                              "application/json");
  if (!response) {
    throw LlmError(ErrorKind::kTransport,
                   "transport error for prompt " + hash + ": " +
                       httplib::to_string(response.error()),
                   0, true, hash);
  }
  if (response->status != 200) {
    const bool retryable = response->status == 429 || response->status >= 500;
    throw LlmError(ErrorKind::kHttp,
                   "HTTP " + std::to_string(response->status) +
                       " for prompt " + hash +
                       (retryable ? " (retryable)" : ""),
                   response->status, retryable, hash);
  }
  return parse_chat_response(response->body);
}

std::vector<std::string> parse_bullets(std::string_view raw) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    const std::string_view line = trim(raw.substr(start, end - start));
    start = end + 1;
    const auto body = strip_marker(line);
    if (!body) continue;
    const std::string descriptor(trim(*body));
    if (descriptor.empty()) continue;
    if (seen.insert(fold_concept_text(descriptor)).second) {
      out.push_back(descriptor);
    }
  }
  return out;
}

std::size_t ConceptCandidates::descriptor_count() const {
  std::size_t count = 0;
  for (const CandidateGroup& g : groups) count += g.descriptors.size();
  return count;
}

namespace {

CandidateGroup elicit(const std::string& prompt,
                      std::optional<std::size_t> class_index,
                      const LlmConfig& config) {
  const std::string response = query_llm(prompt, config);
  CandidateGroup group;
  group.class_index = class_index;
  group.prompt = prompt;
  group.response_sha256 = sha256_hex(response);
  for (std::string& d : parse_bullets(response)) {
    if (d.size() > kMaxDescriptorLength) {
      spdlog::warn("dropping descriptor longer than {} characters",
                   kMaxDescriptorLength);
      continue;
    }
    group.descriptors.push_back(std::move(d));
  }
  return group;
}

}  // namespace

ConceptCandidates generate_candidates(std::span<const std::string> class_names,
                                      const PromptTemplate& prompt,
                                      const LlmConfig& config) {
  if (class_names.empty()) throw_invalid("no class names given");
  ConceptCandidates out;
  out.class_names.assign(class_names.begin(), class_names.end());
  if (prompt.kind == TemplateKind::kPerClass) {
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const std::string prompt_text =
          build_prompt(prompt, std::span(&class_names[c], 1));
      out.groups.push_back(elicit(prompt_text, c, config));
    }
  } else {
    out.groups.push_back(
        elicit(build_prompt(prompt, class_names), std::nullopt, config));
  }
  return out;
}

ConceptCandidates select_candidates(const ConceptCandidates& candidates,
                                    std::size_t n, const LlmConfig& config) {
  std::vector<std::string> pool;
  std::vector<std::optional<std::size_t>> hints;
  std::set<std::string> seen;
  for (const CandidateGroup& g : candidates.groups) {
    for (const std::string& d : g.descriptors) {
      if (seen.insert(fold_concept_text(d)).second) {
        pool.push_back(d);
        hints.push_back(g.class_index);
      }
    }
  }
  const CandidateGroup selected =
      elicit(build_select_prompt(n, pool), std::nullopt, config);

  ConceptCandidates out;
  out.class_names = candidates.class_names;
  for (const std::string& d : selected.descriptors) {
    std::optional<std::size_t> hint;
    const std::string folded = fold_concept_text(d);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (fold_concept_text(pool[i]) == folded) {
        hint = hints[i];
        break;
      }
    }
    auto it = std::find_if(out.groups.begin(), out.groups.end(),
                           [&](const CandidateGroup& g) {
                             return g.class_index == hint;
                           });
    if (it == out.groups.end()) {
      out.groups.push_back({hint, selected.prompt, selected.response_sha256, {}});
      it = std::prev(out.groups.end());
    }
    it->descriptors.push_back(d);
  }
  return out;
}

std::string candidates_to_json(const ConceptCandidates& candidates) {
  ordered_json groups = ordered_json::array();
  for (const CandidateGroup& g : candidates.groups) {
    ordered_json j;
    j["class_index"] =
        g.class_index ? ordered_json(*g.class_index) : ordered_json(nullptr);
    j["prompt"] = g.prompt;
    j["response_sha256"] = g.response_sha256;
    j["descriptors"] = g.descriptors;
    groups.push_back(std::move(j));
  }
  ordered_json root;
  root["class_names"] = candidates.class_names;
  root["groups"] = std::move(groups);
  return root.dump(2) + "\n";
}

ConceptCandidates candidates_from_json(std::string_view json_text) {
  const json root = codec::parse(json_text, "candidates file");
  ConceptCandidates out;
  try {
    out.class_names = root.at("class_names").get<std::vector<std::string>>();
    for (const json& g : root.at("groups")) {
      CandidateGroup group;
      if (!g.at("class_index").is_null()) {
        group.class_index = g.at("class_index").get<std::size_t>();
        if (*group.class_index >= out.class_names.size()) {
          throw_format("candidate group class_index out of range");
        }
      }
      group.prompt = g.at("prompt").get<std::string>();
      group.response_sha256 = g.at("response_sha256").get<std::string>();
      group.descriptors = g.at("descriptors").get<std::vector<std::string>>();
      out.groups.push_back(std::move(group));
    }
  } catch (const json::exception& e) {
    throw_format(std::string("malformed candidates file: ") + e.what());
  }
  return out;
}

AssembledConcepts assemble_concept_set(const ConceptCandidates& candidates,
                                       const TensorF32& embeddings) {
  const std::size_t total = candidates.descriptor_count();
  if (embeddings.rank() != 2 || embeddings.dim(0) != total) {
    throw_invalid("count mismatch: " + std::to_string(total) +
                  " descriptors but embeddings have " +
                  (embeddings.rank() == 2 ? std::to_string(embeddings.dim(0))
                                          : std::string("a non-matrix")) +
                  " rows");
  }
  std::vector<std::size_t> keep;
  std::vector<Concept> concepts;
  std::vector<std::string> warnings;
  std::set<std::string> seen;
  std::size_t row = 0;
  for (const CandidateGroup& g : candidates.groups) {
    for (const std::string& d : g.descriptors) {
      if (seen.insert(fold_concept_text(d)).second) {
        keep.push_back(row);
        concepts.push_back({d, g.class_index});
      } else {
        warnings.push_back("duplicate descriptor '" + d +
                           "' dropped; keeping the first occurrence");
        spdlog::warn("{}", warnings.back());
      }
      ++row;
    }
  }
  const std::size_t dim = embeddings.dim(1);
  std::vector<float> rows;
  rows.reserve(keep.size() * dim);
  for (std::size_t r : keep) {
    const auto source = embeddings.row(r);
    rows.insert(rows.end(), source.begin(), source.end());
  }
  const std::size_t n = keep.size();
  return {ConceptSet(std::move(concepts), TensorF32({n, dim}, std::move(rows))),
          std::move(warnings)};
}

}  // namespace conceptlens
