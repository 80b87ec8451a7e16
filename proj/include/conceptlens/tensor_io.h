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

#ifndef CONCEPTLENS_TENSOR_IO_H_
#define CONCEPTLENS_TENSOR_IO_H_

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "conceptlens/tensor.h"

namespace conceptlens {

// Tensor file layout (all integers little-endian):
//   8 bytes   magic "CLTENSR1"
//   1 byte    rank
//   rank x 8  u64 dimensions
//   payload   binary32 values, row-major
inline constexpr std::string_view kTensorMagic = "CLTENSR1";
inline constexpr std::size_t kMaxTensorRank = 8;

std::size_t tensor_file_size(std::span<const std::size_t> shape);

// Returns the number of bytes written. Non-finite elements are rejected
// before anything reaches the stream.
std::size_t write_tensor(const TensorF32& tensor, std::ostream& out);
std::size_t write_tensor(const TensorF32& tensor,
                         const std::filesystem::path& destination);

TensorF32 read_tensor(std::istream& in);
TensorF32 read_tensor(const std::filesystem::path& source);

// Reads and validates only the header.
std::vector<std::size_t> read_tensor_shape(const std::filesystem::path& source);

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ItemRecord {
  std::string id;
  std::size_t label = 0;
  Split split = Split::kTrain;
  std::string tensor_path;  // relative to the manifest directory
  std::array<std::size_t, 3> shape{};  // [H, W, D]
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::size_t embedding_dim = 0;
  std::vector<ItemRecord> items;

  std::size_t num_classes() const { return class_names.size(); }
};

// Checks every manifest invariant that does not require touching tensor
// files: at least two unique classes, unique ids, labels in range, positive
// shapes whose last axis equals embedding_dim.
void validate_manifest(const DatasetManifest& manifest);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(std::string_view json_text);
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& destination);

// A validated manifest bound to the directory its tensor paths resolve
// against. Feature maps are read on demand.
class Dataset {
 public:
  Dataset(DatasetManifest manifest, std::filesystem::path root);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }
  std::size_t size() const { return manifest_.items.size(); }

  std::optional<std::size_t> find(std::string_view id) const;

  TensorF32 load_tensor(std::size_t index) const;
  TensorF32 load_tensor(std::string_view id) const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path root_;
  std::unordered_map<std::string, std::size_t> index_by_id_;
};

// Parses and validates the manifest, then checks every referenced tensor
// header against the declared shape. Payloads are not read.
Dataset load_dataset(const std::filesystem::path& manifest_path);

struct Concept {
  std::string text;
  std::optional<std::size_t> class_hint;
};

// Lowercases ASCII and collapses whitespace runs so that "Rib  crowding"
// and "rib crowding" compare equal.
std::string fold_concept_text(std::string_view text);

class ConceptSet {
 public:
  ConceptSet(std::vector<Concept> concepts, TensorF32 embeddings);

  std::size_t size() const { return concepts_.size(); }
  std::size_t dim() const { return embeddings_.dim(1); }
  const std::vector<Concept>& concepts() const { return concepts_; }
  const TensorF32& embeddings() const { return embeddings_; }
  std::span<const float> embedding(std::size_t index) const {
    return embeddings_.row(index);
  }
  std::vector<std::string> texts() const;

  // Keeps the given rows in the given order.
  ConceptSet select(std::span<const std::size_t> indices) const;

 private:
  std::vector<Concept> concepts_;
  TensorF32 embeddings_;
};

// Reads concepts.json and the embeddings tensor it points at (resolved
// relative to the JSON file).
ConceptSet load_concept_set(const std::filesystem::path& concepts_json);

// Writes concepts.json plus the embeddings tensor next to it.
void save_concept_set(const ConceptSet& concepts,
                      const std::filesystem::path& concepts_json,
                      const std::string& embeddings_filename =
                          "concept_embeddings.cltensr");

// Rejects a concept set whose embedding width differs from the manifest's.
void check_pairing(const DatasetManifest& manifest, const ConceptSet& concepts);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace conceptlens

#endif  // CONCEPTLENS_TENSOR_IO_H_
