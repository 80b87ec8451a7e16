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

#include "conceptlens/tensor_io.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "conceptlens/error.h"
#include "json.hpp"

namespace conceptlens {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kHeaderFixedBytes = 8 + 1;

void put_u64_le(std::uint64_t value, char* out) {
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
}

std::uint64_t get_u64_le(const unsigned char* in) {
  std::uint64_t value = 0;
  for (int i = 7; i >= 0; --i) value = (value << 8) | in[i];
  return value;
}

void put_f32_le(float value, char* out) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) {
    out[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  }
}

float get_f32_le(const unsigned char* in) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | in[i];
  return std::bit_cast<float>(bits);
}

bool read_exact(std::istream& in, char* buffer, std::size_t count) {
  in.read(buffer, static_cast<std::streamsize>(count));
  return static_cast<std::size_t>(in.gcount()) == count;
}

std::vector<std::size_t> read_header(std::istream& in) {
  char fixed[kHeaderFixedBytes];
  if (!read_exact(in, fixed, kHeaderFixedBytes)) {
    throw_format("truncated header");
  }
  if (std::string_view(fixed, 8) != kTensorMagic) throw_format("bad magic");
  const auto rank = static_cast<unsigned char>(fixed[8]);
  if (rank == 0 || rank > kMaxTensorRank) {
    throw_format("unsupported rank " + std::to_string(rank));
  }
  std::vector<unsigned char> dims_raw(rank * 8u);
  if (!read_exact(in, reinterpret_cast<char*>(dims_raw.data()),
                  dims_raw.size())) {
    throw_format("truncated header");
  }
  std::vector<std::size_t> shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t dim = get_u64_le(dims_raw.data() + 8 * i);
    if (dim == 0) throw_format("zero dimension in tensor header");
    if (dim > (std::uint64_t{1} << 40)) {
      throw_format("implausible dimension in tensor header");
    }
    shape[i] = static_cast<std::size_t>(dim);
  }
  return shape;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kNotFound, "cannot open " + path.string());
  }
  return in;
}

std::string json_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw_format(std::string("missing string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

std::size_t json_index(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw_format(std::string("missing integer field '") + key + "'");
  }
  const auto value = j.at(key).get<std::int64_t>();
  if (value < 0) throw_format(std::string("negative value for '") + key + "'");
  return static_cast<std::size_t>(value);
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw_format(std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

std::size_t tensor_file_size(std::span<const std::size_t> shape) {
  return kHeaderFixedBytes + 8 * shape.size() + 4 * shape_product(shape);
}

std::size_t write_tensor(const TensorF32& tensor, std::ostream& out) {
  if (tensor.rank() == 0 || tensor.rank() > kMaxTensorRank) {
    throw_invalid("tensor rank must be in [1, 8]");
  }
  if (!tensor.all_finite()) throw_invalid("non-finite element");

  std::string buffer(tensor_file_size(tensor.shape()), '\0');
  char* cursor = buffer.data();
  std::copy(kTensorMagic.begin(), kTensorMagic.end(), cursor);
  cursor += kTensorMagic.size();
  *cursor++ = static_cast<char>(tensor.rank());
  for (std::size_t dim : tensor.shape()) {
    put_u64_le(dim, cursor);
    cursor += 8;
  }
  for (float value : tensor.data()) {
    put_f32_le(value, cursor);
    cursor += 4;
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error(ErrorKind::kIo, "tensor write failed");
  return buffer.size();
}

std::size_t write_tensor(const TensorF32& tensor,
                         const std::filesystem::path& destination) {
  // Validate first so a rejected tensor never leaves a partial file behind.
  if (!tensor.all_finite()) throw_invalid("non-finite element");
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot open " + destination.string());
  }
  const std::size_t written = write_tensor(tensor, out);
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + destination.string());
  return written;
}

TensorF32 read_tensor(std::istream& in) {
  std::vector<std::size_t> shape = read_header(in);
  const std::size_t count = shape_product(shape);
  std::vector<unsigned char> raw(count * 4);
  if (!read_exact(in, reinterpret_cast<char*>(raw.data()), raw.size())) {
    throw_format("truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw_format("trailing bytes after payload");
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = get_f32_le(raw.data() + 4 * i);
    if (!std::isfinite(data[i])) throw_format("non-finite element");
  }
  return TensorF32(std::move(shape), std::move(data));
}

TensorF32 read_tensor(const std::filesystem::path& source) {
  std::ifstream in = open_input(source);
  try {
    return read_tensor(in);
  } catch (const Error& e) {
    throw Error(e.kind(), source.string() + ": " + e.what());
  }
}

std::vector<std::size_t> read_tensor_shape(
    const std::filesystem::path& source) {
  std::ifstream in = open_input(source);
  try {
    return read_header(in);
  } catch (const Error& e) {
    throw Error(e.kind(), source.string() + ": " + e.what());
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw_format("unknown split '" + std::string(text) + "'");
}

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.class_names.size() < 2) {
    throw_format("manifest needs at least 2 classes");
  }
  std::set<std::string> names(manifest.class_names.begin(),
                              manifest.class_names.end());
  if (names.size() != manifest.class_names.size()) {
    throw_format("duplicate class name");
  }
  if (manifest.embedding_dim == 0) throw_format("embedding_dim must be >= 1");

  std::set<std::string_view> ids;
  for (const ItemRecord& item : manifest.items) {
    if (item.id.empty()) throw_format("empty item id");
    if (!ids.insert(item.id).second) {
      throw_format("duplicate id '" + item.id + "'");
    }
    if (item.label >= manifest.num_classes()) {
      throw_format("label out of range for item '" + item.id + "'");
    }
    for (std::size_t dim : item.shape) {
      if (dim == 0) throw_format("non-positive shape for item '" + item.id + "'");
    }
    if (item.shape[2] != manifest.embedding_dim) {
      throw_format("item '" + item.id + "' has D=" +
                   std::to_string(item.shape[2]) +
                   " but manifest embedding_dim=" +
                   std::to_string(manifest.embedding_dim));
    }
    if (item.tensor_path.empty()) {
      throw_format("item '" + item.id + "' has no tensor_path");
    }
  }
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  ordered_json root;
  root["class_names"] = manifest.class_names;
  root["embedding_dim"] = manifest.embedding_dim;
  ordered_json items = ordered_json::array();
  for (const ItemRecord& item : manifest.items) {
    ordered_json entry;
    entry["id"] = item.id;
    entry["label"] = item.label;
    entry["split"] = to_string(item.split);
    entry["tensor_path"] = item.tensor_path;
    entry["shape"] = item.shape;
    items.push_back(std::move(entry));
  }
  root["items"] = std::move(items);
  return root.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view json_text) {
  const json root = parse_json(json_text, "manifest");
  if (!root.is_object()) throw_format("manifest must be a JSON object");
  DatasetManifest manifest;
  if (!root.contains("class_names") || !root["class_names"].is_array()) {
    throw_format("manifest is missing class_names");
  }
  for (const json& name : root["class_names"]) {
    if (!name.is_string()) throw_format("class_names must be strings");
    manifest.class_names.push_back(name.get<std::string>());
  }
  manifest.embedding_dim = json_index(root, "embedding_dim");
  if (!root.contains("items") || !root["items"].is_array()) {
    throw_format("manifest is missing items");
  }
  for (const json& entry : root["items"]) {
    ItemRecord item;
    item.id = json_string(entry, "id");
    item.label = json_index(entry, "label");
    item.split = parse_split(json_string(entry, "split"));
    item.tensor_path = json_string(entry, "tensor_path");
    if (!entry.contains("shape") || !entry["shape"].is_array() ||
        entry["shape"].size() != 3) {
      throw_format("item '" + item.id + "' needs a 3-element shape");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const json& dim = entry["shape"][i];
      if (!dim.is_number_integer() || dim.get<std::int64_t>() < 1) {
        throw_format("non-positive shape for item '" + item.id + "'");
      }
      item.shape[i] = dim.get<std::size_t>();
    }
    manifest.items.push_back(std::move(item));
  }
  validate_manifest(manifest);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& destination) {
  validate_manifest(manifest);
  write_text_file(destination, manifest_to_json(manifest));
}

Dataset::Dataset(DatasetManifest manifest, std::filesystem::path root)
    : manifest_(std::move(manifest)), root_(std::move(root)) {
  validate_manifest(manifest_);
  for (std::size_t i = 0; i < manifest_.items.size(); ++i) {
    index_by_id_.emplace(manifest_.items[i].id, i);
  }
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  auto it = index_by_id_.find(std::string(id));
  if (it == index_by_id_.end()) return std::nullopt;
  return it->second;
}

TensorF32 Dataset::load_tensor(std::size_t index) const {
  const ItemRecord& item = manifest_.items.at(index);
  TensorF32 tensor = read_tensor(root_ / item.tensor_path);
  const std::vector<std::size_t> expected(item.shape.begin(), item.shape.end());
  if (tensor.shape() != expected) {
    throw_format("shape mismatch between manifest and tensor file for '" +
                 item.id + "'");
  }
  return tensor;
}

TensorF32 Dataset::load_tensor(std::string_view id) const {
  const auto index = find(id);
  if (!index) {
    throw Error(ErrorKind::kNotFound, "unknown item '" + std::string(id) + "'");
  }
  return load_tensor(*index);
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  DatasetManifest manifest = manifest_from_json(read_text_file(manifest_path));
  std::filesystem::path root = manifest_path.parent_path();
  for (const ItemRecord& item : manifest.items) {
    const auto shape = read_tensor_shape(root / item.tensor_path);
    const std::vector<std::size_t> expected(item.shape.begin(),
                                            item.shape.end());
    if (shape != expected) {
      throw_format("shape mismatch between manifest and tensor file for '" +
                   item.id + "'");
    }
  }
  return Dataset(std::move(manifest), std::move(root));
}

std::string fold_concept_text(std::string_view text) {
  std::string folded;
  folded.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto uch = static_cast<unsigned char>(ch);
    if (std::isspace(uch)) {
      pending_space = !folded.empty();
      continue;
    }
    if (pending_space) folded.push_back(' ');
    pending_space = false;
    folded.push_back(static_cast<char>(std::tolower(uch)));
  }
  return folded;
}

ConceptSet::ConceptSet(std::vector<Concept> concepts, TensorF32 embeddings)
    : concepts_(std::move(concepts)), embeddings_(std::move(embeddings)) {
  if (concepts_.empty()) throw_invalid("concept set is empty");
  if (embeddings_.rank() != 2) {
    throw_invalid("concept embeddings must have shape [N, D]");
  }
  if (embeddings_.dim(0) != concepts_.size()) {
    throw_invalid("concept count " + std::to_string(concepts_.size()) +
                  " does not match embedding rows " +
                  std::to_string(embeddings_.dim(0)));
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    const std::string folded = fold_concept_text(concepts_[i].text);
    if (folded.empty()) throw_invalid("concept text must be nonempty");
    if (!seen.insert(folded).second) {
      throw_invalid("duplicate concept text '" + concepts_[i].text + "'");
    }
    double norm_sq = 0.0;
    for (float v : embedding(i)) norm_sq += static_cast<double>(v) * v;
    if (!(norm_sq > 0.0)) {
      throw_invalid("concept '" + concepts_[i].text +
                    "' has a zero-norm embedding");
    }
  }
}

std::vector<std::string> ConceptSet::texts() const {
  std::vector<std::string> out;
  out.reserve(concepts_.size());
  for (const Concept& c : concepts_) out.push_back(c.text);
  return out;
}

ConceptSet ConceptSet::select(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw_invalid("cannot select an empty concept subset");
  std::vector<Concept> kept;
  std::vector<float> rows;
  rows.reserve(indices.size() * dim());
  for (std::size_t index : indices) {
    if (index >= size()) throw_invalid("concept index out of range");
    kept.push_back(concepts_[index]);
    const auto row = embedding(index);
    rows.insert(rows.end(), row.begin(), row.end());
  }
  return ConceptSet(std::move(kept),
                    TensorF32({indices.size(), dim()}, std::move(rows)));
}

ConceptSet load_concept_set(const std::filesystem::path& concepts_json) {
  const json root = parse_json(read_text_file(concepts_json), "concepts file");
  if (!root.contains("concepts") || !root["concepts"].is_array()) {
    throw_format("concepts file is missing the concepts array");
  }
  std::vector<Concept> concepts;
  for (const json& entry : root["concepts"]) {
    Concept concept_entry;
    concept_entry.text = json_string(entry, "text");
    if (entry.contains("class_hint") && !entry["class_hint"].is_null()) {
      concept_entry.class_hint = json_index(entry, "class_hint");
    }
    concepts.push_back(std::move(concept_entry));
  }
  const std::string embeddings_path = json_string(root, "embeddings_path");
  TensorF32 embeddings =
      read_tensor(concepts_json.parent_path() / embeddings_path);
  try {
    return ConceptSet(std::move(concepts), std::move(embeddings));
  } catch (const Error& e) {
    throw_format(concepts_json.string() + ": " + e.what());
  }
}

void save_concept_set(const ConceptSet& concepts,
                      const std::filesystem::path& concepts_json,
                      const std::string& embeddings_filename) {
  ordered_json root;
  ordered_json entries = ordered_json::array();
  for (const Concept& c : concepts.concepts()) {
    ordered_json entry;
    entry["text"] = c.text;
    entry["class_hint"] =
        c.class_hint ? ordered_json(*c.class_hint) : ordered_json(nullptr);
    entries.push_back(std::move(entry));
  }
  root["concepts"] = std::move(entries);
  root["embeddings_path"] = embeddings_filename;
  write_tensor(concepts.embeddings(),
               concepts_json.parent_path() / embeddings_filename);
  write_text_file(concepts_json, root.dump(2) + "\n");
}

void check_pairing(const DatasetManifest& manifest,
                   const ConceptSet& concepts) {
  if (manifest.embedding_dim != concepts.dim()) {
    throw_invalid("embedding dimension mismatch: manifest D=" +
                  std::to_string(manifest.embedding_dim) +
                  ", concept embeddings D=" + std::to_string(concepts.dim()));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace conceptlens
