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

#include "conceptlens/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "conceptlens/error.h"

namespace conceptlens {

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t product = 1;
  for (std::size_t dim : shape) product *= dim;
  return product;
}

TensorF32::TensorF32(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw_invalid("tensor shape must have rank >= 1");
  for (std::size_t dim : shape_) {
    if (dim == 0) throw_invalid("tensor dimensions must be positive");
  }
  if (shape_product(shape_) != data_.size()) {
    throw_invalid("tensor data length " + std::to_string(data_.size()) +
                  " does not match shape product " +
                  std::to_string(shape_product(shape_)));
  }
}

TensorF32 TensorF32::zeros(std::vector<std::size_t> shape) {
  const std::size_t count = shape_product(shape);
  return TensorF32(std::move(shape), std::vector<float>(count, 0.0f));
}

std::span<const float> TensorF32::row(std::size_t index) const {
  if (shape_.empty() || index >= shape_[0]) {
    throw_invalid("row index out of range");
  }
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<const float>(data_).subspan(index * stride, stride);
}

bool TensorF32::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

bool bit_equal(const TensorF32& a, const TensorF32& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(float)) == 0;
}

}  // namespace conceptlens
