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

#ifndef CONCEPTLENS_TENSOR_H_
#define CONCEPTLENS_TENSOR_H_

#include <cstddef>
#include <span>
#include <vector>

namespace conceptlens {

// Shape-tagged, row-major binary32 array. The last dimension varies fastest.
//
// The constructor checks that every dimension is positive and that the
// element count matches the shape. Finiteness is checked at the I/O
// boundary (write_tensor / read_tensor) so callers can build a tensor
// incrementally through mutable_data().
class TensorF32 {
 public:
  TensorF32() = default;
  TensorF32(std::vector<std::size_t> shape, std::vector<float> data);

  static TensorF32 zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  // Contiguous slice along the leading axis, e.g. one row of an [N, D]
  // matrix.
  std::span<const float> row(std::size_t index) const;

  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);

// True when shapes agree and every element has the same bit pattern.
bool bit_equal(const TensorF32& a, const TensorF32& b);

}  // namespace conceptlens

#endif  // CONCEPTLENS_TENSOR_H_
