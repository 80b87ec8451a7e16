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

#ifndef CONCEPTLENS_ERROR_H_
#define CONCEPTLENS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace conceptlens {

enum class ErrorKind {
  kInvalidArgument,  // caller supplied a value outside the contract
  kNotFound,         // an id, file, or fixture does not exist
  kFormat,           // a file or payload failed validation
  kIo,               // the filesystem refused a read or write
  kNumeric,          // training produced a non-finite quantity
  kTransport,        // a network request never produced a response
  kHttp,             // a remote endpoint answered with an error status
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_invalid(const std::string& message);
[[noreturn]] void throw_format(const std::string& message);

}  // namespace conceptlens

#endif  // CONCEPTLENS_ERROR_H_
