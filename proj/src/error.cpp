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

#include "conceptlens/error.h"

namespace conceptlens {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "invalid argument";
    case ErrorKind::kNotFound:
      return "not found";
    case ErrorKind::kFormat:
      return "format error";
    case ErrorKind::kIo:
      return "i/o error";
    case ErrorKind::kNumeric:
      return "numeric error";
    case ErrorKind::kTransport:
      return "transport error";
    case ErrorKind::kHttp:
      return "http error";
  }
  return "unknown";
}

void throw_invalid(const std::string& message) {
  throw Error(ErrorKind::kInvalidArgument, message);
}

void throw_format(const std::string& message) {
  throw Error(ErrorKind::kFormat, message);
}

}  // namespace conceptlens
