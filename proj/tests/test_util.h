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

#ifndef CONCEPTLENS_TESTS_TEST_UTIL_H_
#define CONCEPTLENS_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <random>
#include <string>
#include <system_error>

#include <gtest/gtest.h>

namespace conceptlens::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::random_device rd;
    std::string name = "conceptlens_";
    if (info != nullptr) name += std::string(info->name()) + "_";
    name += std::to_string(rd());
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const {
    return path_ / leaf;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace conceptlens::testing

// Asserts that `statement` throws conceptlens::Error whose message contains
// `fragment`.
#define EXPECT_ERROR_CONTAINS(statement, fragment)                         \
  do {                                                                     \
    try {                                                                  \
      statement;                                                           \
      ADD_FAILURE() << "expected an error containing '" << (fragment)      \
                    << "'";                                                \
    } catch (const ::conceptlens::Error& e) {                              \
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos)   \
          << "actual message: " << e.what();                               \
    }                                                                      \
  } while (0)

#endif  // CONCEPTLENS_TESTS_TEST_UTIL_H_
