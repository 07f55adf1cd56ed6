// Copyright 2026 The Nowcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NOWCAST_TESTS_TEST_UTIL_HPP
#define NOWCAST_TESTS_TEST_UTIL_HPP

#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "nowcast/binary_io.hpp"

namespace test_util {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("nowcast_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Relative path -> contents for every regular file below `root`.
inline std::map<std::string, nowcast::io::Bytes> snapshot(const std::filesystem::path& root) {
  std::map<std::string, nowcast::io::Bytes> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), root).generic_string()] = nowcast::io::read_file(e.path());
    }
  }
  return out;
}

inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
  return snapshot(a) == snapshot(b);
}

}  // namespace test_util

#endif  // NOWCAST_TESTS_TEST_UTIL_HPP
