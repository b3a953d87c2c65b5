// Copyright 2026 The gmmfb Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GMMFB_BINARY_IO_HPP_
#define GMMFB_BINARY_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gmmfb/linalg.hpp"

namespace gmmfb {

/// Malformed or truncated artifact file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian fixed-width records. Complex matrices are row-major with
// interleaved real/imaginary float64 parts.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void complex_matrix(const CMatrix& m);
  void complex_vector(const CVector& v);
  void close();

 private:
  void raw(const void* data, std::size_t n);

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  CMatrix complex_matrix(std::size_t rows, std::size_t cols);
  CVector complex_vector(std::size_t n);
  /// Throws FormatError if unread bytes remain.
  void expect_end();

 private:
  void raw(void* data, std::size_t n);

  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace gmmfb

#endif  // GMMFB_BINARY_IO_HPP_
