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

#include "gmmfb/binary_io.hpp"

#include <bit>
#include <cstring>

namespace gmmfb {

static_assert(std::endian::native == std::endian::little,
              "artifact formats assume a little-endian host");

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
}

void BinaryWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), tag.size()); }
void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::complex_matrix(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      f64(m(i, j).real());
      f64(m(i, j).imag());
    }
  }
}

void BinaryWriter::complex_vector(const CVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    f64(v(i).real());
    f64(v(i).imag());
  }
}

void BinaryWriter::close() {
  out_.flush();
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
  out_.close();
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw std::runtime_error("cannot open for reading: " + path.string());
}

void BinaryReader::raw(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw FormatError("truncated file: " + path_.string());
  }
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  raw(got.data(), got.size());
  if (got != tag) throw FormatError("bad magic in " + path_.string());
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

CMatrix BinaryReader::complex_matrix(std::size_t rows, std::size_t cols) {
  CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double re = f64();
      const double im = f64();
      m(i, j) = cdouble(re, im);
    }
  }
  return m;
}

CVector BinaryReader::complex_vector(std::size_t n) {
  CVector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = f64();
    const double im = f64();
    v(i) = cdouble(re, im);
  }
  return v;
}

void BinaryReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes in " + path_.string());
  }
}

}  // namespace gmmfb
