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

#ifndef GMMFB_TOOLS_MANIFEST_HPP_
#define GMMFB_TOOLS_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace gmmfb::tools {

/// An upstream artifact or its manifest entry is absent or stale. Exit code 3.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file's content no longer matches the hash recorded for it. Exit code 4.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// First eight bytes of SHA-256(label || little-endian seed).
std::uint64_t labeled_seed(std::uint64_t master, const std::string& label);

struct StageRecord {
  std::string fingerprint;                    // hash of the config this stage consumed
  std::string timestamp;                      // UTC, ISO 8601
  std::map<std::string, std::string> files;   // file name -> sha256
};

/// artifacts/manifest.json: config hash, tool version and per-stage outputs.
class Manifest {
 public:
  static constexpr const char* kFileName = "manifest.json";

  /// Reads dir/manifest.json, or returns an empty manifest if absent.
  static Manifest load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  const std::string& config_hash() const { return config_hash_; }
  void set_config_hash(std::string h) { config_hash_ = std::move(h); }
  const std::string& version() const { return version_; }

  const std::map<std::string, StageRecord>& stages() const { return stages_; }
  std::optional<StageRecord> stage(const std::string& name) const;
  void set_stage(const std::string& name, StageRecord record);

  /// Throws MissingArtifact unless `name` is recorded with `fingerprint`.
  const StageRecord& require_stage(const std::string& name, const std::string& fingerprint) const;
  /// Re-hashes every file of the stage; throws MissingArtifact or IntegrityError.
  void verify_stage(const std::filesystem::path& dir, const std::string& name) const;

 private:
  std::string config_hash_;
  std::string version_;
  std::map<std::string, StageRecord> stages_;
};

std::string utc_timestamp();

}  // namespace gmmfb::tools

#endif  // GMMFB_TOOLS_MANIFEST_HPP_
