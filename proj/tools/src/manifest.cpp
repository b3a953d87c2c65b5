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

#include "gmmfb/tools/manifest.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "gmmfb/tools/version.hpp"

namespace gmmfb::tools {
namespace {

using json = nlohmann::json;

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: digest init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1) throw std::runtime_error("sha256: update failed");
  }
  std::array<unsigned char, 32> digest() {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1 || len != out.size()) {
      throw std::runtime_error("sha256: final failed");
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string hex(const std::array<unsigned char, 32>& d) {
  std::ostringstream os;
  for (unsigned char c : d) os << std::hex << std::setw(2) << std::setfill('0') << int{c};
  return os.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return hex(h.digest());
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return hex(h.digest());
}

std::uint64_t labeled_seed(std::uint64_t master, const std::string& label) {
  Sha256 h;
  h.update(label.data(), label.size());
  std::array<unsigned char, 8> le{};
  for (std::size_t i = 0; i < le.size(); ++i) le[i] = static_cast<unsigned char>(master >> (8 * i));
  h.update(le.data(), le.size());
  const auto d = h.digest();
  std::uint64_t out = 0;
  for (std::size_t i = 0; i < 8; ++i) out |= std::uint64_t{d[i]} << (8 * i);
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Manifest Manifest::load(const std::filesystem::path& dir) {
  Manifest m;
  m.version_ = kVersion;
  const auto path = dir / kFileName;
  if (!std::filesystem::exists(path)) return m;
  std::ifstream in(path);
  json j;
  try {
    in >> j;
    m.config_hash_ = j.at("config_hash").get<std::string>();
    for (const auto& [name, s] : j.at("stages").items()) {
      StageRecord r;
      r.fingerprint = s.at("fingerprint").get<std::string>();
      r.timestamp = s.at("timestamp").get<std::string>();
      r.files = s.at("files").get<std::map<std::string, std::string>>();
      m.stages_[name] = std::move(r);
    }
  } catch (const json::exception& e) {
    throw IntegrityError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void Manifest::save(const std::filesystem::path& dir) const {
  json j;
  j["version"] = version_.empty() ? std::string(kVersion) : version_;
  j["config_hash"] = config_hash_;
  j["stages"] = json::object();
  for (const auto& [name, r] : stages_) {
    j["stages"][name] = {{"fingerprint", r.fingerprint}, {"timestamp", r.timestamp}, {"files", r.files}};
  }
  const auto tmp = dir / (std::string(kFileName) + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / kFileName);
}

std::optional<StageRecord> Manifest::stage(const std::string& name) const {
  const auto it = stages_.find(name);
  if (it == stages_.end()) return std::nullopt;
  return it->second;
}

void Manifest::set_stage(const std::string& name, StageRecord record) {
  stages_[name] = std::move(record);
}

const StageRecord& Manifest::require_stage(const std::string& name,
                                           const std::string& fingerprint) const {
  const auto it = stages_.find(name);
  if (it == stages_.end()) {
    throw MissingArtifact("stage '" + name + "' has not been run; run `gmmfb " + name + "` first");
  }
  if (it->second.fingerprint != fingerprint) {
    throw MissingArtifact("artifacts of stage '" + name +
                          "' were produced with a different configuration; rerun it");
  }
  return it->second;
}

void Manifest::verify_stage(const std::filesystem::path& dir, const std::string& name) const {
  const auto it = stages_.find(name);
  if (it == stages_.end()) throw MissingArtifact("stage '" + name + "' has not been run");
  for (const auto& [file, hash] : it->second.files) {
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) throw MissingArtifact("missing artifact " + path.string());
    if (sha256_file(path) != hash) {
      throw IntegrityError("artifact " + path.string() + " does not match its manifest hash");
    }
  }
}

}  // namespace gmmfb::tools
