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

#ifndef GMMFB_TOOLS_CONFIG_HPP_
#define GMMFB_TOOLS_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmmfb/codebook.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb::tools {

/// Malformed, unknown or inconsistent configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitConfig {
  CovarianceStructure structure = CovarianceStructure::kKronecker;
  std::size_t k = 16;  // full structure
  std::size_t k_tx = 16;
  std::size_t k_rx = 1;
  FitOptions options;

  std::size_t components() const {
    return structure == CovarianceStructure::kFull ? k : k_tx * k_rx;
  }
};

struct CodebookConfig {
  std::uint32_t bits = 4;
  std::vector<std::string> methods{"gmm-pgd", "gmm-lau", "lloyd-pgd", "lloyd-lau"};
  double rho = 1.0;
  Orientation lloyd_training = Orientation::kUplink;  // which training set Lloyd sees
  PgdOptions pgd;
  LloydOptions lloyd;
};

struct EvalConfig {
  std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0};
  std::vector<std::size_t> n_pilots{2, 4, 8, 16};
  std::vector<std::string> strategies;
  std::size_t grid_size = 512;
  double threshold = 0.8;
  std::array<std::size_t, 3> omp_oversampling{2, 2, 2};
  std::size_t omp_s_max = 0;  // 0: number of observations
  std::optional<double> decision_noise_var;  // overrides the pilot noise only
};

struct RunConfig {
  ScenarioConfig scenario;
  std::size_t n_train = 4000;
  FitConfig fit;
  CodebookConfig codebook;
  EvalConfig eval;
  std::filesystem::path artifacts = "artifacts";
  std::uint64_t seed = 1;

  /// Cross-section checks; throws ConfigError.
  void validate() const;
};

/// INI text with sections [scenario] [fit] [codebook] [eval] [paths] [run].
/// Unknown sections or keys are errors.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text of one section, used for fingerprints and the manifest.
std::string section_text(const RunConfig& config, const std::string& section);
std::string canonical_text(const RunConfig& config);

/// noise variance 10^(-snr/10) for rho = 1 scaled by rho.
double noise_var_for(double snr_db, double rho);
/// "0", "-5", "2.5": the SNR as it appears in file names.
std::string snr_tag(double snr_db);

}  // namespace gmmfb::tools

#endif  // GMMFB_TOOLS_CONFIG_HPP_
