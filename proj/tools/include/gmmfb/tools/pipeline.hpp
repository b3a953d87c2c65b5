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

#ifndef GMMFB_TOOLS_PIPELINE_HPP_
#define GMMFB_TOOLS_PIPELINE_HPP_

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>

#include "gmmfb/tools/config.hpp"
#include "gmmfb/tools/manifest.hpp"

namespace gmmfb::tools {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingArtifact = 3,
  kExitIntegrity = 4,
};

/// Maps the exception hierarchy of the pipeline onto process exit codes.
int exit_code_for(const std::exception& e);

// Artifact names inside the artifact directory.
inline constexpr const char* kUlTrain = "ul_train.bin";
inline constexpr const char* kUlEval = "ul_eval.bin";
inline constexpr const char* kDlTrain = "dl_train.bin";
inline constexpr const char* kDlEval = "dl_eval.bin";
inline constexpr const char* kModel = "gmm.bin";
inline constexpr const char* kFitTrace = "fit_trace.csv";

std::string codebook_file(const std::string& method, double snr_db);
std::string records_file(double snr_db, std::size_t n_pilots);
std::string ccdf_file(double snr_db, std::size_t n_pilots);
std::string sweep_file(double snr_db);

/// Hash chain over the config sections each stage depends on.
std::string stage_fingerprint(const RunConfig& config, const std::string& stage);

/// Writes the UL/DL train/eval datasets.
void cmd_generate(const RunConfig& config, std::ostream& log);
/// Fits the mixture on the transposed UL training set.
void cmd_fit(const RunConfig& config, std::ostream& log);
/// One codebook per configured method and SNR.
void cmd_build_codebook(const RunConfig& config, std::ostream& log);
/// Records, cCDF tables and the fixed-threshold sweep per (SNR, n_p) cell.
void cmd_evaluate(const RunConfig& config, std::ostream& log);
/// Per-cell mean nSE and P(nSE > threshold).
void cmd_report(const RunConfig& config, std::ostream& out);

}  // namespace gmmfb::tools

#endif  // GMMFB_TOOLS_PIPELINE_HPP_
