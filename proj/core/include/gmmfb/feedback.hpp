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

#ifndef GMMFB_FEEDBACK_HPP_
#define GMMFB_FEEDBACK_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmmfb/codebook.hpp"
#include "gmmfb/estimation.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb {

enum class FeedbackMethod : std::uint32_t {
  kFromObservation = 0,
  kFromChannel = 1,
  kExhaustiveRate = 2,
  kExhaustiveRateEstimatedCsi = 3,
};

struct FeedbackDecision {
  std::size_t index = 0;
  FeedbackMethod method = FeedbackMethod::kFromObservation;
};

/// argmax over log scores, lowest index on ties.
std::size_t select_index(const RVector& log_scores);

/// argmax_k p(k | y).
FeedbackDecision select_from_observation(const GmmModel& model, const ObservationModel& om,
                                         const CVector& y);
/// argmax_k p(k | h).
FeedbackDecision select_from_channel(const GmmModel& model, const CVector& h);
/// argmax_k r(H, Q_k) over the codebook.
FeedbackDecision select_exhaustive(const Codebook& cb, const CMatrix& h, double noise_var,
                                   FeedbackMethod method = FeedbackMethod::kExhaustiveRate);

/// (rho / N_tx) I, deliberately ignoring the rank constraint.
TransmitCovariance baseline_uniform(std::size_t n_tx, double rho);
/// rho / n_rx on each of the n_rx dominant right singular vectors of H.
TransmitCovariance baseline_uniform_eigenspace(const CMatrix& h, double rho, std::size_t n_rx);

enum class StrategyKind { kOptimal, kUniformCov, kUniformEigenspace, kCodebook };
enum class CodebookFamily { kGmm, kLloyd };
enum class Selector { kObservation, kChannel, kEstimateGmm, kEstimateScov, kEstimateOmp };

/// A transmit strategy named by its label:
///   optimal | uni_pow_cov | uni_pow_eigsp |
///   {gmm,lloyd}_{pgd,lau}_{y,h,est_gmm,est_scov,est_omp}
/// where `y` (GMM codebooks only) feeds back argmax p(k|y), `h` uses perfect
/// CSI (argmax p(k|h) for GMM, exhaustive rate for Lloyd) and `est_*` runs an
/// estimator followed by the exhaustive rate search.
struct Strategy {
  std::string label;
  StrategyKind kind = StrategyKind::kOptimal;
  CodebookFamily family = CodebookFamily::kGmm;
  UpdateRule update = UpdateRule::kPgd;
  Selector selector = Selector::kChannel;

  /// "gmm-pgd", "lloyd-lau", ... for codebook strategies; empty otherwise.
  std::string codebook_name() const;
};

/// Throws std::invalid_argument for unknown labels.
Strategy parse_strategy(std::string_view label);
std::string codebook_name(CodebookFamily family, UpdateRule update);

struct NseRecord {
  std::uint64_t link_id = 0;
  std::string strategy;
  double nse = 0.0;
  double rate = 0.0;
  double optimal_rate = 0.0;
  std::int64_t index = -1;  // codebook index, -1 for non-codebook strategies
  std::uint64_t noise_seed = 0;
};

/// Everything a cell of the evaluation needs besides the channels.
struct EvaluationContext {
  const GmmModel* model = nullptr;
  std::optional<ObservationModel> om;  // bound to *model when GMM selectors are used
  std::map<std::string, const Codebook*> codebooks;
  std::optional<LmmseFilter> scov;
  std::optional<Dictionary> dictionary;
  std::optional<CMatrix> omp_sensing;  // A D
  std::size_t omp_s_max = 0;           // 0: number of observations
  double rho = 1.0;
  double noise_var = 1.0;  // rate evaluation noise variance
};

/// Per sample: seeded observation shared by all strategies, decision, rate and
/// normalization by the water-filling rate. Records are ordered by sample,
/// then by strategy order.
std::vector<NseRecord> evaluate_strategies(const ChannelDataset& dl_eval,
                                           const EvaluationContext& ctx,
                                           const std::vector<Strategy>& strategies,
                                           std::uint64_t seed);

struct CcdfTable {
  std::vector<double> grid;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // values[label][grid point] = P(nSE > s)
  std::size_t excluded = 0;                 // records with optimal_rate == 0
};

/// `count` evenly spaced thresholds on [0, 1].
std::vector<double> uniform_grid(std::size_t count);

/// Empirical P(nSE > s) per strategy; labels keep first-appearance order.
CcdfTable ccdf(const std::vector<NseRecord>& records, const std::vector<double>& grid);

struct StrategySummary {
  std::string label;
  double mean_nse = 0.0;
  double exceed = 0.0;  // P(nSE > threshold)
  std::size_t count = 0;
};

std::vector<StrategySummary> summarize(const std::vector<NseRecord>& records, double threshold);

/// Comma-separated, one header row, 12 significant digits.
void write_ccdf(std::ostream& out, const CcdfTable& table);
void write_records(std::ostream& out, const std::vector<NseRecord>& records);
std::vector<NseRecord> read_records(std::istream& in);

}  // namespace gmmfb

#endif  // GMMFB_FEEDBACK_HPP_
