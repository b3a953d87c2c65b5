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

#ifndef GMMFB_CODEBOOK_HPP_
#define GMMFB_CODEBOOK_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gmmfb/gmm.hpp"
#include "gmmfb/linalg.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb {

/// Hermitian N_tx x N_tx transmit covariance Q.
class TransmitCovariance {
 public:
  TransmitCovariance() = default;
  /// Stores the Hermitian part of q.
  explicit TransmitCovariance(const CMatrix& q) : q_(hermitian_part(q)) {}

  const CMatrix& matrix() const { return q_; }
  std::size_t dim() const { return static_cast<std::size_t>(q_.rows()); }
  double trace() const { return q_.trace().real(); }

 private:
  CMatrix q_;
};

struct FeasibilityReport {
  double trace = 0.0;
  double min_eigenvalue = 0.0;
  double tail_eigenvalue = 0.0;  // largest eigenvalue beyond the max_rank largest
  bool feasible = false;
};

/// trace <= rho + 1e-9, min eigenvalue >= -1e-10, eigenvalues beyond the
/// max_rank largest <= 1e-10.
FeasibilityReport check_feasible(const TransmitCovariance& q, double rho, std::size_t max_rank);

struct Codebook {
  std::vector<TransmitCovariance> entries;
  std::uint32_t bits = 0;
  double rho = 1.0;
  double noise_var = 1.0;  // design-time noise variance

  std::size_t size() const { return entries.size(); }
  std::size_t n_tx() const { return entries.empty() ? 0 : entries.front().dim(); }
};

struct PgdOptions {
  double step = 1.0;
  std::size_t max_iter = 200;
  double rel_tol = 1e-7;
  double backtrack = 0.5;

  void validate() const;
};

enum class UpdateRule : std::uint32_t { kPgd = 0, kLau = 1 };

/// log2 det(I + H Q H^H / noise_var).
double spectral_efficiency(const CMatrix& h, const CMatrix& q, double noise_var);
inline double spectral_efficiency(const CMatrix& h, const TransmitCovariance& q, double noise_var) {
  return spectral_efficiency(h, q.matrix(), noise_var);
}

/// Water-filling of rho over parallel streams with the given gains
/// (signal-to-noise per unit power). Zero gains get no power.
std::vector<double> waterfill_powers(const std::vector<double>& gains, double rho);

struct WaterfillResult {
  TransmitCovariance q;
  std::vector<double> powers;
  double rate = 0.0;
  bool degenerate = false;  // all-zero channel; q is the zero matrix
};

/// Capacity-achieving covariance on the right singular vectors of H.
WaterfillResult waterfill_optimal(const CMatrix& h, double rho, double noise_var);

/// Frobenius projection onto {Q psd, trace Q <= rho, rank Q <= max_rank}.
TransmitCovariance project_feasible(const CMatrix& m, double rho, std::size_t max_rank);

/// Projection of v onto {x >= 0, sum x = total}.
RVector project_simplex(const RVector& v, double total);

double mean_rate(std::span<const CMatrix> cluster, const CMatrix& q, double noise_var);
/// Euclidean gradient of mean_rate with respect to Q.
CMatrix mean_rate_gradient(std::span<const CMatrix> cluster, const CMatrix& q, double noise_var);

struct PgdResult {
  TransmitCovariance q;
  std::vector<double> objective;  // initial value, then one per accepted step
  std::size_t iterations = 0;
};

/// Projected gradient ascent on mean_rate with backtracking. Starts from
/// `warm_start` when given, else from project_feasible(rho/N_tx I).
PgdResult pgd_sum_rate(std::span<const CMatrix> cluster, double rho, double noise_var,
                       std::size_t n_rx, const PgdOptions& opts,
                       const TransmitCovariance* warm_start = nullptr);

/// Water-filling on the n_rx dominant eigenvectors of mean H^H H.
TransmitCovariance lau_update(std::span<const CMatrix> cluster, double rho, double noise_var,
                              std::size_t n_rx);

struct LloydOptions {
  PgdOptions pgd;
  std::size_t max_outer = 50;
  double rel_tol = 1e-4;
};

struct LloydResult {
  Codebook codebook;
  std::vector<double> objective;  // mean best-entry rate after each assignment
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

LloydResult lloyd_fit(const ChannelDataset& data, std::size_t k, double rho, double noise_var,
                      std::size_t n_rx, UpdateRule update, const LloydOptions& opts,
                      std::uint64_t seed);

struct GmmCodebookResult {
  Codebook codebook;
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> cluster_sizes;
};

/// One entry per mixture component, designed on the training samples whose
/// largest responsibility is that component.
GmmCodebookResult gmm_codebook(const GmmModel& model, const ChannelDataset& data, double rho,
                               double noise_var, std::size_t n_rx, UpdateRule update,
                               const PgdOptions& opts);

/// Hard partition by argmax_k p(k | vec(H)); ties go to the lowest index.
std::vector<std::size_t> gmm_partition(const GmmModel& model, const ChannelDataset& data);

std::uint32_t bits_for_size(std::size_t k);

void write_codebook(const std::filesystem::path& path, const Codebook& cb);
Codebook read_codebook(const std::filesystem::path& path);

}  // namespace gmmfb

#endif  // GMMFB_CODEBOOK_HPP_
