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

#ifndef GMMFB_GMM_HPP_
#define GMMFB_GMM_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gmmfb/linalg.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb {

/// Circularly-symmetric complex Gaussian N_C(mean, cov) with its Cholesky
/// factor, inverse and log-determinant computed once at construction.
class ComplexGaussian {
 public:
  /// The covariance is replaced by its Hermitian part. Throws
  /// std::domain_error if it is not positive definite.
  ComplexGaussian(CVector mean, CMatrix cov);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const CVector& mean() const { return mean_; }
  const CMatrix& cov() const { return cov_; }
  const CMatrix& cov_inverse() const { return inverse_; }
  double log_det() const { return factor_.log_det(); }
  const HpdFactor& factor() const { return factor_; }

  /// -(h-mu)^H C^{-1} (h-mu) - N ln(pi) - ln det C.
  double log_density(const CVector& h) const;
  /// Column-wise log densities.
  RVector log_density(const CMatrix& xs) const;

 private:
  CVector mean_;
  CMatrix cov_;
  HpdFactor factor_;
  CMatrix inverse_;
};

inline double log_density(const ComplexGaussian& g, const CVector& h) {
  return g.log_density(h);
}

enum class CovarianceStructure : std::uint32_t { kFull = 0, kKronecker = 1 };

/// Transmit and receive factor covariances of a Kronecker mixture. Component
/// k = i * k_rx + j carries tx[i] ⊗ rx[j], which matches the column-major
/// vec(H) of an N_rx x N_tx channel.
struct KroneckerFactors {
  std::vector<CMatrix> tx;
  std::vector<CMatrix> rx;
};

class GmmModel {
 public:
  /// Full-covariance mixture. Weights must be nonnegative and sum to one
  /// within 1e-12; they are stored as given.
  GmmModel(std::vector<double> weights, std::vector<ComplexGaussian> components);

  /// Zero-mean Kronecker mixture with weights.size() == tx.size() * rx.size().
  static GmmModel kronecker(std::vector<double> weights, std::vector<CMatrix> tx,
                            std::vector<CMatrix> rx);

  std::size_t size() const { return components_.size(); }
  std::size_t dim() const { return components_.front().dim(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<ComplexGaussian>& components() const { return components_; }
  const ComplexGaussian& component(std::size_t k) const { return components_.at(k); }
  CovarianceStructure structure() const { return structure_; }
  const std::optional<KroneckerFactors>& factors() const { return factors_; }

  /// log p(k) + log N_C(h; mu_k, C_k) for every k.
  RVector log_scores(const CVector& h) const;

 private:
  GmmModel() = default;

  std::vector<double> weights_;
  std::vector<ComplexGaussian> components_;
  CovarianceStructure structure_ = CovarianceStructure::kFull;
  std::optional<KroneckerFactors> factors_;
};

/// p(k | h), normalized in the log domain.
RVector responsibilities_h(const GmmModel& model, const CVector& h);

/// Softmax of log scores; entries are nonnegative and sum to one.
RVector normalize_log_scores(const RVector& log_scores);

enum class InitMethod : std::uint32_t { kRandomResponsibility = 0, kKMeansLike = 1 };

struct FitOptions {
  std::size_t max_iter = 100;
  double rel_tol = 1e-6;  // on the total log-likelihood
  double reg_eps = 1e-6;  // diagonal loading reg_eps * tr(C)/N after each M-step
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::kRandomResponsibility;
  bool zero_mean = false;  // pin component means to zero

  void validate() const;
};

struct FitResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // one entry per E-step
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t reseeds = 0;
};

/// EM on the columns of `data` (N x M).
FitResult fit_em(const CMatrix& data, std::size_t k, const FitOptions& opts);
FitResult fit_em(const ChannelDataset& data, std::size_t k, const FitOptions& opts);

struct KroneckerFitResult {
  GmmModel model;
  FitResult tx;
  FitResult rx;
  double entry_power = 1.0;  // receive factors are divided by this
};

/// Two-stage fit: a K_tx transmit mixture on all rows of the N_rx x N_tx
/// samples and a K_rx receive mixture on all columns, combined into K_tx*K_rx
/// zero-mean components with product weights.
KroneckerFitResult fit_kronecker(const ChannelDataset& data, std::size_t k_tx, std::size_t k_rx,
                                 const FitOptions& opts);

struct CovarianceLayout {
  CovarianceStructure structure = CovarianceStructure::kFull;
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  std::uint64_t k_tx = 0;
  std::uint64_t n_tx = 0;
  std::uint64_t k_rx = 0;
  std::uint64_t n_rx = 0;
};

/// Covariance parameters counted as N(N+1)/2 per Hermitian matrix.
std::uint64_t count_covariance_parameters(const CovarianceLayout& layout);
std::uint64_t count_covariance_parameters(const GmmModel& model);

void write_model(const std::filesystem::path& path, const GmmModel& model);
GmmModel read_model(const std::filesystem::path& path);

}  // namespace gmmfb

#endif  // GMMFB_GMM_HPP_
