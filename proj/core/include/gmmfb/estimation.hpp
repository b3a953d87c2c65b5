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

#ifndef GMMFB_ESTIMATION_HPP_
#define GMMFB_ESTIMATION_HPP_

#include <array>
#include <memory>
#include <vector>

#include "gmmfb/gmm.hpp"
#include "gmmfb/linalg.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb {

/// N_tx x n_p training matrix; every column has squared norm rho.
struct PilotMatrix {
  CMatrix p;
  double rho = 1.0;

  /// Validates column norms (1e-12 relative) and n_p <= N_tx.
  static PilotMatrix from_matrix(CMatrix p, double rho);
  std::size_t n_tx() const { return static_cast<std::size_t>(p.rows()); }
  std::size_t n_pilots() const { return static_cast<std::size_t>(p.cols()); }
};

/// Columns of F_h ⊗ F_v at indices 0, s, 2s, ... with s = floor(N_tx / n_p),
/// rescaled to squared norm rho.
PilotMatrix build_pilot_matrix(std::size_t n_tx_h, std::size_t n_tx_v, std::size_t n_p, double rho);

/// Per-component quantities of a GMM projected through the observation model.
struct ComponentFilter {
  ComplexGaussian observation;  // N_C(A mu_k, A C_k A^H + Sigma)
  CMatrix gain;                 // W_k = C_k A^H (A C_k A^H + Sigma)^{-1}
  CVector offset;               // b_k = mu_k - W_k A mu_k
};

struct FilterBank {
  std::vector<double> log_weights;
  std::vector<ComponentFilter> components;
  std::size_t channel_dim = 0;
};

/// y = A h + n with A = P^T ⊗ I_{N_rx} and n ~ N_C(0, noise_var I).
class ObservationModel {
 public:
  ObservationModel(PilotMatrix pilots, std::size_t n_rx, double noise_var);

  const PilotMatrix& pilots() const { return pilots_; }
  const CMatrix& operator_matrix() const { return a_; }
  double noise_var() const { return noise_var_; }
  std::size_t n_rx() const { return n_rx_; }
  std::size_t channel_dim() const { return static_cast<std::size_t>(a_.cols()); }
  std::size_t observation_dim() const { return static_cast<std::size_t>(a_.rows()); }

  /// A vec(H), evaluated as vec(H P).
  CVector apply(const CMatrix& h) const;
  /// Seeded noisy observation of a downlink sample.
  CVector observe(const CMatrix& h, std::uint64_t seed) const;

  /// Copy of this model carrying the per-component filters of `model`.
  ObservationModel bind(const GmmModel& model) const;
  bool bound() const { return filters_ != nullptr; }
  /// Throws std::logic_error if not bound to a mixture of matching shape.
  const FilterBank& filters_for(const GmmModel& model) const;

 private:
  PilotMatrix pilots_;
  std::size_t n_rx_;
  double noise_var_;
  CMatrix a_;
  std::shared_ptr<const FilterBank> filters_;
};

CVector observe(const ObservationModel& om, const ChannelSample& sample, std::uint64_t seed);

/// p(k | y) in the log domain.
RVector responsibilities_y(const GmmModel& model, const ObservationModel& om, const CVector& y);
/// Unnormalized log p(k) + log N_C(y; A mu_k, A C_k A^H + Sigma).
RVector log_scores_y(const GmmModel& model, const ObservationModel& om, const CVector& y);

/// Conditional-mean estimate sum_k p(k|y) (W_k y + b_k).
CVector estimate_gmm(const GmmModel& model, const ObservationModel& om, const CVector& y);

/// (1/M) sum_m h_m h_m^H over vec(H_m).
CMatrix sample_covariance(const ChannelDataset& data);
CMatrix sample_covariance(const CMatrix& columns);

/// Cached C A^H (A C A^H + Sigma)^{-1} for repeated zero-mean LMMSE estimates.
class LmmseFilter {
 public:
  LmmseFilter(const CMatrix& cov, const ObservationModel& om);
  CVector operator()(const CVector& y) const { return gain_ * y; }
  const CMatrix& gain() const { return gain_; }

 private:
  CMatrix gain_;
};

CVector estimate_scov(const CMatrix& cov, const ObservationModel& om, const CVector& y);

struct Dictionary {
  CMatrix d;  // unit-norm columns
  std::array<std::size_t, 3> oversampling{1, 1, 1};  // (rx, tx horizontal, tx vertical)
};

/// n x (o n) oversampled DFT matrix with unit-norm columns.
CMatrix oversampled_dft(std::size_t n, std::size_t oversampling);

/// Dictionary over vec(H) of an N_rx x N_tx channel:
/// D = (D_tx,h ⊗ D_tx,v) ⊗ D_rx.
Dictionary build_dictionary(std::size_t n_rx, std::size_t n_tx_h, std::size_t n_tx_v,
                            std::array<std::size_t, 3> oversampling);

struct OmpResult {
  CVector estimate;
  std::size_t sparsity = 0;
  std::vector<double> residual_norms;  // after each added atom
  std::vector<double> errors;          // ||h_s - true_h||^2 per sparsity
};

/// OMP on A D for s = 1..s_max; returns the iterate closest to true_h.
OmpResult estimate_omp_genie(const Dictionary& dict, const ObservationModel& om, const CVector& y,
                             const CVector& true_h, std::size_t s_max);

/// Same, with A D precomputed by the caller.
OmpResult estimate_omp_genie(const Dictionary& dict, const CMatrix& sensing, const CVector& y,
                             const CVector& true_h, std::size_t s_max);

}  // namespace gmmfb

#endif  // GMMFB_ESTIMATION_HPP_
