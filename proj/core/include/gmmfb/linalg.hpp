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

#ifndef GMMFB_LINALG_HPP_
#define GMMFB_LINALG_HPP_

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace gmmfb {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Kronecker product a ⊗ b.
CMatrix kron(const CMatrix& a, const CMatrix& b);
CVector kron(const CVector& a, const CVector& b);

/// Column-major vectorization, vec(H).
CVector vec(const CMatrix& h);
CMatrix unvec(const CVector& v, std::size_t rows, std::size_t cols);

/// (m + m^H) / 2.
CMatrix hermitian_part(const CMatrix& m);

/// Cholesky factor of a Hermitian positive definite matrix with its
/// log-determinant. Throws std::domain_error if the matrix is not
/// numerically positive definite.
class HpdFactor {
 public:
  explicit HpdFactor(const CMatrix& m);

  std::size_t dim() const { return static_cast<std::size_t>(llt_.rows()); }
  double log_det() const { return log_det_; }
  /// x^H M^{-1} x, evaluated as ||L^{-1} x||^2.
  double quadratic_form(const CVector& x) const;
  /// Column-wise quadratic forms of a batch of vectors.
  RVector quadratic_forms(const CMatrix& xs) const;
  CMatrix solve(const CMatrix& b) const { return llt_.solve(b); }
  CVector solve(const CVector& b) const { return llt_.solve(b); }
  CMatrix inverse() const;
  const Eigen::LLT<CMatrix>& llt() const { return llt_; }

 private:
  Eigen::LLT<CMatrix> llt_;
  double log_det_ = 0.0;
  CMatrix l_inverse_;  // L^{-1}, for batched quadratic forms
};

/// log det of a Hermitian positive definite matrix (natural log).
double log_det_hpd(const CMatrix& m);

/// Frobenius-norm relative Hermitian defect ||m - m^H|| / ||m||.
double hermitian_defect(const CMatrix& m);

/// Draws a vector of i.i.d. circularly-symmetric complex Gaussians with the
/// given per-entry variance.
CVector complex_normal(std::size_t n, double variance, std::mt19937_64& rng);

/// Deterministic 64-bit stream seed for (seed, a, b) built on std::seed_seq.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax_first(const RVector& v);

/// log(sum(exp(v))) without overflow.
double log_sum_exp(const RVector& v);

}  // namespace gmmfb

#endif  // GMMFB_LINALG_HPP_
