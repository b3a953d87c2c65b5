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

#include "gmmfb/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gmmfb {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a(i) * b;
  }
  return out;
}

CVector vec(const CMatrix& h) {
  return Eigen::Map<const CVector>(h.data(), h.size());
}

CMatrix unvec(const CVector& v, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(v.size()) != rows * cols) {
    throw std::invalid_argument("unvec: size mismatch");
  }
  return Eigen::Map<const CMatrix>(v.data(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(cols));
}

CMatrix hermitian_part(const CMatrix& m) {
  return (m + m.adjoint()) * 0.5;
}

HpdFactor::HpdFactor(const CMatrix& m) : llt_(m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("HpdFactor: matrix is not square");
  }
  if (llt_.info() != Eigen::Success) {
    throw std::domain_error("HpdFactor: matrix is not positive definite");
  }
  const auto& l = llt_.matrixLLT();
  // Pivots below this floor mean the matrix is singular up to rounding.
  const double floor = m.size() == 0 ? 0.0 : 1e-14 * m.diagonal().real().cwiseAbs().maxCoeff();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double d = l(i, i).real();
    if (!(d > 0.0) || !std::isfinite(d) || d * d <= floor) {
      throw std::domain_error("HpdFactor: matrix is not positive definite");
    }
    acc += std::log(d);
  }
  log_det_ = 2.0 * acc;
  l_inverse_ = llt_.matrixL().solve(CMatrix::Identity(m.rows(), m.cols()));
}

double HpdFactor::quadratic_form(const CVector& x) const {
  CVector z = llt_.matrixL().solve(x);
  return z.squaredNorm();
}

RVector HpdFactor::quadratic_forms(const CMatrix& xs) const {
  // A dense product with L^{-1} outruns a triangular solve on wide batches.
  return (l_inverse_ * xs).colwise().squaredNorm().transpose();
}

CMatrix HpdFactor::inverse() const {
  return llt_.solve(CMatrix::Identity(llt_.rows(), llt_.cols()));
}

double log_det_hpd(const CMatrix& m) { return HpdFactor(m).log_det(); }

double hermitian_defect(const CMatrix& m) {
  const double n = m.norm();
  if (n == 0.0) return 0.0;
  return (m - m.adjoint()).norm() / n;
}

CVector complex_normal(std::size_t n, double variance, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
  CVector out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    out(static_cast<Eigen::Index>(i)) = cdouble(re, im);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

std::size_t argmax_first(const RVector& v) {
  if (v.size() == 0) throw std::invalid_argument("argmax_first: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

double log_sum_exp(const RVector& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace gmmfb
