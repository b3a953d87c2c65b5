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

#include "gmmfb/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>


namespace gmmfb {

PilotMatrix PilotMatrix::from_matrix(CMatrix p, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("pilot: rho must be positive");
  if (p.cols() < 1 || p.cols() > p.rows()) throw std::invalid_argument("pilot: need 1 <= n_p <= N_tx");
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    if (std::abs(p.col(c).squaredNorm() - rho) > 1e-12 * rho) {
      throw std::invalid_argument("pilot: column norm differs from rho");
    }
  }
  return PilotMatrix{std::move(p), rho};
}

PilotMatrix build_pilot_matrix(std::size_t n_tx_h, std::size_t n_tx_v, std::size_t n_p, double rho) {
  const std::size_t n_tx = n_tx_h * n_tx_v;
  if (n_p < 1 || n_p > n_tx) throw std::invalid_argument("build_pilot_matrix: n_p out of range");
  if (!(rho > 0.0)) throw std::invalid_argument("build_pilot_matrix: rho must be positive");
  const auto dft = [](std::size_t n) {
    CMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double ang = -2.0 * kPi * static_cast<double>((r * c) % n) / static_cast<double>(n);
        f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::polar(1.0, ang);
      }
    }
    return f;
  };
  const CMatrix full = kron(dft(n_tx_h), dft(n_tx_v));
  const std::size_t stride = n_tx / n_p;
  CMatrix p(static_cast<Eigen::Index>(n_tx), static_cast<Eigen::Index>(n_p));
  const double scale = std::sqrt(rho / static_cast<double>(n_tx));
  for (std::size_t i = 0; i < n_p; ++i) {
    p.col(static_cast<Eigen::Index>(i)) = full.col(static_cast<Eigen::Index>(i * stride)) * scale;
  }
  return PilotMatrix{std::move(p), rho};
}

ObservationModel::ObservationModel(PilotMatrix pilots, std::size_t n_rx, double noise_var)
    : pilots_(std::move(pilots)), n_rx_(n_rx), noise_var_(noise_var) {
  if (n_rx < 1) throw std::invalid_argument("observation: n_rx must be >= 1");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("observation: noise_var must be >= 0");
  a_ = kron(CMatrix(pilots_.p.transpose()),
            CMatrix(CMatrix::Identity(static_cast<Eigen::Index>(n_rx), static_cast<Eigen::Index>(n_rx))));
}

CVector ObservationModel::apply(const CMatrix& h) const {
  if (static_cast<std::size_t>(h.rows()) != n_rx_ || h.cols() != pilots_.p.rows()) {
    throw std::invalid_argument("observation: channel dimension mismatch");
  }
  return vec(h * pilots_.p);
}

CVector ObservationModel::observe(const CMatrix& h, std::uint64_t seed) const {
  CVector y = apply(h);
  if (noise_var_ > 0.0) {
    std::mt19937_64 rng(seed);
    y += complex_normal(static_cast<std::size_t>(y.size()), noise_var_, rng);
  }
  return y;
}

CVector observe(const ObservationModel& om, const ChannelSample& sample, std::uint64_t seed) {
  return om.observe(sample.h, seed);
}

ObservationModel ObservationModel::bind(const GmmModel& model) const {
  if (model.dim() != channel_dim()) throw std::invalid_argument("bind: model dimension mismatch");
  auto bank = std::make_shared<FilterBank>();
  bank->channel_dim = channel_dim();
  const Eigen::Index obs = a_.rows();
  const CMatrix sigma = noise_var_ * CMatrix::Identity(obs, obs);
  for (std::size_t k = 0; k < model.size(); ++k) {
    const ComplexGaussian& g = model.component(k);
    const CMatrix ac = a_ * g.cov();                   // A C
    const CMatrix inner = hermitian_part(ac * a_.adjoint() + sigma);
    ComplexGaussian projected(a_ * g.mean(), inner);
    // W = C A^H inner^{-1} = (inner^{-1} A C)^H
    CMatrix gain = projected.factor().solve(ac).adjoint();
    CVector offset = g.mean() - gain * (a_ * g.mean());
    bank->log_weights.push_back(std::log(model.weights()[k]));
    bank->components.push_back({std::move(projected), std::move(gain), std::move(offset)});
  }
  ObservationModel out = *this;
  out.filters_ = std::move(bank);
  return out;
}

const FilterBank& ObservationModel::filters_for(const GmmModel& model) const {
  if (!filters_) throw std::logic_error("observation model is not bound to a GMM");
  if (filters_->components.size() != model.size() || filters_->channel_dim != model.dim()) {
    throw std::logic_error("observation model is bound to a different GMM");
  }
  return *filters_;
}

RVector log_scores_y(const GmmModel& model, const ObservationModel& om, const CVector& y) {
  const FilterBank& bank = om.filters_for(model);
  if (static_cast<std::size_t>(y.size()) != om.observation_dim()) {
    throw std::invalid_argument("responsibilities_y: observation dimension mismatch");
  }
  RVector s(static_cast<Eigen::Index>(bank.components.size()));
  for (std::size_t k = 0; k < bank.components.size(); ++k) {
    s(static_cast<Eigen::Index>(k)) =
        bank.log_weights[k] + bank.components[k].observation.log_density(y);
  }
  return s;
}

RVector responsibilities_y(const GmmModel& model, const ObservationModel& om, const CVector& y) {
  return normalize_log_scores(log_scores_y(model, om, y));
}

CVector estimate_gmm(const GmmModel& model, const ObservationModel& om, const CVector& y) {
  const FilterBank& bank = om.filters_for(model);
  const RVector resp = responsibilities_y(model, om, y);
  CVector h = CVector::Zero(static_cast<Eigen::Index>(bank.channel_dim));
  for (std::size_t k = 0; k < bank.components.size(); ++k) {
    const auto& f = bank.components[k];
    h.noalias() += resp(static_cast<Eigen::Index>(k)) * (f.gain * y + f.offset);
  }
  return h;
}

CMatrix sample_covariance(const CMatrix& columns) {
  if (columns.cols() == 0) throw std::invalid_argument("sample_covariance: empty dataset");
  CMatrix c = columns * columns.adjoint() / static_cast<double>(columns.cols());
  return hermitian_part(c);
}

CMatrix sample_covariance(const ChannelDataset& data) {
  if (data.empty()) throw std::invalid_argument("sample_covariance: empty dataset");
  return sample_covariance(vectorize(data));
}

LmmseFilter::LmmseFilter(const CMatrix& cov, const ObservationModel& om) {
  const CMatrix& a = om.operator_matrix();
  if (cov.rows() != a.cols() || cov.cols() != a.cols()) {
    throw std::invalid_argument("LmmseFilter: covariance dimension mismatch");
  }
  const CMatrix ac = a * cov;
  CMatrix inner = hermitian_part(ac * a.adjoint());
  inner.diagonal().array() += om.noise_var();
  const HpdFactor factor(inner);  // throws std::domain_error when singular
  gain_ = factor.solve(ac).adjoint();
}

CVector estimate_scov(const CMatrix& cov, const ObservationModel& om, const CVector& y) {
  return LmmseFilter(cov, om)(y);
}

CMatrix oversampled_dft(std::size_t n, std::size_t oversampling) {
  if (oversampling < 1) throw std::invalid_argument("oversampled_dft: oversampling must be >= 1");
  if (n < 1) throw std::invalid_argument("oversampled_dft: n must be >= 1");
  const std::size_t cols = n * oversampling;
  CMatrix d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double ang = -2.0 * kPi * static_cast<double>((r * c) % cols) / static_cast<double>(cols);
      d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::polar(scale, ang);
    }
  }
  return d;
}

Dictionary build_dictionary(std::size_t n_rx, std::size_t n_tx_h, std::size_t n_tx_v,
                            std::array<std::size_t, 3> oversampling) {
  for (std::size_t o : oversampling) {
    if (o < 1) throw std::invalid_argument("build_dictionary: oversampling must be >= 1");
  }
  const CMatrix d_rx = oversampled_dft(n_rx, oversampling[0]);
  const CMatrix d_tx = kron(oversampled_dft(n_tx_h, oversampling[1]),
                            oversampled_dft(n_tx_v, oversampling[2]));
  return Dictionary{kron(d_tx, d_rx), oversampling};
}

OmpResult estimate_omp_genie(const Dictionary& dict, const ObservationModel& om, const CVector& y,
                             const CVector& true_h, std::size_t s_max) {
  return estimate_omp_genie(dict, CMatrix(om.operator_matrix() * dict.d), y, true_h, s_max);
}

OmpResult estimate_omp_genie(const Dictionary& dict, const CMatrix& sensing, const CVector& y,
                             const CVector& true_h, std::size_t s_max) {
  if (s_max == 0) throw std::invalid_argument("estimate_omp_genie: s_max must be >= 1");
  if (sensing.rows() != y.size() || sensing.cols() != dict.d.cols() || true_h.size() != dict.d.rows()) {
    throw std::invalid_argument("estimate_omp_genie: dimension mismatch");
  }
  const RVector col_norms = sensing.colwise().norm().transpose();
  const std::size_t limit = std::min<std::size_t>(
      s_max, static_cast<std::size_t>(std::min(sensing.rows(), sensing.cols())));

  OmpResult out;
  out.estimate = CVector::Zero(dict.d.rows());
  double best_err = std::numeric_limits<double>::infinity();
  // Orthonormal basis of the selected sensing columns (classical Gram-Schmidt
  // with one re-orthogonalization pass) and the triangular factor R with
  // sensing(:, support) = basis * R.
  const Eigen::Index m = sensing.rows();
  const auto cap = static_cast<Eigen::Index>(limit);
  CMatrix basis(m, cap);
  CMatrix r = CMatrix::Zero(cap, cap);
  CVector coeffs(cap);  // basis^H y
  CMatrix atoms(dict.d.rows(), cap);
  std::vector<Eigen::Index> support;
  std::vector<bool> used(static_cast<std::size_t>(sensing.cols()), false);
  CVector residual = y;
  const double y_norm = y.norm();
  for (std::size_t s = 1; s <= limit; ++s) {
    const auto k = static_cast<Eigen::Index>(s - 1);
    const RVector corr = (sensing.adjoint() * residual).cwiseAbs().transpose();
    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index j = 0; j < corr.size(); ++j) {
      if (used[static_cast<std::size_t>(j)] || !(col_norms(j) > 0.0)) continue;
      const double score = corr(j) / col_norms(j);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best < 0) break;
    CVector v = sensing.col(best);
    CVector proj = CVector::Zero(k);
    for (int pass = 0; pass < 2 && k > 0; ++pass) {
      const CVector c = basis.leftCols(k).adjoint() * v;
      v -= basis.leftCols(k) * c;
      proj += c;
    }
    const double v_norm = v.norm();
    // The atom lies in the span of the support: A D has no more rank to give.
    if (v_norm <= 1e-10 * col_norms(best)) break;
    used[static_cast<std::size_t>(best)] = true;
    support.push_back(best);
    basis.col(k) = v / v_norm;
    r.col(k).head(k) = proj;
    r(k, k) = v_norm;
    coeffs(k) = basis.col(k).dot(y);
    atoms.col(k) = dict.d.col(best);

    const Eigen::Index n_sel = k + 1;
    residual = y - basis.leftCols(n_sel) * coeffs.head(n_sel);
    const CVector t =
        r.topLeftCorner(n_sel, n_sel).triangularView<Eigen::Upper>().solve(coeffs.head(n_sel));
    const CVector h_s = atoms.leftCols(n_sel) * t;
    const double err = (h_s - true_h).squaredNorm();
    out.residual_norms.push_back(residual.norm());
    out.errors.push_back(err);
    if (err < best_err) {
      best_err = err;
      out.estimate = h_s;
      out.sparsity = s;
    }
    if (residual.norm() <= 1e-14 * std::max(y_norm, 1.0)) break;
  }
  return out;
}

}  // namespace gmmfb
