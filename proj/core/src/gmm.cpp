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

#include "gmmfb/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "gmmfb/binary_io.hpp"

namespace gmmfb {
namespace {

constexpr char kModelMagic[] = "GMFBGMM_";
constexpr std::uint32_t kModelVersion = 1;
const double kLogPi = std::log(kPi);

void check_weights(const std::vector<double>& w) {
  if (w.empty()) throw std::invalid_argument("gmm: no components");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("gmm: negative weight");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("gmm: weights must sum to one");
}

std::vector<double> normalized(std::vector<double> w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return w;
}

CMatrix load_diagonal(CMatrix c, double reg_eps) {
  c = hermitian_part(c);
  if (reg_eps > 0.0) {
    const double n = static_cast<double>(c.rows());
    double level = c.trace().real() / n;
    if (!(level > 0.0)) level = 1.0;
    c.diagonal().array() += reg_eps * level;
  }
  return c;
}

// Responsibility matrix (M x K) from a random Dirichlet(1) draw per sample.
Eigen::MatrixXd random_responsibilities(std::size_t m, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  Eigen::MatrixXd r(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = expo(rng);
    r.row(i) /= r.row(i).sum();
  }
  return r;
}

// Hard assignment from seeded clustering under the phase-invariant distance
// 1 - |<u, c>|^2 between unit-norm samples and unit-norm centers.
Eigen::MatrixXd kmeans_like_responsibilities(const CMatrix& x, std::size_t k, std::uint64_t seed) {
  const Eigen::Index m = x.cols();
  CMatrix u = x;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nrm = u.col(i).norm();
    if (nrm > 0.0) u.col(i) /= nrm;
  }
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> seeds;
  seeds.push_back(std::uniform_int_distribution<Eigen::Index>(0, m - 1)(rng));
  RVector dist = RVector::Constant(m, std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    const CVector c = u.col(seeds.back());
    const RVector overlap = (c.adjoint() * u).cwiseAbs2().transpose();
    dist = dist.cwiseMin(RVector::Ones(m) - overlap);
    dist = dist.cwiseMax(0.0);
    const double total = dist.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick < m - 1; ++pick) {
        target -= dist(pick);
        if (target <= 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(seeds.size()) % m;
    }
    seeds.push_back(pick);
  }
  CMatrix centers(x.rows(), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) centers.col(static_cast<Eigen::Index>(j)) = u.col(seeds[j]);

  std::vector<Eigen::Index> label(static_cast<std::size_t>(m), 0);
  constexpr int kRefinements = 5;
  for (int it = 0; it <= kRefinements; ++it) {
    const Eigen::MatrixXd overlap = (centers.adjoint() * u).cwiseAbs2();  // K x M
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::Index best = 0;
      overlap.col(i).maxCoeff(&best);
      label[static_cast<std::size_t>(i)] = best;
    }
    if (it == kRefinements) break;
    for (std::size_t j = 0; j < k; ++j) {
      CMatrix scatter = CMatrix::Zero(x.rows(), x.rows());
      std::size_t count = 0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (label[static_cast<std::size_t>(i)] != static_cast<Eigen::Index>(j)) continue;
        scatter.noalias() += u.col(i) * u.col(i).adjoint();
        ++count;
      }
      if (count == 0) continue;
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(scatter);
      centers.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(x.rows() - 1);
    }
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < m; ++i) r(i, label[static_cast<std::size_t>(i)]) = 1.0;
  return r;
}

struct MixtureParams {
  std::vector<double> weights;
  std::vector<ComplexGaussian> components;
  std::vector<bool> reseeded;
};

CMatrix second_moment(const CMatrix& x, const CVector& mean) {
  const CMatrix d = x.colwise() - mean;
  return d * d.adjoint() / static_cast<double>(x.cols());
}

MixtureParams m_step(const CMatrix& x, const Eigen::MatrixXd& resp, const FitOptions& opts,
                     const RVector& sample_ll, std::size_t& reseeds) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  const std::size_t k = static_cast<std::size_t>(resp.cols());
  MixtureParams out;
  std::vector<double> counts(k);
  std::vector<Eigen::Index> taken;
  for (std::size_t j = 0; j < k; ++j) {
    const auto r = resp.col(static_cast<Eigen::Index>(j));
    const double nk = r.sum();
    if (nk < 1.0) {
      // Re-seed at the worst explained sample not used yet in this step.
      Eigen::Index worst = static_cast<Eigen::Index>(j * static_cast<std::size_t>(m) / k);
      if (sample_ll.size() == m) {
        double lowest = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
          if (std::find(taken.begin(), taken.end(), i) != taken.end()) continue;
          if (sample_ll(i) < lowest) {
            lowest = sample_ll(i);
            worst = i;
          }
        }
      }
      taken.push_back(worst);
      CVector mean = opts.zero_mean ? CVector(CVector::Zero(n)) : CVector(x.col(worst));
      CVector global_mean = opts.zero_mean ? CVector(CVector::Zero(n)) : CVector(x.rowwise().mean());
      CMatrix cov = load_diagonal(second_moment(x, global_mean), std::max(opts.reg_eps, 1e-6));
      out.components.emplace_back(std::move(mean), std::move(cov));
      out.reseeded.push_back(true);
      counts[j] = 1.0;
      ++reseeds;
      continue;
    }
    CVector mean = opts.zero_mean ? CVector(CVector::Zero(n)) : CVector((x * r.cast<cdouble>()) / nk);
    CMatrix dw = x.colwise() - mean;
    dw.array().rowwise() *= r.cwiseSqrt().transpose().cast<cdouble>().array();
    CMatrix lower = CMatrix::Zero(n, n);
    lower.selfadjointView<Eigen::Lower>().rankUpdate(dw, 1.0 / nk);
    CMatrix cov = lower.selfadjointView<Eigen::Lower>();
    out.components.emplace_back(std::move(mean), load_diagonal(std::move(cov), opts.reg_eps));
    out.reseeded.push_back(false);
    counts[j] = nk;
  }
  out.weights = normalized(counts);
  return out;
}

}  // namespace

ComplexGaussian::ComplexGaussian(CVector mean, CMatrix cov)
    : mean_(std::move(mean)), cov_(hermitian_part(cov)), factor_(cov_), inverse_(factor_.inverse()) {
  if (cov_.rows() != mean_.size()) {
    throw std::invalid_argument("ComplexGaussian: mean/covariance dimension mismatch");
  }
  inverse_ = hermitian_part(inverse_);
}

double ComplexGaussian::log_density(const CVector& h) const {
  if (h.size() != mean_.size()) throw std::invalid_argument("log_density: dimension mismatch");
  const double n = static_cast<double>(mean_.size());
  return -factor_.quadratic_form(h - mean_) - n * kLogPi - factor_.log_det();
}

RVector ComplexGaussian::log_density(const CMatrix& xs) const {
  if (xs.rows() != mean_.size()) throw std::invalid_argument("log_density: dimension mismatch");
  const double n = static_cast<double>(mean_.size());
  const CMatrix centered = xs.colwise() - mean_;
  RVector q = factor_.quadratic_forms(centered);
  return (-q.array() - n * kLogPi - factor_.log_det()).matrix();
}

GmmModel::GmmModel(std::vector<double> weights, std::vector<ComplexGaussian> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  check_weights(weights_);
  if (weights_.size() != components_.size()) {
    throw std::invalid_argument("gmm: weight/component count mismatch");
  }
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) {
      throw std::invalid_argument("gmm: components differ in dimension");
    }
  }
}

GmmModel GmmModel::kronecker(std::vector<double> weights, std::vector<CMatrix> tx,
                             std::vector<CMatrix> rx) {
  if (tx.empty() || rx.empty()) throw std::invalid_argument("gmm: empty Kronecker factors");
  if (weights.size() != tx.size() * rx.size()) {
    throw std::invalid_argument("gmm: Kronecker weight count must be K_tx * K_rx");
  }
  check_weights(weights);
  GmmModel model;
  model.weights_ = std::move(weights);
  model.structure_ = CovarianceStructure::kKronecker;
  for (auto& c : tx) c = hermitian_part(c);
  for (auto& c : rx) c = hermitian_part(c);
  const Eigen::Index n = tx.front().rows() * rx.front().rows();
  for (const auto& ct : tx) {
    for (const auto& cr : rx) {
      model.components_.emplace_back(CVector::Zero(n), kron(ct, cr));
    }
  }
  model.factors_ = KroneckerFactors{std::move(tx), std::move(rx)};
  return model;
}

RVector GmmModel::log_scores(const CVector& h) const {
  RVector s(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) {
    s(static_cast<Eigen::Index>(k)) = std::log(weights_[k]) + components_[k].log_density(h);
  }
  return s;
}

RVector normalize_log_scores(const RVector& log_scores) {
  const double lse = log_sum_exp(log_scores);
  RVector p = (log_scores.array() - lse).exp().matrix();
  return p / p.sum();
}

RVector responsibilities_h(const GmmModel& model, const CVector& h) {
  return normalize_log_scores(model.log_scores(h));
}

void FitOptions::validate() const {
  if (max_iter < 1) throw std::invalid_argument("fit: max_iter must be >= 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("fit: rel_tol must be > 0");
  if (!(reg_eps >= 0.0)) throw std::invalid_argument("fit: reg_eps must be >= 0");
}

FitResult fit_em(const CMatrix& data, std::size_t k, const FitOptions& opts) {
  opts.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  if (n == 0) throw std::invalid_argument("fit_em: zero-dimensional data");
  if (k < 1) throw std::invalid_argument("fit_em: K must be >= 1");
  if (static_cast<std::size_t>(m) < k) throw std::invalid_argument("fit_em: K exceeds sample count");

  Eigen::MatrixXd resp;
  if (k == 1) {
    resp = Eigen::MatrixXd::Ones(m, 1);
  } else if (opts.init == InitMethod::kKMeansLike) {
    resp = kmeans_like_responsibilities(data, k, opts.seed);
  } else {
    resp = random_responsibilities(static_cast<std::size_t>(m), k, opts.seed);
  }

  std::size_t reseeds = 0;
  RVector sample_ll;
  MixtureParams params = m_step(data, resp, opts, sample_ll, reseeds);
  std::vector<double> trace;
  bool converged = false;
  std::size_t iter = 0;
  // Component log densities of the current parameters.
  Eigen::MatrixXd logn(m, static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    logn.col(static_cast<Eigen::Index>(j)) = params.components[j].log_density(data);
  }
  Eigen::MatrixXd logp(m, static_cast<Eigen::Index>(k));
  while (true) {
    ++iter;
    for (std::size_t j = 0; j < k; ++j) {
      logp.col(static_cast<Eigen::Index>(j)) =
          logn.col(static_cast<Eigen::Index>(j)).array() + std::log(params.weights[j]);
    }
    sample_ll.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) sample_ll(i) = log_sum_exp(logp.row(i).transpose());
    const double ll = sample_ll.sum();
    trace.push_back(ll);
    if (trace.size() >= 2) {
      const double prev = trace[trace.size() - 2];
      if (std::abs(ll - prev) <= opts.rel_tol * std::abs(ll)) converged = true;
    }
    // A single component is a closed-form fixed point.
    if (k == 1) converged = true;
    if (converged || iter >= opts.max_iter) break;
    resp = (logp.colwise() - sample_ll).array().exp().matrix();
    MixtureParams next = m_step(data, resp, opts, sample_ll, reseeds);
    // Diagonal loading makes the M-step inexact. Keep an update only if it
    // does not lower the component's expected complete-data log-likelihood,
    // which preserves the ascent property of EM.
    for (std::size_t j = 0; j < k; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      RVector cand = next.components[j].log_density(data);
      if (!next.reseeded[j] && resp.col(col).dot(cand) < resp.col(col).dot(logn.col(col))) {
        next.components[j] = params.components[j];
      } else {
        logn.col(col) = cand;
      }
    }
    params = std::move(next);
  }
  return FitResult{GmmModel(std::move(params.weights), std::move(params.components)),
                   std::move(trace), iter, converged, reseeds};
}

FitResult fit_em(const ChannelDataset& data, std::size_t k, const FitOptions& opts) {
  if (data.empty()) throw std::invalid_argument("fit_em: empty dataset");
  return fit_em(vectorize(data), k, opts);
}

KroneckerFitResult fit_kronecker(const ChannelDataset& data, std::size_t k_tx, std::size_t k_rx,
                                 const FitOptions& opts) {
  if (data.empty()) throw std::invalid_argument("fit_kronecker: empty dataset");
  if (k_tx < 1 || k_rx < 1) throw std::invalid_argument("fit_kronecker: K_tx, K_rx must be >= 1");
  const Eigen::Index n_rx = static_cast<Eigen::Index>(data.rows());
  const Eigen::Index n_tx = static_cast<Eigen::Index>(data.cols());
  const Eigen::Index m = static_cast<Eigen::Index>(data.size());

  CMatrix rows(n_tx, m * n_rx);
  CMatrix cols(n_rx, m * n_tx);
  for (Eigen::Index s = 0; s < m; ++s) {
    const CMatrix& h = data.samples[static_cast<std::size_t>(s)].h;
    rows.middleCols(s * n_rx, n_rx) = h.transpose();
    cols.middleCols(s * n_tx, n_tx) = h;
  }
  const double entry_power = rows.squaredNorm() / static_cast<double>(rows.size());
  if (!(entry_power > 0.0)) throw std::domain_error("fit_kronecker: dataset has zero power");

  FitOptions stage = opts;
  stage.zero_mean = true;
  stage.seed = derive_seed(opts.seed, 1);
  FitResult tx = fit_em(rows, k_tx, stage);
  stage.seed = derive_seed(opts.seed, 2);
  FitResult rx = fit_em(cols, k_rx, stage);

  std::vector<CMatrix> tx_covs;
  std::vector<CMatrix> rx_covs;
  for (const auto& c : tx.model.components()) tx_covs.push_back(c.cov());
  for (const auto& c : rx.model.components()) rx_covs.push_back(c.cov() / entry_power);
  std::vector<double> weights;
  for (double wt : tx.model.weights()) {
    for (double wr : rx.model.weights()) weights.push_back(wt * wr);
  }
  GmmModel model = GmmModel::kronecker(normalized(std::move(weights)), std::move(tx_covs),
                                       std::move(rx_covs));
  return KroneckerFitResult{std::move(model), std::move(tx), std::move(rx), entry_power};
}

std::uint64_t count_covariance_parameters(const CovarianceLayout& layout) {
  const auto tri = [](std::uint64_t n) { return n * (n + 1) / 2; };
  if (layout.structure == CovarianceStructure::kFull) return layout.k * tri(layout.n);
  return layout.k_rx * tri(layout.n_rx) + layout.k_tx * tri(layout.n_tx);
}

std::uint64_t count_covariance_parameters(const GmmModel& model) {
  CovarianceLayout layout;
  layout.structure = model.structure();
  layout.k = model.size();
  layout.n = model.dim();
  if (model.factors()) {
    const auto& f = *model.factors();
    layout.k_tx = f.tx.size();
    layout.n_tx = static_cast<std::uint64_t>(f.tx.front().rows());
    layout.k_rx = f.rx.size();
    layout.n_rx = static_cast<std::uint64_t>(f.rx.front().rows());
  }
  return count_covariance_parameters(layout);
}

// Layout: magic[8] u32 version u32 structure, then
//   full:      u32 K u32 N
//   kronecker: u32 K_tx u32 N_tx u32 K_rx u32 N_rx
// followed by K f64 weights, K means (N complex) and the covariances
// (full: K of N x N; kronecker: K_tx of N_tx x N_tx then K_rx of N_rx x N_rx).
void write_model(const std::filesystem::path& path, const GmmModel& model) {
  BinaryWriter w(path);
  w.magic(std::string_view(kModelMagic, 8));
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.structure()));
  if (model.structure() == CovarianceStructure::kFull) {
    w.u32(static_cast<std::uint32_t>(model.size()));
    w.u32(static_cast<std::uint32_t>(model.dim()));
  } else {
    const auto& f = *model.factors();
    w.u32(static_cast<std::uint32_t>(f.tx.size()));
    w.u32(static_cast<std::uint32_t>(f.tx.front().rows()));
    w.u32(static_cast<std::uint32_t>(f.rx.size()));
    w.u32(static_cast<std::uint32_t>(f.rx.front().rows()));
  }
  for (double v : model.weights()) w.f64(v);
  for (const auto& c : model.components()) w.complex_vector(c.mean());
  if (model.structure() == CovarianceStructure::kFull) {
    for (const auto& c : model.components()) w.complex_matrix(c.cov());
  } else {
    for (const auto& c : model.factors()->tx) w.complex_matrix(c);
    for (const auto& c : model.factors()->rx) w.complex_matrix(c);
  }
  w.close();
}

GmmModel read_model(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(std::string_view(kModelMagic, 8));
  if (r.u32() != kModelVersion) throw FormatError("unsupported model version");
  const std::uint32_t tag = r.u32();
  if (tag == static_cast<std::uint32_t>(CovarianceStructure::kFull)) {
    const std::uint32_t k = r.u32();
    const std::uint32_t n = r.u32();
    if (k == 0 || n == 0) throw FormatError("empty model");
    std::vector<double> weights(k);
    for (auto& v : weights) v = r.f64();
    std::vector<CVector> means;
    for (std::uint32_t i = 0; i < k; ++i) means.push_back(r.complex_vector(n));
    std::vector<ComplexGaussian> comps;
    for (std::uint32_t i = 0; i < k; ++i) comps.emplace_back(std::move(means[i]), r.complex_matrix(n, n));
    r.expect_end();
    return GmmModel(std::move(weights), std::move(comps));
  }
  if (tag == static_cast<std::uint32_t>(CovarianceStructure::kKronecker)) {
    const std::uint32_t k_tx = r.u32();
    const std::uint32_t n_tx = r.u32();
    const std::uint32_t k_rx = r.u32();
    const std::uint32_t n_rx = r.u32();
    if (k_tx == 0 || k_rx == 0 || n_tx == 0 || n_rx == 0) throw FormatError("empty model");
    const std::size_t k = static_cast<std::size_t>(k_tx) * k_rx;
    std::vector<double> weights(k);
    for (auto& v : weights) v = r.f64();
    for (std::size_t i = 0; i < k; ++i) {
      if (r.complex_vector(static_cast<std::size_t>(n_tx) * n_rx).squaredNorm() != 0.0) {
        throw FormatError("Kronecker model with nonzero mean");
      }
    }
    std::vector<CMatrix> tx;
    std::vector<CMatrix> rx;
    for (std::uint32_t i = 0; i < k_tx; ++i) tx.push_back(r.complex_matrix(n_tx, n_tx));
    for (std::uint32_t i = 0; i < k_rx; ++i) rx.push_back(r.complex_matrix(n_rx, n_rx));
    r.expect_end();
    return GmmModel::kronecker(std::move(weights), std::move(tx), std::move(rx));
  }
  throw FormatError("unknown model structure tag");
}

}  // namespace gmmfb
