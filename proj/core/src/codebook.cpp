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

#include "gmmfb/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "gmmfb/binary_io.hpp"

namespace gmmfb {
namespace {

constexpr char kCodebookMagic[] = "GMFBCDBK";
constexpr std::uint32_t kCodebookVersion = 1;
const double kLn2 = std::log(2.0);

CMatrix isotropic(std::size_t n_tx, double rho) {
  const auto n = static_cast<Eigen::Index>(n_tx);
  return CMatrix::Identity(n, n) * (rho / static_cast<double>(n_tx));
}

std::vector<CMatrix> channels_of(const ChannelDataset& data) {
  std::vector<CMatrix> hs;
  hs.reserve(data.size());
  for (const auto& s : data.samples) hs.push_back(s.h);
  return hs;
}

std::vector<std::vector<CMatrix>> clusters_from(const std::vector<CMatrix>& hs,
                                                const std::vector<std::size_t>& labels,
                                                std::size_t k) {
  std::vector<std::vector<CMatrix>> out(k);
  for (std::size_t m = 0; m < hs.size(); ++m) out[labels[m]].push_back(hs[m]);
  return out;
}

void check_cluster(std::span<const CMatrix> cluster) {
  if (cluster.empty()) throw std::invalid_argument("empty cluster");
  for (const auto& h : cluster) {
    if (h.rows() != cluster.front().rows() || h.cols() != cluster.front().cols()) {
      throw std::invalid_argument("cluster channels differ in shape");
    }
  }
}

TransmitCovariance update_entry(std::span<const CMatrix> cluster, double rho, double noise_var,
                                std::size_t n_rx, UpdateRule update, const PgdOptions& opts,
                                const TransmitCovariance* warm) {
  if (update == UpdateRule::kLau) return lau_update(cluster, rho, noise_var, n_rx);
  return pgd_sum_rate(cluster, rho, noise_var, n_rx, opts, warm).q;
}

}  // namespace

FeasibilityReport check_feasible(const TransmitCovariance& q, double rho, std::size_t max_rank) {
  FeasibilityReport r;
  r.trace = q.trace();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(q.matrix(), Eigen::EigenvaluesOnly);
  const RVector& ev = eig.eigenvalues();  // ascending
  const Eigen::Index n = ev.size();
  r.min_eigenvalue = n > 0 ? ev(0) : 0.0;
  const Eigen::Index tail = n - static_cast<Eigen::Index>(std::min<std::size_t>(max_rank, n));
  r.tail_eigenvalue = tail > 0 ? ev(tail - 1) : 0.0;
  r.feasible = r.trace <= rho + 1e-9 && r.min_eigenvalue >= -1e-10 && r.tail_eigenvalue <= 1e-10 &&
               hermitian_defect(q.matrix()) <= 1e-12;
  return r;
}

void PgdOptions::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("pgd: step must be > 0");
  if (max_iter < 1) throw std::invalid_argument("pgd: max_iter must be >= 1");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("pgd: backtrack must be in (0,1)");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("pgd: rel_tol must be >= 0");
}

double spectral_efficiency(const CMatrix& h, const CMatrix& q, double noise_var) {
  if (h.cols() != q.rows() || q.rows() != q.cols()) {
    throw std::invalid_argument("spectral_efficiency: dimension mismatch");
  }
  if (!(noise_var > 0.0)) throw std::invalid_argument("spectral_efficiency: noise_var must be > 0");
  const CMatrix hq = h * q;
  CMatrix m = hermitian_part(hq * h.adjoint()) / noise_var;
  m.diagonal().array() += 1.0;
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() == Eigen::Success) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) acc += std::log(llt.matrixLLT()(i, i).real());
    return std::max(0.0, 2.0 * acc / kLn2);
  }
  // Rounding can push a huge rank-deficient H Q H^H slightly indefinite;
  // clamp its spectrum instead of failing.
  m.diagonal().array() -= 1.0;
  const RVector lambda = Eigen::SelfAdjointEigenSolver<CMatrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) acc += std::log1p(std::max(lambda(i), 0.0));
  return acc / kLn2;
}

std::vector<double> waterfill_powers(const std::vector<double>& gains, double rho) {
  std::vector<std::size_t> order(gains.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gains[a] > gains[b]; });
  std::vector<double> p(gains.size(), 0.0);
  std::size_t usable = 0;
  while (usable < order.size() && gains[order[usable]] > 0.0) ++usable;
  // Largest active set whose water level clears every included inverse gain.
  for (std::size_t active = usable; active >= 1; --active) {
    double inv_sum = 0.0;
    for (std::size_t i = 0; i < active; ++i) inv_sum += 1.0 / gains[order[i]];
    const double level = (rho + inv_sum) / static_cast<double>(active);
    if (level - 1.0 / gains[order[active - 1]] > 0.0) {
      for (std::size_t i = 0; i < active; ++i) p[order[i]] = level - 1.0 / gains[order[i]];
      break;
    }
  }
  return p;
}

WaterfillResult waterfill_optimal(const CMatrix& h, double rho, double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("waterfill_optimal: noise_var must be > 0");
  const Eigen::Index n_tx = h.cols();
  WaterfillResult out;
  if (h.norm() == 0.0) {
    out.q = TransmitCovariance(CMatrix::Zero(n_tx, n_tx));
    out.degenerate = true;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(h.adjoint() * h));
  const Eigen::Index streams = std::min(h.rows(), n_tx);
  std::vector<double> gains(static_cast<std::size_t>(streams));
  for (Eigen::Index i = 0; i < streams; ++i) {
    gains[static_cast<std::size_t>(i)] = std::max(0.0, eig.eigenvalues()(n_tx - 1 - i)) / noise_var;
  }
  out.powers = waterfill_powers(gains, rho);
  CMatrix q = CMatrix::Zero(n_tx, n_tx);
  for (Eigen::Index i = 0; i < streams; ++i) {
    const double p = out.powers[static_cast<std::size_t>(i)];
    if (p <= 0.0) continue;
    const CVector v = eig.eigenvectors().col(n_tx - 1 - i);
    q.noalias() += p * (v * v.adjoint());
  }
  out.q = TransmitCovariance(q);
  out.rate = spectral_efficiency(h, out.q, noise_var);
  return out;
}

RVector project_simplex(const RVector& v, double total) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - total) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

TransmitCovariance project_feasible(const CMatrix& m, double rho, std::size_t max_rank) {
  if (m.rows() != m.cols()) throw std::invalid_argument("project_feasible: matrix is not square");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(m));
  const Eigen::Index r = std::min<Eigen::Index>(static_cast<Eigen::Index>(max_rank), m.rows());
  RVector lambda = eig.eigenvalues().tail(r);
  const RVector clipped = lambda.cwiseMax(0.0);
  lambda = clipped.sum() > rho ? project_simplex(lambda, rho) : clipped;
  const auto v = eig.eigenvectors().rightCols(r);
  CMatrix q = v * lambda.cast<cdouble>().asDiagonal() * v.adjoint();
  return TransmitCovariance(q);
}

double mean_rate(std::span<const CMatrix> cluster, const CMatrix& q, double noise_var) {
  check_cluster(cluster);
  double acc = 0.0;
  for (const auto& h : cluster) acc += spectral_efficiency(h, q, noise_var);
  return acc / static_cast<double>(cluster.size());
}

CMatrix mean_rate_gradient(std::span<const CMatrix> cluster, const CMatrix& q, double noise_var) {
  check_cluster(cluster);
  const Eigen::Index n_tx = q.rows();
  CMatrix g = CMatrix::Zero(n_tx, n_tx);
  for (const auto& h : cluster) {
    CMatrix m = hermitian_part(h * q * h.adjoint()) / noise_var;
    m.diagonal().array() += 1.0;
    const HpdFactor f(m);
    g.noalias() += h.adjoint() * f.solve(h);
  }
  g /= static_cast<double>(cluster.size()) * kLn2 * noise_var;
  return hermitian_part(g);
}

PgdResult pgd_sum_rate(std::span<const CMatrix> cluster, double rho, double noise_var,
                       std::size_t n_rx, const PgdOptions& opts,
                       const TransmitCovariance* warm_start) {
  check_cluster(cluster);
  opts.validate();
  const std::size_t n_tx = static_cast<std::size_t>(cluster.front().cols());
  PgdResult out;
  TransmitCovariance q = warm_start ? project_feasible(warm_start->matrix(), rho, n_rx)
                                    : project_feasible(isotropic(n_tx, rho), rho, n_rx);
  double f = mean_rate(cluster, q.matrix(), noise_var);
  out.objective.push_back(f);
  double step = opts.step;
  constexpr int kMaxHalvings = 60;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const CMatrix g = mean_rate_gradient(cluster, q.matrix(), noise_var);
    double t = step;
    bool accepted = false;
    TransmitCovariance next;
    double f_next = f;
    for (int h = 0; h < kMaxHalvings; ++h) {
      next = project_feasible(q.matrix() + t * g, rho, n_rx);
      f_next = mean_rate(cluster, next.matrix(), noise_var);
      if (f_next > f) {
        accepted = true;
        break;
      }
      t *= opts.backtrack;
    }
    ++out.iterations;
    if (!accepted) break;
    const double gain = f_next - f;
    q = std::move(next);
    f = f_next;
    out.objective.push_back(f);
    step = std::min(opts.step, t / opts.backtrack);
    if (gain <= opts.rel_tol * std::max(std::abs(f), 1e-300)) break;
  }
  out.q = std::move(q);
  return out;
}

TransmitCovariance lau_update(std::span<const CMatrix> cluster, double rho, double noise_var,
                              std::size_t n_rx) {
  check_cluster(cluster);
  if (!(noise_var > 0.0)) throw std::invalid_argument("lau_update: noise_var must be > 0");
  const Eigen::Index n_tx = cluster.front().cols();
  CMatrix s = CMatrix::Zero(n_tx, n_tx);
  for (const auto& h : cluster) s.noalias() += h.adjoint() * h;
  s /= static_cast<double>(cluster.size());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(s));
  const Eigen::Index streams = static_cast<Eigen::Index>(std::min<std::size_t>(n_rx, n_tx));
  std::vector<double> gains(static_cast<std::size_t>(streams));
  for (Eigen::Index i = 0; i < streams; ++i) {
    gains[static_cast<std::size_t>(i)] = std::max(0.0, eig.eigenvalues()(n_tx - 1 - i)) / noise_var;
  }
  const auto p = waterfill_powers(gains, rho);
  CMatrix q = CMatrix::Zero(n_tx, n_tx);
  for (Eigen::Index i = 0; i < streams; ++i) {
    if (p[static_cast<std::size_t>(i)] <= 0.0) continue;
    const CVector v = eig.eigenvectors().col(n_tx - 1 - i);
    q.noalias() += p[static_cast<std::size_t>(i)] * (v * v.adjoint());
  }
  return TransmitCovariance(q);
}

std::uint32_t bits_for_size(std::size_t k) {
  if (k == 0 || (k & (k - 1)) != 0) throw std::invalid_argument("codebook size must be a power of two");
  std::uint32_t b = 0;
  while ((std::size_t{1} << b) < k) ++b;
  return b;
}

LloydResult lloyd_fit(const ChannelDataset& data, std::size_t k, double rho, double noise_var,
                      std::size_t n_rx, UpdateRule update, const LloydOptions& opts,
                      std::uint64_t seed) {
  if (k < 1 || k > data.size()) throw std::invalid_argument("lloyd_fit: need 1 <= K <= |data|");
  if (opts.max_outer < 1) throw std::invalid_argument("lloyd_fit: max_outer must be >= 1");
  const std::uint32_t bits = bits_for_size(k);
  const std::vector<CMatrix> hs = channels_of(data);
  const std::size_t m = hs.size();
  const std::size_t n_tx = static_cast<std::size_t>(hs.front().cols());

  // Random partition with every cluster non-empty.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[order[i]] = i % k;

  const TransmitCovariance fallback = project_feasible(isotropic(n_tx, rho), rho, n_rx);
  std::vector<TransmitCovariance> entries(k, fallback);
  LloydResult out;
  for (std::size_t it = 0; it < opts.max_outer; ++it) {
    const auto clusters = clusters_from(hs, labels, k);
    for (std::size_t j = 0; j < k; ++j) {
      if (clusters[j].empty()) {
        entries[j] = fallback;
        continue;
      }
      entries[j] = update_entry(clusters[j], rho, noise_var, n_rx, update, opts.pgd, &entries[j]);
    }
    std::vector<double> best(m);
    std::vector<std::size_t> served(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      RVector rates(static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < k; ++j) {
        rates(static_cast<Eigen::Index>(j)) = spectral_efficiency(hs[i], entries[j], noise_var);
      }
      labels[i] = argmax_first(rates);
      best[i] = rates(static_cast<Eigen::Index>(labels[i]));
      ++served[labels[i]];
    }
    const double objective = std::accumulate(best.begin(), best.end(), 0.0) / static_cast<double>(m);
    out.objective.push_back(objective);
    out.iterations = it + 1;

    if (out.objective.size() >= 2) {
      const double prev = out.objective[out.objective.size() - 2];
      if (objective - prev < opts.rel_tol * std::abs(prev)) break;
    }
    if (it + 1 == opts.max_outer) break;

    // Empty clusters take the globally worst-served samples.
    std::vector<std::size_t> by_rate(m);
    std::iota(by_rate.begin(), by_rate.end(), 0);
    std::stable_sort(by_rate.begin(), by_rate.end(), [&](auto a, auto b) { return best[a] < best[b]; });
    std::size_t next_worst = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (served[j] != 0) continue;
      while (next_worst < m && served[labels[by_rate[next_worst]]] <= 1) ++next_worst;
      if (next_worst == m) break;
      const std::size_t i = by_rate[next_worst++];
      --served[labels[i]];
      labels[i] = j;
      ++served[j];
    }
  }
  out.codebook = Codebook{std::move(entries), bits, rho, noise_var};
  out.assignment = std::move(labels);
  return out;
}

std::vector<std::size_t> gmm_partition(const GmmModel& model, const ChannelDataset& data) {
  std::vector<std::size_t> labels;
  labels.reserve(data.size());
  for (const auto& s : data.samples) labels.push_back(argmax_first(model.log_scores(vec(s.h))));
  return labels;
}

GmmCodebookResult gmm_codebook(const GmmModel& model, const ChannelDataset& data, double rho,
                               double noise_var, std::size_t n_rx, UpdateRule update,
                               const PgdOptions& opts) {
  if (data.empty()) throw std::invalid_argument("gmm_codebook: empty dataset");
  if (model.dim() != data.rows() * data.cols()) {
    throw std::invalid_argument("gmm_codebook: model dimension does not match the channels");
  }
  const std::size_t k = model.size();
  const std::uint32_t bits = bits_for_size(k);
  const std::vector<CMatrix> hs = channels_of(data);
  const std::size_t n_tx = static_cast<std::size_t>(hs.front().cols());
  GmmCodebookResult out;
  out.assignment = gmm_partition(model, data);
  const auto clusters = clusters_from(hs, out.assignment, k);
  const TransmitCovariance fallback = project_feasible(isotropic(n_tx, rho), rho, n_rx);
  std::vector<TransmitCovariance> entries;
  for (std::size_t j = 0; j < k; ++j) {
    out.cluster_sizes.push_back(clusters[j].size());
    entries.push_back(clusters[j].empty()
                          ? fallback
                          : update_entry(clusters[j], rho, noise_var, n_rx, update, opts, nullptr));
  }
  out.codebook = Codebook{std::move(entries), bits, rho, noise_var};
  return out;
}

// Layout: magic[8] u32 version u32 B u32 N_tx f64 rho f64 noise_var, then
// 2^B entries of N_tx x N_tx complex.
void write_codebook(const std::filesystem::path& path, const Codebook& cb) {
  if (cb.size() != (std::size_t{1} << cb.bits)) throw std::invalid_argument("codebook size != 2^B");
  BinaryWriter w(path);
  w.magic(std::string_view(kCodebookMagic, 8));
  w.u32(kCodebookVersion);
  w.u32(cb.bits);
  w.u32(static_cast<std::uint32_t>(cb.n_tx()));
  w.f64(cb.rho);
  w.f64(cb.noise_var);
  for (const auto& e : cb.entries) w.complex_matrix(e.matrix());
  w.close();
}

Codebook read_codebook(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(std::string_view(kCodebookMagic, 8));
  if (r.u32() != kCodebookVersion) throw FormatError("unsupported codebook version");
  Codebook cb;
  cb.bits = r.u32();
  if (cb.bits > 30) throw FormatError("implausible codebook size");
  const std::uint32_t n_tx = r.u32();
  cb.rho = r.f64();
  cb.noise_var = r.f64();
  for (std::size_t i = 0; i < (std::size_t{1} << cb.bits); ++i) {
    cb.entries.emplace_back(r.complex_matrix(n_tx, n_tx));
  }
  r.expect_end();
  return cb;
}

}  // namespace gmmfb
