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

// Randomized invariants that cut across modules.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gmmfb/codebook.hpp"
#include "gmmfb/estimation.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/scenario.hpp"
#include "oracles.hpp"

using namespace gmmfb;

namespace {

ScenarioConfig small_scenario(std::uint64_t seed, std::size_t m) {
  ScenarioConfig c;
  c.n_tx_v = 2;
  c.n_tx_h = 2;
  c.n_rx = 2;
  c.n_paths = 4;
  c.angle_spread = 0.2;
  c.n_samples = m;
  c.seed = seed;
  return c;
}

ChannelDataset small_dl(std::uint64_t seed, std::size_t m) {
  PairedDatasets p = generate_paired_dataset(small_scenario(seed, m));
  return std::move(p.dl);
}

GmmModel random_model(std::size_t k, Eigen::Index n, std::mt19937_64& rng) {
  std::vector<double> w(k);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (auto& x : w) x = u(rng);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  std::vector<ComplexGaussian> comps;
  for (std::size_t j = 0; j < k; ++j) comps.emplace_back(oracle::random_vector(n, rng), oracle::random_hpd(n, rng));
  return GmmModel(std::move(w), std::move(comps));
}

CVector draw_from(const GmmModel& m, std::mt19937_64& rng, std::size_t* component = nullptr) {
  std::discrete_distribution<std::size_t> pick(m.weights().begin(), m.weights().end());
  const std::size_t k = pick(rng);
  if (component) *component = k;
  const CMatrix l = Eigen::LLT<CMatrix>(m.component(k).cov()).matrixL();
  return m.component(k).mean() + l * oracle::random_vector(static_cast<Eigen::Index>(m.dim()), rng);
}

}  // namespace

TEST_CASE("EM log-likelihood never decreases across a 20-seed suite") {
  const ChannelDataset data = small_dl(5, 1500);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FitOptions opts;
    opts.seed = seed;
    opts.max_iter = 40;
    opts.rel_tol = 1e-9;
    const FitResult r = fit_em(data, 4, opts);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
      const double prev = r.log_likelihood[i - 1];
      CHECK(r.log_likelihood[i] >= prev - 1e-8 * std::abs(prev));
    }
  }
}

TEST_CASE("fitted covariances are Hermitian positive definite") {
  const ChannelDataset data = small_dl(6, 800);
  FitOptions opts;
  opts.seed = 3;
  opts.max_iter = 30;
  const FitResult full = fit_em(data, 4, opts);
  const KroneckerFitResult kr = fit_kronecker(data, 2, 2, opts);
  for (const GmmModel* m : {&full.model, &kr.model}) {
    for (const auto& c : m->components()) {
      CHECK(hermitian_defect(c.cov()) <= 1e-12 * c.cov().norm());
      CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(c.cov()).eigenvalues().minCoeff() >= 0.0);
    }
    CHECK(std::abs(std::accumulate(m->weights().begin(), m->weights().end(), 0.0) - 1.0) <= 1e-12);
  }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const CMatrix ref = oracle::kron(kr.model.factors()->tx[i], kr.model.factors()->rx[j]);
      CHECK((kr.model.component(i * 2 + j).cov() - ref).norm() <= 1e-12 * ref.norm());
    }
}

TEST_CASE("responsibilities are on the simplex") {
  std::mt19937_64 rng(91);
  for (int t = 0; t < 20; ++t) {
    const GmmModel m = random_model(1 + t % 6, 3, rng);
    const CVector h = (1.0 + t) * oracle::random_vector(3, rng);
    const RVector r = responsibilities_h(m, h);
    CHECK(std::abs(r.sum() - 1.0) <= 1e-12);
    CHECK(r.minCoeff() >= 0.0);
    const ObservationModel om = ObservationModel(build_pilot_matrix(3, 1, 2, 1.0), 1, 0.2).bind(m);
    const RVector ry = responsibilities_y(m, om, oracle::random_vector(2, rng) * (1.0 + t));
    CHECK(std::abs(ry.sum() - 1.0) <= 1e-12);
    CHECK(ry.minCoeff() >= 0.0);
  }
}

TEST_CASE("cached densities and filters equal from-scratch evaluation") {
  std::mt19937_64 rng(92);
  const GmmModel m = random_model(3, 8, rng);
  const ObservationModel om = ObservationModel(build_pilot_matrix(2, 2, 3, 1.0), 2, 0.25).bind(m);
  const CMatrix a = om.operator_matrix();
  for (int t = 0; t < 10; ++t) {
    const CVector h = oracle::random_vector(8, rng);
    for (const auto& g : m.components()) {
      CHECK(g.log_density(h) == doctest::Approx(oracle::log_density(h, g.mean(), g.cov())).epsilon(1e-9));
    }
    const CVector y = oracle::random_vector(6, rng);
    const RVector r = responsibilities_y(m, om, y);
    CVector scratch = CVector::Zero(8);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& g = m.component(k);
      scratch += r(static_cast<Eigen::Index>(k)) * oracle::lmmse(g.cov(), g.mean(), a, 0.25, y);
    }
    CHECK((estimate_gmm(m, om, y) - scratch).norm() <= 1e-9 * std::max(1.0, scratch.norm()));
  }
}

TEST_CASE("pilot norms and operator vectorization on random probes") {
  std::mt19937_64 rng(93);
  for (std::size_t n_p = 1; n_p <= 8; ++n_p) {
    const PilotMatrix p = build_pilot_matrix(4, 2, n_p, 0.5 + n_p);
    for (Eigen::Index j = 0; j < p.p.cols(); ++j) CHECK(std::abs(p.p.col(j).squaredNorm() - p.rho) <= 1e-12 * p.rho);
    const ObservationModel om(p, 3, 0.0);
    const CMatrix h = oracle::random_matrix(3, 8, rng);
    CHECK((om.operator_matrix() * vec(h) - vec(h * p.p)).norm() <= 1e-10);
  }
}

TEST_CASE("observation and channel selections agree in the noiseless full-pilot limit") {
  std::mt19937_64 rng(94);
  const GmmModel m = random_model(8, 8, rng);
  const ObservationModel om = ObservationModel(build_pilot_matrix(2, 2, 4, 1.0), 2, 1e-12).bind(m);
  const int draws = 1000;
  int agree = 0;
  for (int t = 0; t < draws; ++t) {
    const CVector h = draw_from(m, rng);
    const CVector y = om.operator_matrix() * h;
    agree += select_from_observation(m, om, y).index == select_from_channel(m, h).index ? 1 : 0;
  }
  CHECK(agree >= 0.99 * draws);
}

TEST_CASE("argmax selections ignore a common shift of the log scores") {
  std::mt19937_64 rng(95);
  for (int t = 0; t < 20; ++t) {
    const GmmModel m = random_model(6, 4, rng);
    const CVector h = oracle::random_vector(4, rng) * 3.0;
    const RVector s = m.log_scores(h);
    const double c = std::uniform_real_distribution<double>(-30.0, 30.0)(rng);
    CHECK(select_index(RVector(s.array() + c)) == select_from_channel(m, h).index);
  }
}

TEST_CASE("every emitted transmit covariance is feasible") {
  std::mt19937_64 rng(96);
  const ChannelDataset data = small_dl(7, 300);
  const double s2 = 0.3;
  std::vector<TransmitCovariance> all;
  for (const auto& s : data.samples) {
    if (all.size() > 60) break;
    all.push_back(waterfill_optimal(s.h, 1.0, s2).q);
    all.push_back(baseline_uniform_eigenspace(s.h, 1.0, 2));
    all.push_back(project_feasible(oracle::random_hermitian(4, rng), 1.0, 2));
  }
  LloydOptions lo;
  lo.max_outer = 4;
  for (UpdateRule rule : {UpdateRule::kPgd, UpdateRule::kLau}) {
    const LloydResult l = lloyd_fit(data, 4, 1.0, s2, 2, rule, lo, 8);
    all.insert(all.end(), l.codebook.entries.begin(), l.codebook.entries.end());
  }
  for (const auto& q : all) CHECK(check_feasible(q, 1.0, 2).feasible);
}

TEST_CASE("the nSE never exceeds one") {
  const ChannelDataset data = small_dl(8, 200);
  const auto [train, eval] = split_dataset(data, 150);
  LloydOptions lo;
  lo.max_outer = 4;
  const Codebook cb = lloyd_fit(train, 4, 1.0, 0.5, 2, UpdateRule::kPgd, lo, 1).codebook;
  EvaluationContext ctx;
  ctx.codebooks["lloyd-pgd"] = &cb;
  ctx.noise_var = 0.5;
  std::vector<Strategy> st;
  for (const char* l : {"optimal", "uni_pow_cov", "uni_pow_eigsp", "lloyd_pgd_h"}) st.push_back(parse_strategy(l));
  for (const auto& r : evaluate_strategies(eval, ctx, st, 3)) {
    CHECK(r.nse <= 1.0 + 1e-9);
    CHECK(r.nse >= 0.0);
  }
}

TEST_CASE("GMM codebook entries follow a permutation of the components") {
  const ChannelDataset data = small_dl(9, 400);
  FitOptions fo;
  fo.seed = 2;
  fo.max_iter = 15;
  const GmmModel m = fit_em(data, 4, fo).model;
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> w;
  std::vector<ComplexGaussian> comps;
  for (std::size_t k : perm) {
    w.push_back(m.weights()[k]);
    comps.push_back(m.component(k));
  }
  const GmmModel pm(std::move(w), std::move(comps));
  for (UpdateRule rule : {UpdateRule::kPgd, UpdateRule::kLau}) {
    const GmmCodebookResult a = gmm_codebook(m, data, 1.0, 0.4, 2, rule, PgdOptions{});
    const GmmCodebookResult b = gmm_codebook(pm, data, 1.0, 0.4, 2, rule, PgdOptions{});
    for (std::size_t i = 0; i < perm.size(); ++i) {
      CHECK(b.cluster_sizes[i] == a.cluster_sizes[perm[i]]);
      CHECK((b.codebook.entries[i].matrix() - a.codebook.entries[perm[i]].matrix()).norm() <= 1e-12);
    }
  }
}

TEST_CASE("exhaustive selection dominates any fixed index") {
  const ChannelDataset data = small_dl(10, 200);
  std::mt19937_64 rng(97);
  Codebook cb;
  for (int k = 0; k < 8; ++k) cb.entries.push_back(project_feasible(oracle::random_hermitian(4, rng), 1.0, 2));
  double chosen = 0.0;
  std::vector<double> fixed(8, 0.0);
  for (const auto& s : data.samples) {
    chosen += spectral_efficiency(s.h, cb.entries[select_exhaustive(cb, s.h, 0.3).index], 0.3);
    for (std::size_t k = 0; k < 8; ++k) fixed[k] += spectral_efficiency(s.h, cb.entries[k], 0.3);
  }
  for (double f : fixed) CHECK(chosen >= f - 1e-12);
}

TEST_CASE("PGD objective sequences are nondecreasing") {
  const ChannelDataset data = small_dl(11, 120);
  std::vector<CMatrix> hs;
  for (const auto& s : data.samples) hs.push_back(s.h);
  for (double s2 : {0.03, 0.3, 3.0}) {
    const PgdResult r = pgd_sum_rate(hs, 1.0, s2, 2, PgdOptions{});
    for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] >= r.objective[i - 1] - 1e-9);
    CHECK(check_feasible(r.q, 1.0, 2).feasible);
  }
}
