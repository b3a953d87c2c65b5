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

#include <cmath>

#include "doctest.h"
#include "gmmfb/estimation.hpp"
#include "gmmfb/gmm.hpp"
#include "oracles.hpp"

using namespace gmmfb;

namespace {

// Observation model whose operator is the identity: P = I_{N_tx}, rho = 1.
ObservationModel identity_model(std::size_t n_tx, std::size_t n_rx, double noise_var) {
  const auto n = static_cast<Eigen::Index>(n_tx);
  return ObservationModel(PilotMatrix::from_matrix(CMatrix::Identity(n, n), 1.0), n_rx, noise_var);
}

GmmModel random_model(std::size_t k, Eigen::Index n, std::mt19937_64& rng, bool zero_mean = false) {
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  std::vector<ComplexGaussian> comps;
  for (std::size_t j = 0; j < k; ++j) {
    CVector mu = zero_mean ? CVector(CVector::Zero(n)) : oracle::random_vector(n, rng);
    comps.emplace_back(mu, oracle::random_hpd(n, rng));
  }
  return GmmModel(std::move(w), std::move(comps));
}

CMatrix pilot_gram(const CMatrix& p) {
  CMatrix g(p.cols(), p.cols());
  for (Eigen::Index i = 0; i < p.cols(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      cdouble s = 0.0;
      for (Eigen::Index r = 0; r < p.rows(); ++r) s += std::conj(p(r, i)) * p(r, j);
      g(i, j) = s;
    }
  return g;
}

}  // namespace

TEST_CASE("pilot matrix with n_p = N_tx is unitary") {
  const PilotMatrix p = build_pilot_matrix(4, 2, 8, 1.0);
  CHECK((p.p.adjoint() * p.p - CMatrix::Identity(8, 8)).norm() <= 1e-12);
}

TEST_CASE("pilot matrix with a single column has norm rho") {
  const PilotMatrix p = build_pilot_matrix(4, 4, 1, 3.0);
  REQUIRE(p.n_pilots() == 1);
  CHECK(p.p.col(0).squaredNorm() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("pilot matrix coherences match direct DFT products") {
  const std::size_t nh = 4, nv = 2, n_tx = 8, n_p = 4;
  const double rho = 2.0;
  const PilotMatrix p = build_pilot_matrix(nh, nv, n_p, rho);
  // Column c of F_h (x) F_v evaluated entrywise: row r = a*nv + b.
  CMatrix ref(n_tx, n_p);
  for (std::size_t i = 0; i < n_p; ++i) {
    const std::size_t c = i * (n_tx / n_p);
    const std::size_t ch = c / nv, cv = c % nv;
    for (std::size_t a = 0; a < nh; ++a)
      for (std::size_t b = 0; b < nv; ++b) {
        const double ang = -2.0 * kPi * (static_cast<double>(a * ch) / nh + static_cast<double>(b * cv) / nv);
        ref(static_cast<Eigen::Index>(a * nv + b), static_cast<Eigen::Index>(i)) =
            std::polar(std::sqrt(rho / n_tx), ang);
      }
  }
  CHECK((p.p - ref).norm() <= 1e-12);
  const CMatrix g = pilot_gram(p.p);
  for (Eigen::Index i = 0; i < g.rows(); ++i) CHECK(g(i, i).real() == doctest::Approx(rho).epsilon(1e-12));
  CHECK((g - p.p.adjoint() * p.p).norm() <= 1e-12);
}

TEST_CASE("pilot matrix errors") {
  CHECK_THROWS_AS(build_pilot_matrix(2, 2, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_pilot_matrix(2, 2, 5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PilotMatrix::from_matrix(2.0 * CMatrix::Identity(2, 2), 1.0), std::invalid_argument);
}

TEST_CASE("observation operator has Kronecker structure") {
  std::mt19937_64 rng(41);
  const ObservationModel om(build_pilot_matrix(4, 2, 4, 1.0), 3, 0.1);
  REQUIRE(om.observation_dim() == 12);
  REQUIRE(om.channel_dim() == 24);
  CHECK((om.operator_matrix() - oracle::kron(om.pilots().p.transpose(), CMatrix::Identity(3, 3))).norm() <= 1e-12);
  for (int t = 0; t < 5; ++t) {
    const CMatrix h = oracle::random_matrix(3, 8, rng);
    const CVector hp = vec(h * om.pilots().p);
    CHECK((om.operator_matrix() * vec(h) - hp).norm() <= 1e-10);
    CHECK((om.apply(h) - hp).norm() <= 1e-10);
  }
  CHECK_THROWS_AS(om.apply(CMatrix::Zero(2, 8)), std::invalid_argument);
}

TEST_CASE("observe: noiseless, pure noise and determinism") {
  std::mt19937_64 rng(42);
  const CMatrix h = oracle::random_matrix(2, 4, rng);
  const ObservationModel quiet(build_pilot_matrix(2, 2, 3, 1.0), 2, 0.0);
  CHECK(quiet.observe(h, 5) == vec(h * quiet.pilots().p));

  const double s2 = 0.37;
  const ObservationModel noisy(build_pilot_matrix(2, 2, 4, 1.0), 2, s2);
  double power = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) power += noisy.observe(CMatrix::Zero(2, 4), static_cast<std::uint64_t>(i)).squaredNorm();
  power /= static_cast<double>(draws) * 8.0;
  CHECK(std::abs(power - s2) <= 0.05 * s2);

  CHECK(noisy.observe(h, 77) == noisy.observe(h, 77));
  CHECK(noisy.observe(h, 77) != noisy.observe(h, 78));
  const ChannelSample s{h, 9};
  CHECK(observe(noisy, s, 3) == noisy.observe(h, 3));
}

TEST_CASE("responsibilities_y examples") {
  std::mt19937_64 rng(43);
  const ObservationModel base(build_pilot_matrix(2, 2, 2, 1.0), 2, 0.5);
  const GmmModel one = random_model(1, 8, rng);
  const ObservationModel b1 = base.bind(one);
  const RVector r1 = responsibilities_y(one, b1, oracle::random_vector(4, rng));
  REQUIRE(r1.size() == 1);
  CHECK(r1(0) == 1.0);
  CHECK_THROWS_AS(responsibilities_y(one, base, oracle::random_vector(4, rng)), std::logic_error);
  CHECK_THROWS_AS(estimate_gmm(one, base, oracle::random_vector(4, rng)), std::logic_error);
}

TEST_CASE("responsibilities_y approaches responsibilities_h in the noiseless identity limit") {
  std::mt19937_64 rng(44);
  const GmmModel model = random_model(3, 4, rng);
  const ObservationModel om = identity_model(2, 2, 1e-12).bind(model);
  for (int t = 0; t < 10; ++t) {
    const std::size_t k = static_cast<std::size_t>(t % 3);
    const CMatrix l = Eigen::LLT<CMatrix>(model.component(k).cov()).matrixL();
    const CVector h = model.component(k).mean() + l * oracle::random_vector(4, rng);
    const RVector ry = responsibilities_y(model, om, h);
    const RVector rh = responsibilities_h(model, h);
    CHECK(0.5 * (ry - rh).cwiseAbs().sum() <= 1e-6);
  }
}

TEST_CASE("responsibilities_y matches the dense projected-density formula") {
  std::mt19937_64 rng(45);
  const GmmModel model = random_model(4, 8, rng);
  const ObservationModel om = ObservationModel(build_pilot_matrix(2, 2, 3, 1.0), 2, 0.3).bind(model);
  const CMatrix a = om.operator_matrix();
  for (int t = 0; t < 5; ++t) {
    const CVector y = oracle::random_vector(6, rng);
    RVector logs(4);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& g = model.component(k);
      const CMatrix cy = a * g.cov() * a.adjoint() + 0.3 * CMatrix::Identity(6, 6);
      logs(static_cast<Eigen::Index>(k)) = std::log(0.25) + oracle::log_density(y, a * g.mean(), cy);
    }
    CHECK((responsibilities_y(model, om, y) - oracle::softmax(logs)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("estimate_gmm single-component closed forms") {
  const GmmModel unit({1.0}, {ComplexGaussian(CVector::Zero(4), CMatrix::Identity(4, 4))});
  std::mt19937_64 rng(46);
  const CVector y = oracle::random_vector(4, rng);
  const ObservationModel om1 = identity_model(2, 2, 1.0).bind(unit);
  CHECK((estimate_gmm(unit, om1, y) - y / 2.0).norm() <= 1e-12);

  const GmmModel any({1.0}, {ComplexGaussian(oracle::random_vector(4, rng), oracle::random_hpd(4, rng))});
  const ObservationModel om2 = identity_model(2, 2, 1e-12).bind(any);
  CHECK((estimate_gmm(any, om2, y) - y).norm() <= 1e-4 * y.norm());
}

TEST_CASE("estimate_gmm is the responsibility-weighted sum of LMMSE outputs") {
  std::mt19937_64 rng(47);
  const GmmModel model = random_model(3, 8, rng);
  const double s2 = 0.2;
  const ObservationModel om = ObservationModel(build_pilot_matrix(2, 2, 2, 1.0), 2, s2).bind(model);
  const CMatrix a = om.operator_matrix();
  for (int t = 0; t < 5; ++t) {
    const CVector y = oracle::random_vector(4, rng);
    const RVector r = responsibilities_y(model, om, y);
    CVector ref = CVector::Zero(8);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& g = model.component(k);
      ref += r(static_cast<Eigen::Index>(k)) * oracle::lmmse(g.cov(), g.mean(), a, s2, y);
    }
    CHECK((estimate_gmm(model, om, y) - ref).norm() <= 1e-10 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("sample_covariance examples") {
  std::mt19937_64 rng(48);
  const CVector h = oracle::random_vector(5, rng);
  const CMatrix c1 = sample_covariance(CMatrix(h));
  CHECK((c1 - h * h.adjoint()).norm() <= 1e-12);
  CHECK(oracle::numerical_rank(c1) == 1);
  CHECK((sample_covariance(CMatrix(CMatrix::Identity(5, 5))) - CMatrix::Identity(5, 5) / 5.0).norm() <= 1e-15);
  const CMatrix c = sample_covariance(oracle::random_matrix(6, 4, rng));
  CHECK(hermitian_defect(c) <= 1e-14);
  CHECK(Eigen::SelfAdjointEigenSolver<CMatrix>(c).eigenvalues().minCoeff() >= -1e-12);
  CHECK_THROWS_AS(sample_covariance(CMatrix(4, 0)), std::invalid_argument);
  CHECK_THROWS_AS(sample_covariance(ChannelDataset{}), std::invalid_argument);

  ChannelDataset ds;
  for (std::uint64_t i = 0; i < 3; ++i) ds.samples.push_back({oracle::random_matrix(2, 3, rng), i});
  CHECK((sample_covariance(ds) - sample_covariance(vectorize(ds))).norm() == 0.0);
}

TEST_CASE("estimate_scov examples") {
  std::mt19937_64 rng(49);
  const CVector y = oracle::random_vector(4, rng);
  const CMatrix eye = CMatrix::Identity(4, 4);
  CHECK((estimate_scov(eye, identity_model(2, 2, 1.0), y) - y / 2.0).norm() <= 1e-12);
  CHECK((estimate_scov(eye, identity_model(2, 2, 0.0), y) - y).norm() <= 1e-12);

  const CMatrix cs = sample_covariance(oracle::random_matrix(8, 20, rng));
  const ObservationModel om(build_pilot_matrix(2, 2, 2, 1.0), 2, 0.4);
  const GmmModel single({1.0}, {ComplexGaussian(CVector::Zero(8), cs)});
  const ObservationModel bound = om.bind(single);
  const CVector y2 = oracle::random_vector(4, rng);
  CHECK((estimate_scov(cs, om, y2) - estimate_gmm(single, bound, y2)).norm() <= 1e-10);

  // Rank-one covariance, noiseless: the inner matrix is singular.
  const CVector u = oracle::random_vector(8, rng);
  CHECK_THROWS_AS(estimate_scov(u * u.adjoint(), ObservationModel(build_pilot_matrix(2, 2, 4, 1.0), 2, 0.0), y2.head(4)),
                  std::domain_error);
}

TEST_CASE("dictionary shape and normalization") {
  const Dictionary d1 = build_dictionary(2, 2, 1, {1, 1, 1});
  REQUIRE(d1.d.rows() == 4);
  REQUIRE(d1.d.cols() == 4);
  CHECK((d1.d.adjoint() * d1.d - CMatrix::Identity(4, 4)).norm() <= 1e-12);

  const Dictionary d2 = build_dictionary(2, 4, 2, {2, 3, 2});
  CHECK(d2.d.rows() == 16);
  CHECK(d2.d.cols() == 2 * 2 * 3 * 4 * 2 * 2);
  for (Eigen::Index j = 0; j < d2.d.cols(); ++j) CHECK(std::abs(d2.d.col(j).norm() - 1.0) <= 1e-12);
  CHECK_THROWS_AS(build_dictionary(2, 2, 2, {1, 0, 1}), std::invalid_argument);
}

TEST_CASE("genie OMP identifies a single atom") {
  const Dictionary dict = build_dictionary(2, 2, 2, {2, 2, 2});
  const ObservationModel om(build_pilot_matrix(2, 2, 4, 1.0), 2, 0.0);
  const CVector h = dict.d.col(37) * cdouble(1.5, -0.5);
  const CVector y = om.operator_matrix() * h;
  const OmpResult r = estimate_omp_genie(dict, om, y, h, 8);
  CHECK(r.sparsity == 1);
  CHECK((r.estimate - h).squaredNorm() <= 1e-9);
  CHECK_THROWS_AS(estimate_omp_genie(dict, om, y, h, 0), std::invalid_argument);
}

TEST_CASE("genie OMP residuals are nonincreasing") {
  std::mt19937_64 rng(50);
  const Dictionary dict = build_dictionary(2, 2, 2, {2, 2, 2});
  const ObservationModel om(build_pilot_matrix(2, 2, 3, 1.0), 2, 0.1);
  for (int t = 0; t < 10; ++t) {
    const CVector h = oracle::random_vector(8, rng);
    const CVector y = om.observe(unvec(h, 2, 4), static_cast<std::uint64_t>(t));
    const OmpResult r = estimate_omp_genie(dict, om, y, h, 100);
    REQUIRE(!r.residual_norms.empty());
    // Requests beyond the rank of A D are truncated.
    CHECK(r.residual_norms.size() <= 6);
    for (std::size_t i = 1; i < r.residual_norms.size(); ++i)
      CHECK(r.residual_norms[i] <= r.residual_norms[i - 1] * (1.0 + 1e-12));
    CHECK(r.errors.size() == r.residual_norms.size());
    const double best = *std::min_element(r.errors.begin(), r.errors.end());
    CHECK((r.estimate - h).squaredNorm() == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("genie OMP with s_max = 1 returns the best single atom fit") {
  const Dictionary dict = build_dictionary(2, 2, 2, {2, 2, 2});
  const ObservationModel om(build_pilot_matrix(2, 2, 4, 1.0), 2, 0.0);
  const CVector h = 2.0 * dict.d.col(3) + 0.5 * dict.d.col(50);
  const CVector y = om.operator_matrix() * h;
  const OmpResult r = estimate_omp_genie(dict, om, y, h, 1);
  CHECK(r.sparsity == 1);
  // Reference: atom with the largest normalized correlation, least-squares coefficient.
  const CMatrix ad = om.operator_matrix() * dict.d;
  Eigen::Index best = 0;
  double score = -1.0;
  for (Eigen::Index j = 0; j < ad.cols(); ++j) {
    const double s = std::abs(ad.col(j).dot(y)) / ad.col(j).norm();
    if (s > score + 1e-12) {
      score = s;
      best = j;
    }
  }
  const cdouble coef = ad.col(best).dot(y) / ad.col(best).squaredNorm();
  CHECK((r.estimate - coef * dict.d.col(best)).norm() <= 1e-10);
}

TEST_CASE("noiseless full-pilot estimators are nearly exact on in-model samples") {
  std::mt19937_64 rng(51);
  const GmmModel model = random_model(2, 8, rng, true);
  const ObservationModel om = ObservationModel(build_pilot_matrix(2, 2, 4, 1.0), 2, 1e-10).bind(model);
  const CMatrix cs = 0.5 * (model.component(0).cov() + model.component(1).cov());
  for (int t = 0; t < 5; ++t) {
    const CMatrix l = Eigen::LLT<CMatrix>(model.component(t % 2).cov()).matrixL();
    const CVector h = l * oracle::random_vector(8, rng);
    const CVector y = om.operator_matrix() * h;
    CHECK((estimate_gmm(model, om, y) - h).norm() <= 1e-3 * h.norm());
    CHECK((estimate_scov(cs, om, y) - h).norm() <= 1e-3 * h.norm());
  }
}
