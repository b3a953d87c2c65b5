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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gmmfb/binary_io.hpp"
#include "gmmfb/scenario.hpp"
#include "oracles.hpp"

using namespace gmmfb;

namespace {

ScenarioConfig small_config(std::size_t n_samples, std::size_t paths = 4) {
  ScenarioConfig c;
  c.n_tx_v = 2;
  c.n_tx_h = 3;
  c.n_rx = 2;
  c.n_paths = paths;
  c.n_samples = n_samples;
  c.seed = 42;
  return c;
}

ChannelDataset scalar_dataset(std::size_t n) {
  ChannelDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    ds.samples.push_back({CMatrix::Constant(1, 1, cdouble(static_cast<double>(i), 0.0)), i});
  }
  return ds;
}

bool identical(const ChannelDataset& a, const ChannelDataset& b) {
  if (a.size() != b.size() || a.orientation != b.orientation || a.scale != b.scale) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.samples[i].link_id != b.samples[i].link_id || a.samples[i].h != b.samples[i].h) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("steering_ula examples") {
  const CVector a = steering_ula(0.0, 4);
  CHECK((a - CVector::Ones(4)).norm() == 0.0);
  const CVector b = steering_ula(kPi / 2.0, 2);
  CHECK(std::abs(b(0) - cdouble(1.0)) == 0.0);
  CHECK(std::abs(b(1) - cdouble(-1.0)) < 1e-15);
  const CVector c = steering_ula(0.3, 8);
  for (int m = 0; m < 8; ++m) {
    const cdouble ref = std::exp(cdouble(0.0, kPi * m * std::sin(0.3)));
    CHECK(std::abs(c(m) - ref) < 1e-14);
  }
  CHECK_THROWS_AS(steering_ula(0.1, 0), std::invalid_argument);
}

TEST_CASE("steering_ura examples") {
  CHECK((steering_ura(0.0, 0.0, 2, 2) - CVector::Ones(4)).norm() == 0.0);
  const CVector deg = steering_ura(0.7, -0.2, 1, 5);
  CHECK((deg - steering_ula(-0.2, 5)).norm() < 1e-15);

  const double az = 0.5;
  const double el = 0.2;
  const CVector a = steering_ura(az, el, 4, 2);
  CMatrix ah(4, 1);
  CMatrix av(2, 1);
  for (int m = 0; m < 4; ++m) ah(m, 0) = std::exp(cdouble(0.0, kPi * m * std::sin(az) * std::cos(el)));
  for (int m = 0; m < 2; ++m) av(m, 0) = std::exp(cdouble(0.0, kPi * m * std::sin(el)));
  const CMatrix ref = oracle::kron(ah, av);
  CHECK((a - ref.col(0)).norm() < 1e-14);
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(std::abs(a(i)) == doctest::Approx(1.0));
}

TEST_CASE("single-path channels have rank one") {
  ScenarioConfig c = small_config(50, 1);
  const auto pd = generate_paired_dataset(c);
  for (const auto& s : pd.dl.samples) CHECK(oracle::numerical_rank(s.h) == 1);
  for (const auto& s : pd.ul.samples) CHECK(oracle::numerical_rank(s.h) == 1);
}

TEST_CASE("rank never exceeds min(L, N_rx, N_tx)") {
  ScenarioConfig c = small_config(60, 2);
  c.n_rx = 3;
  for (const auto& s : generate_paired_dataset(c).dl.samples) CHECK(oracle::numerical_rank(s.h) <= 2);
}

TEST_CASE("generation is deterministic and seed dependent") {
  const ScenarioConfig c = small_config(40);
  const auto a = generate_paired_dataset(c);
  const auto b = generate_paired_dataset(c);
  CHECK(identical(a.ul, b.ul));
  CHECK(identical(a.dl, b.dl));
  ScenarioConfig other = c;
  other.seed = 43;
  CHECK_FALSE(identical(a.dl, generate_paired_dataset(other).dl));
}

TEST_CASE("shapes and orientation of the paired datasets") {
  const auto pd = generate_paired_dataset(small_config(10));
  CHECK(pd.ul.size() == 10);
  CHECK(pd.dl.size() == 10);
  CHECK(pd.ul.orientation == Orientation::kUplink);
  CHECK(pd.dl.orientation == Orientation::kDownlink);
  CHECK(pd.ul.rows() == 6);
  CHECK(pd.ul.cols() == 2);
  CHECK(pd.dl.rows() == 2);
  CHECK(pd.dl.cols() == 6);
  for (std::size_t i = 0; i < 10; ++i) CHECK(pd.dl.samples[i].link_id == i);
}

TEST_CASE("normalized mean squared norm equals N") {
  ScenarioConfig c;
  c.n_tx_h = 4;
  c.n_tx_v = 2;
  c.n_rx = 2;
  c.n_paths = 10;
  c.n_samples = 5000;
  c.seed = 5;
  const auto pd = generate_paired_dataset(c);
  for (const ChannelDataset* ds : {&pd.ul, &pd.dl}) {
    double acc = 0.0;
    for (const auto& s : ds->samples) {
      for (Eigen::Index j = 0; j < s.h.cols(); ++j)
        for (Eigen::Index i = 0; i < s.h.rows(); ++i) acc += std::norm(s.h(i, j));
    }
    const double mean = acc / static_cast<double>(ds->size());
    CHECK(std::abs(mean - 16.0) <= 1e-9 * 16.0);
    CHECK(ds->normalized);
  }
}

TEST_CASE("UL and DL share geometry and differ in gains and carrier") {
  const ScenarioConfig c = small_config(20);
  const auto pd = generate_paired_dataset(c);
  for (std::uint64_t link : {0u, 7u, 19u}) {
    const LinkGeometry g = draw_link_geometry(c, link);
    const auto gul = draw_path_gains(c, g, link, Orientation::kUplink);
    const auto gdl = draw_path_gains(c, g, link, Orientation::kDownlink);
    // Rebuild each sample from first principles with the shared geometry.
    CMatrix ul = CMatrix::Zero(2, 6);
    CMatrix dl = CMatrix::Zero(2, 6);
    for (std::size_t p = 0; p < g.delay.size(); ++p) {
      const CVector arx = steering_ula(g.rx_angle[p], 2);
      const CVector atx = steering_ura(g.tx_azimuth[p], g.tx_elevation[p], 3, 2);
      ul += gul[p] * std::exp(cdouble(0.0, -2.0 * kPi * c.f_ul * g.delay[p])) * arx * atx.adjoint();
      dl += gdl[p] * std::exp(cdouble(0.0, -2.0 * kPi * c.f_dl * g.delay[p])) * arx * atx.adjoint();
    }
    const CMatrix& ul_s = pd.ul.samples[link].h;
    const CMatrix& dl_s = pd.dl.samples[link].h;
    CHECK((ul_s - pd.ul.scale * CMatrix(ul.transpose())).norm() <= 1e-6 * ul_s.norm());
    CHECK((dl_s - pd.dl.scale * dl).norm() <= 1e-6 * dl_s.norm());
    CHECK(gul != gdl);
  }
  const LinkGeometry g = draw_link_geometry(c, 3);
  CHECK(g.delay.front() == 0.0);
  CHECK(std::is_sorted(g.delay.begin(), g.delay.end()));
  double total = 0.0;
  for (double p : g.power) total += p;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("invalid scenario configurations are rejected") {
  ScenarioConfig c = small_config(5);
  c.n_tx_v = 0;
  CHECK_THROWS_AS(generate_paired_dataset(c), std::invalid_argument);
  c = small_config(5);
  c.n_rx = 0;
  CHECK_THROWS_AS(generate_paired_dataset(c), std::invalid_argument);
  c = small_config(5);
  c.n_paths = 0;
  CHECK_THROWS_AS(generate_paired_dataset(c), std::invalid_argument);
  c = small_config(5);
  c.f_dl = c.f_ul;
  CHECK_THROWS_AS(generate_paired_dataset(c), std::invalid_argument);
}

TEST_CASE("emulate_downlink transposes without conjugation") {
  ChannelDataset one;
  one.orientation = Orientation::kUplink;
  one.samples.push_back({CMatrix::Constant(1, 1, cdouble(0.3, -0.4)), 9});
  const auto d = emulate_downlink(one);
  CHECK(d.orientation == Orientation::kDownlink);
  CHECK(d.samples[0].h(0, 0) == cdouble(0.3, -0.4));
  CHECK(d.samples[0].link_id == 9);

  std::mt19937_64 rng(1);
  ChannelDataset ds;
  ds.orientation = Orientation::kUplink;
  ds.samples.push_back({oracle::random_matrix(2, 3, rng), 0});
  const auto t = emulate_downlink(ds);
  REQUIRE(t.samples[0].h.rows() == 3);
  REQUIRE(t.samples[0].h.cols() == 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(t.samples[0].h(j, i) == ds.samples[0].h(i, j));
  CHECK(identical(emulate_downlink(t), ds));
}

TEST_CASE("split_dataset is an order-preserving partition") {
  const ChannelDataset ds = scalar_dataset(30000);
  const auto [train, eval] = split_dataset(ds, 20000);
  CHECK(train.size() == 20000);
  CHECK(eval.size() == 10000);
  CHECK(train.samples.back().link_id == 19999);
  CHECK(eval.samples.front().link_id == 20000);

  const auto [t0, e0] = split_dataset(ds, 0);
  CHECK(t0.empty());
  CHECK(e0.size() == ds.size());
  const auto [t1, e1] = split_dataset(ds, ds.size());
  CHECK(t1.size() == ds.size());
  CHECK(e1.empty());
  CHECK_THROWS_AS(split_dataset(ds, ds.size() + 1), std::invalid_argument);
}

TEST_CASE("dataset files round-trip bit-exactly and reject corruption") {
  const auto pd = generate_paired_dataset(small_config(12));
  const auto dir = std::filesystem::temp_directory_path() / "gmmfb_test_scenario";
  std::filesystem::create_directories(dir);
  const auto path = dir / "dl.bin";
  write_dataset(path, pd.dl);
  const ChannelDataset back = read_dataset(path);
  CHECK(identical(back, pd.dl));
  CHECK(back.normalized);
  // 8 magic + 4 x u32 + u64 + u32 + f64 header, then (8 + 16 N) per sample.
  CHECK(std::filesystem::file_size(path) == 8 + 16 + 8 + 4 + 8 + 12 * (8 + 16 * 12));

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
  CHECK_THROWS_AS(read_dataset(path), FormatError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTADATASETFILE.";
  }
  CHECK_THROWS_AS(read_dataset(path), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("normalize rejects empty and zero-power datasets") {
  ChannelDataset empty;
  CHECK_THROWS_AS(normalize(empty), std::invalid_argument);
  ChannelDataset zero;
  zero.samples.push_back({CMatrix::Zero(2, 2), 0});
  CHECK_THROWS_AS(normalize(zero), std::domain_error);
}
