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

// Micro benchmarks for the online and offline hot paths at desk scale:
// N_tx = 16, N_rx = 4, K = 16.

#include <random>

#include <benchmark/benchmark.h>

#include "gmmfb/codebook.hpp"
#include "gmmfb/estimation.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/scenario.hpp"

namespace {

using namespace gmmfb;

ScenarioConfig desk_scenario(std::size_t m) {
  ScenarioConfig c;
  c.n_samples = m;
  c.angle_spread = 0.2;
  return c;
}

const ChannelDataset& desk_train() {
  static const ChannelDataset ds = generate_paired_dataset(desk_scenario(2000)).dl;
  return ds;
}

const GmmModel& desk_model() {
  static const GmmModel m = [] {
    FitOptions o;
    o.max_iter = 20;
    o.seed = 1;
    return fit_kronecker(desk_train(), 16, 1, o).model;
  }();
  return m;
}

void BM_ResponsibilitiesH(benchmark::State& state) {
  const GmmModel& m = desk_model();
  const CVector h = vec(desk_train().samples[0].h);
  for (auto _ : state) benchmark::DoNotOptimize(responsibilities_h(m, h));
}
BENCHMARK(BM_ResponsibilitiesH);

void BM_SelectFromObservation(benchmark::State& state) {
  const GmmModel& m = desk_model();
  const ObservationModel om =
      ObservationModel(build_pilot_matrix(4, 4, static_cast<std::size_t>(state.range(0)), 1.0), 4, 1.0).bind(m);
  const CVector y = om.observe(desk_train().samples[0].h, 1);
  for (auto _ : state) benchmark::DoNotOptimize(select_from_observation(m, om, y));
}
BENCHMARK(BM_SelectFromObservation)->Arg(2)->Arg(4)->Arg(16);

void BM_EstimateGmm(benchmark::State& state) {
  const GmmModel& m = desk_model();
  const ObservationModel om =
      ObservationModel(build_pilot_matrix(4, 4, static_cast<std::size_t>(state.range(0)), 1.0), 4, 1.0).bind(m);
  const CVector y = om.observe(desk_train().samples[0].h, 1);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_gmm(m, om, y));
}
BENCHMARK(BM_EstimateGmm)->Arg(4)->Arg(16);

void BM_BindObservationModel(benchmark::State& state) {
  const GmmModel& m = desk_model();
  const ObservationModel om(build_pilot_matrix(4, 4, 4, 1.0), 4, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(om.bind(m));
}
BENCHMARK(BM_BindObservationModel)->Unit(benchmark::kMillisecond);

void BM_PgdCluster(benchmark::State& state) {
  std::vector<CMatrix> cluster;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) cluster.push_back(desk_train().samples[i].h);
  for (auto _ : state) benchmark::DoNotOptimize(pgd_sum_rate(cluster, 1.0, 1.0, 4, PgdOptions{}));
}
BENCHMARK(BM_PgdCluster)->Arg(50)->Arg(250)->Unit(benchmark::kMillisecond);

void BM_SelectExhaustive(benchmark::State& state) {
  Codebook cb;
  for (int k = 0; k < 16; ++k) cb.entries.push_back(waterfill_optimal(desk_train().samples[k].h, 1.0, 1.0).q);
  const CMatrix& h = desk_train().samples[100].h;
  for (auto _ : state) benchmark::DoNotOptimize(select_exhaustive(cb, h, 1.0));
}
BENCHMARK(BM_SelectExhaustive);

void BM_EmIteration(benchmark::State& state) {
  const CMatrix x = vectorize(desk_train());
  FitOptions o;
  o.max_iter = 1;
  o.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(fit_em(x, 16, o));
}
BENCHMARK(BM_EmIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
