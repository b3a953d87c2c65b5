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

#ifndef GMMFB_SCENARIO_HPP_
#define GMMFB_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "gmmfb/linalg.hpp"

namespace gmmfb {

/// Parameters of the geometric multipath surrogate. The BS carries an
/// n_tx_v x n_tx_h URA, the MT an n_rx-element ULA.
struct ScenarioConfig {
  std::size_t n_tx_v = 4;
  std::size_t n_tx_h = 4;
  std::size_t n_rx = 4;
  double f_ul = 2.53e9;
  double f_dl = 2.73e9;
  std::size_t n_paths = 10;
  double angle_spread = 0.1;   // radians, rms of the per-path Laplacian offsets
  double delay_spread = 1e-7;  // seconds, mean of the exponential delay profile
  std::size_t n_samples = 5000;
  std::uint64_t seed = 1;

  std::size_t n_tx() const { return n_tx_v * n_tx_h; }
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

enum class Orientation : std::uint32_t { kUplink = 0, kDownlink = 1 };

struct ChannelSample {
  CMatrix h;  // N_rx x N_tx for downlink, N_tx x N_rx for uplink
  std::uint64_t link_id = 0;
};

struct ChannelDataset {
  std::vector<ChannelSample> samples;
  Orientation orientation = Orientation::kDownlink;
  bool normalized = false;
  double scale = 1.0;  // amplitude factor applied by normalize()

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;
};

/// Angles and delays of one link. Shared verbatim by its UL and DL channel.
struct LinkGeometry {
  std::vector<double> tx_azimuth;
  std::vector<double> tx_elevation;
  std::vector<double> rx_angle;
  std::vector<double> delay;
  std::vector<double> power;  // sums to one
};

struct PairedDatasets {
  ChannelDataset ul;
  ChannelDataset dl;
};

CVector steering_ula(double angle, std::size_t n);
CVector steering_ura(double azimuth, double elevation, std::size_t n_h, std::size_t n_v);

/// Per-link draws. Exposed so callers can reproduce individual samples.
LinkGeometry draw_link_geometry(const ScenarioConfig& config, std::uint64_t link_id);
std::vector<cdouble> draw_path_gains(const ScenarioConfig& config, const LinkGeometry& geometry,
                                     std::uint64_t link_id, Orientation orientation);

/// Downlink-oriented (N_rx x N_tx) sum over paths at the given carrier.
CMatrix synthesize_channel(const ScenarioConfig& config, const LinkGeometry& geometry,
                           const std::vector<cdouble>& gains, double carrier_hz);

/// Paired UL (N_tx x N_rx) and DL (N_rx x N_tx) datasets, each normalized to
/// E||h||^2 = N_tx * N_rx.
PairedDatasets generate_paired_dataset(const ScenarioConfig& config);

/// Scales all samples so that the empirical mean of ||vec(H)||^2 equals
/// rows * cols.
void normalize(ChannelDataset& ds);
double mean_squared_norm(const ChannelDataset& ds);

/// Plain transpose of every sample (no conjugation); flips the orientation.
ChannelDataset emulate_downlink(const ChannelDataset& ul);

/// Order-preserving split into the first n_train samples and the rest.
std::pair<ChannelDataset, ChannelDataset> split_dataset(const ChannelDataset& ds,
                                                        std::size_t n_train);

/// Columns are vec(H_m).
CMatrix vectorize(const ChannelDataset& ds);

void write_dataset(const std::filesystem::path& path, const ChannelDataset& ds);
ChannelDataset read_dataset(const std::filesystem::path& path);

}  // namespace gmmfb

#endif  // GMMFB_SCENARIO_HPP_
