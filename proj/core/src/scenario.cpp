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

#include "gmmfb/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gmmfb/binary_io.hpp"

namespace gmmfb {
namespace {

constexpr char kDatasetMagic[] = "GMFBDSET";
constexpr std::uint32_t kDatasetVersion = 1;

// Stream labels for derive_seed.
constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kUplinkGainStream = 2;
constexpr std::uint64_t kDownlinkGainStream = 3;

// BS sector and MT angular ranges of the per-link mean directions.
constexpr double kSectorHalfWidth = kPi / 3.0;
constexpr double kElevationMin = -0.35;
constexpr double kElevationMax = 0.05;
constexpr double kRxHalfWidth = kPi / 2.0;

// Laplacian with the given standard deviation.
double laplace(std::mt19937_64& rng, double stddev) {
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution sign(0.5);
  const double b = stddev / std::sqrt(2.0);
  const double mag = b * expo(rng);
  return sign(rng) ? mag : -mag;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_tx_v < 1 || n_tx_h < 1 || n_rx < 1) {
    throw std::invalid_argument("scenario: antenna counts must be >= 1");
  }
  if (n_paths < 1) throw std::invalid_argument("scenario: n_paths must be >= 1");
  if (f_ul == f_dl) throw std::invalid_argument("scenario: f_ul must differ from f_dl");
  if (!(f_ul > 0.0) || !(f_dl > 0.0)) {
    throw std::invalid_argument("scenario: carrier frequencies must be positive");
  }
  if (angle_spread < 0.0 || delay_spread < 0.0) {
    throw std::invalid_argument("scenario: spreads must be nonnegative");
  }
}

std::size_t ChannelDataset::rows() const {
  return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().h.rows());
}

std::size_t ChannelDataset::cols() const {
  return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().h.cols());
}

CVector steering_ula(double angle, std::size_t n) {
  if (n < 1) throw std::invalid_argument("steering_ula: n must be >= 1");
  CVector a(static_cast<Eigen::Index>(n));
  const double phase = kPi * std::sin(angle);
  for (std::size_t m = 0; m < n; ++m) {
    a(static_cast<Eigen::Index>(m)) = std::polar(1.0, phase * static_cast<double>(m));
  }
  return a;
}

CVector steering_ura(double azimuth, double elevation, std::size_t n_h, std::size_t n_v) {
  if (n_h < 1 || n_v < 1) throw std::invalid_argument("steering_ura: sizes must be >= 1");
  CVector a_h(static_cast<Eigen::Index>(n_h));
  const double phase_h = kPi * std::sin(azimuth) * std::cos(elevation);
  for (std::size_t m = 0; m < n_h; ++m) {
    a_h(static_cast<Eigen::Index>(m)) = std::polar(1.0, phase_h * static_cast<double>(m));
  }
  return kron(a_h, steering_ula(elevation, n_v));
}

LinkGeometry draw_link_geometry(const ScenarioConfig& config, std::uint64_t link_id) {
  std::mt19937_64 rng(derive_seed(config.seed, link_id, kGeometryStream));
  std::uniform_real_distribution<double> az(-kSectorHalfWidth, kSectorHalfWidth);
  std::uniform_real_distribution<double> el(kElevationMin, kElevationMax);
  std::uniform_real_distribution<double> rx(-kRxHalfWidth, kRxHalfWidth);
  const double mean_az = az(rng);
  const double mean_el = el(rng);
  const double mean_rx = rx(rng);

  const std::size_t l = config.n_paths;
  LinkGeometry g;
  g.tx_azimuth.resize(l);
  g.tx_elevation.resize(l);
  g.rx_angle.resize(l);
  g.delay.resize(l);
  g.power.resize(l);

  std::exponential_distribution<double> delay_dist(1.0);
  for (std::size_t i = 0; i < l; ++i) {
    g.tx_azimuth[i] = mean_az + laplace(rng, config.angle_spread);
    g.tx_elevation[i] = mean_el + laplace(rng, config.angle_spread);
    g.rx_angle[i] = mean_rx + laplace(rng, config.angle_spread);
    g.delay[i] = config.delay_spread * delay_dist(rng);
  }
  std::sort(g.delay.begin(), g.delay.end());
  const double t0 = g.delay.front();
  double total = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    g.delay[i] -= t0;
    g.power[i] = config.delay_spread > 0.0 ? std::exp(-g.delay[i] / config.delay_spread) : 1.0;
    total += g.power[i];
  }
  for (double& p : g.power) p /= total;
  return g;
}

std::vector<cdouble> draw_path_gains(const ScenarioConfig& config, const LinkGeometry& geometry,
                                     std::uint64_t link_id, Orientation orientation) {
  const std::uint64_t stream =
      orientation == Orientation::kUplink ? kUplinkGainStream : kDownlinkGainStream;
  std::mt19937_64 rng(derive_seed(config.seed, link_id, stream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<cdouble> gains(geometry.power.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    gains[i] = std::sqrt(geometry.power[i] / 2.0) * cdouble(re, im);
  }
  return gains;
}

CMatrix synthesize_channel(const ScenarioConfig& config, const LinkGeometry& geometry,
                           const std::vector<cdouble>& gains, double carrier_hz) {
  CMatrix h = CMatrix::Zero(static_cast<Eigen::Index>(config.n_rx),
                            static_cast<Eigen::Index>(config.n_tx()));
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const CVector a_rx = steering_ula(geometry.rx_angle[i], config.n_rx);
    const CVector a_tx = steering_ura(geometry.tx_azimuth[i], geometry.tx_elevation[i],
                                      config.n_tx_h, config.n_tx_v);
    const cdouble rot = std::polar(1.0, -2.0 * kPi * std::fmod(carrier_hz * geometry.delay[i], 1.0));
    h.noalias() += (gains[i] * rot) * (a_rx * a_tx.adjoint());
  }
  return h;
}

PairedDatasets generate_paired_dataset(const ScenarioConfig& config) {
  config.validate();
  PairedDatasets out;
  out.ul.orientation = Orientation::kUplink;
  out.dl.orientation = Orientation::kDownlink;
  out.ul.samples.reserve(config.n_samples);
  out.dl.samples.reserve(config.n_samples);
  for (std::uint64_t link = 0; link < config.n_samples; ++link) {
    const LinkGeometry g = draw_link_geometry(config, link);
    const auto ul_gains = draw_path_gains(config, g, link, Orientation::kUplink);
    const auto dl_gains = draw_path_gains(config, g, link, Orientation::kDownlink);
    out.ul.samples.push_back({synthesize_channel(config, g, ul_gains, config.f_ul).transpose(), link});
    out.dl.samples.push_back({synthesize_channel(config, g, dl_gains, config.f_dl), link});
  }
  if (config.n_samples > 0) {
    normalize(out.ul);
    normalize(out.dl);
  }
  return out;
}

double mean_squared_norm(const ChannelDataset& ds) {
  if (ds.empty()) throw std::invalid_argument("mean_squared_norm: empty dataset");
  double acc = 0.0;
  for (const auto& s : ds.samples) acc += s.h.squaredNorm();
  return acc / static_cast<double>(ds.size());
}

void normalize(ChannelDataset& ds) {
  const double target = static_cast<double>(ds.rows() * ds.cols());
  const double current = mean_squared_norm(ds);
  if (!(current > 0.0)) throw std::domain_error("normalize: dataset has zero power");
  const double factor = std::sqrt(target / current);
  for (auto& s : ds.samples) s.h *= factor;
  ds.scale *= factor;
  ds.normalized = true;
}

ChannelDataset emulate_downlink(const ChannelDataset& ul) {
  ChannelDataset out;
  out.orientation = ul.orientation == Orientation::kUplink ? Orientation::kDownlink
                                                            : Orientation::kUplink;
  out.normalized = ul.normalized;
  out.scale = ul.scale;
  out.samples.reserve(ul.size());
  for (const auto& s : ul.samples) out.samples.push_back({s.h.transpose(), s.link_id});
  return out;
}

std::pair<ChannelDataset, ChannelDataset> split_dataset(const ChannelDataset& ds,
                                                        std::size_t n_train) {
  if (n_train > ds.size()) throw std::invalid_argument("split_dataset: n_train exceeds dataset size");
  ChannelDataset train{{}, ds.orientation, ds.normalized, ds.scale};
  ChannelDataset eval{{}, ds.orientation, ds.normalized, ds.scale};
  const auto mid = ds.samples.begin() + static_cast<std::ptrdiff_t>(n_train);
  train.samples.assign(ds.samples.begin(), mid);
  eval.samples.assign(mid, ds.samples.end());
  return {std::move(train), std::move(eval)};
}

CMatrix vectorize(const ChannelDataset& ds) {
  if (ds.empty()) return CMatrix(0, 0);
  const Eigen::Index n = static_cast<Eigen::Index>(ds.rows() * ds.cols());
  CMatrix out(n, static_cast<Eigen::Index>(ds.size()));
  for (std::size_t m = 0; m < ds.size(); ++m) {
    const CMatrix& h = ds.samples[m].h;
    if (h.size() != n) throw std::invalid_argument("vectorize: inconsistent sample dimensions");
    out.col(static_cast<Eigen::Index>(m)) = vec(h);
  }
  return out;
}

// Layout: magic[8] u32 version u32 rows u32 cols u32 orientation u64 count
// u32 normalized f64 scale, then per sample u64 link_id + rows x cols complex.
void write_dataset(const std::filesystem::path& path, const ChannelDataset& ds) {
  BinaryWriter w(path);
  w.magic(std::string_view(kDatasetMagic, 8));
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.rows()));
  w.u32(static_cast<std::uint32_t>(ds.cols()));
  w.u32(static_cast<std::uint32_t>(ds.orientation));
  w.u64(ds.size());
  w.u32(ds.normalized ? 1U : 0U);
  w.f64(ds.scale);
  for (const auto& s : ds.samples) {
    if (static_cast<std::size_t>(s.h.rows()) != ds.rows() ||
        static_cast<std::size_t>(s.h.cols()) != ds.cols()) {
      throw std::invalid_argument("write_dataset: inconsistent sample dimensions");
    }
    w.u64(s.link_id);
    w.complex_matrix(s.h);
  }
  w.close();
}

ChannelDataset read_dataset(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(std::string_view(kDatasetMagic, 8));
  if (r.u32() != kDatasetVersion) throw FormatError("unsupported dataset version");
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint32_t orient = r.u32();
  if (orient > 1) throw FormatError("bad orientation tag");
  const std::uint64_t count = r.u64();
  ChannelDataset ds;
  ds.orientation = static_cast<Orientation>(orient);
  ds.normalized = r.u32() != 0;
  ds.scale = r.f64();
  ds.samples.reserve(count);
  for (std::uint64_t m = 0; m < count; ++m) {
    ChannelSample s;
    s.link_id = r.u64();
    s.h = r.complex_matrix(rows, cols);
    ds.samples.push_back(std::move(s));
  }
  r.expect_end();
  return ds;
}

}  // namespace gmmfb
