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

#include "gmmfb/feedback.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace gmmfb {

std::size_t select_index(const RVector& log_scores) { return argmax_first(log_scores); }

FeedbackDecision select_from_observation(const GmmModel& model, const ObservationModel& om,
                                         const CVector& y) {
  return {select_index(log_scores_y(model, om, y)), FeedbackMethod::kFromObservation};
}

FeedbackDecision select_from_channel(const GmmModel& model, const CVector& h) {
  return {select_index(model.log_scores(h)), FeedbackMethod::kFromChannel};
}

FeedbackDecision select_exhaustive(const Codebook& cb, const CMatrix& h, double noise_var,
                                   FeedbackMethod method) {
  if (cb.entries.empty()) throw std::invalid_argument("select_exhaustive: empty codebook");
  RVector rates(static_cast<Eigen::Index>(cb.size()));
  for (std::size_t k = 0; k < cb.size(); ++k) {
    rates(static_cast<Eigen::Index>(k)) = spectral_efficiency(h, cb.entries[k], noise_var);
  }
  return {argmax_first(rates), method};
}

TransmitCovariance baseline_uniform(std::size_t n_tx, double rho) {
  const auto n = static_cast<Eigen::Index>(n_tx);
  return TransmitCovariance(CMatrix::Identity(n, n) * (rho / static_cast<double>(n_tx)));
}

TransmitCovariance baseline_uniform_eigenspace(const CMatrix& h, double rho, std::size_t n_rx) {
  if (h.norm() == 0.0) throw std::invalid_argument("baseline_uniform_eigenspace: zero channel");
  const Eigen::Index n_tx = h.cols();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(h.adjoint() * h));
  const Eigen::Index streams = std::min<Eigen::Index>(static_cast<Eigen::Index>(n_rx), n_tx);
  const auto v = eig.eigenvectors().rightCols(streams);
  return TransmitCovariance(v * v.adjoint() * (rho / static_cast<double>(streams)));
}

std::string codebook_name(CodebookFamily family, UpdateRule update) {
  std::string s = family == CodebookFamily::kGmm ? "gmm" : "lloyd";
  s += update == UpdateRule::kPgd ? "-pgd" : "-lau";
  return s;
}

std::string Strategy::codebook_name() const {
  return kind == StrategyKind::kCodebook ? gmmfb::codebook_name(family, update) : std::string();
}

Strategy parse_strategy(std::string_view label) {
  Strategy s;
  s.label = std::string(label);
  if (label == "optimal") {
    s.kind = StrategyKind::kOptimal;
    return s;
  }
  if (label == "uni_pow_cov") {
    s.kind = StrategyKind::kUniformCov;
    return s;
  }
  if (label == "uni_pow_eigsp") {
    s.kind = StrategyKind::kUniformEigenspace;
    return s;
  }
  s.kind = StrategyKind::kCodebook;
  std::string_view rest = label;
  const auto eat = [&rest](std::string_view prefix) {
    if (rest.substr(0, prefix.size()) != prefix) return false;
    rest.remove_prefix(prefix.size());
    return true;
  };
  if (eat("gmm_")) {
    s.family = CodebookFamily::kGmm;
  } else if (eat("lloyd_")) {
    s.family = CodebookFamily::kLloyd;
  } else {
    throw std::invalid_argument("unknown strategy: " + s.label);
  }
  if (eat("pgd_")) {
    s.update = UpdateRule::kPgd;
  } else if (eat("lau_")) {
    s.update = UpdateRule::kLau;
  } else {
    throw std::invalid_argument("unknown strategy: " + s.label);
  }
  if (rest == "y" && s.family == CodebookFamily::kGmm) {
    s.selector = Selector::kObservation;
  } else if (rest == "h") {
    s.selector = Selector::kChannel;
  } else if (rest == "est_gmm") {
    s.selector = Selector::kEstimateGmm;
  } else if (rest == "est_scov") {
    s.selector = Selector::kEstimateScov;
  } else if (rest == "est_omp") {
    s.selector = Selector::kEstimateOmp;
  } else {
    throw std::invalid_argument("unknown strategy: " + s.label);
  }
  return s;
}

namespace {

const Codebook& codebook_for(const EvaluationContext& ctx, const Strategy& s) {
  const auto it = ctx.codebooks.find(s.codebook_name());
  if (it == ctx.codebooks.end() || it->second == nullptr) {
    throw std::invalid_argument("no codebook '" + s.codebook_name() + "' for strategy " + s.label);
  }
  return *it->second;
}

void require_gmm(const EvaluationContext& ctx, const Strategy& s) {
  if (ctx.model == nullptr) throw std::invalid_argument("strategy " + s.label + " needs a GMM");
}

void require_om(const EvaluationContext& ctx, const Strategy& s) {
  if (!ctx.om) throw std::invalid_argument("strategy " + s.label + " needs an observation model");
}

// Lazily computed per-sample estimates shared across strategies.
struct SampleCache {
  std::optional<CMatrix> gmm;
  std::optional<CMatrix> scov;
  std::optional<CMatrix> omp;
};

}  // namespace

std::vector<NseRecord> evaluate_strategies(const ChannelDataset& dl_eval,
                                           const EvaluationContext& ctx,
                                           const std::vector<Strategy>& strategies,
                                           std::uint64_t seed) {
  if (dl_eval.orientation != Orientation::kDownlink) {
    throw std::invalid_argument("evaluate_strategies: expects downlink-oriented channels");
  }
  // Validate the whole strategy list before touching any sample.
  for (const auto& s : strategies) {
    if (s.kind != StrategyKind::kCodebook) continue;
    const Codebook& cb = codebook_for(ctx, s);
    if (!dl_eval.empty() && cb.n_tx() != dl_eval.cols()) {
      throw std::invalid_argument("evaluate_strategies: codebook N_tx does not match channels");
    }
    if (s.family == CodebookFamily::kGmm || s.selector == Selector::kEstimateGmm) require_gmm(ctx, s);
    if (s.selector == Selector::kObservation || s.selector == Selector::kEstimateGmm) {
      require_om(ctx, s);
      ctx.om->filters_for(*ctx.model);
    }
    if (s.selector == Selector::kEstimateScov && (!ctx.scov || !ctx.om)) {
      throw std::invalid_argument("strategy " + s.label + " needs a sample-covariance filter");
    }
    if (s.selector == Selector::kEstimateOmp && (!ctx.dictionary || !ctx.omp_sensing || !ctx.om)) {
      throw std::invalid_argument("strategy " + s.label + " needs a dictionary");
    }
    if (s.family == CodebookFamily::kGmm && cb.size() != ctx.model->size()) {
      throw std::invalid_argument("GMM codebook size differs from the number of components");
    }
  }
  for (const auto& s : dl_eval.samples) {
    if (static_cast<std::size_t>(s.h.rows()) != dl_eval.rows() ||
        static_cast<std::size_t>(s.h.cols()) != dl_eval.cols()) {
      throw std::invalid_argument("evaluate_strategies: inconsistent channel dimensions");
    }
  }
  if (ctx.om && !dl_eval.empty() &&
      (ctx.om->n_rx() != dl_eval.rows() || ctx.om->pilots().n_tx() != dl_eval.cols())) {
    throw std::invalid_argument("evaluate_strategies: observation model does not match channels");
  }

  std::vector<NseRecord> records;
  records.reserve(dl_eval.size() * strategies.size());
  const double nv = ctx.noise_var;
  for (const auto& sample : dl_eval.samples) {
    const CMatrix& h = sample.h;
    const std::size_t n_rx = static_cast<std::size_t>(h.rows());
    const std::size_t n_tx = static_cast<std::size_t>(h.cols());
    const std::uint64_t noise_seed = derive_seed(seed, sample.link_id);
    const WaterfillResult opt = waterfill_optimal(h, ctx.rho, nv);
    std::optional<CVector> y;
    if (ctx.om) y = ctx.om->observe(h, noise_seed);
    SampleCache cache;

    for (const auto& s : strategies) {
      NseRecord rec;
      rec.link_id = sample.link_id;
      rec.strategy = s.label;
      rec.noise_seed = noise_seed;
      rec.optimal_rate = opt.rate;
      TransmitCovariance q;
      switch (s.kind) {
        case StrategyKind::kOptimal:
          q = opt.q;
          break;
        case StrategyKind::kUniformCov:
          q = baseline_uniform(n_tx, ctx.rho);
          break;
        case StrategyKind::kUniformEigenspace:
          q = opt.degenerate ? TransmitCovariance(CMatrix::Zero(h.cols(), h.cols()))
                             : baseline_uniform_eigenspace(h, ctx.rho, n_rx);
          break;
        case StrategyKind::kCodebook: {
          const Codebook& cb = codebook_for(ctx, s);
          FeedbackDecision d;
          switch (s.selector) {
            case Selector::kObservation:
              d = select_from_observation(*ctx.model, *ctx.om, *y);
              break;
            case Selector::kChannel:
              d = s.family == CodebookFamily::kGmm ? select_from_channel(*ctx.model, vec(h))
                                                   : select_exhaustive(cb, h, nv);
              break;
            case Selector::kEstimateGmm:
              if (!cache.gmm) cache.gmm = unvec(estimate_gmm(*ctx.model, *ctx.om, *y), n_rx, n_tx);
              d = select_exhaustive(cb, *cache.gmm, nv, FeedbackMethod::kExhaustiveRateEstimatedCsi);
              break;
            case Selector::kEstimateScov:
              if (!cache.scov) cache.scov = unvec((*ctx.scov)(*y), n_rx, n_tx);
              d = select_exhaustive(cb, *cache.scov, nv, FeedbackMethod::kExhaustiveRateEstimatedCsi);
              break;
            case Selector::kEstimateOmp:
              if (!cache.omp) {
                const std::size_t s_max = ctx.omp_s_max > 0 ? ctx.omp_s_max : ctx.om->observation_dim();
                cache.omp = unvec(
                    estimate_omp_genie(*ctx.dictionary, *ctx.omp_sensing, *y, vec(h), s_max).estimate,
                    n_rx, n_tx);
              }
              d = select_exhaustive(cb, *cache.omp, nv, FeedbackMethod::kExhaustiveRateEstimatedCsi);
              break;
          }
          rec.index = static_cast<std::int64_t>(d.index);
          q = cb.entries.at(d.index);
          break;
        }
      }
      rec.rate = s.kind == StrategyKind::kOptimal ? opt.rate : spectral_efficiency(h, q, nv);
      rec.nse = opt.rate > 0.0 ? rec.rate / opt.rate : 0.0;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<double> uniform_grid(std::size_t count) {
  if (count < 2) throw std::invalid_argument("uniform_grid: need at least two points");
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return g;
}

CcdfTable ccdf(const std::vector<NseRecord>& records, const std::vector<double>& grid) {
  if (records.empty()) throw std::invalid_argument("ccdf: no records");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("ccdf: grid must ascend");
  CcdfTable t;
  t.grid = grid;
  std::map<std::string, std::size_t> column;
  std::vector<std::vector<double>> nses;
  for (const auto& r : records) {
    auto [it, inserted] = column.try_emplace(r.strategy, t.labels.size());
    if (inserted) {
      t.labels.push_back(r.strategy);
      nses.emplace_back();
    }
    if (!(r.optimal_rate > 0.0)) {
      ++t.excluded;
      continue;
    }
    nses[it->second].push_back(r.nse);
  }
  for (auto& v : nses) {
    std::sort(v.begin(), v.end());
    std::vector<double> col;
    col.reserve(grid.size());
    for (double s : grid) {
      const auto above = v.end() - std::upper_bound(v.begin(), v.end(), s);
      col.push_back(v.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(v.size()));
    }
    t.values.push_back(std::move(col));
  }
  return t;
}

std::vector<StrategySummary> summarize(const std::vector<NseRecord>& records, double threshold) {
  std::vector<StrategySummary> out;
  std::map<std::string, std::size_t> column;
  for (const auto& r : records) {
    auto [it, inserted] = column.try_emplace(r.strategy, out.size());
    if (inserted) out.push_back({r.strategy, 0.0, 0.0, 0});
    if (!(r.optimal_rate > 0.0)) continue;
    auto& s = out[it->second];
    s.mean_nse += r.nse;
    s.exceed += r.nse > threshold ? 1.0 : 0.0;
    ++s.count;
  }
  for (auto& s : out) {
    if (s.count == 0) continue;
    s.mean_nse /= static_cast<double>(s.count);
    s.exceed /= static_cast<double>(s.count);
  }
  return out;
}

void write_ccdf(std::ostream& out, const CcdfTable& table) {
  out << "s";
  for (const auto& l : table.labels) out << ',' << l;
  out << '\n';
  out << std::setprecision(12);
  for (std::size_t i = 0; i < table.grid.size(); ++i) {
    out << table.grid[i];
    for (const auto& col : table.values) out << ',' << col[i];
    out << '\n';
  }
}

void write_records(std::ostream& out, const std::vector<NseRecord>& records) {
  out << "link_id,strategy,index,noise_seed,rate,optimal_rate,nse\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) {
    out << r.link_id << ',' << r.strategy << ',' << r.index << ',' << r.noise_seed << ',' << r.rate
        << ',' << r.optimal_rate << ',' << r.nse << '\n';
  }
}

std::vector<NseRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "link_id,strategy,index,noise_seed,rate,optimal_rate,nse") {
    throw std::runtime_error("read_records: bad header");
  }
  std::vector<NseRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 7) throw std::runtime_error("read_records: bad row: " + line);
    NseRecord r;
    r.link_id = std::stoull(f[0]);
    r.strategy = f[1];
    r.index = std::stoll(f[2]);
    r.noise_seed = std::stoull(f[3]);
    r.rate = std::stod(f[4]);
    r.optimal_rate = std::stod(f[5]);
    r.nse = std::stod(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gmmfb
