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

#include "gmmfb/tools/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "gmmfb/binary_io.hpp"
#include "gmmfb/codebook.hpp"
#include "gmmfb/estimation.hpp"
#include "gmmfb/feedback.hpp"
#include "gmmfb/gmm.hpp"
#include "gmmfb/scenario.hpp"

namespace gmmfb::tools {
namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string seconds_text(const Stopwatch& w) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << w.seconds() << " s";
  return os.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create artifact directory " + dir.string());
  }
}

// Records a stage's outputs with their hashes and saves the manifest.
void record_stage(const RunConfig& config, Manifest& manifest, const std::string& stage,
                  const std::vector<std::string>& files) {
  StageRecord r;
  r.fingerprint = stage_fingerprint(config, stage);
  r.timestamp = utc_timestamp();
  for (const auto& f : files) r.files[f] = sha256_file(config.artifacts / f);
  manifest.set_stage(stage, std::move(r));
  manifest.set_config_hash(sha256_hex(canonical_text(config)));
  manifest.save(config.artifacts);
}

// Loads the manifest and checks every upstream stage for freshness and integrity.
Manifest require_upstream(const RunConfig& config, const std::vector<std::string>& stages) {
  if (!fs::exists(config.artifacts / Manifest::kFileName)) {
    throw MissingArtifact("no manifest in " + config.artifacts.string() +
                          "; run `gmmfb " + stages.front() + "` first");
  }
  Manifest m = Manifest::load(config.artifacts);
  for (const auto& s : stages) {
    m.require_stage(s, stage_fingerprint(config, s));
    m.verify_stage(config.artifacts, s);
  }
  return m;
}

ChannelDataset training_set(const RunConfig& config, Orientation which) {
  if (which == Orientation::kDownlink) return read_dataset(config.artifacts / kDlTrain);
  // The offline phase only sees UL data; transposing it emulates DL samples.
  return emulate_downlink(read_dataset(config.artifacts / kUlTrain));
}

std::string fixed12(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}


}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const MissingArtifact*>(&e)) return kExitMissingArtifact;
  if (dynamic_cast<const IntegrityError*>(&e) || dynamic_cast<const FormatError*>(&e)) {
    return kExitIntegrity;
  }
  return kExitFailure;
}

std::string codebook_file(const std::string& method, double snr_db) {
  return "codebook_" + method + "_snr" + snr_tag(snr_db) + "dB.bin";
}

std::string records_file(double snr_db, std::size_t n_pilots) {
  return "records_snr" + snr_tag(snr_db) + "dB_np" + std::to_string(n_pilots) + ".csv";
}

std::string ccdf_file(double snr_db, std::size_t n_pilots) {
  return "ccdf_snr" + snr_tag(snr_db) + "dB_np" + std::to_string(n_pilots) + ".csv";
}

std::string sweep_file(double snr_db) { return "sweep_snr" + snr_tag(snr_db) + "dB.csv"; }

std::string stage_fingerprint(const RunConfig& c, const std::string& stage) {
  if (stage == "generate") {
    return sha256_hex("generate\n" + section_text(c, "scenario") + section_text(c, "run"));
  }
  if (stage == "fit") return sha256_hex(stage_fingerprint(c, "generate") + section_text(c, "fit"));
  if (stage == "build-codebook") {
    std::ostringstream snrs;
    for (double s : c.eval.snr_db) snrs << snr_tag(s) << ',';
    return sha256_hex(stage_fingerprint(c, "fit") + section_text(c, "codebook") +
                      "snr_db=" + snrs.str());
  }
  if (stage == "evaluate") {
    return sha256_hex(stage_fingerprint(c, "build-codebook") + section_text(c, "eval"));
  }
  throw std::invalid_argument("unknown stage " + stage);
}

void cmd_generate(const RunConfig& config, std::ostream& log) {
  Stopwatch w;
  ensure_dir(config.artifacts);
  ScenarioConfig sc = config.scenario;
  sc.seed = labeled_seed(config.seed, "scenario");
  const PairedDatasets pd = generate_paired_dataset(sc);
  auto [ul_train, ul_eval] = split_dataset(pd.ul, config.n_train);
  auto [dl_train, dl_eval] = split_dataset(pd.dl, config.n_train);
  write_dataset(config.artifacts / kUlTrain, ul_train);
  write_dataset(config.artifacts / kUlEval, ul_eval);
  write_dataset(config.artifacts / kDlTrain, dl_train);
  write_dataset(config.artifacts / kDlEval, dl_eval);

  Manifest m;
  try {
    m = Manifest::load(config.artifacts);
  } catch (const IntegrityError&) {
    m = Manifest{};  // a broken manifest is simply replaced by a fresh run
  }
  record_stage(config, m, "generate", {kUlTrain, kUlEval, kDlTrain, kDlEval});
  log << "generate: " << pd.ul.size() << " paired links (" << ul_train.size() << " train, "
      << ul_eval.size() << " eval), N_tx=" << sc.n_tx() << " N_rx=" << sc.n_rx << " in "
      << seconds_text(w) << '\n';
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
  Stopwatch w;
  Manifest m = require_upstream(config, {"generate"});
  const ChannelDataset train = training_set(config, Orientation::kUplink);
  FitOptions opts = config.fit.options;
  opts.seed = labeled_seed(config.seed, "fit");

  std::ostringstream trace;
  trace << "stage,iteration,log_likelihood\n" << std::setprecision(17);
  const auto append = [&trace](const std::string& stage, const FitResult& r) {
    for (std::size_t i = 0; i < r.log_likelihood.size(); ++i) {
      trace << stage << ',' << i << ',' << r.log_likelihood[i] << '\n';
    }
  };
  std::optional<GmmModel> model;
  if (config.fit.structure == CovarianceStructure::kFull) {
    FitResult r = fit_em(train, config.fit.k, opts);
    append("full", r);
    log << "fit: full K=" << config.fit.k << ", " << r.iterations << " EM iterations"
        << (r.converged ? "" : " (max_iter reached)") << ", " << r.reseeds << " reseeds\n";
    model = std::move(r.model);
  } else {
    KroneckerFitResult r = fit_kronecker(train, config.fit.k_tx, config.fit.k_rx, opts);
    append("tx", r.tx);
    append("rx", r.rx);
    log << "fit: kronecker K_tx=" << config.fit.k_tx << " K_rx=" << config.fit.k_rx << ", "
        << r.tx.iterations << "+" << r.rx.iterations << " EM iterations\n";
    model = std::move(r.model);
  }
  write_model(config.artifacts / kModel, *model);
  write_text(config.artifacts / kFitTrace, trace.str());
  record_stage(config, m, "fit", {kModel, kFitTrace});
  log << "fit: K=" << model->size() << ", " << count_covariance_parameters(*model)
      << " covariance parameters in " << seconds_text(w) << '\n';
}

void cmd_build_codebook(const RunConfig& config, std::ostream& log) {
  Stopwatch w;
  Manifest m = require_upstream(config, {"generate", "fit"});
  const GmmModel model = read_model(config.artifacts / kModel);
  if (model.size() != (std::size_t{1} << config.codebook.bits)) {
    throw ConfigError("model has " + std::to_string(model.size()) + " components but 2^bits = " +
                      std::to_string(std::size_t{1} << config.codebook.bits));
  }
  const ChannelDataset gmm_train = training_set(config, Orientation::kUplink);
  const ChannelDataset lloyd_train =
      config.codebook.lloyd_training == Orientation::kUplink
          ? gmm_train
          : training_set(config, Orientation::kDownlink);
  const std::size_t n_rx = config.scenario.n_rx;
  const double rho = config.codebook.rho;
  const std::uint64_t base = labeled_seed(config.seed, "codebook");

  std::vector<std::string> files;
  for (std::size_t si = 0; si < config.eval.snr_db.size(); ++si) {
    const double snr = config.eval.snr_db[si];
    const double nv = noise_var_for(snr, rho);
    for (std::size_t mi = 0; mi < config.codebook.methods.size(); ++mi) {
      const std::string& method = config.codebook.methods[mi];
      const UpdateRule rule = method.ends_with("pgd") ? UpdateRule::kPgd : UpdateRule::kLau;
      Stopwatch mw;
      Codebook cb;
      if (method.starts_with("gmm")) {
        cb = gmm_codebook(model, gmm_train, rho, nv, n_rx, rule, config.codebook.pgd).codebook;
      } else {
        const LloydResult r = lloyd_fit(lloyd_train, model.size(), rho, nv, n_rx, rule,
                                        config.codebook.lloyd, derive_seed(base, si, mi));
        cb = r.codebook;
      }
      for (std::size_t k = 0; k < cb.size(); ++k) {
        if (!check_feasible(cb.entries[k], rho, n_rx).feasible) {
          throw std::logic_error(method + " produced an infeasible entry " + std::to_string(k));
        }
      }
      const std::string file = codebook_file(method, snr);
      write_codebook(config.artifacts / file, cb);
      files.push_back(file);
      log << "build-codebook: " << method << " @ " << snr_tag(snr) << " dB, " << cb.size()
          << " entries in " << seconds_text(mw) << '\n';
    }
  }
  record_stage(config, m, "build-codebook", files);
  log << "build-codebook: " << files.size() << " codebooks in " << seconds_text(w) << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  Stopwatch w;
  Manifest m = require_upstream(config, {"generate", "fit", "build-codebook"});
  const GmmModel model = read_model(config.artifacts / kModel);
  const ChannelDataset dl_eval = read_dataset(config.artifacts / kDlEval);
  std::vector<Strategy> strategies;
  bool need_scov = false;
  bool need_omp = false;
  std::set<std::string> needed;
  for (const auto& label : config.eval.strategies) {
    strategies.push_back(parse_strategy(label));
    need_scov |= strategies.back().selector == Selector::kEstimateScov;
    need_omp |= strategies.back().selector == Selector::kEstimateOmp;
    if (strategies.back().kind == StrategyKind::kCodebook) needed.insert(strategies.back().codebook_name());
  }
  std::optional<CMatrix> scov;
  if (need_scov) scov = sample_covariance(training_set(config, Orientation::kUplink));
  std::optional<Dictionary> dict;
  if (need_omp) {
    dict = build_dictionary(config.scenario.n_rx, config.scenario.n_tx_h, config.scenario.n_tx_v,
                            config.eval.omp_oversampling);
  }

  const double rho = config.codebook.rho;
  const std::uint64_t eval_seed = labeled_seed(config.seed, "eval-noise");
  const auto grid = uniform_grid(config.eval.grid_size);
  std::vector<std::string> files;
  for (std::size_t si = 0; si < config.eval.snr_db.size(); ++si) {
    const double snr = config.eval.snr_db[si];
    const double nv = noise_var_for(snr, rho);
    std::map<std::string, Codebook> books;
    for (const auto& name : needed) {
      books[name] = read_codebook(config.artifacts / codebook_file(name, snr));
    }
    std::ostringstream sweep;
    sweep << "n_pilots";
    for (const auto& s : strategies) sweep << ',' << s.label;
    sweep << '\n';

    for (std::size_t n_p : config.eval.n_pilots) {
      Stopwatch cw;
      EvaluationContext ctx;
      ctx.model = &model;
      const ObservationModel om(
          build_pilot_matrix(config.scenario.n_tx_h, config.scenario.n_tx_v, n_p, rho),
          config.scenario.n_rx, config.eval.decision_noise_var.value_or(nv));
      ctx.om = om.bind(model);
      for (const auto& [name, cb] : books) ctx.codebooks[name] = &cb;
      if (scov) ctx.scov.emplace(*scov, *ctx.om);
      if (dict) {
        ctx.dictionary = dict;
        ctx.omp_sensing = ctx.om->operator_matrix() * dict->d;
      }
      ctx.omp_s_max = config.eval.omp_s_max;
      ctx.rho = rho;
      ctx.noise_var = nv;

      const auto records = evaluate_strategies(dl_eval, ctx, strategies, derive_seed(eval_seed, si, n_p));
      const CcdfTable table = ccdf(records, grid);
      {
        std::ostringstream os;
        write_records(os, records);
        write_text(config.artifacts / records_file(snr, n_p), os.str());
        files.push_back(records_file(snr, n_p));
      }
      {
        std::ostringstream os;
        write_ccdf(os, table);
        write_text(config.artifacts / ccdf_file(snr, n_p), os.str());
        files.push_back(ccdf_file(snr, n_p));
      }
      if (table.excluded > 0) {
        log << "evaluate: warning: " << table.excluded
            << " records with zero optimal rate excluded from the cCDF\n";
      }
      sweep << n_p;
      for (const auto& s : summarize(records, config.eval.threshold)) sweep << ',' << fixed12(s.exceed);
      sweep << '\n';
      log << "evaluate: " << snr_tag(snr) << " dB, n_p=" << n_p << ", " << records.size()
          << " records in " << seconds_text(cw) << '\n';
    }
    write_text(config.artifacts / sweep_file(snr), sweep.str());
    files.push_back(sweep_file(snr));
  }
  record_stage(config, m, "evaluate", files);
  log << "evaluate: " << files.size() << " files in " << seconds_text(w) << '\n';
}

void cmd_report(const RunConfig& config, std::ostream& out) {
  require_upstream(config, {"evaluate"});
  for (double snr : config.eval.snr_db) {
    for (std::size_t n_p : config.eval.n_pilots) {
      std::ifstream in(config.artifacts / records_file(snr, n_p));
      const auto records = read_records(in);
      out << "SNR " << snr_tag(snr) << " dB, n_p = " << n_p << '\n';
      out << "  " << std::left << std::setw(22) << "strategy" << std::right << std::setw(10)
          << "mean nSE" << std::setw(12) << ("P(nSE>" + fixed12(config.eval.threshold) + ")") << '\n';
      for (const auto& s : summarize(records, config.eval.threshold)) {
        out << "  " << std::left << std::setw(22) << s.label << std::right << std::fixed
            << std::setprecision(4) << std::setw(10) << s.mean_nse << std::setw(12) << s.exceed
            << '\n';
        out.unsetf(std::ios::fixed);
      }
    }
  }
}

}  // namespace gmmfb::tools
