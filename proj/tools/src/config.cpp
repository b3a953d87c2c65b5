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

#include "gmmfb/tools/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gmmfb/feedback.hpp"

namespace gmmfb::tools {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario",
       {"n_tx_v", "n_tx_h", "n_rx", "f_ul", "f_dl", "n_paths", "angle_spread", "delay_spread",
        "n_samples", "n_train"}},
      {"fit", {"structure", "k", "k_tx", "k_rx", "max_iter", "rel_tol", "reg_eps", "init"}},
      {"codebook",
       {"bits", "methods", "rho", "lloyd_training", "pgd_step", "pgd_max_iter", "pgd_rel_tol",
        "pgd_backtrack", "lloyd_max_outer", "lloyd_rel_tol"}},
      {"eval",
       {"snr_db", "n_pilots", "strategies", "grid_size", "threshold", "omp_oversampling",
        "omp_s_max", "decision_noise_var"}},
      {"paths", {"artifacts"}},
      {"run", {"seed"}},
  };
  return keys;
}

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

template <typename T>
T parse_number(const std::string& text, const std::string& section, const std::string& key) {
  const std::string s = boost::trim_copy(text);
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for doubles is missing from some standard libraries; stod
    // with a full-consumption check is equivalent here.
    std::size_t used = 0;
    try {
      value = static_cast<T>(std::stod(s, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(value)) {
      throw ConfigError(where(section, key) + ": not a number: '" + text + "'");
    }
  } else {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(where(section, key) + ": not a nonnegative integer: '" + text + "'");
    }
  }
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& section,
                          const std::string& key) {
  std::vector<T> out;
  for (const auto& p : split_list(text)) out.push_back(parse_number<T>(p, section, key));
  if (out.empty()) throw ConfigError(where(section, key) + ": empty list");
  return out;
}

// Visits the keys of one section, consuming them so leftovers can be reported.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <typename T>
  void number(const std::string& key, T& out) const {
    if (auto v = raw(key)) out = parse_number<T>(*v, name_, key);
  }
  template <typename T>
  void list(const std::string& key, std::vector<T>& out) const {
    if (auto v = raw(key)) out = parse_list<T>(*v, name_, key);
  }
  void strings(const std::string& key, std::vector<std::string>& out) const {
    if (auto v = raw(key)) {
      out = split_list(*v);
      if (out.empty()) throw ConfigError(where(name_, key) + ": empty list");
    }
  }
  std::optional<std::string> raw(const std::string& key) const {
    if (tree_ == nullptr) return std::nullopt;
    const auto child = tree_->get_child_optional(key);
    if (!child) return std::nullopt;
    return boost::trim_copy(child->data());
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Range>
std::string join(const Range& r) {
  std::ostringstream os;
  bool first = true;
  for (const auto& v : r) {
    if (!first) os << ',';
    first = false;
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      os << format_double(v);
    } else {
      os << v;
    }
  }
  return os.str();
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  const auto& keys = known_keys();
  for (const auto& [name, section] : tree) {
    const auto it = keys.find(name);
    if (it == keys.end()) {
      if (section.empty() && !section.data().empty()) {
        throw ConfigError("key outside of any section: " + name);
      }
      throw ConfigError("unknown section [" + name + "]");
    }
    for (const auto& [key, value] : section) {
      if (!it->second.count(key)) throw ConfigError("unknown key " + where(name, key));
    }
  }
  const auto section = [&tree](const std::string& name) {
    const auto child = tree.get_child_optional(name);
    return Section(child ? &*child : nullptr, name);
  };

  RunConfig c;
  const Section sc = section("scenario");
  sc.number("n_tx_v", c.scenario.n_tx_v);
  sc.number("n_tx_h", c.scenario.n_tx_h);
  sc.number("n_rx", c.scenario.n_rx);
  sc.number("f_ul", c.scenario.f_ul);
  sc.number("f_dl", c.scenario.f_dl);
  sc.number("n_paths", c.scenario.n_paths);
  sc.number("angle_spread", c.scenario.angle_spread);
  sc.number("delay_spread", c.scenario.delay_spread);
  sc.number("n_samples", c.scenario.n_samples);
  sc.number("n_train", c.n_train);

  const Section fit = section("fit");
  if (auto s = fit.raw("structure")) {
    if (*s == "full") {
      c.fit.structure = CovarianceStructure::kFull;
    } else if (*s == "kronecker") {
      c.fit.structure = CovarianceStructure::kKronecker;
    } else {
      throw ConfigError("[fit] structure must be full or kronecker, got '" + *s + "'");
    }
  }
  fit.number("k", c.fit.k);
  fit.number("k_tx", c.fit.k_tx);
  fit.number("k_rx", c.fit.k_rx);
  fit.number("max_iter", c.fit.options.max_iter);
  fit.number("rel_tol", c.fit.options.rel_tol);
  fit.number("reg_eps", c.fit.options.reg_eps);
  if (auto s = fit.raw("init")) {
    if (*s == "random") {
      c.fit.options.init = InitMethod::kRandomResponsibility;
    } else if (*s == "kmeans") {
      c.fit.options.init = InitMethod::kKMeansLike;
    } else {
      throw ConfigError("[fit] init must be random or kmeans, got '" + *s + "'");
    }
  }

  const Section cb = section("codebook");
  cb.number("bits", c.codebook.bits);
  cb.strings("methods", c.codebook.methods);
  cb.number("rho", c.codebook.rho);
  if (auto s = cb.raw("lloyd_training")) {
    if (*s == "ul") {
      c.codebook.lloyd_training = Orientation::kUplink;
    } else if (*s == "dl") {
      c.codebook.lloyd_training = Orientation::kDownlink;
    } else {
      throw ConfigError("[codebook] lloyd_training must be ul or dl, got '" + *s + "'");
    }
  }
  cb.number("pgd_step", c.codebook.pgd.step);
  cb.number("pgd_max_iter", c.codebook.pgd.max_iter);
  cb.number("pgd_rel_tol", c.codebook.pgd.rel_tol);
  cb.number("pgd_backtrack", c.codebook.pgd.backtrack);
  c.codebook.lloyd.pgd = c.codebook.pgd;
  cb.number("lloyd_max_outer", c.codebook.lloyd.max_outer);
  cb.number("lloyd_rel_tol", c.codebook.lloyd.rel_tol);

  const Section ev = section("eval");
  ev.list("snr_db", c.eval.snr_db);
  ev.list("n_pilots", c.eval.n_pilots);
  ev.strings("strategies", c.eval.strategies);
  ev.number("grid_size", c.eval.grid_size);
  ev.number("threshold", c.eval.threshold);
  if (ev.raw("omp_oversampling")) {
    std::vector<std::size_t> o;
    ev.list("omp_oversampling", o);
    if (o.size() != 3) throw ConfigError("[eval] omp_oversampling needs three factors");
    c.eval.omp_oversampling = {o[0], o[1], o[2]};
  }
  ev.number("omp_s_max", c.eval.omp_s_max);
  if (ev.raw("decision_noise_var")) {
    double v = 0.0;
    ev.number("decision_noise_var", v);
    c.eval.decision_noise_var = v;
  }

  if (auto s = section("paths").raw("artifacts")) c.artifacts = *s;
  section("run").number("seed", c.seed);

  if (c.eval.strategies.empty()) {
    c.eval.strategies = {"optimal",          "uni_pow_cov",       "uni_pow_eigsp",
                         "gmm_pgd_y",        "gmm_pgd_h",         "gmm_lau_y",
                         "gmm_lau_h",        "lloyd_pgd_h",       "lloyd_lau_h",
                         "lloyd_pgd_est_gmm", "lloyd_pgd_est_scov", "lloyd_pgd_est_omp"};
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

void RunConfig::validate() const {
  try {
    scenario.validate();
    fit.options.validate();
    codebook.pgd.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (n_train == 0 || n_train >= scenario.n_samples) {
    throw ConfigError("[scenario] n_train must lie in [1, n_samples)");
  }
  if (fit.components() == 0) throw ConfigError("[fit] component count must be positive");
  if (codebook.bits == 0 || codebook.bits > 16) throw ConfigError("[codebook] bits must lie in [1, 16]");
  if ((std::size_t{1} << codebook.bits) != fit.components()) {
    throw ConfigError("[codebook] 2^bits = " + std::to_string(std::size_t{1} << codebook.bits) +
                      " differs from the " + std::to_string(fit.components()) +
                      " mixture components of [fit]");
  }
  if (!(codebook.rho > 0.0)) throw ConfigError("[codebook] rho must be positive");
  if (codebook.lloyd.max_outer == 0) throw ConfigError("[codebook] lloyd_max_outer must be positive");
  if (!(codebook.lloyd.rel_tol > 0.0)) throw ConfigError("[codebook] lloyd_rel_tol must be positive");
  std::set<std::string> methods;
  for (const auto& m : codebook.methods) {
    if (m != "gmm-pgd" && m != "gmm-lau" && m != "lloyd-pgd" && m != "lloyd-lau") {
      throw ConfigError("[codebook] unknown method '" + m + "'");
    }
    if (!methods.insert(m).second) throw ConfigError("[codebook] duplicate method '" + m + "'");
  }
  for (std::size_t n_p : eval.n_pilots) {
    if (n_p == 0 || n_p > scenario.n_tx()) {
      throw ConfigError("[eval] n_pilots entries must lie in [1, N_tx]");
    }
  }
  std::set<std::string> labels;
  for (const auto& label : eval.strategies) {
    Strategy s;
    try {
      s = parse_strategy(label);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[eval] ") + e.what());
    }
    if (!labels.insert(label).second) throw ConfigError("[eval] duplicate strategy " + label);
    if (s.kind == StrategyKind::kCodebook && !methods.count(s.codebook_name())) {
      throw ConfigError("[eval] strategy " + label + " needs codebook method " + s.codebook_name());
    }
  }
  if (eval.grid_size < 2) throw ConfigError("[eval] grid_size must be at least 2");
  if (!(eval.threshold >= 0.0 && eval.threshold <= 1.0)) {
    throw ConfigError("[eval] threshold must lie in [0, 1]");
  }
  for (std::size_t o : eval.omp_oversampling) {
    if (o == 0) throw ConfigError("[eval] omp_oversampling factors must be positive");
  }
  if (eval.decision_noise_var && !(*eval.decision_noise_var > 0.0)) {
    throw ConfigError("[eval] decision_noise_var must be positive");
  }
  std::set<std::string> tags;
  for (double snr : eval.snr_db) {
    if (!tags.insert(snr_tag(snr)).second) throw ConfigError("[eval] duplicate snr_db entry");
  }
  if (artifacts.empty()) throw ConfigError("[paths] artifacts must not be empty");
}

std::string section_text(const RunConfig& c, const std::string& section) {
  std::ostringstream os;
  os << '[' << section << "]\n";
  if (section == "scenario") {
    const auto& s = c.scenario;
    os << "n_tx_v=" << s.n_tx_v << "\nn_tx_h=" << s.n_tx_h << "\nn_rx=" << s.n_rx
       << "\nf_ul=" << format_double(s.f_ul) << "\nf_dl=" << format_double(s.f_dl)
       << "\nn_paths=" << s.n_paths << "\nangle_spread=" << format_double(s.angle_spread)
       << "\ndelay_spread=" << format_double(s.delay_spread) << "\nn_samples=" << s.n_samples
       << "\nn_train=" << c.n_train << '\n';
  } else if (section == "fit") {
    const auto& f = c.fit;
    os << "structure=" << (f.structure == CovarianceStructure::kFull ? "full" : "kronecker")
       << "\nk=" << f.k << "\nk_tx=" << f.k_tx << "\nk_rx=" << f.k_rx
       << "\nmax_iter=" << f.options.max_iter << "\nrel_tol=" << format_double(f.options.rel_tol)
       << "\nreg_eps=" << format_double(f.options.reg_eps) << "\ninit="
       << (f.options.init == InitMethod::kKMeansLike ? "kmeans" : "random") << '\n';
  } else if (section == "codebook") {
    const auto& b = c.codebook;
    os << "bits=" << b.bits << "\nmethods=" << join(b.methods) << "\nrho=" << format_double(b.rho)
       << "\nlloyd_training=" << (b.lloyd_training == Orientation::kUplink ? "ul" : "dl")
       << "\npgd_step=" << format_double(b.pgd.step) << "\npgd_max_iter=" << b.pgd.max_iter
       << "\npgd_rel_tol=" << format_double(b.pgd.rel_tol)
       << "\npgd_backtrack=" << format_double(b.pgd.backtrack)
       << "\nlloyd_max_outer=" << b.lloyd.max_outer
       << "\nlloyd_rel_tol=" << format_double(b.lloyd.rel_tol) << '\n';
  } else if (section == "eval") {
    const auto& e = c.eval;
    os << "snr_db=" << join(e.snr_db) << "\nn_pilots=" << join(e.n_pilots)
       << "\nstrategies=" << join(e.strategies) << "\ngrid_size=" << e.grid_size
       << "\nthreshold=" << format_double(e.threshold)
       << "\nomp_oversampling=" << join(e.omp_oversampling) << "\nomp_s_max=" << e.omp_s_max
       << '\n';
    if (e.decision_noise_var) os << "decision_noise_var=" << format_double(*e.decision_noise_var) << '\n';
  } else if (section == "paths") {
    os << "artifacts=" << c.artifacts.string() << '\n';
  } else if (section == "run") {
    os << "seed=" << c.seed << '\n';
  } else {
    throw std::invalid_argument("section_text: unknown section " + section);
  }
  return os.str();
}

std::string canonical_text(const RunConfig& c) {
  std::string out;
  for (const char* s : {"scenario", "fit", "codebook", "eval", "paths", "run"}) {
    out += section_text(c, s);
  }
  return out;
}

double noise_var_for(double snr_db, double rho) { return rho * std::pow(10.0, -snr_db / 10.0); }

std::string snr_tag(double snr_db) {
  std::ostringstream os;
  os << snr_db;
  return os.str();
}

}  // namespace gmmfb::tools
