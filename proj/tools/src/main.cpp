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

// gmmfb: generate | fit | build-codebook | evaluate | report.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gmmfb/tools/config.hpp"
#include "gmmfb/tools/pipeline.hpp"
#include "gmmfb/tools/version.hpp"

namespace {

using namespace gmmfb::tools;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> artifacts;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "INI run configuration")->required();
  cmd->add_option("--seed", o.seed, "override [run] seed");
  cmd->add_option("--artifacts", o.artifacts, "override [paths] artifacts");
}

RunConfig resolve(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.artifacts) c.artifacts = *o.artifacts;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-feedback precoding laboratory"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;
  struct Command {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"generate", "write the paired UL/DL datasets", cmd_generate},
      {"fit", "fit the channel mixture on the UL training set", cmd_fit},
      {"build-codebook", "build every configured codebook per SNR", cmd_build_codebook},
      {"evaluate", "evaluate all strategies per (SNR, n_p) cell", cmd_evaluate},
      {"report", "print per-cell summaries", cmd_report},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (const auto& c : commands) {
    if (!app.got_subcommand(c.name)) continue;
    try {
      const RunConfig config = resolve(o);
      // report writes its table to stdout; progress goes to stderr.
      c.run(config, std::string(c.name) == "report" ? std::cout : std::cerr);
      return kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "gmmfb " << c.name << ": " << e.what() << '\n';
      return exit_code_for(e);
    }
  }
  return kExitFailure;
}
