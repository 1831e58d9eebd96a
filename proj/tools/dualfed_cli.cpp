// Copyright 2026 The dualfed Authors. All Rights Reserved.
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
#include <cstdio>
#include <iostream>
#include <map>
#include <omp.h>

#include "CLI11.hpp"
#include "dualfed/experiment.hpp"

namespace {

using namespace dualfed;

int run_command(const std::string& config_path, const std::map<std::string, std::string>& overrides,
                const std::string& out_dir, bool quiet) {
  ConfigValues values = default_config_values();
  if (!config_path.empty()) values = merge_config(values, read_config_file(config_path));
  values = merge_config(values, overrides);
  const ExperimentConfig config = parse_config(values);

  auto progress = [&](const RoundReport& r) {
    if (quiet || !r.evaluated) return;
    std::fprintf(stderr, "round %zu  phase %zu  acc_global %.4f  acc_local %.4f  cum_bytes %llu\n", r.round,
                 r.phase, r.acc_global, r.acc_local, static_cast<unsigned long long>(r.cum_bytes));
  };
  const auto result = run_experiment(config, nullptr, progress);
  write_outputs(result, out_dir);
  const auto& last = result.final_report();
  std::printf("%s/%s: acc_global %.4f acc_local %.4f cum_bytes %llu (%.1fs) -> %s\n", to_string(config.method).c_str(),
              to_string(config.setting).c_str(), last.acc_global, last.acc_local,
              static_cast<unsigned long long>(last.cum_bytes), result.wall_seconds, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with double-head personalization and gradual layer sharing"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);

  auto* run = app.add_subcommand("run", "run one experiment");
  std::string config_path;
  std::string out_dir = "run";
  bool quiet = false;
  run->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_flag("-q,--quiet", quiet, "no per-evaluation progress lines");
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> override_opts;
  for (const auto& key : config_keys()) {
    override_opts[key.key] =
        run->add_option("--" + key.key, overrides[key.key], key.help + " [" + key.section + "]")->default_str(
            key.default_value);
  }

  auto* compare = app.add_subcommand("compare", "tabulate finished runs");
  std::vector<std::string> dirs;
  std::string baseline;
  compare->add_option("dirs", dirs, "run directories")->required();
  compare->add_option("--baseline", baseline, "run directory the savings are relative to (default: first)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*run) {
      std::map<std::string, std::string> given;
      for (const auto& [key, opt] : override_opts)
        if (opt->count() > 0) given[key] = overrides[key];
      return run_command(config_path, given, out_dir, quiet);
    }
    std::cout << format_comparison(compare_runs(dirs, baseline));
    return 0;
  } catch (const RoundFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
