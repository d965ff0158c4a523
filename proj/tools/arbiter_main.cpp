// Copyright 2026 The Arbiter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>

#include <CLI11.hpp>

#include "arbiter/cli_runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Incentive design on tabular zero-sum Markov games"};
  app.require_subcommand(1);

  arbiter::cli::RunOptions options;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", options.config_path, "experiment config JSON")
        ->required();
    cmd->add_option("--out", options.out_dir, "output directory override");
    cmd->add_option("--seed", seed, "master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--threads", options.threads, "worker threads")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the lower-level NE");
  add_common(solve);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference validation of every gradient block");
  add_common(gradcheck);
  gradcheck->add_flag("--self-test-corrupt", options.corrupt_gradcheck)
      ->group("");  // hidden: negative-control hook for tests

  CLI::App* arbitrate =
      app.add_subcommand("arbitrate", "run the upper-level optimizer");
  add_common(arbitrate);

  CLI::App* env = app.add_subcommand("env", "environment utilities");
  CLI::App* env_export =
      env->add_subcommand("export", "write the built game as JSON");
  add_common(env_export);

  CLI11_PARSE(app, argc, argv);
  if (seed_set) options.seed = seed;

  try {
    if (solve->parsed()) return arbiter::cli::run_solve(options);
    if (gradcheck->parsed()) return arbiter::cli::run_gradcheck(options);
    if (arbitrate->parsed()) return arbiter::cli::run_arbitrate(options);
    if (env->parsed() && env_export->parsed()) {
      return arbiter::cli::run_env_export(options);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "no subcommand\n";
  return 2;
}
