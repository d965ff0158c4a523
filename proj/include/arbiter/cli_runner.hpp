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

#ifndef ARBITER_CLI_RUNNER_HPP_
#define ARBITER_CLI_RUNNER_HPP_

#include <optional>
#include <string>

#include <json.hpp>

#include "arbiter/arbitration.hpp"

namespace arbiter::cli {

// Shared command-line options: config path plus overrides.
struct RunOptions {
  std::string config_path;
  std::string out_dir;                     // overrides config "out"
  std::optional<std::uint64_t> seed;       // overrides config "seed"
  int threads = 1;
  bool corrupt_gradcheck = false;  // test hook: taints one Hessian entry
};

// Subcommand entry points; each writes config.resolved.json plus its
// artifacts into the run directory and returns a process exit code.
int run_solve(const RunOptions& options);
int run_gradcheck(const RunOptions& options);
int run_arbitrate(const RunOptions& options);
int run_env_export(const RunOptions& options);

// Exposed for tests.
nlohmann::json resolve_config(const nlohmann::json& raw);
BuiltEnvironment build_environment_from_config(const nlohmann::json& resolved);
SolveConfig solve_config_from_json(const nlohmann::json& resolved,
                                   double default_lambda);
std::string format_double(double v);  // deterministic shortest-roundtrip-ish

inline constexpr int kHistorySchemaVersion = 1;
std::string history_csv_header(int n_theta);

}  // namespace arbiter::cli

#endif  // ARBITER_CLI_RUNNER_HPP_
