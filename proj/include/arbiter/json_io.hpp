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

#ifndef ARBITER_JSON_IO_HPP_
#define ARBITER_JSON_IO_HPP_

#include <string>
#include <utility>

#include <json.hpp>

#include "arbiter/game.hpp"

namespace arbiter {

// Document layout:
// {
//   "states": S, "actions": [n1, n2], "gamma": g, "horizon": T,
//   "rho0": [...],
//   "transition": [[[ [p(s'=0), ...], ... a2 ], ... a1 ], ... s],
//   "base_reward": [[[r, ...], ...], ...],
//   "features": [tensor like base_reward, ... m],
//   "theta_bounds": [[lo, hi], ...],
//   "terminal": [0/1, ...],          optional
//   "reward_bound": B                optional (default 2.0)
// }
// Probabilities are validated on load.
std::pair<TabularMarkovGame, IncentiveScheme> game_from_json(
    const nlohmann::json& doc);
nlohmann::json game_to_json(const TabularMarkovGame& game,
                            const IncentiveScheme& scheme);

std::pair<TabularMarkovGame, IncentiveScheme> load_game_file(
    const std::string& path);
void save_game_file(const std::string& path, const TabularMarkovGame& game,
                    const IncentiveScheme& scheme);

// Small file helpers shared by the CLI.
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& doc);
void write_text_file(const std::string& path, const std::string& text);

// Serializers for in-process diagnostics.
struct MatrixSolveDiagnostics;
struct ValueGradBundle;
nlohmann::json matrix_diagnostics_to_json(const MatrixSolveDiagnostics& diag);
nlohmann::json bundle_to_json(const ValueGradBundle& bundle);

}  // namespace arbiter

#endif  // ARBITER_JSON_IO_HPP_
