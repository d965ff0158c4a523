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

#ifndef ARBITER_ENVIRONMENTS_HPP_
#define ARBITER_ENVIRONMENTS_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arbiter/implicit_diff.hpp"

namespace arbiter {

// --- Confrontation payoff ----------------------------------------------------

// r0 = (v0/|v0|) M (v1/|v1|)' with the cyclic antisymmetric matrix
// M = [[0,-1,1],[1,0,-1],[-1,1,0]] (rock, paper, scissors). Euclidean norms.
// Throws DomainError when an inventory is all zero.
double rws_payoff(const Vec& inv0, const Vec& inv1);

// --- Shared grid-environment metadata ---------------------------------------

// Maps tabular states back to grid occupancy for the exploration objective.
struct GridEnvInfo {
  int g_total = 0;
  // Per state: grid cells of (player 1, player 2); (-1,-1) for absorbing.
  std::vector<std::pair<int, int>> cells;
};

// --- Running-with-scissors ---------------------------------------------------

struct RwsPool {
  int cell;
  int resource;  // 0 rock, 1 paper, 2 scissors
};
struct RwsCoin {
  int cell;
  double fixed_bonus = 0.0;  // used when theta_index < 0
  int theta_index = -1;      // >= 0 selects the incentive coordinate
};

struct RwsConfig {
  int side = 3;
  std::vector<RwsPool> pools;  // at least one per resource kind
  // true: pools sit on the grid and deplete on pickup; false: their
  // contents are dealt into the initial inventories (no on-grid resources).
  bool pools_on_grid = true;
  int inventory_cap = 2;
  int horizon = 8;
  double gamma = 0.3;
  std::vector<RwsCoin> coins;
  std::array<int, 2> spawn_cells = {-1, -1};  // -1: random over free cells
  std::array<std::array<int, 3>, 2> initial_inventory = {{{1, 1, 1}, {1, 1, 1}}};
  double theta_lo = 0.0, theta_hi = 0.5;
  std::int64_t tabular_cap = 300000;
  std::uint64_t seed = 0;
};

// Lazy full-observability joint-state model. Time is part of the state so
// the terminal-step confrontation payoff stays Markov; the last index is the
// absorbing post-horizon state.
class RwsModel {
 public:
  explicit RwsModel(RwsConfig config);

  const RwsConfig& config() const { return config_; }
  std::int64_t n_states() const { return n_states_; }
  int n_actions() const { return 4; }
  int n_params() const { return n_params_; }
  int g_total() const { return side_ * side_; }

  struct StepOut {
    std::int64_t next;
    double base_reward;           // player-1 reward
    std::vector<double> features; // player-1 feature pickups, one per theta
  };
  StepOut step(std::int64_t state, int a1, int a2) const;

  std::vector<std::pair<std::int64_t, double>> initial_states() const;
  std::pair<int, int> cells(std::int64_t state) const;
  bool is_absorbing(std::int64_t state) const { return state == n_states_ - 1; }

  // Factor breakdown of the state count (excluding the absorbing state):
  // positions^2 * coin flags * pool flags * inventory combos * horizon.
  std::int64_t product_state_count() const;

 private:
  struct Decoded {
    int pos1, pos2, coin_mask, pool_mask, inv_id, t;
  };
  Decoded decode(std::int64_t state) const;
  std::int64_t encode(const Decoded& d) const;
  std::array<std::array<int, 3>, 2> inventories(int inv_id) const;
  int inv_id_of(const std::array<std::array<int, 3>, 2>& inv) const;

  RwsConfig config_;
  int side_;
  int n_params_;
  int n_coins_, n_pools_;
  std::int64_t n_positions_, n_inv_, n_states_;
};

struct RwsBuild {
  std::shared_ptr<RwsModel> model;
  // Materialized only when the state count fits the tabular cap.
  std::shared_ptr<TabularMarkovGame> game;
  std::shared_ptr<IncentiveScheme> scheme;
  GridEnvInfo info;
  bool tabular = false;
};

// Materializes the model when it fits config.tabular_cap; otherwise returns
// the sampler-only model with `tabular = false`.
RwsBuild build_rws(const RwsConfig& config);

// Desk-scale presets: the 3x3 canonical instance (sampler-only at cap 2,
// horizon 8) and the tiny 2x2 tabular instance used for gradient work.
RwsConfig rws_canonical_config();
RwsConfig rws_lite_config();

// --- Predator-prey -----------------------------------------------------------

struct PpPool {
  int cell;
  double fixed_bonus = 0.1;  // used when theta_index < 0
  int theta_index = -1;
};

struct PpConfig {
  int side = 4;
  int nest_cell = 0;
  std::vector<int> shelter_cells;
  std::vector<PpPool> pools;
  int horizon = 25;
  double gamma = 0.6;
  std::array<int, 2> spawn_cells = {-1, -1};  // predator, prey
  double theta_lo = 0.0, theta_hi = 0.5;
  std::int64_t tabular_cap = 300000;
};

struct PpBuild {
  std::shared_ptr<TabularMarkovGame> game;
  std::shared_ptr<IncentiveScheme> scheme;
  GridEnvInfo info;
};

// Absorbing-state encoding of the pursuit game: catch pays the predator +1,
// the prey reaching its nest pays the predator -1, pool pickups add the
// incentive features. Predator moves one or two cells, prey one; neither may
// stop on a shelter.
PpBuild build_pp(const PpConfig& config);

PpConfig pp_pursuit_config();  // no pools; oracle cross-check instance
PpConfig pp_lite_config();     // two fixed + two incentive pools

// --- Exploration-rate designer objective -------------------------------------

struct ExplorationResult {
  double value = 0.0;  // f = 1 - ER
  Vec grad_phi;        // score-function estimate in the phi layout
  Vec grad_theta;      // identically zero: ER has no direct theta dependence
};

// Monte-Carlo estimate over `budget` sampled episodes with a mean baseline
// on the score-function term. union_semantics counts each grid cell once
// across both players; the literal flag sums per-player counts instead.
ExplorationResult exploration_objective(const TabularMarkovGame& game,
                                        const GridEnvInfo& info,
                                        const IncentiveScheme& scheme,
                                        const Vec& theta,
                                        const SoftmaxPolicyPair& policy,
                                        int budget, RngStream rng,
                                        bool union_semantics = true);

// Exact expectation by trajectory enumeration (grids up to 64 cells).
ExplorationResult exploration_objective_exact(const TabularMarkovGame& game,
                                              const GridEnvInfo& info,
                                              const IncentiveScheme& scheme,
                                              const Vec& theta,
                                              const SoftmaxPolicyPair& policy,
                                              bool union_semantics = true,
                                              std::int64_t max_paths = 2000000);

// --- Synthetic bi-level benchmark --------------------------------------------

struct SyntheticConfig {
  Mat stage_payoff;   // A0; defaults to matching pennies
  Mat incentive_dir;  // G; stage payoff is A0 + theta G
  double p_target = 0.65;
  double reg_coeff = 0.05;
  double lambda = 0.5;
  double gamma = 0.9;
  int horizon = 5;
  double theta_lo = -1.0, theta_hi = 1.0;

  SyntheticConfig();
};

// --- Canonical two-state test game -------------------------------------------

std::pair<TabularMarkovGame, IncentiveScheme> build_twostate(int horizon = 3);
Vec twostate_canonical_theta();
SoftmaxPolicyPair twostate_canonical_policy();

// --- Packaged environments for the upper level -------------------------------

struct BuiltEnvironment {
  std::shared_ptr<TabularMarkovGame> game;
  std::shared_ptr<IncentiveScheme> scheme;
  DesignerObjective objective;
  GridEnvInfo info;          // empty for non-grid environments
  double lambda = 0.1;       // canonical regularization of the instance
  Vec theta0;
  std::string kind;
};

BuiltEnvironment build_synthetic_environment(const SyntheticConfig& config = {});

struct ExplorationObjectiveSpec {
  bool exact = true;  // enumerate when feasible, otherwise Monte-Carlo
  int budget = 4000;
  std::uint64_t seed = 1;
  bool union_semantics = true;
};

BuiltEnvironment build_rws_environment(
    const RwsConfig& config, const ExplorationObjectiveSpec& objective = {});
BuiltEnvironment build_pp_environment(
    const PpConfig& config, const ExplorationObjectiveSpec& objective = {});

// (pi1(a|s) - p)^2 + c |theta|^2 objective used by the synthetic instance
// and as a generic target for small games.
DesignerObjective make_policy_target_objective(const TabularMarkovGame& game,
                                               int target_state,
                                               int target_action,
                                               double p_target,
                                               double reg_coeff);

BuiltEnvironment build_twostate_environment(int horizon = 3);

}  // namespace arbiter

#endif  // ARBITER_ENVIRONMENTS_HPP_
