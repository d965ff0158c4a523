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
//
// Test-only oracles, kept independent of the library's solver and
// enumeration code paths they are used to check.

#ifndef ARBITER_TESTS_SUPPORT_ORACLES_HPP_
#define ARBITER_TESTS_SUPPORT_ORACLES_HPP_

#include <utility>
#include <vector>

#include "arbiter/game.hpp"

namespace arbiter::oracles {

// Damped fixed-point iteration pi1 ∝ exp([A pi2]/lambda),
// pi2 ∝ exp(-[A' pi1]/lambda) for the unique QRE of the regularized matrix
// game (lambda > 0).
std::pair<Vec, Vec> qre_fixed_point(const Mat& payoff, double lambda,
                                    double tol = 1e-13, int max_iter = 2000000,
                                    double damping = 0.5);

// Value of the regularized matrix game at the QRE.
double qre_value(const Mat& payoff, double lambda);

// Horizon-T value of a policy pair by direct trajectory enumeration of the
// discounted (regularized) reward sum; independent of backward induction.
double enumerate_value(const TabularMarkovGame& game,
                       const IncentiveScheme& scheme, const Vec& theta,
                       const SoftmaxPolicyPair& policy, double lambda,
                       int player, int start_state);

// Exact number of positive-probability trajectories from the state.
long long enumerate_trajectory_count(const TabularMarkovGame& game,
                                     int start_state);

// Nonstationary finite-horizon NE values by backward induction with a
// per-stage QRE solve; returns V_t for t = 0..T (player 1).
std::vector<Vec> backward_induction_values(const TabularMarkovGame& game,
                                           const IncentiveScheme& scheme,
                                           const Vec& theta, double lambda);

// Random dense game for solver sweeps: row-stochastic transitions, rewards
// in [-1, 1], no incentive features.
std::pair<TabularMarkovGame, IncentiveScheme> random_game(
    int n_states, int n_actions_1, int n_actions_2, double gamma, int horizon,
    std::uint64_t seed);

// Rock-paper-scissors stage payoff.
Mat rps_matrix();

SoftmaxPolicyPair random_policy(const TabularMarkovGame& game,
                                std::uint64_t seed, double scale = 1.0);

}  // namespace arbiter::oracles

#endif  // ARBITER_TESTS_SUPPORT_ORACLES_HPP_
