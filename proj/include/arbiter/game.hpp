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

#ifndef ARBITER_GAME_HPP_
#define ARBITER_GAME_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "arbiter/common.hpp"
#include "arbiter/rng.hpp"

namespace arbiter {

// Sparse distribution over successor states for one (s, a1, a2).
struct TransitionRow {
  std::vector<std::pair<int, double>> entries;  // (next state, probability)
};

// Finite two-player zero-sum Markov game over tabular state/action spaces.
// Player 1 maximizes the stored reward, player 2 receives its negation.
// Values are evaluated over a finite horizon T with discounting inside the
// sum. States flagged terminal are absorbing bookkeeping states: they carry
// zero reward, self-loop, and hold no policy parameters (policies there stay
// uniform by the zero-logit convention).
class TabularMarkovGame {
 public:
  TabularMarkovGame(int n_states, int n_actions_1, int n_actions_2,
                    std::vector<TransitionRow> transition,
                    std::vector<double> base_reward, double gamma, int horizon,
                    Vec rho0, std::vector<std::uint8_t> terminal = {});

  int n_states() const { return n_states_; }
  int n_actions_1() const { return n_actions_1_; }
  int n_actions_2() const { return n_actions_2_; }
  int n_actions(int player) const { return player == 1 ? n_actions_1_ : n_actions_2_; }
  double gamma() const { return gamma_; }
  int horizon() const { return horizon_; }
  const Vec& rho0() const { return rho0_; }

  const TransitionRow& next(int s, int a1, int a2) const {
    return transition_[joint_index(s, a1, a2)];
  }
  double base_reward(int s, int a1, int a2) const {
    return base_reward_[joint_index(s, a1, a2)];
  }
  bool is_terminal(int s) const { return terminal_[s] != 0; }

  int joint_index(int s, int a1, int a2) const {
    return (s * n_actions_1_ + a1) * n_actions_2_ + a2;
  }

  // gamma^T / (1 - gamma): scale of the tail dropped when an
  // infinite-horizon value is compared against the horizon-T one.
  double truncation_factor() const;

 private:
  int n_states_, n_actions_1_, n_actions_2_;
  std::vector<TransitionRow> transition_;
  std::vector<double> base_reward_;
  double gamma_;
  int horizon_;
  Vec rho0_;
  std::vector<std::uint8_t> terminal_;
};

// Linear reward perturbation r(s,a;theta) = base(s,a) + sum_j theta_j g_j(s,a)
// applied to player 1 and negated for player 2, with a box constraint on
// theta and a declared bound B on the perturbed reward.
class IncentiveScheme {
 public:
  // features[j] is a dense tensor indexed like the game's joint index.
  IncentiveScheme(int n_states, int n_actions_1, int n_actions_2,
                  std::vector<std::vector<double>> features,
                  std::vector<std::pair<double, double>> theta_bounds,
                  double reward_bound = 2.0);

  // Scheme with no incentive parameters (m = 0).
  static IncentiveScheme empty(const TabularMarkovGame& game);

  int n_params() const { return static_cast<int>(features_.size()); }
  double feature(int j, int s, int a1, int a2) const {
    return features_[j][(s * n_actions_1_ + a1) * n_actions_2_ + a2];
  }
  const std::vector<double>& feature_tensor(int j) const { return features_[j]; }
  const std::vector<std::pair<double, double>>& theta_bounds() const {
    return theta_bounds_;
  }
  double reward_bound() const { return reward_bound_; }

  bool theta_in_bounds(const Vec& theta) const;
  void require_theta(const Vec& theta) const;
  Vec clamp_theta(const Vec& theta) const;

  // Checks |base| + sum_j max(|lo_j|,|hi_j|) |g_j| <= B over all entries.
  void validate_bound(const TabularMarkovGame& game) const;

 private:
  int n_states_, n_actions_1_, n_actions_2_;
  std::vector<std::vector<double>> features_;
  std::vector<std::pair<double, double>> theta_bounds_;
  double reward_bound_;
};

// Maps (player, state, free action) to coordinates of the stacked policy
// parameter phi = (phi1, phi2). The last action's logit at every state is
// pinned to zero and terminal states hold no parameters, which keeps the
// parameterization minimal.
class PolicyParamLayout {
 public:
  explicit PolicyParamLayout(const TabularMarkovGame& game);

  int d1() const { return d1_; }
  int d2() const { return d2_; }
  int d() const { return d1_ + d2_; }
  int d_player(int player) const { return player == 1 ? d1_ : d2_; }

  // Player-local index of the free logit (s, a); -1 when s is terminal.
  int local_index(int player, int s, int a) const;
  // Index into the stacked phi vector; -1 when s is terminal.
  int global_index(int player, int s, int a) const;
  // Offset of the player's block inside phi.
  int player_offset(int player) const { return player == 1 ? 0 : d1_; }

  int state_offset(int player, int s) const {
    return player == 1 ? offsets1_[s] : offsets2_[s];
  }
  int free_actions(int player) const {
    return (player == 1 ? na1_ : na2_) - 1;
  }

 private:
  int na1_, na2_;
  int d1_, d2_;
  std::vector<int> offsets1_, offsets2_;  // -1 for terminal states
};

// Softmax policy pair with per-state logit tables; the last action's logit
// at each state is pinned to zero.
class SoftmaxPolicyPair {
 public:
  // Uniform policies (all logits zero).
  SoftmaxPolicyPair(int n_states, int n_actions_1, int n_actions_2);

  static SoftmaxPolicyPair uniform(const TabularMarkovGame& game) {
    return SoftmaxPolicyPair(game.n_states(), game.n_actions_1(),
                             game.n_actions_2());
  }
  // Logit recovery from strictly positive per-state distributions:
  // z[s][a] = log p(a|s) - log p(last|s).
  static SoftmaxPolicyPair from_distributions(
      const std::vector<Vec>& dist1, const std::vector<Vec>& dist2);

  int n_states() const { return n_states_; }
  int n_actions(int player) const { return player == 1 ? na1_ : na2_; }

  double logit(int player, int s, int a) const;  // 0 for the pinned action
  void set_logit(int player, int s, int a, double value);

  Vec probs(int player, int s) const;
  Vec log_probs(int player, int s) const;
  double prob(int player, int s, int a) const { return probs(player, s)[a]; }

  // Stacked parameter vector (decision states only, per the layout).
  Vec to_phi(const PolicyParamLayout& layout) const;
  void set_phi(const PolicyParamLayout& layout, const Vec& phi);

  // Flat tables of probabilities / log-probabilities for hot loops:
  // index [s * n_actions + a].
  struct Tables {
    std::vector<double> p1, logp1, p2, logp2;
  };
  Tables tables() const;

 private:
  int n_states_, na1_, na2_;
  std::vector<double> z1_, z2_;  // [s * (na - 1) + a]
};

// One sampled episode: T steps plus the terminal state, with the player-1
// perturbed reward cached per step.
struct TrajectoryStep {
  int s, a1, a2;
  double reward;
};
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  int terminal_state = -1;

  double total_discounted_reward(double gamma) const {
    double total = 0.0, g = 1.0;
    for (const auto& st : steps) {
      total += g * st.reward;
      g *= gamma;
    }
    return total;
  }
};

// --- Reward and value evaluation -------------------------------------------

// Player-1 perturbed reward base + theta . g. Throws on out-of-range indices
// and on theta outside the scheme's box.
double perturbed_reward(const TabularMarkovGame& game,
                        const IncentiveScheme& scheme, const Vec& theta, int s,
                        int a1, int a2);

// Signed perturbed reward for the given player (player 2 gets the negation).
double perturbed_reward_for(const TabularMarkovGame& game,
                            const IncentiveScheme& scheme, const Vec& theta,
                            int s, int a1, int a2, int player);

// Entropy-regularized reward r^(i) = r^i - lambda log pi^i + lambda log pi^-i.
double regularized_reward(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme, const Vec& theta,
                          const SoftmaxPolicyPair& policy, double lambda, int s,
                          int a1, int a2, int player);

// Exact horizon-T value of the policy pair for the given player, by backward
// induction; entry [s] is the value started from s.
Vec evaluate_value(const TabularMarkovGame& game, const IncentiveScheme& scheme,
                   const Vec& theta, const SoftmaxPolicyPair& policy,
                   double lambda, int player);

// Samples one episode: s0 ~ rho0, actions from the policies, next states
// from the transition kernel. Deterministic given the stream state.
Trajectory sample_trajectory(const TabularMarkovGame& game,
                             const IncentiveScheme& scheme, const Vec& theta,
                             const SoftmaxPolicyPair& policy, RngStream& rng);

// Same, with a forced initial state.
Trajectory sample_trajectory_from(const TabularMarkovGame& game,
                                  const IncentiveScheme& scheme,
                                  const Vec& theta,
                                  const SoftmaxPolicyPair& policy, int s0,
                                  RngStream& rng);

// Normalized discounted state occupancy
// nu(s) ∝ sum_{t<T} gamma^t Pr(s_t = s), by exact forward recursion.
Vec occupancy_measure(const TabularMarkovGame& game,
                      const SoftmaxPolicyPair& policy);

// Exact state-probability marginals Pr(s_t = s) for t = 0..T.
std::vector<Vec> state_marginals(const TabularMarkovGame& game,
                                 const SoftmaxPolicyPair& policy);

// --- Best response and exploitability ---------------------------------------

struct BestResponse {
  Vec value;                              // V_0 per start state
  std::vector<std::vector<Vec>> policy;   // [t][s] action distribution
};

// Value of the best response of `player` against the opponent's fixed policy
// in the entropy-regularized horizon-T game. For lambda > 0 the per-state
// maximizer is the softmax of the regularized Q-values (log-sum-exp value);
// for lambda = 0 it is the greedy argmax with lowest-index tie-breaking.
BestResponse best_response_value(const TabularMarkovGame& game,
                                 const IncentiveScheme& scheme,
                                 const Vec& theta,
                                 const SoftmaxPolicyPair& opponent_policy,
                                 double lambda, int player);

// E_rho0[BR value of player 1 vs pi2] + E_rho0[BR value of player 2 vs pi1].
// Non-negative up to numerical slack; zero exactly at the regularized NE.
double exploitability(const TabularMarkovGame& game,
                      const IncentiveScheme& scheme, const Vec& theta,
                      const SoftmaxPolicyPair& policy, double lambda);

// Infinite-horizon (discounted, stationary) counterparts used by the solver
// certificates; best-response values are iterated to the fixed point.
Vec evaluate_value_inf(const TabularMarkovGame& game,
                       const IncentiveScheme& scheme, const Vec& theta,
                       const SoftmaxPolicyPair& policy, double lambda,
                       int player, double tol = 1e-13);
Vec best_response_value_inf(const TabularMarkovGame& game,
                            const IncentiveScheme& scheme, const Vec& theta,
                            const SoftmaxPolicyPair& opponent_policy,
                            double lambda, int player, double tol = 1e-13);
// max_s [BR1(s) + BR2(s)] for the infinite-horizon regularized game.
double exploitability_inf(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme, const Vec& theta,
                          const SoftmaxPolicyPair& policy, double lambda,
                          double tol = 1e-13);

}  // namespace arbiter

#endif  // ARBITER_GAME_HPP_
