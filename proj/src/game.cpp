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

#include "arbiter/game.hpp"

#include <algorithm>
#include <cmath>

namespace arbiter {

namespace {

// One validated dense player-1 reward table r[joint] = base + theta . g.
std::vector<double> perturbed_table(const TabularMarkovGame& game,
                                    const IncentiveScheme& scheme,
                                    const Vec& theta) {
  scheme.require_theta(theta);
  const int n = game.n_states() * game.n_actions_1() * game.n_actions_2();
  std::vector<double> r(n);
  for (int idx = 0; idx < n; ++idx) {
    const int a2 = idx % game.n_actions_2();
    const int rest = idx / game.n_actions_2();
    const int a1 = rest % game.n_actions_1();
    const int s = rest / game.n_actions_1();
    double v = game.base_reward(s, a1, a2);
    for (int j = 0; j < scheme.n_params(); ++j) {
      v += theta[j] * scheme.feature(j, s, a1, a2);
    }
    r[idx] = v;
  }
  return r;
}

}  // namespace

TabularMarkovGame::TabularMarkovGame(int n_states, int n_actions_1,
                                     int n_actions_2,
                                     std::vector<TransitionRow> transition,
                                     std::vector<double> base_reward,
                                     double gamma, int horizon, Vec rho0,
                                     std::vector<std::uint8_t> terminal)
    : n_states_(n_states),
      n_actions_1_(n_actions_1),
      n_actions_2_(n_actions_2),
      transition_(std::move(transition)),
      base_reward_(std::move(base_reward)),
      gamma_(gamma),
      horizon_(horizon),
      rho0_(std::move(rho0)),
      terminal_(std::move(terminal)) {
  ARB_CHECK(n_states_ >= 1 && n_actions_1_ >= 1 && n_actions_2_ >= 1,
            "state/action counts");
  ARB_CHECK(gamma_ >= 0.0 && gamma_ < 1.0, "gamma must be in [0,1)");
  ARB_CHECK(horizon_ >= 1, "horizon must be positive");
  const std::size_t joint =
      static_cast<std::size_t>(n_states_) * n_actions_1_ * n_actions_2_;
  ARB_CHECK(transition_.size() == joint, "transition tensor size");
  ARB_CHECK(base_reward_.size() == joint, "reward tensor size");
  ARB_CHECK(rho0_.size() == n_states_, "rho0 size");
  if (terminal_.empty()) terminal_.assign(n_states_, 0);
  ARB_CHECK(static_cast<int>(terminal_.size()) == n_states_, "terminal mask size");

  for (const auto& row : transition_) {
    double sum = 0.0;
    for (const auto& [ns, p] : row.entries) {
      check_index(ns, n_states_, "next state");
      if (p < 0.0) throw DomainError("negative transition probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
      throw DomainError("transition row does not sum to 1");
    }
  }
  for (double r : base_reward_) {
    if (std::abs(r) > 1.0 + kProbTol) {
      throw DomainError("base reward outside [-1, 1]");
    }
  }
  double mass = 0.0;
  for (int s = 0; s < n_states_; ++s) {
    if (rho0_[s] < 0.0) throw DomainError("negative rho0 entry");
    mass += rho0_[s];
  }
  if (std::abs(mass - 1.0) > kProbTol) {
    throw DomainError("rho0 does not sum to 1");
  }
  for (int s = 0; s < n_states_; ++s) {
    if (!terminal_[s]) continue;
    for (int a1 = 0; a1 < n_actions_1_; ++a1) {
      for (int a2 = 0; a2 < n_actions_2_; ++a2) {
        const auto& row = next(s, a1, a2);
        const bool self_loop = row.entries.size() == 1 &&
                               row.entries[0].first == s &&
                               std::abs(row.entries[0].second - 1.0) <= kProbTol;
        ARB_CHECK(self_loop, "terminal state must self-loop");
        ARB_CHECK(base_reward_[joint_index(s, a1, a2)] == 0.0,
                  "terminal state must have zero reward");
      }
    }
  }
}

double TabularMarkovGame::truncation_factor() const {
  return std::pow(gamma_, horizon_) / (1.0 - gamma_);
}

IncentiveScheme::IncentiveScheme(
    int n_states, int n_actions_1, int n_actions_2,
    std::vector<std::vector<double>> features,
    std::vector<std::pair<double, double>> theta_bounds, double reward_bound)
    : n_states_(n_states),
      n_actions_1_(n_actions_1),
      n_actions_2_(n_actions_2),
      features_(std::move(features)),
      theta_bounds_(std::move(theta_bounds)),
      reward_bound_(reward_bound) {
  ARB_CHECK(features_.size() == theta_bounds_.size(),
            "one theta bound per feature");
  const std::size_t joint =
      static_cast<std::size_t>(n_states_) * n_actions_1_ * n_actions_2_;
  for (const auto& g : features_) {
    ARB_CHECK(g.size() == joint, "feature tensor size");
  }
  for (const auto& [lo, hi] : theta_bounds_) {
    ARB_CHECK(lo <= hi, "theta bound interval");
  }
}

IncentiveScheme IncentiveScheme::empty(const TabularMarkovGame& game) {
  return IncentiveScheme(game.n_states(), game.n_actions_1(),
                         game.n_actions_2(), {}, {});
}

bool IncentiveScheme::theta_in_bounds(const Vec& theta) const {
  if (theta.size() != n_params()) return false;
  for (int j = 0; j < n_params(); ++j) {
    if (theta[j] < theta_bounds_[j].first - 1e-12 ||
        theta[j] > theta_bounds_[j].second + 1e-12) {
      return false;
    }
  }
  return true;
}

void IncentiveScheme::require_theta(const Vec& theta) const {
  ARB_CHECK(theta.size() == n_params(), "theta dimension");
  if (!theta_in_bounds(theta)) throw DomainError("theta outside its box");
}

Vec IncentiveScheme::clamp_theta(const Vec& theta) const {
  ARB_CHECK(theta.size() == n_params(), "theta dimension");
  Vec out = theta;
  for (int j = 0; j < n_params(); ++j) {
    out[j] = std::clamp(out[j], theta_bounds_[j].first, theta_bounds_[j].second);
  }
  return out;
}

void IncentiveScheme::validate_bound(const TabularMarkovGame& game) const {
  const int n = game.n_states() * game.n_actions_1() * game.n_actions_2();
  for (int idx = 0; idx < n; ++idx) {
    const int a2 = idx % game.n_actions_2();
    const int rest = idx / game.n_actions_2();
    const int a1 = rest % game.n_actions_1();
    const int s = rest / game.n_actions_1();
    double worst = std::abs(game.base_reward(s, a1, a2));
    for (int j = 0; j < n_params(); ++j) {
      const double m = std::max(std::abs(theta_bounds_[j].first),
                                std::abs(theta_bounds_[j].second));
      worst += m * std::abs(feature(j, s, a1, a2));
    }
    if (worst > reward_bound_ + 1e-9) {
      throw DomainError("perturbed reward can exceed the declared bound");
    }
  }
}

PolicyParamLayout::PolicyParamLayout(const TabularMarkovGame& game)
    : na1_(game.n_actions_1()), na2_(game.n_actions_2()) {
  offsets1_.assign(game.n_states(), -1);
  offsets2_.assign(game.n_states(), -1);
  int off1 = 0, off2 = 0;
  for (int s = 0; s < game.n_states(); ++s) {
    if (game.is_terminal(s)) continue;
    offsets1_[s] = off1;
    offsets2_[s] = off2;
    off1 += na1_ - 1;
    off2 += na2_ - 1;
  }
  d1_ = off1;
  d2_ = off2;
}

int PolicyParamLayout::local_index(int player, int s, int a) const {
  const int na = player == 1 ? na1_ : na2_;
  if (a >= na - 1) return -1;  // pinned action
  const int off = player == 1 ? offsets1_[s] : offsets2_[s];
  if (off < 0) return -1;  // terminal state
  return off + a;
}

int PolicyParamLayout::global_index(int player, int s, int a) const {
  const int local = local_index(player, s, a);
  if (local < 0) return -1;
  return player_offset(player) + local;
}

SoftmaxPolicyPair::SoftmaxPolicyPair(int n_states, int n_actions_1,
                                     int n_actions_2)
    : n_states_(n_states), na1_(n_actions_1), na2_(n_actions_2) {
  z1_.assign(static_cast<std::size_t>(n_states_) * (na1_ - 1), 0.0);
  z2_.assign(static_cast<std::size_t>(n_states_) * (na2_ - 1), 0.0);
}

SoftmaxPolicyPair SoftmaxPolicyPair::from_distributions(
    const std::vector<Vec>& dist1, const std::vector<Vec>& dist2) {
  ARB_CHECK(!dist1.empty() && dist1.size() == dist2.size(),
            "one distribution per state");
  const int n_states = static_cast<int>(dist1.size());
  const int na1 = static_cast<int>(dist1[0].size());
  const int na2 = static_cast<int>(dist2[0].size());
  SoftmaxPolicyPair pair(n_states, na1, na2);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a + 1 < na1; ++a) {
      ARB_CHECK(dist1[s][a] > 0.0 && dist1[s][na1 - 1] > 0.0,
                "distribution must be strictly positive");
      pair.set_logit(1, s, a, std::log(dist1[s][a]) - std::log(dist1[s][na1 - 1]));
    }
    for (int a = 0; a + 1 < na2; ++a) {
      ARB_CHECK(dist2[s][a] > 0.0 && dist2[s][na2 - 1] > 0.0,
                "distribution must be strictly positive");
      pair.set_logit(2, s, a, std::log(dist2[s][a]) - std::log(dist2[s][na2 - 1]));
    }
  }
  return pair;
}

double SoftmaxPolicyPair::logit(int player, int s, int a) const {
  const int na = n_actions(player);
  check_index(s, n_states_, "state");
  check_index(a, na, "action");
  if (a == na - 1) return 0.0;
  const auto& z = player == 1 ? z1_ : z2_;
  return z[static_cast<std::size_t>(s) * (na - 1) + a];
}

void SoftmaxPolicyPair::set_logit(int player, int s, int a, double value) {
  const int na = n_actions(player);
  check_index(s, n_states_, "state");
  check_index(a, na - 1, "free action");
  auto& z = player == 1 ? z1_ : z2_;
  z[static_cast<std::size_t>(s) * (na - 1) + a] = value;
}

Vec SoftmaxPolicyPair::log_probs(int player, int s) const {
  const int na = n_actions(player);
  Vec z(na);
  for (int a = 0; a < na; ++a) z[a] = logit(player, s, a);
  const double lse = log_sum_exp(z);
  return z.array() - lse;
}

Vec SoftmaxPolicyPair::probs(int player, int s) const {
  return log_probs(player, s).array().exp();
}

Vec SoftmaxPolicyPair::to_phi(const PolicyParamLayout& layout) const {
  Vec phi = Vec::Zero(layout.d());
  for (int player = 1; player <= 2; ++player) {
    for (int s = 0; s < n_states_; ++s) {
      for (int a = 0; a + 1 < n_actions(player); ++a) {
        const int idx = layout.global_index(player, s, a);
        if (idx >= 0) phi[idx] = logit(player, s, a);
      }
    }
  }
  return phi;
}

void SoftmaxPolicyPair::set_phi(const PolicyParamLayout& layout,
                                const Vec& phi) {
  ARB_CHECK(phi.size() == layout.d(), "phi dimension");
  for (int player = 1; player <= 2; ++player) {
    for (int s = 0; s < n_states_; ++s) {
      for (int a = 0; a + 1 < n_actions(player); ++a) {
        const int idx = layout.global_index(player, s, a);
        if (idx >= 0) set_logit(player, s, a, phi[idx]);
      }
    }
  }
}

SoftmaxPolicyPair::Tables SoftmaxPolicyPair::tables() const {
  Tables t;
  t.p1.resize(static_cast<std::size_t>(n_states_) * na1_);
  t.logp1.resize(t.p1.size());
  t.p2.resize(static_cast<std::size_t>(n_states_) * na2_);
  t.logp2.resize(t.p2.size());
  for (int s = 0; s < n_states_; ++s) {
    const Vec lp1 = log_probs(1, s);
    const Vec lp2 = log_probs(2, s);
    for (int a = 0; a < na1_; ++a) {
      t.logp1[s * na1_ + a] = lp1[a];
      t.p1[s * na1_ + a] = std::exp(lp1[a]);
    }
    for (int a = 0; a < na2_; ++a) {
      t.logp2[s * na2_ + a] = lp2[a];
      t.p2[s * na2_ + a] = std::exp(lp2[a]);
    }
  }
  return t;
}

// --- Operations --------------------------------------------------------------

double perturbed_reward(const TabularMarkovGame& game,
                        const IncentiveScheme& scheme, const Vec& theta, int s,
                        int a1, int a2) {
  check_index(s, game.n_states(), "state");
  check_index(a1, game.n_actions_1(), "action1");
  check_index(a2, game.n_actions_2(), "action2");
  scheme.require_theta(theta);
  double v = game.base_reward(s, a1, a2);
  for (int j = 0; j < scheme.n_params(); ++j) {
    v += theta[j] * scheme.feature(j, s, a1, a2);
  }
  return v;
}

double perturbed_reward_for(const TabularMarkovGame& game,
                            const IncentiveScheme& scheme, const Vec& theta,
                            int s, int a1, int a2, int player) {
  const double r = perturbed_reward(game, scheme, theta, s, a1, a2);
  return player == 1 ? r : -r;
}

double regularized_reward(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme, const Vec& theta,
                          const SoftmaxPolicyPair& policy, double lambda, int s,
                          int a1, int a2, int player) {
  ARB_CHECK(lambda >= 0.0, "lambda must be non-negative");
  const double r = perturbed_reward_for(game, scheme, theta, s, a1, a2, player);
  const int own_action = player == 1 ? a1 : a2;
  const int opp_action = player == 1 ? a2 : a1;
  const double log_own = policy.log_probs(player, s)[own_action];
  const double log_opp = policy.log_probs(3 - player, s)[opp_action];
  return r - lambda * log_own + lambda * log_opp;
}

Vec evaluate_value(const TabularMarkovGame& game, const IncentiveScheme& scheme,
                   const Vec& theta, const SoftmaxPolicyPair& policy,
                   double lambda, int player) {
  ARB_CHECK(lambda >= 0.0, "lambda must be non-negative");
  const auto r1 = perturbed_table(game, scheme, theta);
  const auto tab = policy.tables();
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  const double sign = player == 1 ? 1.0 : -1.0;

  Vec v = Vec::Zero(S);
  for (int t = game.horizon() - 1; t >= 0; --t) {
    Vec next = Vec::Zero(S);
    for (int s = 0; s < S; ++s) {
      double acc = 0.0;
      for (int a1 = 0; a1 < A1; ++a1) {
        const double p1 = tab.p1[s * A1 + a1];
        if (p1 == 0.0) continue;
        for (int a2 = 0; a2 < A2; ++a2) {
          const double p2 = tab.p2[s * A2 + a2];
          if (p2 == 0.0) continue;
          const double log_own =
              player == 1 ? tab.logp1[s * A1 + a1] : tab.logp2[s * A2 + a2];
          const double log_opp =
              player == 1 ? tab.logp2[s * A2 + a2] : tab.logp1[s * A1 + a1];
          double step = sign * r1[game.joint_index(s, a1, a2)] -
                        lambda * log_own + lambda * log_opp;
          double ev = 0.0;
          for (const auto& [ns, p] : game.next(s, a1, a2).entries) {
            ev += p * v[ns];
          }
          acc += p1 * p2 * (step + game.gamma() * ev);
        }
      }
      next[s] = acc;
    }
    v = std::move(next);
  }
  return v;
}

namespace {

int sample_from(const std::vector<double>& table, int offset, int n,
                RngStream& rng) {
  return rng.categorical(table.data() + offset, n);
}

Trajectory rollout(const TabularMarkovGame& game, const IncentiveScheme& scheme,
                   const Vec& theta, const SoftmaxPolicyPair& policy, int s0,
                   RngStream& rng) {
  scheme.require_theta(theta);
  const auto tab = policy.tables();
  const int A1 = game.n_actions_1(), A2 = game.n_actions_2();
  Trajectory traj;
  traj.steps.reserve(game.horizon());
  int s = s0;
  for (int t = 0; t < game.horizon(); ++t) {
    const int a1 = sample_from(tab.p1, s * A1, A1, rng);
    const int a2 = sample_from(tab.p2, s * A2, A2, rng);
    double r = game.base_reward(s, a1, a2);
    for (int j = 0; j < scheme.n_params(); ++j) {
      r += theta[j] * scheme.feature(j, s, a1, a2);
    }
    traj.steps.push_back({s, a1, a2, r});
    const auto& row = game.next(s, a1, a2).entries;
    double u = rng.next_double();
    int ns = row.back().first;
    for (const auto& [cand, p] : row) {
      u -= p;
      if (u < 0.0) {
        ns = cand;
        break;
      }
    }
    s = ns;
  }
  traj.terminal_state = s;
  return traj;
}

}  // namespace

Trajectory sample_trajectory(const TabularMarkovGame& game,
                             const IncentiveScheme& scheme, const Vec& theta,
                             const SoftmaxPolicyPair& policy, RngStream& rng) {
  std::vector<double> rho(game.n_states());
  for (int s = 0; s < game.n_states(); ++s) rho[s] = game.rho0()[s];
  const int s0 = rng.categorical(rho.data(), game.n_states());
  return rollout(game, scheme, theta, policy, s0, rng);
}

Trajectory sample_trajectory_from(const TabularMarkovGame& game,
                                  const IncentiveScheme& scheme,
                                  const Vec& theta,
                                  const SoftmaxPolicyPair& policy, int s0,
                                  RngStream& rng) {
  check_index(s0, game.n_states(), "start state");
  return rollout(game, scheme, theta, policy, s0, rng);
}

std::vector<Vec> state_marginals(const TabularMarkovGame& game,
                                 const SoftmaxPolicyPair& policy) {
  const auto tab = policy.tables();
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  std::vector<Vec> marginals;
  marginals.reserve(game.horizon() + 1);
  Vec p = game.rho0();
  marginals.push_back(p);
  for (int t = 0; t < game.horizon(); ++t) {
    Vec next = Vec::Zero(S);
    for (int s = 0; s < S; ++s) {
      if (p[s] == 0.0) continue;
      for (int a1 = 0; a1 < A1; ++a1) {
        const double p1 = tab.p1[s * A1 + a1];
        if (p1 == 0.0) continue;
        for (int a2 = 0; a2 < A2; ++a2) {
          const double w = p[s] * p1 * tab.p2[s * A2 + a2];
          if (w == 0.0) continue;
          for (const auto& [ns, pr] : game.next(s, a1, a2).entries) {
            next[ns] += w * pr;
          }
        }
      }
    }
    marginals.push_back(next);
    p = std::move(next);
  }
  return marginals;
}

Vec occupancy_measure(const TabularMarkovGame& game,
                      const SoftmaxPolicyPair& policy) {
  const auto marginals = state_marginals(game, policy);
  Vec nu = Vec::Zero(game.n_states());
  double g = 1.0, mass = 0.0;
  for (int t = 0; t < game.horizon(); ++t) {
    nu += g * marginals[t];
    mass += g;
    g *= game.gamma();
  }
  return nu / mass;
}

namespace {

// One backward-induction / fixed-point sweep of the best-response operator.
// q(s, a_own) aggregates the opponent-averaged regularized reward plus the
// discounted continuation; the per-state maximizer is soft for lambda > 0.
void br_sweep(const TabularMarkovGame& game, const std::vector<double>& r1,
              const SoftmaxPolicyPair::Tables& tab, double lambda, int player,
              const Vec& v_next, Vec* v_out, std::vector<Vec>* policy_out) {
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  const int n_own = player == 1 ? A1 : A2;
  const int n_opp = player == 1 ? A2 : A1;
  const double sign = player == 1 ? 1.0 : -1.0;
  for (int s = 0; s < S; ++s) {
    Vec q = Vec::Zero(n_own);
    double opp_entropy = 0.0;
    for (int b = 0; b < n_opp; ++b) {
      const double pb = player == 1 ? tab.p2[s * A2 + b] : tab.p1[s * A1 + b];
      const double lb =
          player == 1 ? tab.logp2[s * A2 + b] : tab.logp1[s * A1 + b];
      if (pb > 0.0) opp_entropy -= pb * lb;
      for (int a = 0; a < n_own; ++a) {
        const int a1 = player == 1 ? a : b;
        const int a2 = player == 1 ? b : a;
        double ev = 0.0;
        for (const auto& [ns, p] : game.next(s, a1, a2).entries) {
          ev += p * v_next[ns];
        }
        q[a] += pb * (sign * r1[game.joint_index(s, a1, a2)] +
                      game.gamma() * ev);
      }
    }
    if (lambda > 0.0) {
      const double lse = log_sum_exp(q / lambda);
      (*v_out)[s] = lambda * lse - lambda * opp_entropy;
      if (policy_out) {
        Vec br = ((q / lambda).array() - lse).exp();
        (*policy_out)[s] = br;
      }
    } else {
      int best = 0;
      for (int a = 1; a < n_own; ++a) {
        if (q[a] > q[best]) best = a;  // lowest index wins ties
      }
      (*v_out)[s] = q[best];
      if (policy_out) {
        Vec br = Vec::Zero(n_own);
        br[best] = 1.0;
        (*policy_out)[s] = br;
      }
    }
  }
}

}  // namespace

BestResponse best_response_value(const TabularMarkovGame& game,
                                 const IncentiveScheme& scheme,
                                 const Vec& theta,
                                 const SoftmaxPolicyPair& opponent_policy,
                                 double lambda, int player) {
  ARB_CHECK(lambda >= 0.0, "lambda must be non-negative");
  const auto r1 = perturbed_table(game, scheme, theta);
  const auto tab = opponent_policy.tables();
  BestResponse br;
  br.policy.assign(game.horizon(), std::vector<Vec>(game.n_states()));
  Vec v = Vec::Zero(game.n_states());
  for (int t = game.horizon() - 1; t >= 0; --t) {
    Vec v_new(game.n_states());
    br_sweep(game, r1, tab, lambda, player, v, &v_new, &br.policy[t]);
    v = std::move(v_new);
  }
  br.value = v;
  return br;
}

double exploitability(const TabularMarkovGame& game,
                      const IncentiveScheme& scheme, const Vec& theta,
                      const SoftmaxPolicyPair& policy, double lambda) {
  const BestResponse br1 =
      best_response_value(game, scheme, theta, policy, lambda, 1);
  const BestResponse br2 =
      best_response_value(game, scheme, theta, policy, lambda, 2);
  const Vec v1 = evaluate_value(game, scheme, theta, policy, lambda, 1);
  const Vec v2 = evaluate_value(game, scheme, theta, policy, lambda, 2);
  double gap = 0.0;
  for (int s = 0; s < game.n_states(); ++s) {
    gap += game.rho0()[s] * ((br1.value[s] - v1[s]) + (br2.value[s] - v2[s]));
  }
  return gap;
}

Vec evaluate_value_inf(const TabularMarkovGame& game,
                       const IncentiveScheme& scheme, const Vec& theta,
                       const SoftmaxPolicyPair& policy, double lambda,
                       int player, double tol) {
  const auto r1 = perturbed_table(game, scheme, theta);
  const auto tab = policy.tables();
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  const double sign = player == 1 ? 1.0 : -1.0;

  // Per-state expected regularized step reward under the pair.
  Vec step = Vec::Zero(S);
  for (int s = 0; s < S; ++s) {
    for (int a1 = 0; a1 < A1; ++a1) {
      for (int a2 = 0; a2 < A2; ++a2) {
        const double w = tab.p1[s * A1 + a1] * tab.p2[s * A2 + a2];
        if (w == 0.0) continue;
        const double log_own =
            player == 1 ? tab.logp1[s * A1 + a1] : tab.logp2[s * A2 + a2];
        const double log_opp =
            player == 1 ? tab.logp2[s * A2 + a2] : tab.logp1[s * A1 + a1];
        step[s] += w * (sign * r1[game.joint_index(s, a1, a2)] -
                        lambda * log_own + lambda * log_opp);
      }
    }
  }

  Vec v = Vec::Zero(S);
  const int max_sweeps =
      200 + static_cast<int>(std::log(1.0 / tol) / (1.0 - game.gamma()));
  for (int it = 0; it < max_sweeps; ++it) {
    Vec next(S);
    for (int s = 0; s < S; ++s) {
      double ev = 0.0;
      for (int a1 = 0; a1 < A1; ++a1) {
        for (int a2 = 0; a2 < A2; ++a2) {
          const double w = tab.p1[s * A1 + a1] * tab.p2[s * A2 + a2];
          if (w == 0.0) continue;
          double e = 0.0;
          for (const auto& [ns, p] : game.next(s, a1, a2).entries) e += p * v[ns];
          ev += w * e;
        }
      }
      next[s] = step[s] + game.gamma() * ev;
    }
    const double diff = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (diff <= tol) break;
  }
  return v;
}

Vec best_response_value_inf(const TabularMarkovGame& game,
                            const IncentiveScheme& scheme, const Vec& theta,
                            const SoftmaxPolicyPair& opponent_policy,
                            double lambda, int player, double tol) {
  const auto r1 = perturbed_table(game, scheme, theta);
  const auto tab = opponent_policy.tables();
  Vec v = Vec::Zero(game.n_states());
  const int max_sweeps =
      200 + static_cast<int>(std::log(1.0 / tol) / (1.0 - game.gamma()));
  for (int it = 0; it < max_sweeps; ++it) {
    Vec next(game.n_states());
    br_sweep(game, r1, tab, lambda, player, v, &next, nullptr);
    const double diff = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (diff <= tol) break;
  }
  return v;
}

double exploitability_inf(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme, const Vec& theta,
                          const SoftmaxPolicyPair& policy, double lambda,
                          double tol) {
  const Vec br1 =
      best_response_value_inf(game, scheme, theta, policy, lambda, 1, tol);
  const Vec br2 =
      best_response_value_inf(game, scheme, theta, policy, lambda, 2, tol);
  const Vec v1 = evaluate_value_inf(game, scheme, theta, policy, lambda, 1, tol);
  const Vec v2 = evaluate_value_inf(game, scheme, theta, policy, lambda, 2, tol);
  double worst = 0.0;
  for (int s = 0; s < game.n_states(); ++s) {
    worst = std::max(worst, (br1[s] - v1[s]) + (br2[s] - v2[s]));
  }
  return worst;
}

}  // namespace arbiter
