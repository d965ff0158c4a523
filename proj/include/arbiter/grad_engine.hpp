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

#ifndef ARBITER_GRAD_ENGINE_HPP_
#define ARBITER_GRAD_ENGINE_HPP_

#include <cstdint>
#include <functional>

#include "arbiter/game.hpp"

namespace arbiter {

// Score-function gradients and Hessians of the regularized value from a
// fixed start state, for one player:
//   grad_theta      = E[grad_theta R^i]                                (m)
//   grad_phi        = E[R_reg S_i] - lambda E[Sg_i]                    (d_i)
//   hess_theta_phi  = E[grad_theta R^i  S_i']                          (m x d_i)
//   hess_phi_phi    = E[R_reg (S S_i' + Hstack_i)]
//                     - lambda E[D_i S_i' + S Sg_i' + Hg_i]            (d x d_i)
// with S_i the undiscounted own-score sum, Sg_i its discounted version,
// S the stacked score sum of both players, D_i the discounted stacked
// score difference (own minus opponent) and H the log-softmax Hessians.
// R_reg is the regularized total reward R^i - lambda (discounted log-ratio
// sum); expanding it reproduces the unregularized quantities plus the
// explicit lambda-correction terms.
struct ValueGradBundle {
  Vec grad_theta;
  Vec grad_phi;
  Mat hess_theta_phi;
  Mat hess_phi_phi;
  // Standard errors of the Monte-Carlo means; empty for exact bundles.
  Vec se_grad_theta, se_grad_phi;
  Mat se_hess_theta_phi, se_hess_phi_phi;
};

struct PlayerBundles {
  ValueGradBundle p1, p2;
};

// Closed-form softmax score: component (s', a') of
// grad_{phi_i} log pi_i(a|s) equals [s'=s]([a'=a] - pi(a'|s)) over the free
// (non-pinned) actions, zero elsewhere. Zero vector for terminal states.
Vec policy_score(const SoftmaxPolicyPair& policy,
                 const PolicyParamLayout& layout, int player, int s, int a);

// Log-softmax Hessian at state s: -(diag(p) - p p') on the free actions,
// independent of which action is queried.
Mat policy_score_hessian(const SoftmaxPolicyPair& policy,
                         const PolicyParamLayout& layout, int player, int s,
                         int a);

struct EnumerationLimits {
  std::int64_t max_paths = 1'000'000;
};

// Number of branches the exact enumerator would walk from start_state
// (terminal states collapse to a single tail).
std::int64_t count_trajectories(const TabularMarkovGame& game, int start_state);

// Exact expectations by full trajectory enumeration. Refuses (throws
// InvalidArgument) when count_trajectories exceeds limits.max_paths.
PlayerBundles value_grads_exact(const TabularMarkovGame& game,
                                const IncentiveScheme& scheme, const Vec& theta,
                                const SoftmaxPolicyPair& policy, double lambda,
                                int start_state,
                                const EnumerationLimits& limits = {});

struct McOptions {
  // Subtract the mean total reward from the REINFORCE term of grad_phi.
  // Off by default so the estimator matches the raw formulas exactly.
  bool mean_baseline = false;
};

// Unbiased Monte-Carlo estimate of the same integrands over n_traj sampled
// trajectories (substream k drives trajectory k), with per-entry standard
// errors of the mean.
PlayerBundles value_grads_mc(const TabularMarkovGame& game,
                             const IncentiveScheme& scheme, const Vec& theta,
                             const SoftmaxPolicyPair& policy, double lambda,
                             int start_state, int n_traj, RngStream rng,
                             const McOptions& options = {});

// Central finite differences per coordinate.
Vec finite_difference(const std::function<double(const Vec&)>& fn, const Vec& x,
                      double step);

// Default step 1e-5; when the 1e-4 and 1e-5 estimates disagree beyond 1e-4
// relative, falls back to Richardson extrapolation of the two.
Vec finite_difference_auto(const std::function<double(const Vec&)>& fn,
                           const Vec& x);

}  // namespace arbiter

#endif  // ARBITER_GRAD_ENGINE_HPP_
