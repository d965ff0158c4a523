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

#ifndef ARBITER_MG_SOLVERS_HPP_
#define ARBITER_MG_SOLVERS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "arbiter/game.hpp"
#include "arbiter/matrix_solvers.hpp"

namespace arbiter {

enum class MgMethod { kPem, kErOmwu };

// Raised when a PEM inner matrix-game solve exhausts its budget; the message
// carries the offending state index.
class InnerSolveError : public std::runtime_error {
 public:
  InnerSolveError(int state, const std::string& what)
      : std::runtime_error(what), state_(state) {}
  int state() const { return state_; }

 private:
  int state_;
};

struct SolveConfig {
  MgMethod method = MgMethod::kErOmwu;
  double lambda = 0.1;   // must be > 0
  double eta = 0.0;      // 0 selects the method's default schedule
  double eta_scale = 1.0;
  double tol = 1e-8;     // target exploitability (certificate epsilon)
  int max_outer = 500000;
  // PEM inner loop: run until the per-state duality gap falls below
  // tol * inner_tol_factor, capped at inner_max_iter iterations.
  double inner_tol_factor = 0.1;
  int inner_max_iter = 500000;
  MatrixSolveMethod inner_method = MatrixSolveMethod::kPu;
  int check_every = 25;  // exploitability checks during ER-OMWU
  std::uint64_t seed = 0;
  bool random_init = false;  // random logits in [-1,1] instead of uniform
};

struct SolveResult {
  SoftmaxPolicyPair policy;        // pinned-logit recovery of the NE pair
  std::vector<Vec> pi1, pi2;       // per-state distributions
  Vec value;                       // player-1 regularized value per state
  std::vector<Mat> q;              // per-state Q(s, a1, a2)
  double exploitability = 0.0;     // horizon-T certificate (game-core)
  double exploitability_infinite = 0.0;  // stationary-game gap at the solution
  double truncation_slack = 0.0;   // gamma^T/(1-gamma) * reward scale
  bool certified = false;          // exploitability <= requested tol
  int outer_iterations = 0;
  long long inner_iterations = 0;  // total across states (PEM)
  std::vector<double> gap_trace;   // recorded exploitability checks
  double bellman_residual = 0.0;   // ||V - T_lambda V||_inf at the solution
  double wall_ms = 0.0;
  MgMethod method = MgMethod::kErOmwu;

  SolveResult() : policy(1, 1, 1) {}
};

// Stage payoff Q(s) = r(s,.;theta) + gamma E_{s'} V(s') as a dense matrix.
Mat stage_q_matrix(const TabularMarkovGame& game, const IncentiveScheme& scheme,
                   const Vec& theta, const Vec& v, int s);

// sup-norm residual of V against the regularized Bellman operator whose
// per-state game is solved to oracle_tol by the PU method.
double regularized_bellman_residual(const TabularMarkovGame& game,
                                    const IncentiveScheme& scheme,
                                    const Vec& theta, double lambda,
                                    const Vec& v, double oracle_tol = 1e-12);

// lambda <= (1-gamma) eps / (2 (log|A1| + log|A2|)) makes the exact
// regularized NE an eps-optimal NE of the unregularized game.
double lambda_for_unregularized_eps(const TabularMarkovGame& game, double eps);

// Double-loop solver: value iteration whose per-state stage games are solved
// by the extragradient matrix-game solver.
SolveResult pem_solve(const TabularMarkovGame& game,
                      const IncentiveScheme& scheme, const Vec& theta,
                      const SolveConfig& config,
                      const SoftmaxPolicyPair* warm_start = nullptr);

// Single-loop two-timescale solver with optimistic policy updates and value
// learning rate alpha = eta * lambda.
SolveResult er_omwu_solve(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme, const Vec& theta,
                          const SolveConfig& config,
                          const SoftmaxPolicyPair* warm_start = nullptr);

// Dispatches on config.method and attaches the horizon-T exploitability
// certificate computed by the game module.
SolveResult nash_solve(const TabularMarkovGame& game,
                       const IncentiveScheme& scheme, const Vec& theta,
                       const SolveConfig& config,
                       const SoftmaxPolicyPair* warm_start = nullptr);

}  // namespace arbiter

#endif  // ARBITER_MG_SOLVERS_HPP_
