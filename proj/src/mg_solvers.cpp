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

#include "arbiter/mg_solvers.hpp"

#include <chrono>
#include <cmath>

namespace arbiter {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> reward_table(const TabularMarkovGame& game,
                                 const IncentiveScheme& scheme,
                                 const Vec& theta) {
  scheme.require_theta(theta);
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  std::vector<double> r(static_cast<std::size_t>(S) * A1 * A2);
  for (int s = 0; s < S; ++s) {
    for (int a1 = 0; a1 < A1; ++a1) {
      for (int a2 = 0; a2 < A2; ++a2) {
        double v = game.base_reward(s, a1, a2);
        for (int j = 0; j < scheme.n_params(); ++j) {
          v += theta[j] * scheme.feature(j, s, a1, a2);
        }
        r[game.joint_index(s, a1, a2)] = v;
      }
    }
  }
  return r;
}

Mat stage_q(const TabularMarkovGame& game, const std::vector<double>& r1,
            const Vec& v, int s) {
  const int A1 = game.n_actions_1(), A2 = game.n_actions_2();
  Mat q(A1, A2);
  for (int a1 = 0; a1 < A1; ++a1) {
    for (int a2 = 0; a2 < A2; ++a2) {
      double ev = 0.0;
      for (const auto& [ns, p] : game.next(s, a1, a2).entries) ev += p * v[ns];
      q(a1, a2) = r1[game.joint_index(s, a1, a2)] + game.gamma() * ev;
    }
  }
  return q;
}

// Default ER-OMWU learning rate. The worst-case-analysis schedule
// (1-gamma)^3 / (32000 |S|) is orders of magnitude below what the update
// tolerates, so the default is sized against the Q-scale bound instead and
// eta_scale exposes the knob.
double er_omwu_default_eta(const TabularMarkovGame& game,
                           const IncentiveScheme& scheme, double lambda) {
  const double log_actions = std::log(static_cast<double>(game.n_actions_1())) +
                             std::log(static_cast<double>(game.n_actions_2()));
  const double q_bound =
      (scheme.reward_bound() + lambda * log_actions) / (1.0 - game.gamma());
  return 1.0 / (2.0 * std::max(1.0, q_bound) + lambda);
}

struct PolicyState {
  std::vector<Vec> pi1, pi2;
};

PolicyState init_policies(const TabularMarkovGame& game,
                          const SolveConfig& config,
                          const SoftmaxPolicyPair* warm_start) {
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  PolicyState ps;
  ps.pi1.assign(S, Vec::Constant(A1, 1.0 / A1));
  ps.pi2.assign(S, Vec::Constant(A2, 1.0 / A2));
  if (warm_start != nullptr) {
    for (int s = 0; s < S; ++s) {
      ps.pi1[s] = warm_start->probs(1, s);
      ps.pi2[s] = warm_start->probs(2, s);
    }
  } else if (config.random_init) {
    RngStream rng(config.seed);
    SoftmaxPolicyPair pair(S, A1, A2);
    for (int s = 0; s < S; ++s) {
      if (game.is_terminal(s)) continue;
      for (int a = 0; a + 1 < A1; ++a) {
        pair.set_logit(1, s, a, 2.0 * rng.next_double() - 1.0);
      }
      for (int a = 0; a + 1 < A2; ++a) {
        pair.set_logit(2, s, a, 2.0 * rng.next_double() - 1.0);
      }
    }
    for (int s = 0; s < S; ++s) {
      ps.pi1[s] = pair.probs(1, s);
      ps.pi2[s] = pair.probs(2, s);
    }
  }
  return ps;
}

SoftmaxPolicyPair pair_of(const PolicyState& ps) {
  return SoftmaxPolicyPair::from_distributions(ps.pi1, ps.pi2);
}

void finalize(const TabularMarkovGame& game, const IncentiveScheme& scheme,
              const Vec& theta, const SolveConfig& config,
              const PolicyState& ps, const Vec& v,
              const std::vector<double>& r1, SolveResult* out) {
  const int S = game.n_states();
  out->policy = pair_of(ps);
  out->pi1 = ps.pi1;
  out->pi2 = ps.pi2;
  out->value = v;
  out->q.clear();
  out->q.reserve(S);
  for (int s = 0; s < S; ++s) out->q.push_back(stage_q(game, r1, v, s));
  out->exploitability_infinite = exploitability_inf(
      game, scheme, theta, out->policy, config.lambda);
  out->exploitability =
      exploitability(game, scheme, theta, out->policy, config.lambda);
  const double log_actions = std::log(static_cast<double>(game.n_actions_1())) +
                             std::log(static_cast<double>(game.n_actions_2()));
  out->truncation_slack = 2.0 * game.truncation_factor() *
                          (scheme.reward_bound() + config.lambda * log_actions);
  out->certified = out->exploitability <= config.tol;
  out->bellman_residual =
      regularized_bellman_residual(game, scheme, theta, config.lambda, v);
}

}  // namespace

Mat stage_q_matrix(const TabularMarkovGame& game, const IncentiveScheme& scheme,
                   const Vec& theta, const Vec& v, int s) {
  return stage_q(game, reward_table(game, scheme, theta), v, s);
}

double regularized_bellman_residual(const TabularMarkovGame& game,
                                    const IncentiveScheme& scheme,
                                    const Vec& theta, double lambda,
                                    const Vec& v, double oracle_tol) {
  const auto r1 = reward_table(game, scheme, theta);
  double worst = 0.0;
  for (int s = 0; s < game.n_states(); ++s) {
    MatrixGameProblem prob;
    prob.payoff = stage_q(game, r1, v, s);
    prob.lambda = lambda;
    prob.eta = eta_standalone(prob.payoff, lambda);
    const auto sol = solve_regularized_matrix_game(
        prob, MatrixSolveMethod::kPu, oracle_tol, 2000000, nullptr, nullptr,
        /*record_trace=*/false);
    const double tv = regularized_game_value(prob.payoff, lambda, sol.pi1, sol.pi2);
    worst = std::max(worst, std::abs(v[s] - tv));
  }
  return worst;
}

double lambda_for_unregularized_eps(const TabularMarkovGame& game, double eps) {
  const double log_actions = std::log(static_cast<double>(game.n_actions_1())) +
                             std::log(static_cast<double>(game.n_actions_2()));
  return (1.0 - game.gamma()) * eps / (2.0 * log_actions);
}

SolveResult pem_solve(const TabularMarkovGame& game,
                      const IncentiveScheme& scheme, const Vec& theta,
                      const SolveConfig& config,
                      const SoftmaxPolicyPair* warm_start) {
  ARB_CHECK(config.lambda > 0.0, "lambda must be positive");
  const auto t0 = Clock::now();
  const int S = game.n_states();
  const auto r1 = reward_table(game, scheme, theta);

  SolveResult out;
  out.method = MgMethod::kPem;

  const double eta =
      config.eta > 0.0
          ? config.eta
          : config.eta_scale *
                eta_pem_schedule(config.lambda,
                                 std::max(game.n_actions_1(), game.n_actions_2()),
                                 game.gamma());
  // A per-state stage gap of g can leave an exploitability of order
  // g/(1-gamma), so the inner tolerance carries that factor and tightens
  // together with the value tolerance when certification falls short.
  double inner_tol =
      config.tol * config.inner_tol_factor * (1.0 - game.gamma());

  PolicyState ps = init_policies(game, config, warm_start);
  Vec v = Vec::Zero(S);
  if (warm_start != nullptr || config.random_init) {
    v = evaluate_value_inf(game, scheme, theta, pair_of(ps), config.lambda, 1);
  }

  double v_tol = config.tol * (1.0 - game.gamma()) / 4.0;
  int outer = 0;
  while (outer < config.max_outer) {
    ++outer;
    Vec v_next(S);
    for (int s = 0; s < S; ++s) {
      MatrixGameProblem prob;
      prob.payoff = stage_q(game, r1, v, s);
      prob.lambda = config.lambda;
      prob.eta = eta;
      // Inner iterates start uniform, per the double-loop algorithm.
      const auto sol = solve_regularized_matrix_game(
          prob, config.inner_method, inner_tol, config.inner_max_iter, nullptr,
          nullptr, /*record_trace=*/false);
      if (!sol.diagnostics.converged) {
        throw InnerSolveError(
            s, "inner matrix-game solve did not converge at state " +
                   std::to_string(s) + " (gap " +
                   std::to_string(sol.diagnostics.final_gap) + ")");
      }
      out.inner_iterations += sol.diagnostics.iterations;
      ps.pi1[s] = sol.pi1;
      ps.pi2[s] = sol.pi2;
      v_next[s] = regularized_game_value(prob.payoff, config.lambda, sol.pi1,
                                         sol.pi2);
    }
    const double diff = (v_next - v).cwiseAbs().maxCoeff();
    v = std::move(v_next);
    if (diff < v_tol) {
      const double gap = exploitability_inf(game, scheme, theta, pair_of(ps),
                                            config.lambda);
      out.gap_trace.push_back(gap);
      if (gap <= 0.5 * config.tol) break;
      if (v_tol < 1e-15) break;  // numerically stalled; report non-certified
      v_tol *= 0.25;
      inner_tol *= 0.25;
    }
  }
  out.outer_iterations = outer;
  finalize(game, scheme, theta, config, ps, v, r1, &out);
  out.wall_ms = ms_since(t0);
  return out;
}

SolveResult er_omwu_solve(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme, const Vec& theta,
                          const SolveConfig& config,
                          const SoftmaxPolicyPair* warm_start) {
  ARB_CHECK(config.lambda > 0.0, "lambda must be positive");
  const auto t0 = Clock::now();
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  const auto r1 = reward_table(game, scheme, theta);

  SolveResult out;
  out.method = MgMethod::kErOmwu;

  const double eta = config.eta > 0.0
                         ? config.eta
                         : config.eta_scale *
                               er_omwu_default_eta(game, scheme, config.lambda);
  const double alpha = eta * config.lambda;  // two-timescale value rate
  ARB_CHECK(alpha < 1.0, "eta * lambda must stay below 1");

  PolicyState ps = init_policies(game, config, warm_start);
  PolicyState mid = ps;

  const double log_actions = std::log(static_cast<double>(A1)) +
                             std::log(static_cast<double>(A2));
  Vec v = Vec::Constant(S, config.lambda * log_actions);
  std::vector<Mat> q(S, Mat::Zero(A1, A2));
  if (warm_start != nullptr) {
    v = evaluate_value_inf(game, scheme, theta, pair_of(ps), config.lambda, 1);
    for (int s = 0; s < S; ++s) q[s] = stage_q(game, r1, v, s);
  }

  int outer = 0;
  while (outer < config.max_outer) {
    for (int s = 0; s < S; ++s) {
      MatrixGameProblem prob;
      prob.payoff = q[s];
      prob.lambda = config.lambda;
      prob.eta = eta;
      ExtragradientStep step =
          omwu_step(prob, ps.pi1[s], ps.pi2[s], mid.pi1[s], mid.pi2[s]);
      mid.pi1[s] = std::move(step.mid1);
      mid.pi2[s] = std::move(step.mid2);
      if (outer >= 1) {  // the main iterate holds still on the first pass
        ps.pi1[s] = std::move(step.pi1);
        ps.pi2[s] = std::move(step.pi2);
      }
    }
    Vec v_next(S);
    double v_residual = 0.0;  // |f_lambda(Q(V); mid) - V|, the Bellman gap
    for (int s = 0; s < S; ++s) {
      q[s] = stage_q(game, r1, v, s);
      const double fv = regularized_game_value(q[s], config.lambda, mid.pi1[s],
                                               mid.pi2[s]);
      v_residual = std::max(v_residual, std::abs(fv - v[s]));
      v_next[s] = (1.0 - alpha) * v[s] + alpha * fv;
    }
    v = std::move(v_next);
    ++outer;
    if (outer % config.check_every == 0 && v_residual <= 0.5 * config.tol) {
      const double gap = exploitability_inf(game, scheme, theta, pair_of(mid),
                                            config.lambda);
      out.gap_trace.push_back(gap);
      if (gap <= 0.5 * config.tol) break;
    }
  }
  out.outer_iterations = outer;
  finalize(game, scheme, theta, config, mid, v, r1, &out);
  out.wall_ms = ms_since(t0);
  return out;
}

SolveResult nash_solve(const TabularMarkovGame& game,
                       const IncentiveScheme& scheme, const Vec& theta,
                       const SolveConfig& config,
                       const SoftmaxPolicyPair* warm_start) {
  switch (config.method) {
    case MgMethod::kPem:
      return pem_solve(game, scheme, theta, config, warm_start);
    case MgMethod::kErOmwu:
      return er_omwu_solve(game, scheme, theta, config, warm_start);
  }
  throw InvalidArgument("unknown solver method");
}

}  // namespace arbiter
