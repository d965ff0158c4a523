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

#ifndef ARBITER_MATRIX_SOLVERS_HPP_
#define ARBITER_MATRIX_SOLVERS_HPP_

#include <vector>

#include "arbiter/common.hpp"

namespace arbiter {

// Entropy-regularized two-player zero-sum matrix game
//   max_{pi1} min_{pi2}  pi1' A pi2 + lambda H(pi1) - lambda H(pi2).
struct MatrixGameProblem {
  Mat payoff;          // player 1 maximizes pi1' A pi2
  double lambda = 0.0; // >= 0
  double eta = 0.1;    // learning rate; eta * lambda must stay below 1
};

// Where the midpoint update of the extragradient step evaluates its payoff
// gradient. The PU method uses the current iterate; the optimistic variant
// reuses the previous midpoint.
enum class MidpointGradient { kCurrentIterate, kPreviousMidpoint };

struct ExtragradientStep {
  Vec pi1, pi2;    // main iterates
  Vec mid1, mid2;  // midpoints
};

double regularized_game_value(const Mat& payoff, double lambda, const Vec& pi1,
                              const Vec& pi2);

// Closed-form duality gap: both one-sided best responses have log-sum-exp
// values for lambda > 0 and plain max/min for lambda = 0.
double matrix_duality_gap(const Mat& payoff, double lambda, const Vec& pi1,
                          const Vec& pi2);

// One PU step: midpoint from the gradient at the current iterate, then the
// main update from the gradient at the fresh midpoint. Inputs must be
// strictly positive simplex points.
ExtragradientStep pu_step(const MatrixGameProblem& problem, const Vec& pi1,
                          const Vec& pi2);

// One OMWU step: identical except the midpoint evaluates the gradient at the
// previous midpoint.
ExtragradientStep omwu_step(const MatrixGameProblem& problem, const Vec& pi1,
                            const Vec& pi2, const Vec& prev_mid1,
                            const Vec& prev_mid2);

ExtragradientStep extragradient_step(const MatrixGameProblem& problem,
                                     const Vec& pi1, const Vec& pi2,
                                     const Vec& grad_source1,
                                     const Vec& grad_source2,
                                     MidpointGradient mode);

enum class MatrixSolveMethod { kPu, kOmwu };

struct MatrixSolveDiagnostics {
  int iterations = 0;
  bool converged = false;
  std::vector<double> gap_trace;  // duality gap per iteration
  double final_gap = 0.0;
};

struct MatrixSolveResult {
  Vec pi1, pi2;
  MatrixSolveDiagnostics diagnostics;
};

// Learning-rate schedules: the embedded-in-PEM schedule
// (1-gamma) / (2 (1 + lambda (log max(|A1|,|A2|) + 1 - gamma))) and the
// standalone default 0.1 / (lambda + max|A|).
double eta_pem_schedule(double lambda, int n_actions_max, double gamma);
double eta_standalone(const Mat& payoff, double lambda);

// Iterates the chosen method until the duality gap falls below tol. With
// lambda = 0 the unique-solution certificate is unavailable and the averaged
// iterates are returned instead. Failure to converge is reported through the
// diagnostics (last iterate and gap kept), not thrown.
MatrixSolveResult solve_regularized_matrix_game(
    const MatrixGameProblem& problem, MatrixSolveMethod method, double tol,
    int max_iter, const Vec* init1 = nullptr, const Vec* init2 = nullptr,
    bool record_trace = true);

}  // namespace arbiter

#endif  // ARBITER_MATRIX_SOLVERS_HPP_
