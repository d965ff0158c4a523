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

#include "arbiter/matrix_solvers.hpp"

#include <cmath>

namespace arbiter {

namespace {

void require_simplex(const Vec& pi, const char* what) {
  double sum = 0.0;
  for (int i = 0; i < pi.size(); ++i) {
    if (!(pi[i] > 0.0)) throw DomainError(std::string(what) + ": needs strictly positive simplex point");
    sum += pi[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError(std::string(what) + ": not normalized");
  }
}

// Normalized exp((1 - eta lambda) log pi + eta grad), in log space.
Vec mwu_update(const Vec& pi, const Vec& grad, double eta, double lambda) {
  Vec logits = (1.0 - eta * lambda) * pi.array().log().matrix() + eta * grad;
  const double lse = log_sum_exp(logits);
  return (logits.array() - lse).exp();
}

}  // namespace

double regularized_game_value(const Mat& payoff, double lambda, const Vec& pi1,
                              const Vec& pi2) {
  return pi1.dot(payoff * pi2) + lambda * shannon_entropy(pi1) -
         lambda * shannon_entropy(pi2);
}

double matrix_duality_gap(const Mat& payoff, double lambda, const Vec& pi1,
                          const Vec& pi2) {
  const Vec g1 = payoff * pi2;          // player-1 payoffs per action
  const Vec g2 = payoff.transpose() * pi1;  // player-1 value per pi2 action
  double best1, best2;
  if (lambda > 0.0) {
    best1 = lambda * log_sum_exp(g1 / lambda) - lambda * shannon_entropy(pi2);
    // min over pi2' of pi1' A pi2' - lambda H(pi2') + lambda H(pi1)
    best2 = lambda * shannon_entropy(pi1) - lambda * log_sum_exp(-g2 / lambda);
  } else {
    best1 = g1.maxCoeff();
    best2 = g2.minCoeff();
  }
  return best1 - best2;
}

ExtragradientStep extragradient_step(const MatrixGameProblem& problem,
                                     const Vec& pi1, const Vec& pi2,
                                     const Vec& grad_source1,
                                     const Vec& grad_source2,
                                     MidpointGradient mode) {
  require_simplex(pi1, "pi1");
  require_simplex(pi2, "pi2");
  ARB_CHECK(problem.eta > 0.0 && problem.eta * problem.lambda < 1.0,
            "eta out of the stable range");
  const Mat& A = problem.payoff;
  const Vec& src1 = mode == MidpointGradient::kCurrentIterate ? pi1 : grad_source1;
  const Vec& src2 = mode == MidpointGradient::kCurrentIterate ? pi2 : grad_source2;

  ExtragradientStep out;
  out.mid1 = mwu_update(pi1, A * src2, problem.eta, problem.lambda);
  out.mid2 = mwu_update(pi2, -(A.transpose() * src1), problem.eta, problem.lambda);
  out.pi1 = mwu_update(pi1, A * out.mid2, problem.eta, problem.lambda);
  out.pi2 = mwu_update(pi2, -(A.transpose() * out.mid1), problem.eta, problem.lambda);
  return out;
}

ExtragradientStep pu_step(const MatrixGameProblem& problem, const Vec& pi1,
                          const Vec& pi2) {
  return extragradient_step(problem, pi1, pi2, pi1, pi2,
                            MidpointGradient::kCurrentIterate);
}

ExtragradientStep omwu_step(const MatrixGameProblem& problem, const Vec& pi1,
                            const Vec& pi2, const Vec& prev_mid1,
                            const Vec& prev_mid2) {
  require_simplex(prev_mid1, "prev_mid1");
  require_simplex(prev_mid2, "prev_mid2");
  return extragradient_step(problem, pi1, pi2, prev_mid1, prev_mid2,
                            MidpointGradient::kPreviousMidpoint);
}

double eta_pem_schedule(double lambda, int n_actions_max, double gamma) {
  return (1.0 - gamma) /
         (2.0 * (1.0 + lambda * (std::log(static_cast<double>(n_actions_max)) +
                                 1.0 - gamma)));
}

double eta_standalone(const Mat& payoff, double lambda) {
  return 0.1 / (lambda + payoff.cwiseAbs().maxCoeff());
}

MatrixSolveResult solve_regularized_matrix_game(
    const MatrixGameProblem& problem, MatrixSolveMethod method, double tol,
    int max_iter, const Vec* init1, const Vec* init2, bool record_trace) {
  ARB_CHECK(tol > 0.0, "tol must be positive");
  const int m = static_cast<int>(problem.payoff.rows());
  const int n = static_cast<int>(problem.payoff.cols());
  Vec pi1 = init1 ? *init1 : Vec::Constant(m, 1.0 / m);
  Vec pi2 = init2 ? *init2 : Vec::Constant(n, 1.0 / n);
  Vec mid1 = pi1, mid2 = pi2;
  Vec avg1 = pi1, avg2 = pi2;

  const bool averaged = problem.lambda == 0.0;
  MatrixSolveResult result;
  auto gap_of = [&](const Vec& a, const Vec& b) {
    return matrix_duality_gap(problem.payoff, problem.lambda, a, b);
  };

  double gap = averaged ? gap_of(avg1, avg2) : gap_of(mid1, mid2);
  if (record_trace) result.diagnostics.gap_trace.push_back(gap);
  int it = 0;
  while (gap > tol && it < max_iter) {
    ExtragradientStep step =
        method == MatrixSolveMethod::kPu
            ? pu_step(problem, pi1, pi2)
            : omwu_step(problem, pi1, pi2, mid1, mid2);
    pi1 = std::move(step.pi1);
    pi2 = std::move(step.pi2);
    mid1 = std::move(step.mid1);
    mid2 = std::move(step.mid2);
    ++it;
    if (averaged) {
      avg1 = (avg1 * it + mid1) / (it + 1);
      avg2 = (avg2 * it + mid2) / (it + 1);
      gap = gap_of(avg1, avg2);
    } else {
      gap = gap_of(mid1, mid2);
    }
    if (record_trace) result.diagnostics.gap_trace.push_back(gap);
  }

  result.pi1 = averaged ? avg1 : mid1;
  result.pi2 = averaged ? avg2 : mid2;
  result.diagnostics.iterations = it;
  result.diagnostics.converged = gap <= tol;
  result.diagnostics.final_gap = gap;
  return result;
}

}  // namespace arbiter
