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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arbiter/matrix_solvers.hpp"
#include "arbiter/rng.hpp"
#include "support/oracles.hpp"

using namespace arbiter;

namespace {

Mat matching_pennies() {
  Mat a(2, 2);
  a << 1, -1, -1, 1;
  return a;
}

Mat random_matrix(int m, int n, std::uint64_t seed) {
  RngStream rng(seed);
  Mat a(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = 2.0 * rng.next_double() - 1.0;
  }
  return a;
}

}  // namespace

TEST_CASE("pu_step") {
  SUBCASE("uniform is a fixed point on symmetric RPS") {
    MatrixGameProblem prob{oracles::rps_matrix(), 0.3, 0.2};
    const Vec u = Vec::Constant(3, 1.0 / 3.0);
    const auto step = pu_step(prob, u, u);
    CHECK((step.pi1 - u).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((step.pi2 - u).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((step.mid1 - u).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("lambda 0 single step is the multiplicative-weights update") {
    Mat a(2, 2);
    a << 0.5, -0.2, -0.1, 0.4;
    const double eta = 1e-3;
    MatrixGameProblem prob{a, 0.0, eta};
    Vec pi1(2), pi2(2);
    pi1 << 0.6, 0.4;
    pi2 << 0.3, 0.7;
    const auto step = pu_step(prob, pi1, pi2);
    // hand evaluation: midpoint = pi .* exp(eta A pi2), renormalized
    const Vec g1 = a * pi2;
    Vec mid1(2);
    mid1 << pi1[0] * std::exp(eta * g1[0]), pi1[1] * std::exp(eta * g1[1]);
    mid1 /= mid1.sum();
    CHECK((step.mid1 - mid1).cwiseAbs().maxCoeff() < 1e-14);
    const Vec g2 = -(a.transpose() * pi1);
    Vec mid2(2);
    mid2 << pi2[0] * std::exp(eta * g2[0]), pi2[1] * std::exp(eta * g2[1]);
    mid2 /= mid2.sum();
    CHECK((step.mid2 - mid2).cwiseAbs().maxCoeff() < 1e-14);
    // main update evaluates the gradient at the fresh midpoint
    const Vec h1 = a * mid2;
    Vec nxt1(2);
    nxt1 << pi1[0] * std::exp(eta * h1[0]), pi1[1] * std::exp(eta * h1[1]);
    nxt1 /= nxt1.sum();
    CHECK((step.pi1 - nxt1).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("matching pennies with lambda 0.5 converges to uniform") {
    MatrixGameProblem prob{matching_pennies(), 0.5, 0.0};
    prob.eta = eta_standalone(prob.payoff, prob.lambda);
    const auto result = solve_regularized_matrix_game(
        prob, MatrixSolveMethod::kPu, 1e-10, 500000);
    REQUIRE(result.diagnostics.converged);
    CHECK((result.pi1 - Vec::Constant(2, 0.5)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((result.pi2 - Vec::Constant(2, 0.5)).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("rejects non-simplex inputs") {
    MatrixGameProblem prob{matching_pennies(), 0.1, 0.1};
    Vec bad(2);
    bad << 0.9, 0.3;
    const Vec u = Vec::Constant(2, 0.5);
    CHECK_THROWS_AS(pu_step(prob, bad, u), DomainError);
    Vec zero(2);
    zero << 1.0, 0.0;
    CHECK_THROWS_AS(pu_step(prob, u, zero), DomainError);
  }
}

TEST_CASE("omwu_step") {
  SUBCASE("first iteration with midpoints equal to iterates matches pu_step") {
    MatrixGameProblem prob{random_matrix(3, 2, 5), 0.2, 0.05};
    const Vec p1 = Vec::Constant(3, 1.0 / 3.0);
    const Vec p2 = Vec::Constant(2, 0.5);
    const auto pu = pu_step(prob, p1, p2);
    const auto om = omwu_step(prob, p1, p2, p1, p2);
    CHECK((pu.pi1 - om.pi1).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((pu.pi2 - om.pi2).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((pu.mid1 - om.mid1).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("uniform fixed point preserved on RPS") {
    MatrixGameProblem prob{oracles::rps_matrix(), 0.3, 0.2};
    const Vec u = Vec::Constant(3, 1.0 / 3.0);
    const auto step = omwu_step(prob, u, u, u, u);
    CHECK((step.pi1 - u).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("pu and omwu converge to the same QRE") {
    Mat a(2, 2);
    a << 0.8, -0.4, -0.9, 0.3;
    MatrixGameProblem prob{a, 0.2, 0.0};
    prob.eta = eta_standalone(a, prob.lambda);
    const auto pu = solve_regularized_matrix_game(prob, MatrixSolveMethod::kPu,
                                                  1e-12, 1000000);
    const auto om = solve_regularized_matrix_game(prob, MatrixSolveMethod::kOmwu,
                                                  1e-12, 1000000);
    REQUIRE(pu.diagnostics.converged);
    REQUIRE(om.diagnostics.converged);
    CHECK((pu.pi1 - om.pi1).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((pu.pi2 - om.pi2).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("solve_regularized_matrix_game") {
  SUBCASE("symmetric RPS returns uniform") {
    MatrixGameProblem prob{oracles::rps_matrix(), 0.1, 0.0};
    prob.eta = eta_standalone(prob.payoff, prob.lambda);
    const auto result = solve_regularized_matrix_game(
        prob, MatrixSolveMethod::kOmwu, 1e-10, 1000000);
    REQUIRE(result.diagnostics.converged);
    CHECK((result.pi1 - Vec::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() <
          1e-8);
    CHECK((result.pi2 - Vec::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() <
          1e-8);
  }

  SUBCASE("identity payoff with lambda 1 matches the fixed-point oracle") {
    Mat a = Mat::Identity(2, 2);
    MatrixGameProblem prob{a, 1.0, 0.0};
    prob.eta = eta_standalone(a, prob.lambda);
    const auto result = solve_regularized_matrix_game(
        prob, MatrixSolveMethod::kPu, 1e-12, 1000000);
    REQUIRE(result.diagnostics.converged);
    auto [o1, o2] = oracles::qre_fixed_point(a, 1.0, 1e-13);
    CHECK((result.pi1 - o1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((result.pi2 - o2).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("linear convergence on random games") {
    // Once below 1e-2 the gap contracts at a steady geometric rate.
    for (std::uint64_t seed : {11, 12, 13}) {
      MatrixGameProblem prob{random_matrix(3, 3, seed), 0.5, 0.0};
      prob.eta = eta_pem_schedule(prob.lambda, 3, 0.0);
      const auto result = solve_regularized_matrix_game(
          prob, MatrixSolveMethod::kPu, 1e-9, 200000);
      REQUIRE(result.diagnostics.converged);
      const auto& trace = result.diagnostics.gap_trace;
      for (std::size_t t = 0; t + 10 < trace.size(); ++t) {
        if (trace[t] < 1e-2 && trace[t] > 1e-8) {
          CHECK(trace[t + 10] <= 0.9 * trace[t]);
        }
      }
    }
  }

  SUBCASE("max_iter exhaustion reports the last iterate instead of throwing") {
    MatrixGameProblem prob{random_matrix(2, 2, 321), 0.05, 1e-4};
    const auto result =
        solve_regularized_matrix_game(prob, MatrixSolveMethod::kPu, 1e-12, 5);
    CHECK_FALSE(result.diagnostics.converged);
    CHECK(result.diagnostics.iterations == 5);
    CHECK(result.diagnostics.final_gap > 1e-12);
    CHECK(result.pi1.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("step invariants") {
  SUBCASE("outputs stay strictly positive simplex points") {
    RngStream rng(77);
    for (int trial = 0; trial < 25; ++trial) {
      MatrixGameProblem prob{random_matrix(3, 4, 100 + trial),
                             0.5 * rng.next_double(), 0.0};
      prob.eta = eta_standalone(prob.payoff, prob.lambda);
      Vec p1 = Vec::Constant(3, 1.0 / 3), p2 = Vec::Constant(4, 0.25);
      Vec m1 = p1, m2 = p2;
      for (int it = 0; it < 50; ++it) {
        const auto step = omwu_step(prob, p1, p2, m1, m2);
        p1 = step.pi1;
        p2 = step.pi2;
        m1 = step.mid1;
        m2 = step.mid2;
        for (const Vec* v : {&p1, &p2, &m1, &m2}) {
          CHECK(v->minCoeff() > 0.0);
          CHECK(v->sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
      }
    }
  }

  SUBCASE("one pu_step leaves the exact QRE unchanged") {
    Mat a = random_matrix(3, 3, 42);
    const double lambda = 0.4;
    auto [pi1, pi2] = oracles::qre_fixed_point(a, lambda, 1e-15);
    MatrixGameProblem prob{a, lambda, 0.0};
    prob.eta = eta_standalone(a, lambda);
    const auto step = pu_step(prob, pi1, pi2);
    CHECK((step.pi1 - pi1).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((step.pi2 - pi2).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("antisymmetric payoff keeps symmetric iterates equal") {
    Mat a(3, 3);
    a << 0, 0.7, -0.2, -0.7, 0, 0.5, 0.2, -0.5, 0;  // a = -a'
    MatrixGameProblem prob{a, 0.3, 0.05};
    Vec p = Vec::Constant(3, 1.0 / 3);
    Vec m = p;
    for (int it = 0; it < 200; ++it) {
      const auto step = omwu_step(prob, p, p, m, m);
      CHECK((step.pi1 - step.pi2).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((step.mid1 - step.mid2).cwiseAbs().maxCoeff() < 1e-12);
      p = step.pi1;
      m = step.mid1;
    }
  }

  SUBCASE("solving (A, l) and (-A', l) swaps the players") {
    Mat a = random_matrix(2, 3, 9);
    MatrixGameProblem prob{a, 0.3, 0.0};
    prob.eta = eta_standalone(a, prob.lambda);
    MatrixGameProblem swapped{Mat(-a.transpose()), 0.3, prob.eta};
    const auto r1 = solve_regularized_matrix_game(prob, MatrixSolveMethod::kPu,
                                                  1e-11, 1000000);
    const auto r2 = solve_regularized_matrix_game(
        swapped, MatrixSolveMethod::kPu, 1e-11, 1000000);
    REQUIRE(r1.diagnostics.converged);
    REQUIRE(r2.diagnostics.converged);
    CHECK((r1.pi1 - r2.pi2).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((r1.pi2 - r2.pi1).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("duality gap closed form") {
  // cross-check against a fine grid of deviations
  Mat a = random_matrix(2, 2, 123);
  const double lambda = 0.3;
  Vec p1(2), p2(2);
  p1 << 0.7, 0.3;
  p2 << 0.4, 0.6;
  const double gap = matrix_duality_gap(a, lambda, p1, p2);
  double best1 = -1e18, best2 = 1e18;
  for (int i = 1; i < 400; ++i) {
    const double q = i / 400.0;
    Vec c(2);
    c << q, 1 - q;
    best1 = std::max(best1, regularized_game_value(a, lambda, c, p2));
    best2 = std::min(best2, regularized_game_value(a, lambda, p1, c));
  }
  CHECK(gap == doctest::Approx(best1 - best2).epsilon(1e-5));
  CHECK(gap >= 0.0);
}
