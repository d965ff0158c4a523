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

#include "arbiter/environments.hpp"
#include "arbiter/implicit_diff.hpp"
#include "arbiter/mg_solvers.hpp"
#include "support/oracles.hpp"

using namespace arbiter;

namespace {

// Two-state deterministic game with one incentive feature; gamma is small so
// the horizon-T stationarity and the stationary solver NE agree closely.
std::pair<TabularMarkovGame, IncentiveScheme> sensitivity_game() {
  std::vector<TransitionRow> tr(8);
  // deterministic next-state pattern over (s, a1, a2)
  const int next_state[8] = {1, 0, 1, 1, 0, 1, 0, 0};
  for (int i = 0; i < 8; ++i) tr[i].entries = {{next_state[i], 1.0}};
  std::vector<double> reward = {0.6, -0.4, -0.2, 0.5, -0.5, 0.3, 0.2, -0.6};
  std::vector<double> g = {1.0, 0.0, -0.5, 0.0, 0.0, 0.8, 0.0, -0.3};
  Vec rho0(2);
  rho0 << 1.0, 0.0;
  TabularMarkovGame game(2, 2, 2, std::move(tr), std::move(reward), 0.3, 8,
                         rho0);
  IncentiveScheme scheme(2, 2, 2, {g}, {{-0.5, 0.5}});
  scheme.validate_bound(game);
  return {std::move(game), std::move(scheme)};
}

SolveConfig tight_solve(double lambda) {
  SolveConfig cfg;
  cfg.method = MgMethod::kErOmwu;
  cfg.lambda = lambda;
  cfg.tol = 1e-10;
  cfg.check_every = 50;
  return cfg;
}

}  // namespace

TEST_CASE("assemble_system") {
  SUBCASE("stationarity vanishes at a certified NE of the synthetic game") {
    auto env = build_synthetic_environment();
    Vec theta(1);
    theta << 0.3;
    const SolveResult ne =
        nash_solve(*env.game, *env.scheme, theta, tight_solve(env.lambda));
    REQUIRE(ne.certified);
    const Vec nu = nu_occupancy(*env.game, ne.policy);
    SensitivitySystem sys =
        assemble_system(*env.game, *env.scheme, theta, ne.policy, env.lambda,
                        nu, GradModeSpec{}, ne.exploitability, 1e-6);
    CHECK(sys.trusted);
    CHECK(sys.u.cwiseAbs().maxCoeff() < 1e-5);
  }

  SUBCASE("zero features give exactly zero grad_theta_u") {
    auto [game, scheme] = build_twostate();
    std::vector<std::vector<double>> zero_feats(1, std::vector<double>(8, 0.0));
    IncentiveScheme zero_scheme(2, 2, 2, zero_feats, {{-1.0, 1.0}});
    Vec theta(1);
    theta << 0.2;
    auto policy = twostate_canonical_policy();
    SensitivitySystem sys =
        assemble_system(game, zero_scheme, theta, policy, 0.3,
                        nu_occupancy(game, policy), GradModeSpec{});
    CHECK(sys.grad_theta_u.cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(sys.trusted);  // no certificate supplied
  }

  SUBCASE("exact and Monte-Carlo assemblies agree within 4 standard errors") {
    auto env = build_synthetic_environment();
    Vec theta(1);
    theta << 0.2;
    const SolveResult ne =
        nash_solve(*env.game, *env.scheme, theta, tight_solve(env.lambda));
    const Vec nu = nu_occupancy(*env.game, ne.policy);
    SensitivitySystem exact =
        assemble_system(*env.game, *env.scheme, theta, ne.policy, env.lambda,
                        nu, GradModeSpec{}, ne.exploitability, 1e-6);
    GradModeSpec mc;
    mc.kind = GradModeSpec::Kind::kMonteCarlo;
    mc.n_traj = 100000;
    mc.seed = 9;
    SensitivitySystem sampled =
        assemble_system(*env.game, *env.scheme, theta, ne.policy, env.lambda,
                        nu, mc, ne.exploitability, 1e-6);
    // pull the per-entry standard errors from the bundle the system stacks
    RngStream rng(mc.seed);
    const auto bundles =
        value_grads_mc(*env.game, *env.scheme, theta, ne.policy, env.lambda, 0,
                       mc.n_traj, rng.substream(0));
    const int d1 = bundles.p1.grad_phi.size();
    for (int i = 0; i < exact.u.size(); ++i) {
      const double se = i < d1 ? bundles.p1.se_grad_phi[i]
                               : bundles.p2.se_grad_phi[i - d1];
      CHECK(std::abs(sampled.u[i] - exact.u[i]) <= 4.0 * se + 1e-9);
    }
    for (int r = 0; r < exact.grad_theta_u.rows(); ++r) {
      const double se = r < d1 ? bundles.p1.se_hess_theta_phi(0, r)
                               : bundles.p2.se_hess_theta_phi(0, r - d1);
      CHECK(std::abs(sampled.grad_theta_u(r, 0) - exact.grad_theta_u(r, 0)) <=
            4.0 * se + 1e-9);
    }
  }
}

TEST_CASE("ne_sensitivity") {
  SUBCASE("zero grad_theta_u gives zero sensitivity") {
    SensitivitySystem sys;
    sys.u = Vec::Zero(3);
    sys.grad_phi_u = -Mat::Identity(3, 3);
    sys.grad_theta_u = Mat::Zero(3, 2);
    sys.condition_estimate = 1.0;
    const Mat sens = ne_sensitivity(sys);
    CHECK(sens.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("diagonal system solves componentwise") {
    SensitivitySystem sys;
    sys.u = Vec::Zero(2);
    sys.grad_phi_u = -2.0 * Mat::Identity(2, 2);
    sys.grad_theta_u = Mat::Ones(2, 1);
    sys.condition_estimate = 1.0;
    const Mat sens = ne_sensitivity(sys);
    CHECK((sens - 0.5 * Mat::Ones(2, 1)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_FALSE(sys.regularized);
  }

  SUBCASE("singular system falls back to the ridge and records it") {
    SensitivitySystem sys;
    sys.u = Vec::Zero(2);
    sys.grad_phi_u = Mat::Zero(2, 2);
    sys.grad_phi_u(0, 0) = -1.0;  // second row identically zero
    sys.grad_theta_u = Mat::Ones(2, 1);
    sys.condition_estimate = 1e18;
    const Mat sens = ne_sensitivity(sys);
    CHECK(sys.regularized);
    CHECK(sys.ridge_mu > 0.0);
    CHECK(std::isfinite(sens(0, 0)));
  }

  SUBCASE("matches finite differences through the resolved NE") {
    auto [game, scheme] = sensitivity_game();
    const double lambda = 0.5;
    Vec theta(1);
    theta << 0.1;
    const PolicyParamLayout layout(game);

    SolveConfig cfg = tight_solve(lambda);
    cfg.tol = 1e-12;  // the FD probe needs the resolves at machine precision
    const SolveResult ne = nash_solve(game, scheme, theta, cfg);
    SensitivitySystem sys = assemble_system(
        game, scheme, theta, ne.policy, lambda, nu_occupancy(game, ne.policy),
        GradModeSpec{}, ne.exploitability, 1.0);
    const Mat sens = ne_sensitivity(sys);

    const double h = 1e-4;
    Vec tp = theta, tm = theta;
    tp[0] += h;
    tm[0] -= h;
    const SolveResult np = nash_solve(game, scheme, tp, cfg, &ne.policy);
    const SolveResult nm = nash_solve(game, scheme, tm, cfg, &ne.policy);
    const Vec fd =
        (np.policy.to_phi(layout) - nm.policy.to_phi(layout)) / (2.0 * h);
    CHECK((Vec(sens.col(0)) - fd).norm() / fd.norm() < 0.02);
  }

  SUBCASE("Lemma residual: grad_theta_u + grad_phi_u sens = 0") {
    auto [game, scheme] = sensitivity_game();
    Vec theta(1);
    theta << -0.2;
    const SolveResult ne = nash_solve(game, scheme, theta, tight_solve(0.5));
    SensitivitySystem sys = assemble_system(
        game, scheme, theta, ne.policy, 0.5, nu_occupancy(game, ne.policy),
        GradModeSpec{}, ne.exploitability, 1.0);
    const Mat sens = ne_sensitivity(sys);
    REQUIRE_FALSE(sys.regularized);
    const Mat residual = sys.grad_theta_u + sys.grad_phi_u * sens;
    CHECK(residual.cwiseAbs().maxCoeff() <=
          1e-8 * sys.grad_theta_u.cwiseAbs().maxCoeff() + 1e-14);
  }
}

TEST_CASE("designer_gradient") {
  SUBCASE("theta-only objective collapses to grad_theta f") {
    auto env = build_synthetic_environment();
    Vec theta(1);
    theta << 0.4;
    const SolveResult ne =
        nash_solve(*env.game, *env.scheme, theta, tight_solve(env.lambda));
    DesignerObjective obj;
    obj.value = [](const Vec& t, const SoftmaxPolicyPair&) {
      return t.squaredNorm();
    };
    obj.grad_theta = [](const Vec& t, const SoftmaxPolicyPair&) {
      return Vec(2.0 * t);
    };
    obj.grad_phi = [&](const Vec&, const SoftmaxPolicyPair&) {
      return Vec(Vec::Zero(2));
    };
    SensitivitySystem sys = assemble_system(
        *env.game, *env.scheme, theta, ne.policy, env.lambda,
        nu_occupancy(*env.game, ne.policy), GradModeSpec{}, ne.exploitability,
        1e-6);
    const Vec g = designer_gradient(obj, theta, ne.policy, sys);
    CHECK(g[0] == doctest::Approx(2.0 * theta[0]).epsilon(1e-12));
  }

  SUBCASE("phi-only objective with zero coupling gives zero gradient") {
    auto [game, scheme] = build_twostate();
    std::vector<std::vector<double>> zero_feats(1, std::vector<double>(8, 0.0));
    IncentiveScheme zero_scheme(2, 2, 2, zero_feats, {{-1.0, 1.0}});
    Vec theta(1);
    theta << 0.0;
    const SolveResult ne = nash_solve(game, zero_scheme, theta, tight_solve(0.3));
    DesignerObjective obj = make_policy_target_objective(game, 0, 0, 0.7, 0.0);
    SensitivitySystem sys = assemble_system(
        game, zero_scheme, theta, ne.policy, 0.3,
        nu_occupancy(game, ne.policy), GradModeSpec{}, ne.exploitability, 1.0);
    const Vec g = designer_gradient(obj, theta, ne.policy, sys);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("synthetic instance matches FD of f* through the resolve") {
    auto env = build_synthetic_environment();
    Vec theta(1);
    theta << 0.25;
    SolveConfig cfg = tight_solve(env.lambda);
    const SolveResult ne = nash_solve(*env.game, *env.scheme, theta, cfg);
    REQUIRE(ne.certified);
    SensitivitySystem sys = assemble_system(
        *env.game, *env.scheme, theta, ne.policy, env.lambda,
        nu_occupancy(*env.game, ne.policy), GradModeSpec{}, ne.exploitability,
        1e-6);
    const Vec g = designer_gradient(env.objective, theta, ne.policy, sys);

    const double h = 1e-4;
    Vec tp = theta, tm = theta;
    tp[0] += h;
    tm[0] -= h;
    const SolveResult np = nash_solve(*env.game, *env.scheme, tp, cfg);
    const SolveResult nm = nash_solve(*env.game, *env.scheme, tm, cfg);
    const double fd = (env.objective.value(tp, np.policy) -
                       env.objective.value(tm, nm.policy)) /
                      (2.0 * h);
    CHECK(std::abs(g[0] - fd) / std::max(std::abs(fd), 1e-12) < 0.05);
  }

  SUBCASE("adjoint and explicit forms coincide") {
    auto [game, scheme] = sensitivity_game();
    Vec theta(1);
    theta << 0.15;
    const SolveResult ne = nash_solve(game, scheme, theta, tight_solve(0.5));
    DesignerObjective obj = make_policy_target_objective(game, 0, 0, 0.55, 0.02);
    SensitivitySystem sys = assemble_system(
        game, scheme, theta, ne.policy, 0.5, nu_occupancy(game, ne.policy),
        GradModeSpec{}, ne.exploitability, 1.0);
    const Vec adjoint = designer_gradient(obj, theta, ne.policy, sys);
    const Mat sens = ne_sensitivity(sys);
    const Vec explicit_form =
        designer_gradient_explicit(obj, theta, ne.policy, sens);
    CHECK((adjoint - explicit_form).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("gradient settles as the lower-level tolerance tightens") {
    auto env = build_synthetic_environment();
    Vec theta(1);
    theta << 0.3;
    std::vector<double> grads;
    for (double tol : {1e-4, 1e-6, 1e-8, 1e-10}) {
      SolveConfig cfg = tight_solve(env.lambda);
      cfg.tol = tol;
      cfg.check_every = 1;
      const SolveResult ne = nash_solve(*env.game, *env.scheme, theta, cfg);
      SensitivitySystem sys = assemble_system(
          *env.game, *env.scheme, theta, ne.policy, env.lambda,
          nu_occupancy(*env.game, ne.policy), GradModeSpec{},
          ne.exploitability, 1e-3);
      grads.push_back(designer_gradient(env.objective, theta, ne.policy,
                                        sys)[0]);
    }
    const double d1 = std::abs(grads[1] - grads[0]);
    const double d2 = std::abs(grads[2] - grads[1]);
    const double d3 = std::abs(grads[3] - grads[2]);
    CHECK(d2 <= d1 + 1e-12);
    CHECK(d3 <= d2 + 1e-12);
  }

  SUBCASE("objective self-test passes at random points") {
    auto env = build_synthetic_environment();
    Vec theta(1);
    theta << -0.35;
    auto policy = oracles::random_policy(*env.game, 77);
    CHECK(env.objective.fd_self_check(*env.game, theta, policy) < 1e-6);
  }
}
