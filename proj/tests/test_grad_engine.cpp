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
#include <functional>

#include "arbiter/environments.hpp"
#include "arbiter/grad_engine.hpp"
#include "support/oracles.hpp"

using namespace arbiter;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_rel(const Vec& a, const Vec& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

double max_rel(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      worst = std::max(worst, rel_err(a(r, c), b(r, c)));
    }
  }
  return worst;
}

// Independent bundle assembly: explicit path enumeration in the test with
// per-path quantities built from policy_score / policy_score_hessian, kept
// structurally separate from the library's accumulator. Also returns the
// standalone lambda-correction terms of the regularized decomposition.
struct TestBundle {
  Vec grad_theta, grad_phi;
  Mat hess_theta_phi, hess_phi_phi;
};
struct TestBundles {
  TestBundle p[2];              // full regularized quantities
  TestBundle unreg[2];          // lambda = 0 quantities
  TestBundle correction[2];     // standalone lambda-correction terms
};

TestBundles brute_force_bundles(const TabularMarkovGame& game,
                                const IncentiveScheme& scheme, const Vec& theta,
                                const SoftmaxPolicyPair& policy, double lambda,
                                int s0) {
  const PolicyParamLayout layout(game);
  const int d = layout.d(), m = scheme.n_params();
  TestBundles out;
  for (int i = 0; i < 2; ++i) {
    for (TestBundle* b : {&out.p[i], &out.unreg[i], &out.correction[i]}) {
      b->grad_theta = Vec::Zero(m);
      b->grad_phi = Vec::Zero(layout.d_player(i + 1));
      b->hess_theta_phi = Mat::Zero(m, layout.d_player(i + 1));
      b->hess_phi_phi = Mat::Zero(d, layout.d_player(i + 1));
    }
  }

  struct Frame {
    double weight = 1.0;
    double r1 = 0.0, delta1 = 0.0;
    Vec grad_theta_r1;
    Vec s[2], sg[2];   // score sums per player (own coordinates)
    Mat h[2], hg[2];   // score-Hessian sums per player
  };
  Frame init;
  init.grad_theta_r1 = Vec::Zero(m);
  for (int i = 0; i < 2; ++i) {
    init.s[i] = Vec::Zero(layout.d_player(i + 1));
    init.sg[i] = Vec::Zero(layout.d_player(i + 1));
    init.h[i] = Mat::Zero(layout.d_player(i + 1), layout.d_player(i + 1));
    init.hg[i] = Mat::Zero(layout.d_player(i + 1), layout.d_player(i + 1));
  }

  std::function<void(int, int, Frame)> walk = [&](int s, int t, Frame f) {
    if (t == game.horizon()) {
      const int d1 = layout.d1();
      for (int i = 0; i < 2; ++i) {
        const double sign = i == 0 ? 1.0 : -1.0;
        const double r = sign * f.r1;
        const double delta = sign * f.delta1;
        const Vec gtheta = sign * f.grad_theta_r1;
        Vec s_full = Vec::Zero(d);
        s_full.head(d1) = f.s[0];
        s_full.tail(d - d1) = f.s[1];
        Vec d_i = Vec::Zero(d);  // discounted own-minus-opponent scores
        if (i == 0) {
          d_i.head(d1) = f.sg[0];
          d_i.tail(d - d1) = -f.sg[1];
        } else {
          d_i.head(d1) = -f.sg[0];
          d_i.tail(d - d1) = f.sg[1];
        }
        Mat h_stack = Mat::Zero(d, layout.d_player(i + 1));
        Mat hg_stack = Mat::Zero(d, layout.d_player(i + 1));
        const int off = i == 0 ? 0 : d1;
        h_stack.block(off, 0, layout.d_player(i + 1), layout.d_player(i + 1)) =
            f.h[i];
        hg_stack.block(off, 0, layout.d_player(i + 1), layout.d_player(i + 1)) =
            f.hg[i];

        // unregularized pieces
        out.unreg[i].grad_theta += f.weight * gtheta;
        out.unreg[i].grad_phi += f.weight * r * f.s[i];
        out.unreg[i].hess_theta_phi += f.weight * gtheta * f.s[i].transpose();
        out.unreg[i].hess_phi_phi +=
            f.weight * r * (s_full * f.s[i].transpose() + h_stack);
        // standalone lambda-correction terms (the five-summand expression)
        out.correction[i].grad_phi +=
            f.weight * (delta * f.s[i] + f.sg[i]);
        out.correction[i].hess_phi_phi +=
            f.weight *
            (delta * s_full * f.s[i].transpose()      // term 1
             + d_i * f.s[i].transpose()               // term 2 (transposed)
             + delta * h_stack                        // term 3
             + s_full * f.sg[i].transpose()           // term 4 (transposed)
             + hg_stack);                             // term 5
        // full quantities = unregularized - lambda * correction
        out.p[i].grad_theta += f.weight * gtheta;
        out.p[i].grad_phi +=
            f.weight * ((r - lambda * delta) * f.s[i] - lambda * f.sg[i]);
        out.p[i].hess_theta_phi += f.weight * gtheta * f.s[i].transpose();
        out.p[i].hess_phi_phi +=
            f.weight * ((r - lambda * delta) *
                            (s_full * f.s[i].transpose() + h_stack) -
                        lambda * (d_i * f.s[i].transpose() +
                                  s_full * f.sg[i].transpose() + hg_stack));
      }
      return;
    }
    const double g = std::pow(game.gamma(), t);
    for (int a1 = 0; a1 < game.n_actions_1(); ++a1) {
      for (int a2 = 0; a2 < game.n_actions_2(); ++a2) {
        Frame nf = f;
        const double p =
            policy.probs(1, s)[a1] * policy.probs(2, s)[a2];
        nf.r1 += g * perturbed_reward(game, scheme, theta, s, a1, a2);
        for (int j = 0; j < m; ++j) {
          nf.grad_theta_r1[j] += g * scheme.feature(j, s, a1, a2);
        }
        nf.delta1 += g * (policy.log_probs(1, s)[a1] -
                          policy.log_probs(2, s)[a2]);
        const Vec sc1 = policy_score(policy, layout, 1, s, a1);
        const Vec sc2 = policy_score(policy, layout, 2, s, a2);
        nf.s[0] += sc1;
        nf.s[1] += sc2;
        nf.sg[0] += g * sc1;
        nf.sg[1] += g * sc2;
        nf.h[0] += policy_score_hessian(policy, layout, 1, s, a1);
        nf.h[1] += policy_score_hessian(policy, layout, 2, s, a2);
        nf.hg[0] += g * policy_score_hessian(policy, layout, 1, s, a1);
        nf.hg[1] += g * policy_score_hessian(policy, layout, 2, s, a2);
        for (const auto& [ns, pr] : game.next(s, a1, a2).entries) {
          Frame leaf = nf;
          leaf.weight = f.weight * p * pr;
          walk(ns, t + 1, leaf);
        }
      }
    }
  };
  walk(s0, 0, init);
  return out;
}

}  // namespace

TEST_CASE("policy_score closed form") {
  auto [game, scheme] = build_twostate();
  const PolicyParamLayout layout(game);

  SUBCASE("uniform two-action policy") {
    SoftmaxPolicyPair uniform(2, 2, 2);
    const Vec s = policy_score(uniform, layout, 1, 0, 0);
    CHECK(s[layout.local_index(1, 0, 0)] == doctest::Approx(0.5));
    CHECK(s[layout.local_index(1, 1, 0)] == doctest::Approx(0.0));
    // pinned action: the free coordinate moves by -pi
    const Vec sp = policy_score(uniform, layout, 1, 0, 1);
    CHECK(sp[layout.local_index(1, 0, 0)] == doctest::Approx(-0.5));
  }

  SUBCASE("score identity: E_a[score] = 0") {
    auto policy = oracles::random_policy(game, 5);
    for (int player : {1, 2}) {
      for (int s = 0; s < 2; ++s) {
        Vec mean = Vec::Zero(layout.d_player(player));
        const Vec p = policy.probs(player, s);
        for (int a = 0; a < 2; ++a) {
          mean += p[a] * policy_score(policy, layout, player, s, a);
        }
        CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }

  SUBCASE("matches finite differences of log pi") {
    auto policy = twostate_canonical_policy();
    const Vec phi0 = policy.to_phi(layout);
    for (int player : {1, 2}) {
      for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
          const Vec analytic = policy_score(policy, layout, player, s, a);
          const Vec fd = finite_difference(
              [&](const Vec& phi) {
                SoftmaxPolicyPair p = policy;
                p.set_phi(layout, phi);
                return p.log_probs(player, s)[a];
              },
              phi0, 1e-6);
          const Vec fd_own = fd.segment(layout.player_offset(player),
                                        layout.d_player(player));
          CHECK((analytic - fd_own).cwiseAbs().maxCoeff() < 1e-8);
        }
      }
    }
  }
}

TEST_CASE("policy_score_hessian closed form") {
  auto [game, scheme] = build_twostate();
  const PolicyParamLayout layout(game);

  SUBCASE("two-action uniform gives -1/4 on the free logit") {
    SoftmaxPolicyPair uniform(2, 2, 2);
    const Mat h = policy_score_hessian(uniform, layout, 1, 0, 0);
    const int i = layout.local_index(1, 0, 0);
    CHECK(h(i, i) == doctest::Approx(-0.25));
  }

  SUBCASE("independent of the queried action") {
    auto policy = oracles::random_policy(game, 6);
    const Mat h0 = policy_score_hessian(policy, layout, 2, 1, 0);
    const Mat h1 = policy_score_hessian(policy, layout, 2, 1, 1);
    CHECK((h0 - h1).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("matches finite differences of the score") {
    auto policy = twostate_canonical_policy();
    const Vec phi0 = policy.to_phi(layout);
    for (int player : {1, 2}) {
      const int dp = layout.d_player(player);
      const Mat analytic = policy_score_hessian(policy, layout, player, 0, 1);
      for (int row = 0; row < dp; ++row) {
        const Vec fd = finite_difference(
            [&](const Vec& phi) {
              SoftmaxPolicyPair p = policy;
              p.set_phi(layout, phi);
              return policy_score(p, layout, player, 0, 1)[row];
            },
            phi0, 1e-6);
        for (int col = 0; col < dp; ++col) {
          CHECK(std::abs(analytic(row, col) -
                         fd[layout.player_offset(player) + col]) < 1e-6);
        }
      }
    }
  }

  SUBCASE("Bartlett identity") {
    auto policy = oracles::random_policy(game, 7);
    for (int player : {1, 2}) {
      for (int s = 0; s < 2; ++s) {
        const Vec p = policy.probs(player, s);
        Mat acc = Mat::Zero(layout.d_player(player), layout.d_player(player));
        for (int a = 0; a < 2; ++a) {
          const Vec sc = policy_score(policy, layout, player, s, a);
          acc += p[a] * (policy_score_hessian(policy, layout, player, s, a) +
                         sc * sc.transpose());
        }
        CHECK(acc.cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }
}

TEST_CASE("value_grads_exact") {
  auto [game, scheme] = build_twostate();
  const Vec theta = twostate_canonical_theta();
  auto policy = twostate_canonical_policy();
  const PolicyParamLayout layout(game);

  SUBCASE("theta-independent rewards zero the theta blocks") {
    auto empty = IncentiveScheme::empty(game);
    Vec none(0);
    const auto bundles =
        value_grads_exact(game, empty, none, policy, 0.3, 0);
    CHECK(bundles.p1.grad_theta.size() == 0);
    CHECK(bundles.p1.hess_theta_phi.rows() == 0);
    // zero feature tensors give exactly zero theta blocks
    std::vector<std::vector<double>> zero_feats(
        1, std::vector<double>(8, 0.0));
    IncentiveScheme zero_scheme(2, 2, 2, zero_feats, {{-1.0, 1.0}});
    Vec t1(1);
    t1 << 0.3;
    const auto zb = value_grads_exact(game, zero_scheme, t1, policy, 0.3, 0);
    CHECK(zb.p1.grad_theta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zb.p1.hess_theta_phi.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zb.p2.grad_theta.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("lambda 0 gradients match FD of the unregularized value") {
    for (int s0 = 0; s0 < 2; ++s0) {
      const auto bundles =
          value_grads_exact(game, scheme, theta, policy, 0.0, s0);
      const Vec phi0 = policy.to_phi(layout);
      for (int player : {1, 2}) {
        const auto& b = player == 1 ? bundles.p1 : bundles.p2;
        const Vec fd = finite_difference(
            [&](const Vec& phi) {
              SoftmaxPolicyPair p = policy;
              p.set_phi(layout, phi);
              return evaluate_value(game, scheme, theta, p, 0.0, player)[s0];
            },
            phi0, 1e-5);
        CHECK(max_rel(b.grad_phi,
                      Vec(fd.segment(layout.player_offset(player),
                                     layout.d_player(player)))) < 1e-7);
      }
    }
  }

  SUBCASE("canonical game: every block matches FD at 1e-6 relative") {
    const double lambda = 0.3;
    for (int s0 = 0; s0 < 2; ++s0) {
      const auto bundles =
          value_grads_exact(game, scheme, theta, policy, lambda, s0);
      const Vec phi0 = policy.to_phi(layout);
      for (int player : {1, 2}) {
        const auto& b = player == 1 ? bundles.p1 : bundles.p2;
        const Vec fd_theta = finite_difference(
            [&](const Vec& t) {
              return evaluate_value(game, scheme, t, policy, lambda,
                                    player)[s0];
            },
            theta, 1e-5);
        CHECK(max_rel(b.grad_theta, fd_theta) < 1e-6);
        const Vec fd_phi = finite_difference(
            [&](const Vec& phi) {
              SoftmaxPolicyPair p = policy;
              p.set_phi(layout, phi);
              return evaluate_value(game, scheme, theta, p, lambda,
                                    player)[s0];
            },
            phi0, 1e-5);
        CHECK(max_rel(b.grad_phi,
                      Vec(fd_phi.segment(layout.player_offset(player),
                                         layout.d_player(player)))) < 1e-6);
      }
    }
  }

  SUBCASE("agrees with the independent brute-force assembly") {
    const double lambda = 0.3;
    for (int s0 = 0; s0 < 2; ++s0) {
      const auto lib = value_grads_exact(game, scheme, theta, policy, lambda, s0);
      const auto brute =
          brute_force_bundles(game, scheme, theta, policy, lambda, s0);
      for (int i = 0; i < 2; ++i) {
        const auto& l = i == 0 ? lib.p1 : lib.p2;
        CHECK((l.grad_theta - brute.p[i].grad_theta).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK((l.grad_phi - brute.p[i].grad_phi).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((l.hess_theta_phi - brute.p[i].hess_theta_phi)
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
        CHECK((l.hess_phi_phi - brute.p[i].hess_phi_phi).cwiseAbs().maxCoeff() <
              1e-12);
      }
    }
  }

  SUBCASE("regularized bundle decomposes into lambda-corrections exactly") {
    const double lambda = 0.3;
    const auto lib = value_grads_exact(game, scheme, theta, policy, lambda, 1);
    const auto brute =
        brute_force_bundles(game, scheme, theta, policy, lambda, 1);
    for (int i = 0; i < 2; ++i) {
      const auto& l = i == 0 ? lib.p1 : lib.p2;
      const Vec grad_recomposed =
          brute.unreg[i].grad_phi - lambda * brute.correction[i].grad_phi;
      CHECK((l.grad_phi - grad_recomposed).cwiseAbs().maxCoeff() < 1e-12);
      const Mat hess_recomposed = brute.unreg[i].hess_phi_phi -
                                  lambda * brute.correction[i].hess_phi_phi;
      CHECK((l.hess_phi_phi - hess_recomposed).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((l.grad_theta - brute.unreg[i].grad_theta).cwiseAbs().maxCoeff() <
            1e-12);
      CHECK((l.hess_theta_phi - brute.unreg[i].hess_theta_phi)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
  }

  SUBCASE("Hessian blocks are FD-consistent in both differentiation orders") {
    const double lambda = 0.3;
    const Vec phi0 = policy.to_phi(layout);
    const auto bundles = value_grads_exact(game, scheme, theta, policy, lambda, 0);
    for (int player : {1, 2}) {
      const auto& b = player == 1 ? bundles.p1 : bundles.p2;
      // d/dphi of grad_theta vs d/dtheta of grad_phi
      Mat fd_a(scheme.n_params(), layout.d_player(player));
      for (int j = 0; j < scheme.n_params(); ++j) {
        const Vec row = finite_difference(
            [&](const Vec& phi) {
              SoftmaxPolicyPair p = policy;
              p.set_phi(layout, phi);
              const auto bb =
                  value_grads_exact(game, scheme, theta, p, lambda, 0);
              return (player == 1 ? bb.p1 : bb.p2).grad_theta[j];
            },
            phi0, 1e-5);
        fd_a.row(j) = row.segment(layout.player_offset(player),
                                  layout.d_player(player))
                          .transpose();
      }
      Mat fd_b(scheme.n_params(), layout.d_player(player));
      for (int c = 0; c < layout.d_player(player); ++c) {
        const Vec col = finite_difference(
            [&](const Vec& t) {
              const auto bb =
                  value_grads_exact(game, scheme, t, policy, lambda, 0);
              return (player == 1 ? bb.p1 : bb.p2).grad_phi[c];
            },
            theta, 1e-5);
        fd_b.col(c) = col;
      }
      CHECK(max_rel(b.hess_theta_phi, fd_a) < 1e-5);
      CHECK(max_rel(b.hess_theta_phi, fd_b) < 1e-5);
    }
  }

  SUBCASE("enumeration cap refusal") {
    EnumerationLimits limits;
    limits.max_paths = 10;
    CHECK_THROWS_AS(
        value_grads_exact(game, scheme, theta, policy, 0.3, 0, limits),
        InvalidArgument);
    CHECK(count_trajectories(game, 0) == 512);  // (4 joint * 2 states)^3
  }
}

TEST_CASE("value_grads_mc") {
  auto [game, scheme] = build_twostate();
  const Vec theta = twostate_canonical_theta();
  auto policy = twostate_canonical_policy();
  const double lambda = 0.3;

  SUBCASE("deterministic game: MC equals exact for any trajectory count") {
    // single state, deterministic policies: one trajectory
    SyntheticConfig cfg;
    cfg.horizon = 3;
    auto env = build_synthetic_environment(cfg);
    SoftmaxPolicyPair det(1, 2, 2);
    det.set_logit(1, 0, 0, 200.0);
    det.set_logit(2, 0, 0, 200.0);
    Vec t1(1);
    t1 << 0.2;
    const auto exact =
        value_grads_exact(*env.game, *env.scheme, t1, det, lambda, 0);
    const auto mc = value_grads_mc(*env.game, *env.scheme, t1, det, lambda, 0,
                                   16, RngStream(3));
    CHECK((exact.p1.grad_phi - mc.p1.grad_phi).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((exact.p1.grad_theta - mc.p1.grad_theta).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((exact.p1.hess_phi_phi - mc.p1.hess_phi_phi).cwiseAbs().maxCoeff() <
          1e-9);
  }

  SUBCASE("10^4 trajectories land within 4 standard errors of exact") {
    const auto exact = value_grads_exact(game, scheme, theta, policy, lambda, 0);
    const auto mc = value_grads_mc(game, scheme, theta, policy, lambda, 0,
                                   10000, RngStream(42));
    auto within = [&](double est, double se, double truth) {
      return std::abs(est - truth) <= 4.0 * se + 1e-9;
    };
    for (int i = 0; i < mc.p1.grad_phi.size(); ++i) {
      CHECK(within(mc.p1.grad_phi[i], mc.p1.se_grad_phi[i],
                   exact.p1.grad_phi[i]));
    }
    for (int i = 0; i < mc.p1.grad_theta.size(); ++i) {
      CHECK(within(mc.p1.grad_theta[i], mc.p1.se_grad_theta[i],
                   exact.p1.grad_theta[i]));
    }
    for (int r = 0; r < mc.p2.hess_phi_phi.rows(); ++r) {
      for (int c = 0; c < mc.p2.hess_phi_phi.cols(); ++c) {
        CHECK(within(mc.p2.hess_phi_phi(r, c), mc.p2.se_hess_phi_phi(r, c),
                     exact.p2.hess_phi_phi(r, c)));
      }
    }
  }

  SUBCASE("doubling the sample count shrinks the mean SE like 1/sqrt(n)") {
    const auto a = value_grads_mc(game, scheme, theta, policy, lambda, 0, 4000,
                                  RngStream(7));
    const auto b = value_grads_mc(game, scheme, theta, policy, lambda, 0, 8000,
                                  RngStream(7));
    const double mean_a = a.p1.se_grad_phi.mean() + a.p2.se_grad_phi.mean();
    const double mean_b = b.p1.se_grad_phi.mean() + b.p2.se_grad_phi.mean();
    const double ratio = mean_b / mean_a;
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
  }

  SUBCASE("estimator is unbiased across independent seeds") {
    const auto exact = value_grads_exact(game, scheme, theta, policy, lambda, 1);
    const int n_seeds = 50, n_traj = 400;
    Vec mean_grad = Vec::Zero(exact.p1.grad_phi.size());
    Vec var_acc = Vec::Zero(exact.p1.grad_phi.size());
    for (int k = 0; k < n_seeds; ++k) {
      const auto mc = value_grads_mc(game, scheme, theta, policy, lambda, 1,
                                     n_traj, RngStream(1000 + k));
      mean_grad += mc.p1.grad_phi;
      var_acc += mc.p1.se_grad_phi.cwiseProduct(mc.p1.se_grad_phi);
    }
    mean_grad /= n_seeds;
    for (int i = 0; i < mean_grad.size(); ++i) {
      const double combined_se = std::sqrt(var_acc[i]) / n_seeds;
      CHECK(std::abs(mean_grad[i] - exact.p1.grad_phi[i]) <=
            3.0 * combined_se + 1e-9);
    }
  }

  SUBCASE("deterministic given the seed") {
    const auto a = value_grads_mc(game, scheme, theta, policy, lambda, 0, 500,
                                  RngStream(13));
    const auto b = value_grads_mc(game, scheme, theta, policy, lambda, 0, 500,
                                  RngStream(13));
    CHECK((a.p1.grad_phi - b.p1.grad_phi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.p2.hess_phi_phi - b.p2.hess_phi_phi).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("baseline flag keeps the estimator consistent") {
    McOptions opts;
    opts.mean_baseline = true;
    const auto exact = value_grads_exact(game, scheme, theta, policy, lambda, 0);
    const auto mc = value_grads_mc(game, scheme, theta, policy, lambda, 0,
                                   20000, RngStream(11), opts);
    for (int i = 0; i < mc.p1.grad_phi.size(); ++i) {
      CHECK(std::abs(mc.p1.grad_phi[i] - exact.p1.grad_phi[i]) <=
            4.0 * mc.p1.se_grad_phi[i] + 1e-9);
    }
  }
}

TEST_CASE("finite_difference utility") {
  SUBCASE("quadratic") {
    Vec x(2);
    x << 1.0, 2.0;
    const Vec g = finite_difference(
        [](const Vec& v) { return 0.5 * v.squaredNorm(); }, x, 1e-5);
    CHECK((g - x).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("constant function") {
    Vec x(3);
    x << -1, 0, 2;
    const Vec g =
        finite_difference([](const Vec&) { return 3.14; }, x, 1e-5);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-12 / 1e-5);
  }

  SUBCASE("cross-oracle: FD of the value matches grad_theta") {
    auto [game, scheme] = build_twostate();
    const Vec theta = twostate_canonical_theta();
    auto policy = twostate_canonical_policy();
    const auto bundle = value_grads_exact(game, scheme, theta, policy, 0.0, 0);
    const Vec fd = finite_difference_auto(
        [&](const Vec& t) {
          return evaluate_value(game, scheme, t, policy, 0.0, 1)[0];
        },
        theta);
    CHECK(max_rel(bundle.p1.grad_theta, fd) < 1e-7);
  }
}
