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

#include "arbiter/implicit_diff.hpp"

#include <cmath>

#include <Eigen/LU>

namespace arbiter {

namespace {

// Rough 2-norm condition estimate by power iteration on A and, through LU
// solves, on A^{-1}. Deterministic start vector.
double condition_power_estimate(const Mat& a,
                                const Eigen::PartialPivLU<Mat>& lu) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return 0.0;
  Vec x = Vec::Ones(n).normalized();
  double sigma_max = 0.0;
  for (int it = 0; it < 30; ++it) {
    Vec y = a.transpose() * (a * x);
    const double norm = y.norm();
    if (norm == 0.0) return std::numeric_limits<double>::infinity();
    x = y / norm;
    sigma_max = std::sqrt(norm);
  }
  Vec z = Vec::Ones(n).normalized();
  double sigma_inv_max = 0.0;
  for (int it = 0; it < 30; ++it) {
    Vec y = lu.solve(z);
    y = lu.transpose().solve(y);
    const double norm = y.norm();
    if (!std::isfinite(norm) || norm == 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    z = y / norm;
    sigma_inv_max = std::sqrt(norm);
  }
  return sigma_max * sigma_inv_max;
}

struct Factorization {
  Eigen::PartialPivLU<Mat> lu;
  double ridge = 0.0;
};

// LU of grad_phi_u, with the documented ridge fallback recorded on the
// system. The residual of a probe solve decides whether the plain
// factorization is usable.
Factorization factorize(SensitivitySystem& system) {
  const Mat& a = system.grad_phi_u;
  Factorization f;
  f.lu = Eigen::PartialPivLU<Mat>(a);
  const bool ill = system.condition_estimate > 1e10 ||
                   !std::isfinite(system.condition_estimate);
  if (!ill) return f;

  const double mu = 1e-8 * a.cwiseAbs().rowwise().sum().maxCoeff();
  Mat ridged = a - mu * Mat::Identity(a.rows(), a.cols());
  f.lu = Eigen::PartialPivLU<Mat>(ridged);
  f.ridge = mu;
  system.ridge_mu = mu;
  system.regularized = true;

  // Probe: the ridged system must actually solve.
  Vec probe = f.lu.solve(Vec::Ones(a.rows()));
  if (!probe.allFinite()) {
    throw SingularSystemError(
        "grad_phi_u is singular even after the ridge fallback (condition "
        "estimate " +
        std::to_string(system.condition_estimate) + ")");
  }
  return f;
}

}  // namespace

double DesignerObjective::fd_self_check(const TabularMarkovGame& game,
                                        const Vec& theta,
                                        const SoftmaxPolicyPair& policy,
                                        double step) const {
  const PolicyParamLayout layout(game);
  double worst = 0.0;
  if (theta.size() > 0) {
    const Vec analytic = grad_theta(theta, policy);
    const Vec fd = finite_difference(
        [&](const Vec& t) { return value(t, policy); }, theta, step);
    for (int i = 0; i < theta.size(); ++i) {
      worst = std::max(worst, std::abs(analytic[i] - fd[i]) /
                                  std::max({1.0, std::abs(analytic[i]),
                                            std::abs(fd[i])}));
    }
  }
  const Vec phi0 = policy.to_phi(layout);
  const Vec analytic_phi = grad_phi(theta, policy);
  const Vec fd_phi = finite_difference(
      [&](const Vec& phi) {
        SoftmaxPolicyPair p = policy;
        p.set_phi(layout, phi);
        return value(theta, p);
      },
      phi0, step);
  for (int i = 0; i < phi0.size(); ++i) {
    worst = std::max(worst, std::abs(analytic_phi[i] - fd_phi[i]) /
                                std::max({1.0, std::abs(analytic_phi[i]),
                                          std::abs(fd_phi[i])}));
  }
  return worst;
}

Vec nu_occupancy(const TabularMarkovGame& game,
                 const SoftmaxPolicyPair& policy) {
  return occupancy_measure(game, policy);
}

Vec nu_initial(const TabularMarkovGame& game) { return game.rho0(); }

SensitivitySystem assemble_system(const TabularMarkovGame& game,
                                  const IncentiveScheme& scheme,
                                  const Vec& theta,
                                  const SoftmaxPolicyPair& ne_policy,
                                  double lambda, const Vec& nu,
                                  const GradModeSpec& mode, double certificate,
                                  double certificate_tol) {
  ARB_CHECK(nu.size() == game.n_states(), "nu dimension");
  const PolicyParamLayout layout(game);
  const int d1 = layout.d1(), d = layout.d();
  const int m = scheme.n_params();

  SensitivitySystem sys;
  sys.u = Vec::Zero(d);
  sys.grad_theta_u = Mat::Zero(d, m);
  sys.grad_phi_u = Mat::Zero(d, d);
  sys.certificate = certificate;
  sys.trusted = std::isfinite(certificate) && certificate <= certificate_tol;

  for (int s = 0; s < game.n_states(); ++s) {
    const double w = nu[s];
    if (w <= 0.0) continue;
    if (game.is_terminal(s)) continue;  // zero contribution

    PlayerBundles bundles;
    if (mode.kind == GradModeSpec::Kind::kExact) {
      bundles = value_grads_exact(game, scheme, theta, ne_policy, lambda, s,
                                  mode.limits);
    } else {
      RngStream rng(mode.seed);
      bundles = value_grads_mc(game, scheme, theta, ne_policy, lambda, s,
                               mode.n_traj,
                               rng.substream(static_cast<std::uint64_t>(s)));
    }

    sys.u.head(d1) += w * bundles.p1.grad_phi;
    sys.u.tail(d - d1) += w * bundles.p2.grad_phi;
    // bundles store m x d_i and d x d_i blocks; the stacked Jacobians place
    // player i's equations as rows.
    sys.grad_theta_u.topRows(d1) += w * bundles.p1.hess_theta_phi.transpose();
    sys.grad_theta_u.bottomRows(d - d1) +=
        w * bundles.p2.hess_theta_phi.transpose();
    sys.grad_phi_u.topRows(d1) += w * bundles.p1.hess_phi_phi.transpose();
    sys.grad_phi_u.bottomRows(d - d1) += w * bundles.p2.hess_phi_phi.transpose();
  }

  Eigen::PartialPivLU<Mat> lu(sys.grad_phi_u);
  sys.condition_estimate = condition_power_estimate(sys.grad_phi_u, lu);
  return sys;
}

Mat ne_sensitivity(SensitivitySystem& system) {
  Factorization f = factorize(system);
  Mat sens = -f.lu.solve(system.grad_theta_u);
  if (!sens.allFinite()) {
    throw SingularSystemError("sensitivity solve produced non-finite values");
  }
  return sens;
}

Vec designer_gradient(const DesignerObjective& objective, const Vec& theta,
                      const SoftmaxPolicyPair& ne_policy,
                      SensitivitySystem& system) {
  Factorization f = factorize(system);
  const Vec gphi = objective.grad_phi(theta, ne_policy);
  const Vec gtheta = objective.grad_theta(theta, ne_policy);
  const Vec w = f.lu.transpose().solve(gphi);
  if (!w.allFinite()) {
    throw SingularSystemError("adjoint solve produced non-finite values");
  }
  return gtheta - system.grad_theta_u.transpose() * w;
}

Vec designer_gradient_explicit(const DesignerObjective& objective,
                               const Vec& theta,
                               const SoftmaxPolicyPair& ne_policy,
                               const Mat& sensitivity) {
  return objective.grad_theta(theta, ne_policy) +
         sensitivity.transpose() * objective.grad_phi(theta, ne_policy);
}

}  // namespace arbiter
