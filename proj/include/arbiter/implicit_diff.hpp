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

#ifndef ARBITER_IMPLICIT_DIFF_HPP_
#define ARBITER_IMPLICIT_DIFF_HPP_

#include <cstdint>
#include <functional>
#include <limits>

#include "arbiter/grad_engine.hpp"

namespace arbiter {

struct GradModeSpec {
  enum class Kind { kExact, kMonteCarlo } kind = Kind::kExact;
  int n_traj = 10000;          // Monte-Carlo only
  std::uint64_t seed = 0;      // Monte-Carlo only
  EnumerationLimits limits{};  // exact only
};

// Stationarity vector u = (E_nu grad_{phi1} V1, E_nu grad_{phi2} V2) and its
// Jacobians in theta and phi, assembled from per-start-state bundles.
struct SensitivitySystem {
  Vec u;             // d
  Mat grad_theta_u;  // d x m
  Mat grad_phi_u;    // d x d
  double condition_estimate = 0.0;
  double ridge_mu = 0.0;  // ridge actually applied by the solves (0 if none)
  bool regularized = false;
  bool trusted = true;    // false when the NE certificate is missing/exceeded
  double certificate = std::numeric_limits<double>::quiet_NaN();
};

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Upper-level objective f(theta, phi) with its gradient evaluators. grad_phi
// is expressed in the stacked phi layout of the game's decision states.
struct DesignerObjective {
  std::function<double(const Vec& theta, const SoftmaxPolicyPair& policy)> value;
  std::function<Vec(const Vec& theta, const SoftmaxPolicyPair& policy)>
      grad_theta;
  std::function<Vec(const Vec& theta, const SoftmaxPolicyPair& policy)> grad_phi;

  // Registered self-test: max |analytic - FD| / max(1, |.|) over both blocks
  // at the given point.
  double fd_self_check(const TabularMarkovGame& game, const Vec& theta,
                       const SoftmaxPolicyPair& policy, double step = 1e-5) const;
};

// nu choices for the expectation weighting the stationarity conditions.
Vec nu_occupancy(const TabularMarkovGame& game, const SoftmaxPolicyPair& policy);
Vec nu_initial(const TabularMarkovGame& game);

// Builds u, grad_theta_u and grad_phi_u at the given policy. `certificate`
// is the exploitability certificate of the NE solve that produced the
// policy; NaN (missing) or a value above certificate_tol taints the system.
SensitivitySystem assemble_system(
    const TabularMarkovGame& game, const IncentiveScheme& scheme,
    const Vec& theta, const SoftmaxPolicyPair& ne_policy, double lambda,
    const Vec& nu, const GradModeSpec& mode,
    double certificate = std::numeric_limits<double>::quiet_NaN(),
    double certificate_tol = 1e-6);

// d phi*/d theta = -[grad_phi_u]^{-1} grad_theta_u via a pivoted LU solve.
// When the condition estimate exceeds 1e10 the solve retries with
// grad_phi_u - mu I, mu = 1e-8 ||grad_phi_u||_inf, and records mu in the
// system. Throws SingularSystemError when even the ridge solve fails.
Mat ne_sensitivity(SensitivitySystem& system);

// grad f*(theta) = grad_theta f - (grad_theta_u)' [grad_phi_u]^{-T} grad_phi f,
// evaluated at the NE policy (adjoint form, one factorization).
Vec designer_gradient(const DesignerObjective& objective, const Vec& theta,
                      const SoftmaxPolicyPair& ne_policy,
                      SensitivitySystem& system);

// Same value through the explicit sensitivity matrix (kept for tests).
Vec designer_gradient_explicit(const DesignerObjective& objective,
                               const Vec& theta,
                               const SoftmaxPolicyPair& ne_policy,
                               const Mat& sensitivity);

}  // namespace arbiter

#endif  // ARBITER_IMPLICIT_DIFF_HPP_
