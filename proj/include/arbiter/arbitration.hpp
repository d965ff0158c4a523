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

#ifndef ARBITER_ARBITRATION_HPP_
#define ARBITER_ARBITRATION_HPP_

#include <atomic>
#include <functional>
#include <memory>
#include <vector>

#include "arbiter/environments.hpp"
#include "arbiter/mg_solvers.hpp"

namespace arbiter {

struct StepSchedule {
  double beta = 0.5;         // constant step; pick 1/L when an L surrogate exists
  bool backtracking = true;  // halve the step while f* increases
  int max_halvings = 12;
};

struct ArbitrationRecord {
  int k = 0;
  Vec theta;
  double f_star = 0.0;
  double grad_norm = 0.0;
  int solver_outer_iterations = 0;
  double certificate = 0.0;
  bool certified = false;
  bool gradient_trusted = true;
  double wall_ms = 0.0;
  long long ne_solves_cumulative = 0;
};

struct ArbitrationHistory {
  std::vector<ArbitrationRecord> records;
  Vec theta_final;
  long long total_ne_solves = 0;
};

struct DaOptions {
  bool warm_start = true;  // reuse the previous NE as the solver init
  bool nu_rho0 = false;    // weight stationarity by rho0 instead of occupancy
  GradModeSpec grad_mode{};
  // Retry budget when the lower level fails to certify: pull theta halfway
  // back toward the previous iterate and re-solve.
  int max_solve_retries = 3;
};

// Projected first-order descent on f*(theta): per iteration one NE solve
// (warm-started), one sensitivity assembly, one implicit gradient, then a
// clamped step with optional backtracking. Every lower-level solve is
// counted in the records.
ArbitrationHistory da_run(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme,
                          const DesignerObjective& objective, const Vec& theta0,
                          const SolveConfig& solve_config,
                          const StepSchedule& schedule, int iterations,
                          const DaOptions& options = {});

// --- Zeroth-order baselines ---------------------------------------------------

// f*(theta) oracle: each call performs a full NE solve. The counter tracks
// evaluator invocations; baselines report it as their NE-solve count. fn is
// safe to call from several threads.
struct FStarEvaluator {
  std::function<double(const Vec&)> fn;
  std::shared_ptr<std::atomic<long long>> solve_count;
};

FStarEvaluator make_f_star_evaluator(const TabularMarkovGame& game,
                                     const IncentiveScheme& scheme,
                                     const DesignerObjective& objective,
                                     const SolveConfig& solve_config);

struct BaselineResult {
  std::vector<std::pair<Vec, double>> evaluations;
  Vec best_theta;
  double best_value = 0.0;
  long long ne_solves = 0;
};

struct GridSpec {
  std::vector<Vec> points;  // explicit points; overrides the axes below
  std::vector<std::pair<double, double>> bounds;
  std::vector<double> step;       // per-dimension spacing
  bool two_stage = false;         // coarse pass, then refine around the best
  std::vector<double> fine_step;  // spacing of the refinement pass
};

// Grid points are independent NE solves; with threads > 1 they run
// concurrently and results stay in point order.
BaselineResult grid_search(const FStarEvaluator& evaluator,
                           const GridSpec& spec, int threads = 1);

// Gaussian-process surrogate (squared-exponential kernel, likelihood-ranked
// length scale on a small grid) with expected improvement; the acquisition
// is maximized by local search from a deterministic start grid.
BaselineResult bayes_opt(const FStarEvaluator& evaluator,
                         const std::vector<std::pair<double, double>>& bounds,
                         int n_init, int n_iter, std::uint64_t seed);

BaselineResult random_search(const FStarEvaluator& evaluator,
                             const std::vector<std::pair<double, double>>& bounds,
                             int n_points, std::uint64_t seed);

// Expected improvement of a candidate under a fitted noiseless GP; exposed
// for tests.
struct GpModel;
struct GpFit {
  std::shared_ptr<GpModel> model;
  double jitter_added = 0.0;
};
GpFit fit_gp(const std::vector<Vec>& xs, const std::vector<double>& ys);
double expected_improvement(const GpFit& fit, const Vec& x, double best_y);

// --- Convergence monitoring ---------------------------------------------------

struct ConvergenceReport {
  std::vector<double> running_min_grad_sq;
  double l_estimate = 0.0;       // max secant slope of the gradient sequence
  double theorem_c = 0.0;        // 2 L (f0 - f_min)
  double fitted_c = 0.0;         // least-squares C in runmin_k ~ C/(k+1)
  double c_used = 0.0;           // max(theorem_c, fitted_c)
  double violation_fraction = 0.0;
  std::vector<std::pair<long long, double>> efficiency_curve;  // (solves, best f)
};

ConvergenceReport convergence_report(const ArbitrationHistory& history);

}  // namespace arbiter

#endif  // ARBITER_ARBITRATION_HPP_
