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

#include "arbiter/arbitration.hpp"

#include <chrono>
#include <cmath>
#include <future>

#include <Eigen/Cholesky>

namespace arbiter {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

ArbitrationHistory da_run(const TabularMarkovGame& game,
                          const IncentiveScheme& scheme,
                          const DesignerObjective& objective, const Vec& theta0,
                          const SolveConfig& solve_config,
                          const StepSchedule& schedule, int iterations,
                          const DaOptions& options) {
  ARB_CHECK(iterations >= 1, "need at least one iteration");
  scheme.require_theta(theta0);

  ArbitrationHistory history;
  long long solves = 0;

  Vec theta = theta0;
  SolveResult solve = nash_solve(game, scheme, theta, solve_config);
  ++solves;
  double f_cur = objective.value(theta, solve.policy);

  for (int k = 0; k <= iterations; ++k) {
    const auto t0 = Clock::now();

    const Vec nu = options.nu_rho0 ? nu_initial(game)
                                   : nu_occupancy(game, solve.policy);
    SensitivitySystem system =
        assemble_system(game, scheme, theta, solve.policy, solve_config.lambda,
                        nu, options.grad_mode, solve.exploitability,
                        solve_config.tol + solve.truncation_slack);
    const Vec grad = designer_gradient(objective, theta, solve.policy, system);

    ArbitrationRecord rec;
    rec.k = k;
    rec.theta = theta;
    rec.f_star = f_cur;
    rec.grad_norm = grad.norm();
    rec.solver_outer_iterations = solve.outer_iterations;
    rec.certificate = solve.exploitability;
    rec.certified = solve.certified;
    rec.gradient_trusted = system.trusted;
    rec.ne_solves_cumulative = solves;
    rec.wall_ms = ms_since(t0);
    history.records.push_back(rec);
    if (k == iterations) break;

    // Untrusted implicit gradients get a halved step.
    double beta = schedule.beta * (system.trusted ? 1.0 : 0.5);
    Vec theta_next = scheme.clamp_theta(theta - beta * grad);
    SolveResult next_solve = nash_solve(game, scheme, theta_next, solve_config,
                                        options.warm_start ? &solve.policy
                                                           : nullptr);
    ++solves;
    for (int retry = 0;
         !next_solve.certified && retry < options.max_solve_retries; ++retry) {
      beta *= 0.5;
      theta_next = scheme.clamp_theta(theta - beta * grad);
      next_solve = nash_solve(game, scheme, theta_next, solve_config,
                              options.warm_start ? &solve.policy : nullptr);
      ++solves;
    }
    double f_next = objective.value(theta_next, next_solve.policy);
    if (schedule.backtracking) {
      for (int h = 0; h < schedule.max_halvings && f_next > f_cur; ++h) {
        beta *= 0.5;
        theta_next = scheme.clamp_theta(theta - beta * grad);
        next_solve = nash_solve(game, scheme, theta_next, solve_config,
                                options.warm_start ? &solve.policy : nullptr);
        ++solves;
        f_next = objective.value(theta_next, next_solve.policy);
      }
    }
    theta = theta_next;
    solve = std::move(next_solve);
    f_cur = f_next;
  }

  history.theta_final = theta;
  history.total_ne_solves = solves;
  return history;
}

FStarEvaluator make_f_star_evaluator(const TabularMarkovGame& game,
                                     const IncentiveScheme& scheme,
                                     const DesignerObjective& objective,
                                     const SolveConfig& solve_config) {
  FStarEvaluator evaluator;
  evaluator.solve_count = std::make_shared<std::atomic<long long>>(0);
  auto count = evaluator.solve_count;
  const TabularMarkovGame* game_ptr = &game;
  const IncentiveScheme* scheme_ptr = &scheme;
  const DesignerObjective* obj_ptr = &objective;
  evaluator.fn = [=](const Vec& theta) {
    SolveResult solve = nash_solve(*game_ptr, *scheme_ptr, theta, solve_config);
    count->fetch_add(1);
    return obj_ptr->value(theta, solve.policy);
  };
  return evaluator;
}

namespace {

std::vector<Vec> axis_grid(const std::vector<std::pair<double, double>>& bounds,
                           const std::vector<double>& step) {
  ARB_CHECK(!bounds.empty() && bounds.size() == step.size(),
            "grid axes need bounds and steps");
  std::vector<std::vector<double>> axes;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    ARB_CHECK(step[i] > 0.0, "grid step must be positive");
    std::vector<double> axis;
    for (double v = bounds[i].first; v <= bounds[i].second + 1e-12;
         v += step[i]) {
      axis.push_back(std::min(v, bounds[i].second));
    }
    axes.push_back(axis);
  }
  std::vector<Vec> points;
  std::vector<std::size_t> idx(bounds.size(), 0);
  while (true) {
    Vec p(bounds.size());
    for (std::size_t i = 0; i < bounds.size(); ++i) p[i] = axes[i][idx[i]];
    points.push_back(p);
    std::size_t i = 0;
    while (i < idx.size() && ++idx[i] == axes[i].size()) {
      idx[i] = 0;
      ++i;
    }
    if (i == idx.size()) break;
  }
  return points;
}

void evaluate_points(const FStarEvaluator& evaluator,
                     const std::vector<Vec>& points, int threads,
                     BaselineResult* out) {
  std::vector<double> values(points.size());
  if (threads <= 1 || points.size() < 2) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      values[i] = evaluator.fn(points[i]);
    }
  } else {
    const int workers = std::min<std::size_t>(threads, points.size());
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      futures.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < points.size(); i += workers) {
          values[i] = evaluator.fn(points[i]);
        }
      }));
    }
    for (auto& f : futures) f.get();
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    out->evaluations.emplace_back(points[i], values[i]);
    if (out->evaluations.size() == 1 || values[i] < out->best_value) {
      out->best_value = values[i];
      out->best_theta = points[i];
    }
  }
}

}  // namespace

BaselineResult grid_search(const FStarEvaluator& evaluator, const GridSpec& spec,
                           int threads) {
  BaselineResult out;
  const long long before = evaluator.solve_count->load();
  if (!spec.points.empty()) {
    evaluate_points(evaluator, spec.points, threads, &out);
  } else {
    evaluate_points(evaluator, axis_grid(spec.bounds, spec.step), threads, &out);
    if (spec.two_stage) {
      ARB_CHECK(spec.fine_step.size() == spec.bounds.size(),
                "fine grid needs a step per dimension");
      std::vector<std::pair<double, double>> fine_bounds(spec.bounds.size());
      for (std::size_t i = 0; i < spec.bounds.size(); ++i) {
        fine_bounds[i] = {
            std::max(spec.bounds[i].first, out.best_theta[i] - spec.step[i]),
            std::min(spec.bounds[i].second, out.best_theta[i] + spec.step[i])};
      }
      evaluate_points(evaluator, axis_grid(fine_bounds, spec.fine_step), threads,
                      &out);
    }
  }
  out.ne_solves = evaluator.solve_count->load() - before;
  return out;
}

// --- Gaussian process surrogate ----------------------------------------------

struct GpModel {
  std::vector<Vec> xs;
  Vec alpha;          // K^{ -1} (y - mean)
  Eigen::LLT<Mat> llt;
  double mean = 0.0;
  double sigma_f2 = 1.0;
  double length = 1.0;
  double noise = 0.0;
};

namespace {

double sq_exp(const Vec& a, const Vec& b, double sigma_f2, double length) {
  return sigma_f2 * std::exp(-(a - b).squaredNorm() / (2.0 * length * length));
}

Mat kernel_matrix(const std::vector<Vec>& xs, double sigma_f2, double length,
                  double noise) {
  const int n = static_cast<int>(xs.size());
  Mat k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      k(i, j) = sq_exp(xs[i], xs[j], sigma_f2, length);
    }
    k(i, i) += noise;
  }
  return k;
}

double log_marginal(const Eigen::LLT<Mat>& llt, const Vec& y_centered) {
  const Vec alpha = llt.solve(y_centered);
  double logdet = 0.0;
  const Mat& l = llt.matrixLLT();
  for (int i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
  return -0.5 * y_centered.dot(alpha) - logdet -
         0.5 * y_centered.size() * std::log(2.0 * M_PI);
}

}  // namespace

GpFit fit_gp(const std::vector<Vec>& xs, const std::vector<double>& ys) {
  ARB_CHECK(xs.size() == ys.size() && xs.size() >= 2, "need paired samples");
  const int n = static_cast<int>(xs.size());
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = ys[i];
  const double mean = y.mean();
  Vec yc = y.array() - mean;
  double sigma_f2 = yc.squaredNorm() / std::max(1, n - 1);
  if (sigma_f2 <= 0.0) sigma_f2 = 1e-12;

  double span = 0.0;
  for (const auto& a : xs) {
    for (const auto& b : xs) span = std::max(span, (a - b).norm());
  }
  if (span <= 0.0) span = 1.0;

  GpFit fit;
  fit.model = std::make_shared<GpModel>();
  double best_ml = -std::numeric_limits<double>::infinity();
  for (double frac : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    const double length = frac * span;
    double noise = 0.0;  // noiseless; jitter only on factorization failure
    double jitter = 0.0;
    Mat k = kernel_matrix(xs, sigma_f2, length, noise);
    Eigen::LLT<Mat> llt(k);
    if (llt.info() != Eigen::Success) {
      jitter = 1e-8 * sigma_f2;
      k = kernel_matrix(xs, sigma_f2, length, noise + jitter);
      llt.compute(k);
      if (llt.info() != Eigen::Success) continue;
    }
    const double ml = log_marginal(llt, yc);
    if (ml > best_ml) {
      best_ml = ml;
      fit.model->xs = xs;
      fit.model->llt = llt;
      fit.model->alpha = llt.solve(yc);
      fit.model->mean = mean;
      fit.model->sigma_f2 = sigma_f2;
      fit.model->length = length;
      fit.model->noise = noise + jitter;
      fit.jitter_added = jitter;
    }
  }
  ARB_CHECK(fit.model->xs.size() == xs.size(), "GP fit failed on all scales");
  return fit;
}

namespace {

void gp_predict(const GpFit& fit, const Vec& x, double* mu, double* var) {
  const GpModel& m = *fit.model;
  const int n = static_cast<int>(m.xs.size());
  Vec k(n);
  for (int i = 0; i < n; ++i) {
    k[i] = sq_exp(m.xs[i], x, m.sigma_f2, m.length);
  }
  *mu = m.mean + k.dot(m.alpha);
  const Vec v = m.llt.solve(k);
  *var = std::max(0.0, m.sigma_f2 - k.dot(v));
}

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double expected_improvement(const GpFit& fit, const Vec& x, double best_y) {
  double mu, var;
  gp_predict(fit, x, &mu, &var);
  const double sigma = std::sqrt(var);
  const double imp = best_y - mu;
  if (sigma < 1e-14) return std::max(0.0, imp);
  const double z = imp / sigma;
  return imp * normal_cdf(z) + sigma * normal_pdf(z);
}

BaselineResult bayes_opt(const FStarEvaluator& evaluator,
                         const std::vector<std::pair<double, double>>& bounds,
                         int n_init, int n_iter, std::uint64_t seed) {
  ARB_CHECK(n_init >= 2, "need at least two initial points");
  const int dim = static_cast<int>(bounds.size());
  BaselineResult out;
  const long long before = evaluator.solve_count->load();

  RngStream rng(seed);
  std::vector<Vec> init;
  for (int i = 0; i < n_init; ++i) {
    Vec p(dim);
    for (int d = 0; d < dim; ++d) {
      p[d] = bounds[d].first +
             rng.next_double() * (bounds[d].second - bounds[d].first);
    }
    init.push_back(p);
  }
  evaluate_points(evaluator, init, 1, &out);

  for (int it = 0; it < n_iter; ++it) {
    std::vector<Vec> xs;
    std::vector<double> ys;
    for (const auto& [x, y] : out.evaluations) {
      xs.push_back(x);
      ys.push_back(y);
    }
    GpFit fit = fit_gp(xs, ys);

    // Deterministic multi-start local search over the acquisition.
    const int per_dim = dim == 1 ? 33 : 9;
    std::vector<double> axis_step(dim);
    for (int d = 0; d < dim; ++d) {
      axis_step[d] = (bounds[d].second - bounds[d].first) / (per_dim - 1);
      axis_step[d] = std::max(axis_step[d], 1e-12);
    }
    std::vector<Vec> starts = axis_grid(
        std::vector<std::pair<double, double>>(bounds.begin(), bounds.end()),
        axis_step);

    Vec best_x = starts.front();
    double best_ei = -1.0;
    for (const Vec& s : starts) {
      const double ei = expected_improvement(fit, s, out.best_value);
      if (ei > best_ei) {
        best_ei = ei;
        best_x = s;
      }
    }
    // local refinement with shrinking coordinate steps
    std::vector<double> local(dim);
    for (int d = 0; d < dim; ++d) local[d] = axis_step[d];
    for (int round = 0; round < 40; ++round) {
      bool moved = false;
      for (int d = 0; d < dim; ++d) {
        for (double dir : {-1.0, 1.0}) {
          Vec cand = best_x;
          cand[d] = std::clamp(cand[d] + dir * local[d], bounds[d].first,
                               bounds[d].second);
          const double ei = expected_improvement(fit, cand, out.best_value);
          if (ei > best_ei) {
            best_ei = ei;
            best_x = cand;
            moved = true;
          }
        }
      }
      if (!moved) {
        bool done = true;
        for (int d = 0; d < dim; ++d) {
          local[d] *= 0.5;
          if (local[d] > 1e-7 * (bounds[d].second - bounds[d].first)) {
            done = false;
          }
        }
        if (done) break;
      }
    }
    evaluate_points(evaluator, {best_x}, 1, &out);
  }
  out.ne_solves = evaluator.solve_count->load() - before;
  return out;
}

BaselineResult random_search(const FStarEvaluator& evaluator,
                             const std::vector<std::pair<double, double>>& bounds,
                             int n_points, std::uint64_t seed) {
  ARB_CHECK(n_points >= 1, "need at least one point");
  RngStream rng(seed);
  std::vector<Vec> points;
  for (int i = 0; i < n_points; ++i) {
    Vec p(bounds.size());
    for (std::size_t d = 0; d < bounds.size(); ++d) {
      p[d] = bounds[d].first +
             rng.next_double() * (bounds[d].second - bounds[d].first);
    }
    points.push_back(p);
  }
  BaselineResult out;
  const long long before = evaluator.solve_count->load();
  evaluate_points(evaluator, points, 1, &out);
  out.ne_solves = evaluator.solve_count->load() - before;
  return out;
}

ConvergenceReport convergence_report(const ArbitrationHistory& history) {
  ARB_CHECK(!history.records.empty(), "history must be non-empty");
  ConvergenceReport report;
  const auto& recs = history.records;

  double run_min = std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    run_min = std::min(run_min, r.grad_norm * r.grad_norm);
    report.running_min_grad_sq.push_back(run_min);
  }

  double l_est = 0.0;
  for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
    const double dtheta = (recs[k + 1].theta - recs[k].theta).norm();
    if (dtheta > 1e-12) {
      l_est = std::max(l_est,
                       std::abs(recs[k + 1].grad_norm - recs[k].grad_norm) /
                           dtheta);
    }
  }
  report.l_estimate = l_est;

  double f0 = recs.front().f_star;
  double f_min = f0;
  for (const auto& r : recs) f_min = std::min(f_min, r.f_star);
  report.theorem_c = 2.0 * l_est * (f0 - f_min);

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const double w = 1.0 / (k + 1.0);
    num += report.running_min_grad_sq[k] * w;
    den += w * w;
  }
  report.fitted_c = den > 0.0 ? num / den : 0.0;
  report.c_used = std::max(report.theorem_c, report.fitted_c);

  int violations = 0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (report.running_min_grad_sq[k] >
        report.c_used / (k + 1.0) * (1.0 + 1e-9)) {
      ++violations;
    }
  }
  report.violation_fraction =
      static_cast<double>(violations) / static_cast<double>(recs.size());

  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    best = std::min(best, r.f_star);
    report.efficiency_curve.emplace_back(r.ne_solves_cumulative, best);
  }
  return report;
}

}  // namespace arbiter
