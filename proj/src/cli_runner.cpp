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

#include "arbiter/cli_runner.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "arbiter/json_io.hpp"

namespace arbiter::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string history_csv_header(int n_theta) {
  std::string h = "schema,method,k";
  for (int i = 0; i < n_theta; ++i) h += ",theta_" + std::to_string(i);
  h += ",f_star,grad_norm,solves_cum";
  return h;
}

namespace {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const json& arr) {
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json solve_result_to_json(const SolveResult& result, double lambda) {
  json doc;
  doc["method"] = result.method == MgMethod::kPem ? "pem" : "er_omwu";
  doc["lambda"] = lambda;
  json pi1 = json::array(), pi2 = json::array();
  for (const auto& p : result.pi1) pi1.push_back(vec_to_json(p));
  for (const auto& p : result.pi2) pi2.push_back(vec_to_json(p));
  doc["pi1"] = pi1;
  doc["pi2"] = pi2;
  doc["value"] = vec_to_json(result.value);
  json q = json::array();
  for (const auto& qs : result.q) q.push_back(mat_to_json(qs));
  doc["q"] = q;
  doc["exploitability"] = result.exploitability;
  doc["exploitability_infinite"] = result.exploitability_infinite;
  doc["truncation_slack"] = result.truncation_slack;
  doc["certified"] = result.certified;
  doc["outer_iterations"] = result.outer_iterations;
  doc["inner_iterations"] = result.inner_iterations;
  doc["bellman_residual"] = result.bellman_residual;
  doc["gap_trace"] = result.gap_trace;
  return doc;
}

struct ResolvedRun {
  json config;
  fs::path out_dir;
  BuiltEnvironment env;
  SolveConfig solve;
};

ResolvedRun prepare(const RunOptions& options) {
  json raw = read_json_file(options.config_path);
  if (options.seed) raw["seed"] = *options.seed;
  if (!options.out_dir.empty()) raw["out"] = options.out_dir;
  json resolved = resolve_config(raw);

  ResolvedRun run{resolved, fs::path(resolved.at("out").get<std::string>()),
                  build_environment_from_config(resolved), SolveConfig{}};
  run.solve = solve_config_from_json(resolved, run.env.lambda);
  fs::create_directories(run.out_dir);
  write_json_file((run.out_dir / "config.resolved.json").string(), resolved);
  return run;
}

Vec theta_from_config(const json& resolved, const BuiltEnvironment& env) {
  if (resolved.contains("theta0") && !resolved["theta0"].is_null()) {
    return vec_from_json(resolved["theta0"]);
  }
  return env.theta0;
}

// --- gradcheck helpers -------------------------------------------------------

struct CheckRecord {
  std::string block;
  int player;
  std::string coord;
  double analytic;
  double fd;
  double rel_error;
};

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

void check_block(const std::string& name, int player, const Vec& analytic,
                 const Vec& fd, std::vector<CheckRecord>* records,
                 double* worst) {
  for (int i = 0; i < analytic.size(); ++i) {
    CheckRecord rec{name, player, std::to_string(i), analytic[i], fd[i],
                    rel_err(analytic[i], fd[i])};
    *worst = std::max(*worst, rec.rel_error);
    records->push_back(rec);
  }
}

void check_block(const std::string& name, int player, const Mat& analytic,
                 const Mat& fd, std::vector<CheckRecord>* records,
                 double* worst) {
  for (int r = 0; r < analytic.rows(); ++r) {
    for (int c = 0; c < analytic.cols(); ++c) {
      CheckRecord rec{name, player,
                      std::to_string(r) + "," + std::to_string(c),
                      analytic(r, c), fd(r, c),
                      rel_err(analytic(r, c), fd(r, c))};
      *worst = std::max(*worst, rec.rel_error);
      records->push_back(rec);
    }
  }
}

}  // namespace

json resolve_config(const json& raw) {
  json out;
  out["schema_version"] = kHistorySchemaVersion;
  out["env"] = raw.value("env", json{{"kind", "synthetic"}});
  if (!out["env"].contains("kind")) out["env"]["kind"] = "synthetic";
  out["seed"] = raw.value("seed", std::uint64_t{0});
  out["out"] = raw.value("out", std::string("run"));
  out["method"] = raw.value("method", std::string("da"));
  out["iterations"] = raw.value("iterations", 20);

  json solver = raw.value("solver", json::object());
  solver["method"] = solver.value("method", std::string("er_omwu"));
  if (!solver.contains("lambda")) solver["lambda"] = nullptr;
  solver["eta"] = solver.value("eta", 0.0);
  solver["eta_scale"] = solver.value("eta_scale", 1.0);
  solver["tol"] = solver.value("tol", 1e-8);
  solver["max_outer"] = solver.value("max_outer", 500000);
  solver["check_every"] = solver.value("check_every", 25);
  solver["inner_method"] = solver.value("inner_method", std::string("pu"));
  solver["inner_tol_factor"] = solver.value("inner_tol_factor", 0.1);
  out["solver"] = solver;

  json step = raw.value("step", json::object());
  step["beta"] = step.value("beta", 0.5);
  step["backtracking"] = step.value("backtracking", true);
  step["max_halvings"] = step.value("max_halvings", 12);
  out["step"] = step;

  json da = raw.value("da", json::object());
  da["warm_start"] = da.value("warm_start", true);
  da["nu"] = da.value("nu", std::string("occupancy"));
  da["grad_mode"] = da.value("grad_mode", std::string("exact"));
  da["mc_traj"] = da.value("mc_traj", 20000);
  out["da"] = da;

  json grid = raw.value("grid", json::object());
  if (!grid.contains("step")) grid["step"] = json::array();
  grid["two_stage"] = grid.value("two_stage", false);
  if (!grid.contains("fine_step")) grid["fine_step"] = json::array();
  if (!grid.contains("points")) grid["points"] = json::array();
  out["grid"] = grid;

  json bayes = raw.value("bayes", json::object());
  bayes["n_init"] = bayes.value("n_init", 4);
  bayes["n_iter"] = bayes.value("n_iter", 12);
  out["bayes"] = bayes;

  out["random_points"] = raw.value("random_points", 20);
  if (raw.contains("theta0")) out["theta0"] = raw["theta0"];
  return out;
}

BuiltEnvironment build_environment_from_config(const json& resolved) {
  const json& env = resolved.at("env");
  const std::string kind = env.at("kind").get<std::string>();
  if (kind == "synthetic") {
    SyntheticConfig cfg;
    cfg.p_target = env.value("p_target", cfg.p_target);
    cfg.reg_coeff = env.value("reg_coeff", cfg.reg_coeff);
    cfg.lambda = env.value("lambda", cfg.lambda);
    cfg.gamma = env.value("gamma", cfg.gamma);
    cfg.horizon = env.value("horizon", cfg.horizon);
    cfg.theta_lo = env.value("theta_lo", cfg.theta_lo);
    cfg.theta_hi = env.value("theta_hi", cfg.theta_hi);
    return build_synthetic_environment(cfg);
  }
  if (kind == "twostate") {
    return build_twostate_environment(env.value("horizon", 3));
  }
  if (kind == "rws") {
    const std::string preset = env.value("preset", std::string("lite"));
    RwsConfig cfg =
        preset == "canonical" ? rws_canonical_config() : rws_lite_config();
    cfg.horizon = env.value("horizon", cfg.horizon);
    cfg.gamma = env.value("gamma", cfg.gamma);
    ExplorationObjectiveSpec spec;
    spec.exact = env.value("exact_objective", true);
    spec.budget = env.value("budget", spec.budget);
    spec.seed = env.value("objective_seed", spec.seed);
    spec.union_semantics = env.value("union_semantics", true);
    return build_rws_environment(cfg, spec);
  }
  if (kind == "pp") {
    const std::string preset = env.value("preset", std::string("lite"));
    PpConfig cfg = preset == "pursuit" ? pp_pursuit_config() : pp_lite_config();
    cfg.horizon = env.value("horizon", cfg.horizon);
    cfg.gamma = env.value("gamma", cfg.gamma);
    ExplorationObjectiveSpec spec;
    spec.exact = false;
    spec.budget = env.value("budget", spec.budget);
    spec.seed = env.value("objective_seed", spec.seed);
    spec.union_semantics = env.value("union_semantics", true);
    return build_pp_environment(cfg, spec);
  }
  if (kind == "game_json") {
    auto [game, scheme] = load_game_file(env.at("path").get<std::string>());
    BuiltEnvironment built;
    built.game = std::make_shared<TabularMarkovGame>(std::move(game));
    built.scheme = std::make_shared<IncentiveScheme>(std::move(scheme));
    const json obj = env.value("objective", json::object());
    built.objective = make_policy_target_objective(
        *built.game, obj.value("state", 0), obj.value("action", 0),
        obj.value("p_target", 0.6), obj.value("reg_coeff", 0.05));
    built.lambda = env.value("lambda", 0.2);
    built.theta0 = Vec::Zero(built.scheme->n_params());
    built.kind = kind;
    return built;
  }
  throw InvalidArgument("unknown env kind: " + kind);
}

SolveConfig solve_config_from_json(const json& resolved, double default_lambda) {
  const json& solver = resolved.at("solver");
  SolveConfig cfg;
  cfg.method = solver.at("method").get<std::string>() == "pem"
                   ? MgMethod::kPem
                   : MgMethod::kErOmwu;
  cfg.lambda = solver.at("lambda").is_null()
                   ? default_lambda
                   : solver.at("lambda").get<double>();
  cfg.eta = solver.at("eta").get<double>();
  cfg.eta_scale = solver.at("eta_scale").get<double>();
  cfg.tol = solver.at("tol").get<double>();
  cfg.max_outer = solver.at("max_outer").get<int>();
  cfg.check_every = solver.at("check_every").get<int>();
  cfg.inner_method = solver.at("inner_method").get<std::string>() == "omwu"
                         ? MatrixSolveMethod::kOmwu
                         : MatrixSolveMethod::kPu;
  cfg.inner_tol_factor = solver.at("inner_tol_factor").get<double>();
  cfg.seed = resolved.at("seed").get<std::uint64_t>();
  return cfg;
}

int run_solve(const RunOptions& options) {
  ResolvedRun run = prepare(options);
  const Vec theta = theta_from_config(run.config, run.env);
  SolveResult result =
      nash_solve(*run.env.game, *run.env.scheme, theta, run.solve);
  const double unregularized =
      exploitability(*run.env.game, *run.env.scheme, theta, result.policy, 0.0);
  nlohmann::json doc = solve_result_to_json(result, run.solve.lambda);
  doc["unregularized_exploitability"] = unregularized;
  write_json_file((run.out_dir / "ne.json").string(), doc);
  std::cout << "exploitability certificate: "
            << format_double(result.exploitability) << " (tol "
            << format_double(run.solve.tol) << ", truncation slack "
            << format_double(result.truncation_slack) << ")\n"
            << "unregularized exploitability: " << format_double(unregularized)
            << "\n"
            << "certified: " << (result.certified ? "yes" : "no")
            << "  outer iterations: " << result.outer_iterations
            << "  wall ms: " << result.wall_ms << "\n";
  return result.certified ? 0 : 1;
}

int run_gradcheck(const RunOptions& options) {
  ResolvedRun run = prepare(options);
  const TabularMarkovGame& game = *run.env.game;
  const IncentiveScheme& scheme = *run.env.scheme;
  const double lambda = run.solve.lambda;
  const PolicyParamLayout layout(game);

  // A mildly tilted policy/theta point exercises every term.
  SoftmaxPolicyPair policy = SoftmaxPolicyPair::uniform(game);
  RngStream rng(run.config.at("seed").get<std::uint64_t>() + 17);
  for (int s = 0; s < game.n_states(); ++s) {
    if (game.is_terminal(s)) continue;
    for (int a = 0; a + 1 < game.n_actions_1(); ++a) {
      policy.set_logit(1, s, a, 0.6 * (rng.next_double() - 0.5));
    }
    for (int a = 0; a + 1 < game.n_actions_2(); ++a) {
      policy.set_logit(2, s, a, 0.6 * (rng.next_double() - 0.5));
    }
  }
  Vec theta = Vec::Zero(scheme.n_params());
  for (int j = 0; j < theta.size(); ++j) {
    const auto [lo, hi] = scheme.theta_bounds()[j];
    theta[j] = lo + 0.37 * (hi - lo);
  }

  std::vector<CheckRecord> records;
  double worst = 0.0;
  const double threshold = 1e-6;

  const int probe_state = 0;
  for (int player = 1; player <= 2; ++player) {
    // score vs FD of log pi in the logits
    const Vec phi0 = policy.to_phi(layout);
    const Vec score = policy_score(policy, layout, player, probe_state, 0);
    Vec full_score = Vec::Zero(layout.d());
    full_score.segment(layout.player_offset(player), layout.d_player(player)) =
        score;
    const Vec fd_logp = finite_difference(
        [&](const Vec& phi) {
          SoftmaxPolicyPair p = policy;
          p.set_phi(layout, phi);
          return p.log_probs(player, probe_state)[0];
        },
        phi0, 1e-6);
    check_block("policy_score", player,
                Vec(full_score.segment(layout.player_offset(player),
                                       layout.d_player(player))),
                Vec(fd_logp.segment(layout.player_offset(player),
                                    layout.d_player(player))),
                &records, &worst);
  }

  // value-gradient bundles against FD of the exact value evaluation, over
  // the first two decision states
  json bundle_dump = json::object();
  int checked_states = 0;
  for (int s0 = 0; s0 < game.n_states() && checked_states < 2; ++s0) {
    if (game.is_terminal(s0)) continue;
    ++checked_states;
    PlayerBundles bundles =
        value_grads_exact(game, scheme, theta, policy, lambda, s0);
    bundle_dump["s" + std::to_string(s0)] = {
        {"player1", bundle_to_json(bundles.p1)},
        {"player2", bundle_to_json(bundles.p2)}};
    if (options.corrupt_gradcheck) {
      bundles.p1.hess_phi_phi(0, 0) += 1e-3;  // negative-control hook
    }
    for (int player = 1; player <= 2; ++player) {
      const ValueGradBundle& b = player == 1 ? bundles.p1 : bundles.p2;
      if (scheme.n_params() > 0) {
        const Vec fd_theta = finite_difference(
            [&](const Vec& t) {
              return evaluate_value(game, scheme, t, policy, lambda, player)[s0];
            },
            theta, 1e-5);
        check_block("grad_theta[s" + std::to_string(s0) + "]", player,
                    b.grad_theta, fd_theta, &records, &worst);
      }
      const Vec phi0 = policy.to_phi(layout);
      const Vec fd_phi = finite_difference(
          [&](const Vec& phi) {
            SoftmaxPolicyPair p = policy;
            p.set_phi(layout, phi);
            return evaluate_value(game, scheme, theta, p, lambda, player)[s0];
          },
          phi0, 1e-5);
      check_block("grad_phi[s" + std::to_string(s0) + "]", player, b.grad_phi,
                  Vec(fd_phi.segment(layout.player_offset(player),
                                     layout.d_player(player))),
                  &records, &worst);

      // Hessian blocks against FD of the analytic gradients.
      if (scheme.n_params() > 0) {
        Mat fd_htp(scheme.n_params(), layout.d_player(player));
        for (int j = 0; j < scheme.n_params(); ++j) {
          const Vec fd_row = finite_difference(
              [&](const Vec& phi) {
                SoftmaxPolicyPair p = policy;
                p.set_phi(layout, phi);
                PlayerBundles bb =
                    value_grads_exact(game, scheme, theta, p, lambda, s0);
                const ValueGradBundle& pb = player == 1 ? bb.p1 : bb.p2;
                return pb.grad_theta[j];
              },
              phi0, 1e-5);
          fd_htp.row(j) = fd_row
                              .segment(layout.player_offset(player),
                                       layout.d_player(player))
                              .transpose();
        }
        check_block("hess_theta_phi[s" + std::to_string(s0) + "]", player,
                    b.hess_theta_phi, fd_htp, &records, &worst);
      }
      Mat fd_hpp(layout.d(), layout.d_player(player));
      for (int c = 0; c < layout.d_player(player); ++c) {
        // column c: derivative of grad_phi[c] w.r.t. all of phi
        const Vec fd_col = finite_difference(
            [&](const Vec& phi) {
              SoftmaxPolicyPair p = policy;
              p.set_phi(layout, phi);
              PlayerBundles bb =
                  value_grads_exact(game, scheme, theta, p, lambda, s0);
              const ValueGradBundle& pb = player == 1 ? bb.p1 : bb.p2;
              return pb.grad_phi[c];
            },
            phi0, 1e-5);
        fd_hpp.col(c) = fd_col;
      }
      check_block("hess_phi_phi[s" + std::to_string(s0) + "]", player,
                  b.hess_phi_phi, fd_hpp, &records, &worst);
    }
  }

  const double obj_err = run.env.objective.fd_self_check(
      game, theta, policy);
  CheckRecord obj_rec{"objective_self_check", 0, "-", obj_err, 0.0, obj_err};
  records.push_back(obj_rec);
  worst = std::max(worst, obj_err);

  json doc;
  doc["threshold"] = threshold;
  doc["worst_rel_error"] = worst;
  doc["pass"] = worst <= threshold;
  if (scheme.n_params() == 0) {
    doc["note"] = "no incentive parameters; theta blocks skipped";
  }
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back({{"block", r.block},
                    {"player", r.player},
                    {"coord", r.coord},
                    {"analytic", r.analytic},
                    {"finite_difference", r.fd},
                    {"rel_error", r.rel_error}});
  }
  doc["records"] = recs;
  doc["bundles"] = bundle_dump;
  write_json_file((run.out_dir / "gradcheck.json").string(), doc);
  std::cout << "gradcheck worst relative error: " << format_double(worst)
            << (worst <= threshold ? " (pass)" : " (FAIL)") << "\n";
  if (worst > threshold) {
    for (const auto& r : records) {
      if (r.rel_error > threshold) {
        std::cout << "  offending: " << r.block << " player " << r.player
                  << " coord " << r.coord << " rel " << format_double(r.rel_error)
                  << "\n";
      }
    }
    return 1;
  }
  return 0;
}

namespace {

void write_history_csv(const fs::path& path, const std::string& method,
                       int n_theta,
                       const std::vector<ArbitrationRecord>& records) {
  std::ostringstream os;
  os << history_csv_header(n_theta) << "\n";
  for (const auto& r : records) {
    os << kHistorySchemaVersion << "," << method << "," << r.k;
    for (int i = 0; i < n_theta; ++i) os << "," << format_double(r.theta[i]);
    os << "," << format_double(r.f_star) << "," << format_double(r.grad_norm)
       << "," << r.ne_solves_cumulative << "\n";
  }
  write_text_file(path.string(), os.str());
}

void write_plotdata(const fs::path& dir, const std::string& method,
                    const std::vector<std::pair<long long, double>>& curve) {
  fs::create_directories(dir);
  std::ostringstream os;
  os << "# arbiter plotdata schema " << kHistorySchemaVersion << "\n";
  os << "solves_cum,f_star\n";
  for (const auto& [solves, f] : curve) {
    os << solves << "," << format_double(f) << "\n";
  }
  write_text_file((dir / (method + ".csv")).string(), os.str());
}

std::vector<ArbitrationRecord> baseline_records(const BaselineResult& result) {
  std::vector<ArbitrationRecord> records;
  long long solves = 0;
  for (std::size_t i = 0; i < result.evaluations.size(); ++i) {
    ArbitrationRecord rec;
    rec.k = static_cast<int>(i);
    rec.theta = result.evaluations[i].first;
    rec.f_star = result.evaluations[i].second;
    rec.grad_norm = 0.0;
    rec.ne_solves_cumulative = ++solves;
    records.push_back(rec);
  }
  return records;
}

std::vector<std::pair<long long, double>> baseline_curve(
    const std::vector<ArbitrationRecord>& records) {
  std::vector<std::pair<long long, double>> curve;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    best = std::min(best, r.f_star);
    curve.emplace_back(r.ne_solves_cumulative, best);
  }
  return curve;
}

}  // namespace

int run_arbitrate(const RunOptions& options) {
  ResolvedRun run = prepare(options);
  const std::string method = run.config.at("method").get<std::string>();
  const Vec theta0 = theta_from_config(run.config, run.env);
  const int n_theta = run.env.scheme->n_params();
  const auto& bounds = run.env.scheme->theta_bounds();

  json summary;
  summary["method"] = method;

  if (method == "da") {
    StepSchedule schedule;
    schedule.beta = run.config.at("step").at("beta").get<double>();
    schedule.backtracking = run.config.at("step").at("backtracking").get<bool>();
    schedule.max_halvings = run.config.at("step").at("max_halvings").get<int>();
    DaOptions da;
    da.warm_start = run.config.at("da").at("warm_start").get<bool>();
    da.nu_rho0 = run.config.at("da").at("nu").get<std::string>() == "rho0";
    if (run.config.at("da").at("grad_mode").get<std::string>() == "mc") {
      da.grad_mode.kind = GradModeSpec::Kind::kMonteCarlo;
      da.grad_mode.n_traj = run.config.at("da").at("mc_traj").get<int>();
      da.grad_mode.seed = run.config.at("seed").get<std::uint64_t>();
    }
    ArbitrationHistory history =
        da_run(*run.env.game, *run.env.scheme, run.env.objective, theta0,
               run.solve, schedule, run.config.at("iterations").get<int>(), da);
    ConvergenceReport report = convergence_report(history);

    write_history_csv(run.out_dir / "history.csv", "da", n_theta,
                      history.records);
    write_plotdata(run.out_dir / "plotdata", "da", report.efficiency_curve);

    json hist = json::array();
    for (const auto& r : history.records) {
      hist.push_back({{"k", r.k},
                      {"theta", vec_to_json(r.theta)},
                      {"f_star", r.f_star},
                      {"grad_norm", r.grad_norm},
                      {"certificate", r.certificate},
                      {"certified", r.certified},
                      {"gradient_trusted", r.gradient_trusted},
                      {"solver_outer_iterations", r.solver_outer_iterations},
                      {"solves_cum", r.ne_solves_cumulative}});
    }
    summary["history"] = hist;
    summary["theta_final"] = vec_to_json(history.theta_final);
    summary["total_ne_solves"] = history.total_ne_solves;
    summary["convergence"] = {
        {"l_estimate", report.l_estimate},
        {"theorem_c", report.theorem_c},
        {"fitted_c", report.fitted_c},
        {"c_used", report.c_used},
        {"violation_fraction", report.violation_fraction},
        {"running_min_grad_sq", report.running_min_grad_sq}};
    write_json_file((run.out_dir / "history.json").string(), summary);
    const bool descended =
        history.records.back().f_star <= history.records.front().f_star + 1e-12;
    std::cout << "da final f*: "
              << format_double(history.records.back().f_star)
              << " after " << history.total_ne_solves << " NE solves\n";
    return descended ? 0 : 1;
  }

  BaselineResult result;
  if (method == "grid") {
    GridSpec spec;
    const json& grid = run.config.at("grid");
    for (const auto& p : grid.at("points")) spec.points.push_back(vec_from_json(p));
    if (spec.points.empty()) {
      for (const auto& [lo, hi] : bounds) spec.bounds.emplace_back(lo, hi);
      for (const auto& s : grid.at("step")) spec.step.push_back(s.get<double>());
      ARB_CHECK(spec.step.size() == spec.bounds.size(),
                "grid.step must have one entry per theta coordinate");
      spec.two_stage = grid.at("two_stage").get<bool>();
      for (const auto& s : grid.at("fine_step")) {
        spec.fine_step.push_back(s.get<double>());
      }
    }
    FStarEvaluator evaluator = make_f_star_evaluator(
        *run.env.game, *run.env.scheme, run.env.objective, run.solve);
    result = grid_search(evaluator, spec, options.threads);
  } else if (method == "bayes") {
    std::vector<std::pair<double, double>> b(bounds.begin(), bounds.end());
    FStarEvaluator evaluator = make_f_star_evaluator(
        *run.env.game, *run.env.scheme, run.env.objective, run.solve);
    result = bayes_opt(evaluator, b, run.config.at("bayes").at("n_init").get<int>(),
                       run.config.at("bayes").at("n_iter").get<int>(),
                       run.config.at("seed").get<std::uint64_t>());
  } else if (method == "random") {
    std::vector<std::pair<double, double>> b(bounds.begin(), bounds.end());
    FStarEvaluator evaluator = make_f_star_evaluator(
        *run.env.game, *run.env.scheme, run.env.objective, run.solve);
    result = random_search(evaluator, b,
                           run.config.at("random_points").get<int>(),
                           run.config.at("seed").get<std::uint64_t>());
  } else {
    throw InvalidArgument("unknown method: " + method);
  }

  const auto records = baseline_records(result);
  write_history_csv(run.out_dir / "history.csv", method, n_theta, records);
  write_plotdata(run.out_dir / "plotdata", method, baseline_curve(records));
  summary["best_theta"] = vec_to_json(result.best_theta);
  summary["best_f_star"] = result.best_value;
  summary["ne_solves"] = result.ne_solves;
  json evals = json::array();
  for (const auto& [t, f] : result.evaluations) {
    evals.push_back({{"theta", vec_to_json(t)}, {"f_star", f}});
  }
  summary["evaluations"] = evals;
  write_json_file((run.out_dir / "history.json").string(), summary);
  std::cout << method << " best f*: " << format_double(result.best_value)
            << " at theta " << result.best_theta.transpose() << " ("
            << result.ne_solves << " NE solves)\n";
  return 0;
}

int run_env_export(const RunOptions& options) {
  ResolvedRun run = prepare(options);
  save_game_file((run.out_dir / "game.json").string(), *run.env.game,
                 *run.env.scheme);
  std::cout << "exported " << run.env.kind << " game ("
            << run.env.game->n_states() << " states) to "
            << (run.out_dir / "game.json").string() << "\n";
  return 0;
}

}  // namespace arbiter::cli
