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

#include "arbiter/json_io.hpp"

#include <fstream>

#include "arbiter/grad_engine.hpp"
#include "arbiter/matrix_solvers.hpp"

namespace arbiter {

using nlohmann::json;

namespace {

std::vector<double> dense_tensor(const json& t, int S, int A1, int A2,
                                 const char* what) {
  ARB_CHECK(t.is_array() && static_cast<int>(t.size()) == S, what);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(S) * A1 * A2);
  for (const auto& per_s : t) {
    ARB_CHECK(static_cast<int>(per_s.size()) == A1, what);
    for (const auto& per_a1 : per_s) {
      ARB_CHECK(static_cast<int>(per_a1.size()) == A2, what);
      for (const auto& v : per_a1) out.push_back(v.get<double>());
    }
  }
  return out;
}

json tensor_to_json(const std::vector<double>& t, int S, int A1, int A2) {
  json out = json::array();
  for (int s = 0; s < S; ++s) {
    json per_s = json::array();
    for (int a1 = 0; a1 < A1; ++a1) {
      json per_a1 = json::array();
      for (int a2 = 0; a2 < A2; ++a2) {
        per_a1.push_back(t[(s * A1 + a1) * A2 + a2]);
      }
      per_s.push_back(per_a1);
    }
    out.push_back(per_s);
  }
  return out;
}

}  // namespace

std::pair<TabularMarkovGame, IncentiveScheme> game_from_json(const json& doc) {
  const int S = doc.at("states").get<int>();
  const auto actions = doc.at("actions");
  ARB_CHECK(actions.size() == 2, "actions must be [n1, n2]");
  const int A1 = actions[0].get<int>();
  const int A2 = actions[1].get<int>();
  const double gamma = doc.at("gamma").get<double>();
  const int horizon = doc.at("horizon").get<int>();

  Vec rho0(S);
  const auto& rho = doc.at("rho0");
  ARB_CHECK(static_cast<int>(rho.size()) == S, "rho0 size");
  for (int s = 0; s < S; ++s) rho0[s] = rho[s].get<double>();

  const auto& tr = doc.at("transition");
  ARB_CHECK(static_cast<int>(tr.size()) == S, "transition size");
  std::vector<TransitionRow> transition(static_cast<std::size_t>(S) * A1 * A2);
  for (int s = 0; s < S; ++s) {
    ARB_CHECK(static_cast<int>(tr[s].size()) == A1, "transition size");
    for (int a1 = 0; a1 < A1; ++a1) {
      ARB_CHECK(static_cast<int>(tr[s][a1].size()) == A2, "transition size");
      for (int a2 = 0; a2 < A2; ++a2) {
        const auto& row = tr[s][a1][a2];
        ARB_CHECK(static_cast<int>(row.size()) == S, "transition row size");
        TransitionRow& dst = transition[(s * A1 + a1) * A2 + a2];
        for (int ns = 0; ns < S; ++ns) {
          const double p = row[ns].get<double>();
          if (p != 0.0) dst.entries.emplace_back(ns, p);
        }
      }
    }
  }

  std::vector<double> base_reward =
      dense_tensor(doc.at("base_reward"), S, A1, A2, "base_reward");

  std::vector<std::uint8_t> terminal;
  if (doc.contains("terminal")) {
    for (const auto& v : doc.at("terminal")) {
      terminal.push_back(v.get<int>() != 0 ? 1 : 0);
    }
  }

  TabularMarkovGame game(S, A1, A2, std::move(transition),
                         std::move(base_reward), gamma, horizon,
                         std::move(rho0), std::move(terminal));

  std::vector<std::vector<double>> features;
  if (doc.contains("features")) {
    for (const auto& f : doc.at("features")) {
      features.push_back(dense_tensor(f, S, A1, A2, "feature"));
    }
  }
  std::vector<std::pair<double, double>> bounds;
  if (doc.contains("theta_bounds")) {
    for (const auto& b : doc.at("theta_bounds")) {
      ARB_CHECK(b.size() == 2, "theta bound must be [lo, hi]");
      bounds.emplace_back(b[0].get<double>(), b[1].get<double>());
    }
  }
  ARB_CHECK(features.size() == bounds.size(),
            "features and theta_bounds must pair up");
  const double reward_bound = doc.value("reward_bound", 2.0);
  IncentiveScheme scheme(S, A1, A2, std::move(features), std::move(bounds),
                         reward_bound);
  scheme.validate_bound(game);
  return {std::move(game), std::move(scheme)};
}

json game_to_json(const TabularMarkovGame& game, const IncentiveScheme& scheme) {
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  json doc;
  doc["states"] = S;
  doc["actions"] = {A1, A2};
  doc["gamma"] = game.gamma();
  doc["horizon"] = game.horizon();
  json rho = json::array();
  for (int s = 0; s < S; ++s) rho.push_back(game.rho0()[s]);
  doc["rho0"] = rho;

  json tr = json::array();
  for (int s = 0; s < S; ++s) {
    json per_s = json::array();
    for (int a1 = 0; a1 < A1; ++a1) {
      json per_a1 = json::array();
      for (int a2 = 0; a2 < A2; ++a2) {
        std::vector<double> row(S, 0.0);
        for (const auto& [ns, p] : game.next(s, a1, a2).entries) row[ns] = p;
        per_a1.push_back(row);
      }
      per_s.push_back(per_a1);
    }
    tr.push_back(per_s);
  }
  doc["transition"] = tr;

  std::vector<double> base(static_cast<std::size_t>(S) * A1 * A2);
  for (int s = 0; s < S; ++s) {
    for (int a1 = 0; a1 < A1; ++a1) {
      for (int a2 = 0; a2 < A2; ++a2) {
        base[(s * A1 + a1) * A2 + a2] = game.base_reward(s, a1, a2);
      }
    }
  }
  doc["base_reward"] = tensor_to_json(base, S, A1, A2);

  json feats = json::array();
  for (int j = 0; j < scheme.n_params(); ++j) {
    feats.push_back(tensor_to_json(scheme.feature_tensor(j), S, A1, A2));
  }
  doc["features"] = feats;
  json bounds = json::array();
  for (const auto& [lo, hi] : scheme.theta_bounds()) {
    bounds.push_back({lo, hi});
  }
  doc["theta_bounds"] = bounds;

  json term = json::array();
  bool any_terminal = false;
  for (int s = 0; s < S; ++s) {
    term.push_back(game.is_terminal(s) ? 1 : 0);
    any_terminal = any_terminal || game.is_terminal(s);
  }
  if (any_terminal) doc["terminal"] = term;
  doc["reward_bound"] = scheme.reward_bound();
  return doc;
}

std::pair<TabularMarkovGame, IncentiveScheme> load_game_file(
    const std::string& path) {
  return game_from_json(read_json_file(path));
}

void save_game_file(const std::string& path, const TabularMarkovGame& game,
                    const IncentiveScheme& scheme) {
  write_json_file(path, game_to_json(game, scheme));
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  json doc;
  in >> doc;
  return doc;
}

void write_json_file(const std::string& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

json matrix_diagnostics_to_json(const MatrixSolveDiagnostics& diag) {
  return json{{"iterations", diag.iterations},
              {"converged", diag.converged},
              {"final_gap", diag.final_gap},
              {"gap_trace", diag.gap_trace}};
}

namespace {

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

json bundle_to_json(const ValueGradBundle& bundle) {
  json doc;
  doc["grad_theta"] = vector_json(bundle.grad_theta);
  doc["grad_phi"] = vector_json(bundle.grad_phi);
  doc["hess_theta_phi"] = matrix_json(bundle.hess_theta_phi);
  doc["hess_phi_phi"] = matrix_json(bundle.hess_phi_phi);
  if (bundle.se_grad_phi.size() > 0) {
    doc["se_grad_theta"] = vector_json(bundle.se_grad_theta);
    doc["se_grad_phi"] = vector_json(bundle.se_grad_phi);
    doc["se_hess_theta_phi"] = matrix_json(bundle.se_hess_theta_phi);
    doc["se_hess_phi_phi"] = matrix_json(bundle.se_hess_phi_phi);
  }
  return doc;
}

}  // namespace arbiter
